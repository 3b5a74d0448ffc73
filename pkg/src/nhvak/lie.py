"""Finite-dimensional Lie algebra arithmetic.

Vectors and covectors are plain 1-D float arrays of length ``dim``; vectors
hold coordinates in the algebra basis ``{e_a}``, covectors in the dual basis.
Structure constants are stored densely as a rank-3 array ``c`` with the
convention

    [e_b, e_d] = sum_a c[a, b, d] e_a,

so ``c`` is antisymmetric in its two lower (trailing) indices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NumericalError

JACOBI_TOL = 1e-12
CONDITION_LIMIT = 1e12


def _readonly(a):
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LieAlgebraSpec:
    """Structure constants plus labels of a finite-dimensional Lie algebra."""

    dim: int
    basis_labels: tuple
    c: np.ndarray

    def __post_init__(self):
        if self.dim <= 0:
            raise ContractError("algebra dimension must be positive")
        if len(self.basis_labels) != self.dim:
            raise ContractError("basis_labels length must equal dim")
        object.__setattr__(self, "basis_labels", tuple(self.basis_labels))
        c = _readonly(self.c)
        if c.shape != (self.dim,) * 3:
            raise ContractError(f"structure constants must have shape {(self.dim,)*3}")
        object.__setattr__(self, "c", c)
        if not np.array_equal(c, -c.swapaxes(1, 2)):
            raise ContractError("structure constants are not antisymmetric in the lower indices")
        res = jacobi_residual(self)
        if res > JACOBI_TOL:
            raise ContractError(f"Jacobi identity violated (residual {res:.3e})")

    def check_vector(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ContractError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        return x


def algebra_from_entries(dim: int, basis_labels, entries) -> LieAlgebraSpec:
    """Build an algebra from sparse (a, b, d, value) structure-constant entries.

    Antisymmetry in the lower indices is completed automatically; entries
    that contradict each other (or a diagonal b = d with nonzero value) are
    rejected.
    """
    c = np.zeros((dim, dim, dim))
    seen = np.zeros((dim, dim, dim), dtype=bool)
    for entry in entries:
        if len(entry) != 4:
            raise ContractError(f"structure-constant entry {entry!r} is not (a, b, d, value)")
        a, b, d = (int(x) for x in entry[:3])
        val = float(entry[3])
        if not (0 <= a < dim and 0 <= b < dim and 0 <= d < dim):
            raise ContractError(f"structure-constant indices out of range in {entry!r}")
        if b == d and val != 0.0:
            raise ContractError(f"entry {entry!r} violates antisymmetry ([e_b, e_b] = 0)")
        for (i, j, v) in ((b, d, val), (d, b, -val)):
            if seen[a, i, j] and c[a, i, j] != v:
                raise ContractError(f"conflicting structure-constant entries at "
                                    f"(a={a}, b={i}, d={j})")
            c[a, i, j] = v
            seen[a, i, j] = True
    return LieAlgebraSpec(dim=dim, basis_labels=tuple(basis_labels), c=c)


def bracket(alg: LieAlgebraSpec, x, y) -> np.ndarray:
    """Lie bracket [x, y] via the structure constants."""
    x = alg.check_vector(x)
    y = alg.check_vector(y)
    return np.einsum("abd,b,d->a", alg.c, x, y)


def ad_star(alg: LieAlgebraSpec, eta, phi) -> np.ndarray:
    """Coadjoint action: <ad_star(eta, phi), y> = <phi, [eta, y]> for all y."""
    eta = alg.check_vector(eta)
    phi = alg.check_vector(phi)
    return np.einsum("abd,a,b->d", alg.c, phi, eta)


def jacobi_residual(alg: LieAlgebraSpec) -> float:
    """Max-abs of the cyclic bracket sum over all basis triples."""
    c = alg.c
    # [e_b, [e_c, e_d]] has coefficients sum_m c[a, b, m] c[m, c, d]
    t = np.einsum("abm,mcd->abcd", c, c)
    cyc = t + t.transpose(0, 2, 3, 1) + t.transpose(0, 3, 1, 2)
    return float(np.max(np.abs(cyc))) if cyc.size else 0.0


@dataclass(frozen=True)
class ConstraintSplitting:
    """A direct-sum splitting h = d (+) d' with its two projections.

    ``d_basis`` and ``dprime_basis`` store basis vectors as matrix columns.
    ``dual`` holds the dual basis of the combined basis as rows; rows k..n-1
    span the annihilator of d and serve as the coordinate functionals on d'.
    """

    d_basis: np.ndarray
    dprime_basis: np.ndarray
    P: np.ndarray = field(default=None)
    Pprime: np.ndarray = field(default=None)
    dual: np.ndarray = field(default=None)

    @classmethod
    def from_bases(cls, d_basis, dprime_basis) -> "ConstraintSplitting":
        D = np.atleast_2d(np.asarray(d_basis, dtype=float))
        Dp = np.atleast_2d(np.asarray(dprime_basis, dtype=float))
        if D.ndim != 2 or Dp.ndim != 2 or D.shape[0] != Dp.shape[0]:
            raise ContractError("basis matrices must share the algebra dimension as row count")
        n = D.shape[0]
        k = D.shape[1]
        if k + Dp.shape[1] != n:
            raise ContractError("d and d' bases together must span the algebra")
        U = np.hstack([D, Dp])
        cond = np.linalg.cond(U)
        if not np.isfinite(cond) or cond > CONDITION_LIMIT:
            raise NumericalError(f"combined basis is degenerate (condition number {cond:.3e})")
        dual = np.linalg.inv(U)
        P = U[:, :k] @ dual[:k]
        Pprime = U[:, k:] @ dual[k:]
        return cls(_readonly(D), _readonly(Dp), _readonly(P), _readonly(Pprime), _readonly(dual))

    def __post_init__(self):
        if self.P is None or self.Pprime is None or self.dual is None:
            raise ContractError("use ConstraintSplitting.from_bases to construct splittings")

    @property
    def dim(self) -> int:
        return self.d_basis.shape[0]

    @property
    def k(self) -> int:
        """Dimension of the constraint subspace d."""
        return self.d_basis.shape[1]

    def embed_d(self, xd) -> np.ndarray:
        """Algebra vector with the given d-coordinates."""
        return self.d_basis @ np.asarray(xd, dtype=float)

    def embed_dprime(self, xp) -> np.ndarray:
        return self.dprime_basis @ np.asarray(xp, dtype=float)

    def coords_d(self, x) -> np.ndarray:
        """d-coordinates of P(x)."""
        return self.dual[: self.k] @ np.asarray(x, dtype=float)

    def coords_dprime(self, x) -> np.ndarray:
        """d'-coordinates of P'(x)."""
        return self.dual[self.k:] @ np.asarray(x, dtype=float)

    def ann_covector(self, mu) -> np.ndarray:
        """Covector in Ann(d) with the given d'* coordinates."""
        return self.dual[self.k:].T @ np.asarray(mu, dtype=float)


def project(split: ConstraintSplitting, x):
    """Split a vector into its d and d' components (which sum back to x)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (split.dim,):
        raise ContractError(f"expected a vector of length {split.dim}, got shape {x.shape}")
    return split.P @ x, split.Pprime @ x


def change_complement(split: ConstraintSplitting, deltaP) -> ConstraintSplitting:
    """Replace d' by {b + deltaP(b)} for a d-valued map deltaP vanishing on d.

    The constraint subspace d is kept identical; projections are recomputed.
    """
    deltaP = np.asarray(deltaP, dtype=float)
    n = split.dim
    if deltaP.shape != (n, n):
        raise ContractError(f"deltaP must be a {n}x{n} matrix")
    if np.max(np.abs(deltaP @ split.d_basis)) > 1e-12:
        raise ContractError("deltaP must vanish on d")
    if np.max(np.abs(split.Pprime @ deltaP)) > 1e-12:
        raise ContractError("deltaP must take values in d")
    new_dprime = split.dprime_basis + deltaP @ split.dprime_basis
    return ConstraintSplitting.from_bases(split.d_basis, new_dprime)
