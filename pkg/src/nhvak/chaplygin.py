"""Geometric tensors of the constrained splitting.

With the constraint subspace d playing the role of the horizontal
distribution and its complement d' the vertical one, the curvature R and the
non-invariance tensor B are the d'-parts of brackets of horizontal vectors
with horizontal and vertical ones respectively; BL and FL are the horizontal
and vertical derivatives of the Lagrangian restricted to the constraints.

Production values contract the algebra's structure constants exactly.  The
frame realization of the same quantities (built from the frame's bracket
coefficients and the chart differential of L) is kept as an independent
path and compared in :func:`chaplygin_cross_check`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lagrangian as lag
from .dynamics import SystemSpec
from .errors import ContractError
from .lie import bracket

_IN_SPACE_TOL = 1e-12


@dataclass(frozen=True)
class ChaplyginData:
    """System plus its curvature and non-invariance tensors.

    ``R(q, X, Y)`` and ``B(q, X, b)`` return d'-coordinates; they default to
    the exact structure-constant realization of the system's algebra.
    """

    sys: SystemSpec
    R: callable = None
    B: callable = None

    def __post_init__(self):
        if self.R is None:
            object.__setattr__(self, "R", lambda q, X, Y: _lie_curvature(self.sys, X, Y))
        if self.B is None:
            object.__setattr__(self, "B", lambda q, X, b: _lie_b_tensor(self.sys, X, b))


def _as_d_vector(sys: SystemSpec, X) -> np.ndarray:
    """Accept d-coordinates or a full algebra vector lying in d."""
    X = np.asarray(X, dtype=float)
    split = sys.splitting
    if X.shape == (split.k,):
        return X
    if X.shape == (sys.dim,):
        off = np.max(np.abs(split.Pprime @ X))
        if off > _IN_SPACE_TOL * (1.0 + np.max(np.abs(X))):
            raise ContractError(f"vector is not in d (d'-component {off:.3e})")
        return split.coords_d(X)
    raise ContractError(f"expected {split.k} d-coordinates or a full algebra vector")


def _as_dprime_vector(sys: SystemSpec, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    split = sys.splitting
    m = sys.dim - split.k
    if b.shape == (m,):
        return b
    if b.shape == (sys.dim,):
        off = np.max(np.abs(split.P @ b))
        if off > _IN_SPACE_TOL * (1.0 + np.max(np.abs(b))):
            raise ContractError(f"vector is not in d' (d-component {off:.3e})")
        return split.coords_dprime(b)
    raise ContractError(f"expected {m} d'-coordinates or a full algebra vector")


def _lie_curvature(sys: SystemSpec, Xd, Yd) -> np.ndarray:
    split = sys.splitting
    br = bracket(sys.algebra, split.embed_d(Xd), split.embed_d(Yd))
    return split.coords_dprime(br)


def _lie_b_tensor(sys: SystemSpec, Xd, bp) -> np.ndarray:
    split = sys.splitting
    br = bracket(sys.algebra, split.embed_d(Xd), split.embed_dprime(bp))
    return split.coords_dprime(br)


def curvature(cd: ChaplyginData, q, X, Y) -> np.ndarray:
    """d'-part of the bracket of two horizontal directions."""
    Xd = _as_d_vector(cd.sys, X)
    Yd = _as_d_vector(cd.sys, Y)
    return np.asarray(cd.R(q, Xd, Yd), dtype=float)


def b_tensor(cd: ChaplyginData, q, X, b) -> np.ndarray:
    """d'-part of the bracket of a horizontal and a vertical direction."""
    Xd = _as_d_vector(cd.sys, X)
    bp = _as_dprime_vector(cd.sys, b)
    return np.asarray(cd.B(q, Xd, bp), dtype=float)


def fl_derivative(cd: ChaplyginData, q, X) -> np.ndarray:
    """Vertical derivative of L on the constraints: dL/dv paired with d'."""
    sys = cd.sys
    Xd = _as_d_vector(sys, X)
    v = sys.splitting.embed_d(Xd)
    Lv = lag.d_dv(sys.lagrangian, np.asarray(q, dtype=float), v)
    return Lv @ sys.splitting.dprime_basis


def bl_derivative(cd: ChaplyginData, q, X) -> np.ndarray:
    """Horizontal derivative of L on the constraints, as a d'-covector.

    Component j is the chart derivative of L along the frame field of the
    j-th d'-basis vector plus the pairing of dL/dv with the d-part of the
    bracket of the state with that vector.
    """
    sys = cd.sys
    q = np.asarray(q, dtype=float)
    Xd = _as_d_vector(sys, X)
    split = sys.splitting
    eta = split.embed_d(Xd)
    Lv = lag.d_dv(sys.lagrangian, q, eta)
    out = np.empty(sys.dim - split.k)
    for j in range(out.size):
        bj = split.dprime_basis[:, j]
        br = bracket(sys.algebra, eta, bj)
        out[j] = lag.pullback_dh(sys.lagrangian, sys.frame, q, eta, bj) + Lv @ (split.P @ br)
    return out


def vak_variation_ode_rhs(cd: ChaplyginData, q, X, Y, b) -> np.ndarray:
    """Right-hand side of the transport equation for the vertical generator part.

    bdot = -B(q)(X, b) - R(q)(X, Y); a generator with horizontal part Y and
    vertical part b obeying this equation lifts to a variation tangent to
    the constraints.
    """
    Xd = _as_d_vector(cd.sys, X)
    Yd = _as_d_vector(cd.sys, Y)
    bp = _as_dprime_vector(cd.sys, b)
    return -(np.asarray(cd.B(q, Xd, bp), dtype=float)
             + np.asarray(cd.R(q, Xd, Yd), dtype=float))


def _frame_bracket(sys: SystemSpec, q, x, y) -> np.ndarray:
    """Bracket via the frame's coefficient field instead of the algebra."""
    if sys.frame.gamma is not None:
        g = np.asarray(sys.frame.gamma(np.asarray(q, dtype=float)), dtype=float)
    else:
        from .frame import bracket_coefficients_fd
        g = bracket_coefficients_fd(sys.frame, q)
    return np.einsum("abd,b,d->a", g, x, y)


def chaplygin_cross_check(cd: ChaplyginData, q, trials: int, seed: int = 0) -> float:
    """Max discrepancy between the frame and structure-constant realizations.

    Draws random horizontal pairs (X, Y) and vertical directions b and
    compares R, B, FL and BL computed through the frame's coefficient field
    and chart differentials against their algebra-side counterparts built
    from brackets and the coadjoint pairing.  Requires d' to be closed under
    the bracket.
    """
    sys = cd.sys
    split = sys.splitting
    q = np.asarray(q, dtype=float)
    m = sys.dim - split.k
    for i in range(m):
        for j in range(i + 1, m):
            br = bracket(sys.algebra, split.dprime_basis[:, i], split.dprime_basis[:, j])
            if np.max(np.abs(split.P @ br)) > 1e-12:
                raise ContractError(
                    f"d' is not closed under the bracket: basis pair ({i}, {j}) "
                    f"has a d-component")
    rng = np.random.default_rng(seed)
    worst = 0.0
    L = sys.lagrangian
    for _ in range(trials):
        Xd = rng.uniform(-1.0, 1.0, split.k)
        Yd = rng.uniform(-1.0, 1.0, split.k)
        bp = rng.uniform(-1.0, 1.0, m)
        eta = split.embed_d(Xd)
        yv = split.embed_d(Yd)
        bv = split.embed_dprime(bp)
        # curvature and non-invariance via frame coefficients
        R_frame = split.coords_dprime(_frame_bracket(sys, q, eta, yv))
        B_frame = split.coords_dprime(_frame_bracket(sys, q, eta, bv))
        worst = max(worst, float(np.max(np.abs(R_frame - cd.R(q, Xd, Yd)))))
        worst = max(worst, float(np.max(np.abs(B_frame - cd.B(q, Xd, bp)))))
        # vertical derivative: chart pairing against the algebra-side restriction
        Lv = lag.d_dv(L, q, eta)
        fl_frame = Lv @ split.dprime_basis
        worst = max(worst, float(np.max(np.abs(fl_frame - fl_derivative(cd, q, Xd)))))
        # horizontal derivative: frame bracket in place of the algebra bracket
        bl_frame = np.empty(m)
        for j in range(m):
            bj = split.dprime_basis[:, j]
            br = _frame_bracket(sys, q, eta, bj)
            bl_frame[j] = (lag.pullback_dh(L, sys.frame, q, eta, bj)
                           + Lv @ (split.P @ br))
        worst = max(worst, float(np.max(np.abs(bl_frame - bl_derivative(cd, q, Xd)))))
    return worst
