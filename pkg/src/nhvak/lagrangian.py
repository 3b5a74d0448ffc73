"""Lagrangians expressed in quasi-velocity coordinates.

Every Lagrangian in this package is a function L(q, v) of chart coordinates
and quasi-velocities in the frame basis; conversion from coordinate-velocity
form is the caller's job (see :func:`nhvak.frame.push_velocity`).  Partial
derivatives use analytic callables when supplied and central finite
differences otherwise.  Optional second-partial callables exist so that the
flows of the built-in systems can be solved at machine precision; the FD
fallback remains the default and the test oracle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .frame import FrameField

FD_STEP = 1e-6        # first derivatives
FD_STEP_SECOND = 1e-4  # differencing a (possibly FD) first derivative
_SPOT_CHECK_TOL = 1e-6
_SPOT_CHECK_SEED = 20260810


@dataclass(frozen=True)
class LagrangianSpec:
    """Evaluator L(q, v) with optional analytic partials.

    ``d_dq`` and ``d_dv`` return covectors in the chart-coordinate and frame
    dual bases respectively; ``d2_dvdv`` returns the velocity Hessian and
    ``d2_dvdq`` the mixed matrix d(dL/dv_i)/dq_j.  ``vectorized`` declares
    that all callables broadcast over stacked (..., dim) inputs.
    """

    dim: int
    eval: callable
    d_dq: callable = None
    d_dv: callable = None
    d2_dvdv: callable = None
    d2_dvdq: callable = None
    time_independent: bool = True
    vectorized: bool = False
    spot_check: bool = True

    def __post_init__(self):
        if self.dim <= 0:
            raise ContractError("Lagrangian dimension must be positive")
        if self.spot_check and (self.d_dq is not None or self.d_dv is not None):
            rng = np.random.default_rng(_SPOT_CHECK_SEED)
            for _ in range(5):
                q = rng.uniform(-1.0, 1.0, self.dim)
                v = rng.uniform(-1.0, 1.0, self.dim)
                dev = fd_gradient_check(self, q, v)
                if dev > _SPOT_CHECK_TOL:
                    raise ContractError(
                        f"analytic partials disagree with finite differences "
                        f"(relative deviation {dev:.3e} at a random spot check)")


def _central_fd(f, x, scale_of):
    """Central finite-difference gradient of scalar f at x."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = FD_STEP * (1.0 + abs(scale_of[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def d_dv(L: LagrangianSpec, q, v) -> np.ndarray:
    """dL/dv at (q, v), a covector in the frame dual basis."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if L.d_dv is not None:
        return np.asarray(L.d_dv(q, v), dtype=float)
    return _central_fd(lambda vv: L.eval(q, vv), v, v)


def d_dq(L: LagrangianSpec, q, v) -> np.ndarray:
    """dL/dq at (q, v), a covector in the chart-coordinate dual basis."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if L.d_dq is not None:
        return np.asarray(L.d_dq(q, v), dtype=float)
    return _central_fd(lambda qq: L.eval(qq, v), q, q)


def velocity_hessian(L: LagrangianSpec, q, v) -> np.ndarray:
    """d2L/dv2 as a symmetric matrix (the velocity-space mass matrix)."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if L.d2_dvdv is not None:
        return np.asarray(L.d2_dvdv(q, v), dtype=float)
    n = L.dim
    M = np.empty((n, n))
    for j in range(n):
        h = FD_STEP_SECOND * (1.0 + abs(v[j]))
        vp = v.copy()
        vm = v.copy()
        vp[j] += h
        vm[j] -= h
        M[:, j] = (d_dv(L, q, vp) - d_dv(L, q, vm)) / (2.0 * h)
    return 0.5 * (M + M.T)


def mixed_hessian(L: LagrangianSpec, q, v) -> np.ndarray:
    """Matrix C with C[i, j] = d(dL/dv_i)/dq_j."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if L.d2_dvdq is not None:
        return np.asarray(L.d2_dvdq(q, v), dtype=float)
    n = L.dim
    C = np.empty((n, n))
    for j in range(n):
        h = FD_STEP_SECOND * (1.0 + abs(q[j]))
        qp = q.copy()
        qm = q.copy()
        qp[j] += h
        qm[j] -= h
        C[:, j] = (d_dv(L, qp, v) - d_dv(L, qm, v)) / (2.0 * h)
    return C


def pullback_dh(L: LagrangianSpec, frame: FrameField, q, v, b) -> float:
    """Directional derivative of L(., v) along the frame field of b at q.

    For a left-invariant frame this is the pairing of the group-direction
    differential of L with the algebra vector b; it vanishes identically
    when L is invariant.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (L.dim,):
        raise ContractError("b must be an algebra vector of the Lagrangian's dimension")
    return float(d_dq(L, q, v) @ (frame.matrix(np.asarray(q, dtype=float)) @ b))


def fd_gradient_check(L: LagrangianSpec, q, v) -> float:
    """Max relative deviation between analytic and FD first partials."""
    if L.d_dq is None and L.d_dv is None:
        raise ContractError("no analytic partials to check")
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    worst = 0.0
    if L.d_dv is not None:
        ana = np.asarray(L.d_dv(q, v), dtype=float)
        num = _central_fd(lambda vv: L.eval(q, vv), v, v)
        worst = max(worst, float(np.max(np.abs(ana - num) / (1.0 + np.abs(ana)))))
    if L.d_dq is not None:
        ana = np.asarray(L.d_dq(q, v), dtype=float)
        num = _central_fd(lambda qq: L.eval(qq, v), q, q)
        worst = max(worst, float(np.max(np.abs(ana - num) / (1.0 + np.abs(ana)))))
    return worst
