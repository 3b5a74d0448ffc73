"""Anholonomic frames on coordinate charts.

A frame field assigns to every chart point ``q`` an invertible transition
matrix ``A(q)`` whose columns express the frame vectors in the coordinate
basis, so coordinate velocities and quasi-velocities are related by
``qdot = A(q) v``.  The bracket-coefficient field ``gamma(q)`` carries the
commutators of the frame fields,

    [e_b, e_c] = gamma[a, b, c](q) e_a,

and is tied to A by the first-derivative identity implemented in
:func:`bracket_coefficients_fd`.  Frames of the built-in systems are
left-invariant, so their gamma is constant and equals the algebra's
structure constants.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, NumericalError

CONDITION_LIMIT = 1e12
FD_STEP = 1e-6


@dataclass(frozen=True)
class FrameField:
    """Chart-dependent frame: q -> A(q), optionally q -> gamma(q).

    ``vectorized`` declares that ``A`` (and ``gamma`` if present) accept a
    stacked array of chart points with shape (..., dim) and return stacked
    matrices; evaluators must be pure functions of q.
    """

    dim: int
    A: callable
    gamma: callable = None
    chart_hint: str = ""
    vectorized: bool = False

    def matrix(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        A = np.asarray(self.A(q), dtype=float)
        if A.shape != (self.dim, self.dim):
            raise ContractError(f"A(q) must be {self.dim}x{self.dim}, got {A.shape}")
        if not np.all(np.isfinite(A)):
            raise NumericalError(f"non-finite transition matrix at q={q.tolist()}")
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > CONDITION_LIMIT:
            raise NumericalError(f"singular transition matrix at q={q.tolist()} "
                                 f"(condition number {cond:.3e})")
        return A


@dataclass(frozen=True)
class StatePoint:
    """Chart point plus quasi-velocity coordinates in the frame basis."""

    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if q.ndim != 1 or q.shape != v.shape:
            raise ContractError("q and v must be 1-D arrays of equal length")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "v", v)


def _check_state(frame: FrameField, s: StatePoint):
    if s.q.shape != (frame.dim,):
        raise ContractError(f"state has dimension {s.q.shape[0]}, frame expects {frame.dim}")


def push_velocity(frame: FrameField, s: StatePoint) -> np.ndarray:
    """Coordinate velocity qdot = A(q) v of a state."""
    _check_state(frame, s)
    return frame.matrix(s.q) @ s.v


def bracket_coefficients_fd(frame: FrameField, q) -> np.ndarray:
    """Bracket coefficients gamma(q) recovered from A alone.

    Solves A[s,a] gamma[a,b,c] = A[d,b] dA[s,c]/dq^d - A[d,c] dA[s,b]/dq^d
    with central finite differences in q and one linear solve.
    """
    q = np.asarray(q, dtype=float)
    n = frame.dim
    A = frame.matrix(q)
    dA = np.empty((n, n, n))  # dA[d, s, c] = d A[s, c] / d q^d
    for d in range(n):
        h = FD_STEP * (1.0 + abs(q[d]))
        qp = q.copy()
        qm = q.copy()
        qp[d] += h
        qm[d] -= h
        dA[d] = (np.asarray(frame.A(qp), dtype=float)
                 - np.asarray(frame.A(qm), dtype=float)) / (2.0 * h)
    t = np.einsum("db,dsc->sbc", A, dA)
    rhs = t - t.swapaxes(1, 2)
    gamma = np.linalg.solve(A, rhs.reshape(n, n * n)).reshape(n, n, n)
    return gamma


def frame_consistency_residual(frame: FrameField, q) -> float:
    """Max-abs mismatch between the supplied gamma and its FD reconstruction."""
    if frame.gamma is None:
        raise ContractError("frame carries no analytic gamma to check")
    q = np.asarray(q, dtype=float)
    supplied = np.asarray(frame.gamma(q), dtype=float)
    if supplied.shape != (frame.dim,) * 3:
        raise ContractError("gamma(q) has the wrong shape")
    return float(np.max(np.abs(supplied - bracket_coefficients_fd(frame, q))))


def variation_lift(frame: FrameField, s: StatePoint, w, wdot):
    """Coordinate form of the admissible variation generated by w.

    Returns (delta_q, delta_v) with delta_q = A(q) w and
    delta_v[d] = wdot[d] + gamma[d, a, b](q) v[a] w[b].
    """
    _check_state(frame, s)
    w = np.asarray(w, dtype=float)
    wdot = np.asarray(wdot, dtype=float)
    if w.shape != (frame.dim,) or wdot.shape != (frame.dim,):
        raise ContractError("generator coordinates must have the frame dimension")
    if frame.gamma is not None:
        g = np.asarray(frame.gamma(s.q), dtype=float)
    else:
        g = bracket_coefficients_fd(frame, s.q)
    delta_q = frame.matrix(s.q) @ w
    delta_v = wdot + np.einsum("dab,a,b->d", g, s.v, w)
    return delta_q, delta_v


def identity_frame(dim: int) -> FrameField:
    """Coordinate frame: A = I, gamma = 0."""
    eye = np.eye(dim)
    zero = np.zeros((dim, dim, dim))

    def A(q):
        q = np.asarray(q, dtype=float)
        return np.broadcast_to(eye, q.shape[:-1] + (dim, dim)).copy()

    def gamma(q):
        q = np.asarray(q, dtype=float)
        return np.broadcast_to(zero, q.shape[:-1] + (dim, dim, dim)).copy()

    return FrameField(dim=dim, A=A, gamma=gamma, chart_hint="global coordinates",
                      vectorized=True)
