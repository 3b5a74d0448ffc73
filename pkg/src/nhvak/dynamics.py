"""Equations of motion, integrators and multiplier transport.

The central object is the Euler-Lagrange covector in quasi-velocities,

    psi_d = A[e,d] dL/dq_e + gamma[e,f,d] v_f dL/dv_e - d/dt(dL/dv_d),

whose total time derivative is expanded with qdot = A(q) v and a supplied
vdot.  A curve respecting the constraints is a nonholonomic trajectory iff
psi annihilates the constraint subspace d, and a vakonomic trajectory with
multiplier lam(t) in Ann(d) iff the same covector built from the modified
Lagrangian L - <lam(t), v> vanishes on the whole algebra.

Integration is fixed-step classical RK4 on (q, v_d); only d-coordinates of
the velocity are evolved, so constraints hold by representation.  A compiled
kernel (nhvak._speedup) is selected at import time for systems with constant
mass matrix and bracket coefficients; the pure-Python path below is the
fallback and the reference for everything else.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from . import lagrangian as lag
from .errors import ContractError, DivergenceError, RegularityError
from .frame import FrameField
from .lagrangian import LagrangianSpec
from .lie import ConstraintSplitting, LieAlgebraSpec

try:
    from . import _speedup
except ImportError:  # extension not built; pure-Python integrator takes over
    _speedup = None

BACKEND = "python" if _speedup is None or os.environ.get("NHVAK_PURE_PYTHON") else "compiled"

CONDITION_LIMIT = 1e12

# frame codes understood by the fast kernels
FRAME_IDENTITY = 0
FRAME_PLANAR = 1      # rotation by q[2] acting on the first two coordinates
FRAME_HEISENBERG = 2  # qdot_z = q_y v_0 - q_x v_1 + v_2


@dataclass(frozen=True)
class FastSystemData:
    """Constant-coefficient data consumed by the compiled integrator."""

    frame_code: int
    mass: np.ndarray       # full velocity Hessian, constant
    c: np.ndarray          # bracket coefficients, constant
    d_basis: np.ndarray
    mass_dd_inv: np.ndarray


@dataclass(frozen=True)
class SystemSpec:
    """A constrained system: algebra, splitting, frame and Lagrangian."""

    name: str
    algebra: LieAlgebraSpec
    splitting: ConstraintSplitting
    frame: FrameField
    lagrangian: LagrangianSpec
    params: dict
    fast: FastSystemData = None

    def __post_init__(self):
        n = self.algebra.dim
        if self.frame.dim != n or self.lagrangian.dim != n or self.splitting.dim != n:
            raise ContractError("algebra, splitting, frame and Lagrangian dimensions disagree")
        object.__setattr__(self, "params", dict(self.params))

    @property
    def dim(self) -> int:
        return self.algebra.dim

    @property
    def k(self) -> int:
        return self.splitting.k


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled constrained trajectory.

    ``vd`` holds the evolved d-coordinates; ``v`` the reconstructed
    quasi-velocities ``d_basis @ vd``, so the d'-part of v vanishes by
    representation.
    """

    t: np.ndarray
    q: np.ndarray
    v: np.ndarray
    vd: np.ndarray
    step: float

    def __len__(self):
        return self.t.shape[0]


@dataclass(frozen=True)
class MultiplierPath:
    """Multiplier curve lam(t) in Ann(d), stored as d'* coordinates."""

    t: np.ndarray
    lam: np.ndarray  # (N, dim - k)

    def covectors(self, splitting: ConstraintSplitting) -> np.ndarray:
        """Materialize lam(t) as full covectors in the algebra dual basis."""
        return self.lam @ splitting.dual[splitting.k:]


def _gamma_at(sys: SystemSpec, q) -> np.ndarray:
    if sys.frame.gamma is not None:
        return np.asarray(sys.frame.gamma(q), dtype=float)
    from .frame import bracket_coefficients_fd
    return bracket_coefficients_fd(sys.frame, q)


def el_covector(sys: SystemSpec, q, v, vdot) -> np.ndarray:
    """Euler-Lagrange covector of L at (q, v) with the given acceleration."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    vdot = np.asarray(vdot, dtype=float)
    n = sys.dim
    if q.shape != (n,) or v.shape != (n,) or vdot.shape != (n,):
        raise ContractError("q, v, vdot must all have the system dimension")
    A = sys.frame.matrix(q)
    L = sys.lagrangian
    Lq = lag.d_dq(L, q, v)
    Lv = lag.d_dv(L, q, v)
    g = _gamma_at(sys, q)
    M = lag.velocity_hessian(L, q, v)
    C = lag.mixed_hessian(L, q, v)
    dt_Lv = C @ (A @ v) + M @ vdot
    return A.T @ Lq + np.einsum("efd,f,e->d", g, v, Lv) - dt_Lv


def _reduced_mass(sys: SystemSpec, q, v) -> np.ndarray:
    D = sys.splitting.d_basis
    M = lag.velocity_hessian(sys.lagrangian, q, v)
    return D.T @ M @ D


def nh_accel(sys: SystemSpec, q, vd) -> np.ndarray:
    """d-coordinates of the acceleration of the nonholonomic flow.

    Solves for vdot in span(d) such that the Euler-Lagrange covector
    annihilates every d-basis vector.
    """
    q = np.asarray(q, dtype=float)
    vd = np.asarray(vd, dtype=float)
    split = sys.splitting
    if vd.shape != (split.k,):
        raise ContractError(f"expected {split.k} d-coordinates, got shape {vd.shape}")
    v = split.embed_d(vd)
    D = split.d_basis
    L = sys.lagrangian
    A = sys.frame.matrix(q)
    Lq = lag.d_dq(L, q, v)
    Lv = lag.d_dv(L, q, v)
    g = _gamma_at(sys, q)
    C = lag.mixed_hessian(L, q, v)
    Mdd = _reduced_mass(sys, q, v)
    if not np.all(np.isfinite(Mdd)):
        raise DivergenceError(f"non-finite mass matrix of '{sys.name}' at q={q.tolist()}")
    cond = np.linalg.cond(Mdd)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise RegularityError(
            f"regularity failure: reduced mass matrix of system '{sys.name}' is "
            f"singular or ill-conditioned at q={q.tolist()} (condition number {cond:.3e})")
    rhs = D.T @ (A.T @ Lq + np.einsum("efd,f,e->d", g, v, Lv) - C @ (A @ v))
    return np.linalg.solve(Mdd, rhs)


def _nh_rhs(sys: SystemSpec, q, vd):
    acc = nh_accel(sys, q, vd)
    qdot = sys.frame.matrix(q) @ sys.splitting.embed_d(vd)
    return qdot, acc


def _steps_for(T: float, h: float) -> int:
    if h <= 0:
        raise ContractError("step size must be positive")
    if T < 0:
        raise ContractError("horizon must be nonnegative")
    return int(round(T / h))


def _integrate_nh_python(sys: SystemSpec, q0, vd0, T, h):
    n_steps = _steps_for(T, h)
    n, k = sys.dim, sys.k
    q = np.empty((n_steps + 1, n))
    vd = np.empty((n_steps + 1, k))
    q[0] = q0
    vd[0] = vd0

    def stage(qs, vs, t):
        if not (np.all(np.isfinite(qs)) and np.all(np.isfinite(vs))):
            raise DivergenceError(f"integration of '{sys.name}' diverged at t={t:.6g}",
                                  time=t)
        return _nh_rhs(sys, qs, vs)

    for i in range(n_steps):
        qi, vi = q[i], vd[i]
        t = i * h
        try:
            k1q, k1v = stage(qi, vi, t)
            k2q, k2v = stage(qi + 0.5 * h * k1q, vi + 0.5 * h * k1v, t + 0.5 * h)
            k3q, k3v = stage(qi + 0.5 * h * k2q, vi + 0.5 * h * k2v, t + 0.5 * h)
            k4q, k4v = stage(qi + h * k3q, vi + h * k3v, t + h)
        except DivergenceError as exc:
            raise DivergenceError(f"integration of '{sys.name}' diverged at t={t:.6g} "
                                  f"({exc})", time=t) from exc
        q[i + 1] = qi + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        vd[i + 1] = vi + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not (np.all(np.isfinite(q[i + 1])) and np.all(np.isfinite(vd[i + 1]))):
            raise DivergenceError(f"integration of '{sys.name}' diverged at t={(i + 1) * h:.6g}",
                                  time=(i + 1) * h)
    return q, vd


def integrate_nonholonomic(sys: SystemSpec, q0, vd0, T: float, h: float,
                           force_python: bool = False) -> Trajectory:
    """Integrate the nonholonomic flow with classical RK4 at fixed step h.

    Samples are stored at every step.  The compiled kernel is used when the
    system carries constant-coefficient fast data and the extension is
    available; set ``force_python`` (or NHVAK_PURE_PYTHON=1) to pin the
    pure-Python path.
    """
    q0 = np.asarray(q0, dtype=float)
    vd0 = np.asarray(vd0, dtype=float)
    if q0.shape != (sys.dim,):
        raise ContractError(f"q0 must have length {sys.dim}")
    if vd0.shape != (sys.k,):
        raise ContractError(f"v0 must carry {sys.k} d-coordinates")
    n_steps = _steps_for(T, h)
    use_compiled = (BACKEND == "compiled" and sys.fast is not None and not force_python)
    if use_compiled:
        nh_accel(sys, q0, vd0)  # surface regularity failures before the fast loop
        f = sys.fast
        try:
            q, vd = _speedup.integrate_nh(
                f.frame_code, f.d_basis, f.c, f.mass, f.mass_dd_inv, q0, vd0, n_steps, h)
        except ArithmeticError as exc:
            raise DivergenceError(str(exc)) from exc
    else:
        q, vd = _integrate_nh_python(sys, q0, vd0, T, h)
    t = h * np.arange(n_steps + 1)
    v = vd @ sys.splitting.d_basis.T
    return Trajectory(t=t, q=q, v=v, vd=vd, step=h)


def energy(sys: SystemSpec, traj: Trajectory) -> np.ndarray:
    """E(t) = <dL/dv, v> - L along the trajectory (time-independent L only)."""
    if not sys.lagrangian.time_independent:
        raise ContractError("energy is defined only for time-independent Lagrangians")
    L = sys.lagrangian
    out = np.empty(len(traj))
    if L.vectorized:
        Lv = np.asarray(L.d_dv(traj.q, traj.v), dtype=float) if L.d_dv is not None else None
        if Lv is not None:
            vals = np.asarray(L.eval(traj.q, traj.v), dtype=float)
            return np.einsum("ti,ti->t", Lv, traj.v) - vals
    for i in range(len(traj)):
        q, v = traj.q[i], traj.v[i]
        out[i] = float(lag.d_dv(L, q, v) @ v) - float(L.eval(q, v))
    return out


# ---------------------------------------------------------------------------
# coefficient tables along a stored trajectory
# ---------------------------------------------------------------------------

def _midpoints(y: np.ndarray) -> np.ndarray:
    """Fourth-order interpolation of uniformly sampled values at midpoints."""
    N = y.shape[0]
    if N < 4:
        raise ContractError("at least 4 samples are needed for midpoint interpolation")
    m = np.empty((N - 1,) + y.shape[1:])
    m[1:-1] = (-y[:-3] + 9.0 * y[1:-2] + 9.0 * y[2:-1] - y[3:]) / 16.0
    m[0] = (5.0 * y[0] + 15.0 * y[1] - 5.0 * y[2] + y[3]) / 16.0
    m[-1] = (y[-4] - 5.0 * y[-3] + 15.0 * y[-2] + 5.0 * y[-1]) / 16.0
    return m


def _batched_states(sys: SystemSpec, traj: Trajectory):
    """Stacked (q, v, vd) at samples and interval midpoints."""
    q_mid = _midpoints(traj.q)
    vd_mid = _midpoints(traj.vd)
    v_mid = vd_mid @ sys.splitting.d_basis.T
    return (traj.q, traj.v, traj.vd), (q_mid, v_mid, vd_mid)


def _eval_tables(sys: SystemSpec, q: np.ndarray, v: np.ndarray, vd: np.ndarray):
    """Per-sample quantities entering every residual and transport equation.

    Returns a namespace with, for each of N stacked states:
      psi      (N, n)      Euler-Lagrange covector along the nh flow
      Lv       (N, n)      dL/dv
      AtLq     (N, n)      A(q)^T dL/dq
      br_d     (N, k, n)   [v, d_i] for each d-basis vector
      br_dp    (N, n-k, n) [v, b_j] for each d'-basis vector
    """
    n, k = sys.dim, sys.k
    split = sys.splitting
    D, Dp = split.d_basis, split.dprime_basis
    L, F = sys.lagrangian, sys.frame
    N = q.shape[0]

    batched = (L.vectorized and F.vectorized and F.gamma is not None
               and None not in (L.d_dq, L.d_dv, L.d2_dvdv, L.d2_dvdq))
    if batched:
        A = np.asarray(F.A(q), dtype=float)
        g = np.asarray(F.gamma(q), dtype=float)
        Lq = np.asarray(L.d_dq(q, v), dtype=float)
        Lv = np.asarray(L.d_dv(q, v), dtype=float)
        M = np.broadcast_to(np.asarray(L.d2_dvdv(q, v), dtype=float), (N, n, n))
        C = np.broadcast_to(np.asarray(L.d2_dvdq(q, v), dtype=float), (N, n, n))
        AtLq = np.einsum("ted,te->td", A, Lq)
        adstar = np.einsum("tefd,tf,te->td", g, v, Lv)
        qdot = np.einsum("tde,te->td", A, v)
        Mdd = np.einsum("ei,tef,fj->tij", D, M, D)
        cond = float(np.max(np.linalg.cond(Mdd)))
        if not np.isfinite(cond) or cond > CONDITION_LIMIT:
            raise RegularityError(
                f"regularity failure: reduced mass matrix of system '{sys.name}' is "
                f"singular or ill-conditioned along the trajectory "
                f"(condition number {cond:.3e})")
        rhs = np.einsum("di,td->ti", D, AtLq + adstar - np.einsum("tde,te->td", C, qdot))
        acc = np.linalg.solve(Mdd, rhs[..., None])[..., 0]
        vdot = acc @ D.T
        dt_Lv = np.einsum("tde,te->td", C, qdot) + np.einsum("tde,te->td", M, vdot)
        psi = AtLq + adstar - dt_Lv
        br_d = np.einsum("tabd,tb,di->tia", g, v, D)
        br_dp = np.einsum("tabd,tb,dj->tja", g, v, Dp)
        return SimpleNamespace(psi=psi, Lv=Lv, AtLq=AtLq, br_d=br_d, br_dp=br_dp)

    psi = np.empty((N, n))
    Lv_t = np.empty((N, n))
    AtLq = np.empty((N, n))
    br_d = np.empty((N, k, n))
    br_dp = np.empty((N, n - k, n))
    for i in range(N):
        qi, vi, vdi = q[i], v[i], vd[i]
        acc = nh_accel(sys, qi, vdi)
        vdot = D @ acc
        psi[i] = el_covector(sys, qi, vi, vdot)
        Lv_t[i] = lag.d_dv(L, qi, vi)
        AtLq[i] = sys.frame.matrix(qi).T @ lag.d_dq(L, qi, vi)
        g = _gamma_at(sys, qi)
        br = np.einsum("abd,b->ad", g, vi)  # [v, e_d] coefficients
        br_d[i] = (br @ D).T
        br_dp[i] = (br @ Dp).T
    return SimpleNamespace(psi=psi, Lv=Lv_t, AtLq=AtLq, br_d=br_d, br_dp=br_dp)


def trajectory_tables(sys: SystemSpec, traj: Trajectory):
    """Tables at samples and midpoints used by multiplier transport and checks."""
    if len(traj) < 5:
        raise ContractError("trajectory is too coarse (fewer than 5 samples)")
    (q_s, v_s, vd_s), (q_m, v_m, vd_m) = _batched_states(sys, traj)
    at = _eval_tables(sys, q_s, v_s, vd_s)
    mid = _eval_tables(sys, q_m, v_m, vd_m)
    dual_p = sys.splitting.dual[sys.k:]
    Dp = sys.splitting.dprime_basis

    def pack(tab):
        # multiplier transport: mu'_j = -<psi, b_j> + sum_i mu_i <theta^i, [v, b_j]>
        psi_p = np.einsum("ta,aj->tj", tab.psi, Dp)
        G_lam = np.einsum("tja,ia->tji", tab.br_dp, dual_p)
        # variation transport: b'_j = -<theta^j, [v, Dp b]>_i b_i - <theta^j, [v, D a]>_i a_i
        G_b = np.einsum("ja,tia->tji", dual_p, tab.br_dp)
        R_a = np.einsum("ja,tia->tji", dual_p, tab.br_d)
        return SimpleNamespace(psi=tab.psi, Lv=tab.Lv, AtLq=tab.AtLq,
                               br_d=tab.br_d, br_dp=tab.br_dp,
                               psi_p=psi_p, G_lam=G_lam, G_b=G_b, R_a=R_a)

    return SimpleNamespace(sample=pack(at), mid=pack(mid),
                           t=traj.t, h=traj.step, n=sys.dim, k=sys.k)


def solve_multiplier(sys: SystemSpec, traj: Trajectory, lam0) -> MultiplierPath:
    """Transport the vakonomic multiplier along a constrained trajectory.

    Integrates the linear equation obtained by pairing the Euler-Lagrange
    covector of the modified Lagrangian with every d'-basis vector; the
    time derivative of dL/dv is rebuilt by chain rule from the stored states
    and recomputed accelerations rather than by differencing samples.
    """
    lam0 = np.asarray(lam0, dtype=float)
    m = sys.dim - sys.k
    if lam0.shape != (m,):
        raise ContractError(f"lam0 must carry {m} d'* coordinates")
    tab = trajectory_tables(sys, traj)
    lam = _transport_multiplier(tab, lam0[None, :])[..., 0, :]
    return MultiplierPath(t=traj.t, lam=lam)


def _transport_multiplier(tab, lam0_rows: np.ndarray, homogeneous_mask=None) -> np.ndarray:
    """RK4 transport of one or more multiplier curves with shared coefficients.

    ``lam0_rows`` has shape (r, m); returns (N, r, m).  Rows flagged in
    ``homogeneous_mask`` skip the forcing term (used for fundamental columns).
    """
    N = tab.t.shape[0]
    h = tab.h
    r, m = lam0_rows.shape
    force = np.ones((r, 1))
    if homogeneous_mask is not None:
        force[homogeneous_mask] = 0.0
    out = np.empty((N, r, m))
    out[0] = lam0_rows
    s, md = tab.sample, tab.mid

    def rhs(G, psi_p, Y):
        return -force * psi_p[None, :] + Y @ G.T

    for i in range(N - 1):
        Y = out[i]
        k1 = rhs(s.G_lam[i], s.psi_p[i], Y)
        k2 = rhs(md.G_lam[i], md.psi_p[i], Y + 0.5 * h * k1)
        k3 = rhs(md.G_lam[i], md.psi_p[i], Y + 0.5 * h * k2)
        k4 = rhs(s.G_lam[i + 1], s.psi_p[i + 1], Y + h * k3)
        out[i + 1] = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out


def vak_residual(sys: SystemSpec, q, v, vdot, lam, lamdot) -> np.ndarray:
    """Euler-Lagrange covector of the multiplier-modified Lagrangian.

    ``lam`` and ``lamdot`` are full covectors in the algebra dual basis;
    ``lam`` must annihilate d.  The state is a vakonomic extremal for the
    multiplier exactly when this covector vanishes on the whole algebra.
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    lam = np.asarray(lam, dtype=float)
    lamdot = np.asarray(lamdot, dtype=float)
    n = sys.dim
    if lam.shape != (n,) or lamdot.shape != (n,):
        raise ContractError("lam and lamdot must be covectors of the system dimension")
    if np.max(np.abs(lam @ sys.splitting.d_basis)) > 1e-9:
        raise ContractError("lam does not annihilate the constraint subspace d")
    psi = el_covector(sys, q, v, vdot)
    g = _gamma_at(sys, q)
    return psi + lamdot - np.einsum("efd,f,e->d", g, v, lam)


def write_trajectory_csv(traj: Trajectory, path, lam: MultiplierPath = None) -> None:
    """Emit t, q[0..n), v[0..n) (and lam[0..k) when given) at full precision."""
    n = traj.q.shape[1]
    cols = ["t"] + [f"q{i}" for i in range(n)] + [f"v{i}" for i in range(n)]
    data = [traj.t, traj.q, traj.v]
    if lam is not None:
        if lam.lam.shape[0] != len(traj):
            raise ContractError("multiplier path does not match the trajectory sampling")
        cols += [f"lam{i}" for i in range(lam.lam.shape[1])]
        data.append(lam.lam)
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    stacked = np.column_stack(data)
    for row in stacked:
        buf.write(",".join(f"{x:.17g}" for x in row) + "\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())
