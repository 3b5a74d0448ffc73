"""Built-in example systems.

Each builder assembles a :class:`~nhvak.dynamics.SystemSpec` from closed-form
data: a left-invariant frame on a global chart (angles unwrapped), constant
bracket coefficients equal to the algebra's structure constants, an analytic
Lagrangian with exact partials, and the constraint splitting.  Systems whose
velocity Hessian is constant also carry the fast-path data consumed by the
compiled integrator.

Chart conventions:
  unicycle   q = (x, y, phi, theta), frame (e1, e2, e_phi, e_theta) with
             e1 = cos(phi) dx + sin(phi) dy and e2 its quarter turn
  carriage   q = (x, y, phi, theta1, theta2), wheel angles already in the
             half-sum / half-difference variables
  heisenberg q = (x, y, z), frame e1 = dx + y dz, e2 = dy - x dz, e3 = dz
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (FRAME_HEISENBERG, FRAME_IDENTITY, FRAME_PLANAR,
                       FastSystemData, SystemSpec)
from .errors import ContractError
from .frame import FrameField, identity_frame
from .lagrangian import LagrangianSpec
from .lie import ConstraintSplitting, LieAlgebraSpec


def _const_gamma(c):
    c = np.asarray(c, dtype=float)

    def gamma(q):
        q = np.asarray(q, dtype=float)
        return np.broadcast_to(c, q.shape[:-1] + c.shape).copy()

    return gamma


def _planar_frame(dim: int, labels: str) -> FrameField:
    """Rotation by q[2] on the first two coordinates, identity elsewhere."""

    def A(q):
        q = np.asarray(q, dtype=float)
        out = np.zeros(q.shape[:-1] + (dim, dim))
        cs = np.cos(q[..., 2])
        sn = np.sin(q[..., 2])
        out[..., 0, 0] = cs
        out[..., 0, 1] = -sn
        out[..., 1, 0] = sn
        out[..., 1, 1] = cs
        for j in range(2, dim):
            out[..., j, j] = 1.0
        return out

    return FrameField(dim=dim, A=A, gamma=None, chart_hint=labels, vectorized=True)


def _planar_c(dim: int) -> np.ndarray:
    """[e_phi, e1] = e2, [e_phi, e2] = -e1 with indices (e1, e2, e_phi) = (0, 1, 2)."""
    c = np.zeros((dim, dim, dim))
    c[1, 2, 0] = 1.0
    c[1, 0, 2] = -1.0
    c[0, 2, 1] = -1.0
    c[0, 1, 2] = 1.0
    return c


def _quadratic_lagrangian(M, potential=None, potential_grad=None, dim=None) -> LagrangianSpec:
    """L = 1/2 v^T M v - U(q) with a constant mass matrix."""
    M = np.asarray(M, dtype=float)
    n = dim or M.shape[0]

    def value(q, v):
        v = np.asarray(v, dtype=float)
        kin = 0.5 * np.einsum("...i,ij,...j->...", v, M, v)
        if potential is not None:
            kin = kin - potential(np.asarray(q, dtype=float))
        return kin

    def d_dv(q, v):
        return np.asarray(v, dtype=float) @ M.T

    def d_dq(q, v):
        q = np.asarray(q, dtype=float)
        if potential_grad is None:
            return np.zeros(q.shape)
        return -np.asarray(potential_grad(q), dtype=float)

    def d2_dvdv(q, v):
        return M

    def d2_dvdq(q, v):
        return np.zeros((n, n))

    analytic_q = potential is None or potential_grad is not None
    return LagrangianSpec(dim=n, eval=value, d_dv=d_dv,
                          d_dq=d_dq if analytic_q else None,
                          d2_dvdv=d2_dvdv,
                          d2_dvdq=d2_dvdq if analytic_q else None,
                          vectorized=analytic_q)


# ---------------------------------------------------------------------------
# unicycle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnicycleParams:
    """Rolling wheel: mass m, spin inertia I, steering inertia J, radius R."""

    m: float = 1.0
    I: float = 0.25
    J: float = 0.5
    R: float = 1.0
    potential: callable = None
    potential_grad: callable = None

    def __post_init__(self):
        if min(self.m, self.I, self.J, self.R) <= 0:
            raise ContractError("unicycle parameters m, I, J, R must be positive")


def build_unicycle(p: UnicycleParams = UnicycleParams()) -> SystemSpec:
    dim = 4
    c = _planar_c(dim)
    alg = LieAlgebraSpec(dim=dim, basis_labels=("e1", "e2", "e_phi", "e_theta"), c=c)
    frame = _planar_frame(dim, "q = (x, y, phi, theta); angles unwrapped")
    frame = FrameField(dim=dim, A=frame.A, gamma=_const_gamma(c),
                       chart_hint=frame.chart_hint, vectorized=True)
    D = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0], [1.0 / p.R, 0.0]])
    Dp = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
    split = ConstraintSplitting.from_bases(D, Dp)
    M = np.diag([p.m, p.m, p.J, p.I])
    if p.potential is not None:
        _check_invariant_potential(p.potential, dim, group_columns=(0, 1))
    L = _quadratic_lagrangian(M, p.potential, p.potential_grad, dim)
    fast = None
    if p.potential is None:
        fast = FastSystemData(frame_code=FRAME_PLANAR, mass=M, c=c, d_basis=D,
                              mass_dd_inv=np.linalg.inv(D.T @ M @ D))
    params = {"m": p.m, "I": p.I, "J": p.J, "R": p.R}
    return SystemSpec(name="unicycle", algebra=alg, splitting=split, frame=frame,
                      lagrangian=L, params=params, fast=fast)


def _check_invariant_potential(U, dim, group_columns, trials=7):
    """Reject potentials with a gradient component along the group directions."""
    rng = np.random.default_rng(7)
    h = 1e-6
    for _ in range(trials):
        q = rng.uniform(-1.0, 1.0, dim)
        for j in group_columns:
            qp = q.copy()
            qm = q.copy()
            qp[j] += h
            qm[j] -= h
            if abs(U(qp) - U(qm)) / (2 * h) > 1e-6:
                raise ContractError("potential must have zero derivative along "
                                    "the group directions")


# ---------------------------------------------------------------------------
# two-wheeled carriage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CarriageParams:
    """Axle with two wheels and an offset center of mass.

    m0 is the body mass, m1 the mass of each wheel, l the center-of-mass
    offset, J the inertia about the vertical axis, I the inertia of each
    wheel, w the half wheel separation and R the wheel radius.
    """

    m0: float = 2.0
    m1: float = 0.5
    l: float = 0.3
    J: float = 0.8
    I: float = 0.1
    w: float = 0.4
    R: float = 0.5

    def __post_init__(self):
        if min(self.m0, self.m1, self.J, self.I, self.w, self.R) <= 0:
            raise ContractError("carriage parameters m0, m1, J, I, w, R must be positive")
        if self.l < 0:
            raise ContractError("center-of-mass offset l must be nonnegative")

    @property
    def m(self) -> float:
        return self.m0 + 2.0 * self.m1

    @property
    def X(self) -> float:
        return self.m0 * self.l * self.R ** 2 / (self.m * self.R ** 2 + 2.0 * self.I)

    @property
    def Y(self) -> float:
        return self.m0 * self.l * self.R ** 2 / (self.J * self.R ** 2 + 2.0 * self.I * self.w ** 2)

    @property
    def xy_product(self) -> float:
        return self.X * self.Y


def carriage_l_for_unit_xy(m0, m1, R, w, I, J) -> float:
    """Offset l making the X*Y invariant exactly one."""
    m = m0 + 2.0 * m1
    num = (m * R ** 2 + 2.0 * I) * (J * R ** 2 + 2.0 * I * w ** 2)
    if num <= 0 or m0 <= 0 or R <= 0:
        raise ContractError("no positive offset solves X*Y = 1 for these parameters")
    return math.sqrt(num) / (m0 * R ** 2)


def build_carriage(p: CarriageParams = CarriageParams()) -> SystemSpec:
    dim = 5
    c = _planar_c(dim)
    alg = LieAlgebraSpec(dim=dim, basis_labels=("e1", "e2", "e_phi", "e_theta1", "e_theta2"),
                         c=c)
    frame = _planar_frame(dim, "q = (x, y, phi, theta1, theta2); angles unwrapped")
    frame = FrameField(dim=dim, A=frame.A, gamma=_const_gamma(c),
                       chart_hint=frame.chart_hint, vectorized=True)
    D = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0],
                  [1.0 / p.R, 0.0], [0.0, p.w / p.R]])
    Dp = np.zeros((dim, 3))
    Dp[0, 0] = Dp[1, 1] = Dp[2, 2] = 1.0
    split = ConstraintSplitting.from_bases(D, Dp)
    M = np.diag([p.m, p.m, p.J, 2.0 * p.I, 2.0 * p.I])
    M[1, 2] = M[2, 1] = p.m0 * p.l
    L = _quadratic_lagrangian(M, dim=dim)
    fast = FastSystemData(frame_code=FRAME_PLANAR, mass=M, c=c, d_basis=D,
                          mass_dd_inv=np.linalg.inv(D.T @ M @ D))
    params = {"m0": p.m0, "m1": p.m1, "l": p.l, "J": p.J, "I": p.I,
              "w": p.w, "R": p.R, "X": p.X, "Y": p.Y, "XY": p.xy_product}
    return SystemSpec(name="carriage", algebra=alg, splitting=split, frame=frame,
                      lagrangian=L, params=params, fast=fast)


# ---------------------------------------------------------------------------
# Heisenberg system and its generalization
# ---------------------------------------------------------------------------

def _heisenberg_algebra():
    c = np.zeros((3, 3, 3))
    c[2, 0, 1] = -2.0
    c[2, 1, 0] = 2.0
    return LieAlgebraSpec(dim=3, basis_labels=("e1", "e2", "e3"), c=c), c


def _heisenberg_frame(c) -> FrameField:
    def A(q):
        q = np.asarray(q, dtype=float)
        out = np.zeros(q.shape[:-1] + (3, 3))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = 1.0
        out[..., 2, 2] = 1.0
        out[..., 2, 0] = q[..., 1]
        out[..., 2, 1] = -q[..., 0]
        return out

    return FrameField(dim=3, A=A, gamma=_const_gamma(c),
                      chart_hint="q = (x, y, z) global", vectorized=True)


def _heisenberg_split() -> ConstraintSplitting:
    D = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    Dp = np.array([[0.0], [0.0], [1.0]])
    return ConstraintSplitting.from_bases(D, Dp)


def build_heisenberg() -> SystemSpec:
    alg, c = _heisenberg_algebra()
    frame = _heisenberg_frame(c)
    split = _heisenberg_split()
    M = np.eye(3)
    L = _quadratic_lagrangian(M, dim=3)
    fast = FastSystemData(frame_code=FRAME_HEISENBERG, mass=M, c=c, d_basis=split.d_basis,
                          mass_dd_inv=np.linalg.inv(split.d_basis.T @ M @ split.d_basis))
    return SystemSpec(name="heisenberg", algebra=alg, splitting=split, frame=frame,
                      lagrangian=L, params={}, fast=fast)


@dataclass(frozen=True)
class GenHeisenbergParams:
    """Position-dependent quadratic form on the Heisenberg chart.

    L = f(x,y) a^2 + g(x,y) ab + h(x,y) b^2 + Phi(x,y,z) c^2 - U(x,y) in the
    quasi-velocities (a, b, c).  Gradient callables are optional; without
    them the q-partials fall back to finite differences.  All callables must
    broadcast over stacked inputs when ``vectorized`` is set.
    """

    f: callable
    g: callable
    h: callable
    Phi: callable
    U: callable
    grad_f: callable = None
    grad_g: callable = None
    grad_h: callable = None
    grad_Phi: callable = None
    grad_U: callable = None
    vectorized: bool = False
    check_box: float = 2.0

    def has_gradients(self) -> bool:
        return None not in (self.grad_f, self.grad_g, self.grad_h,
                            self.grad_Phi, self.grad_U)


def build_generalized_heisenberg(p: GenHeisenbergParams) -> SystemSpec:
    alg, c = _heisenberg_algebra()
    frame = _heisenberg_frame(c)
    split = _heisenberg_split()

    rng = np.random.default_rng(11)
    for _ in range(9):
        x, y = rng.uniform(-p.check_box, p.check_box, 2)
        f, g, h = float(p.f(x, y)), float(p.g(x, y)), float(p.h(x, y))
        if not (2.0 * f > 0 and 4.0 * f * h - g * g > 0):
            raise ContractError(
                f"kinetic block [[2f, g], [g, 2h]] is not positive definite at "
                f"(x, y) = ({x:.3f}, {y:.3f})")

    def value(q, v):
        q = np.asarray(q, dtype=float)
        v = np.asarray(v, dtype=float)
        x, y, z = q[..., 0], q[..., 1], q[..., 2]
        a, b, cc = v[..., 0], v[..., 1], v[..., 2]
        return (p.f(x, y) * a ** 2 + p.g(x, y) * a * b + p.h(x, y) * b ** 2
                + p.Phi(x, y, z) * cc ** 2 - p.U(x, y))

    def d_dv(q, v):
        q = np.asarray(q, dtype=float)
        v = np.asarray(v, dtype=float)
        x, y, z = q[..., 0], q[..., 1], q[..., 2]
        a, b, cc = v[..., 0], v[..., 1], v[..., 2]
        f, g, h = p.f(x, y), p.g(x, y), p.h(x, y)
        out = np.empty(np.broadcast(q, v).shape)
        out[..., 0] = 2.0 * f * a + g * b
        out[..., 1] = g * a + 2.0 * h * b
        out[..., 2] = 2.0 * p.Phi(x, y, z) * cc
        return out

    def d2_dvdv(q, v):
        q = np.asarray(q, dtype=float)
        x, y, z = q[..., 0], q[..., 1], q[..., 2]
        out = np.zeros(q.shape[:-1] + (3, 3))
        out[..., 0, 0] = 2.0 * p.f(x, y)
        out[..., 0, 1] = out[..., 1, 0] = p.g(x, y)
        out[..., 1, 1] = 2.0 * p.h(x, y)
        out[..., 2, 2] = 2.0 * p.Phi(x, y, z)
        return out

    d_dq = None
    d2_dvdq = None
    if p.has_gradients():
        def d_dq(q, v):
            q = np.asarray(q, dtype=float)
            v = np.asarray(v, dtype=float)
            x, y, z = q[..., 0], q[..., 1], q[..., 2]
            a, b, cc = v[..., 0], v[..., 1], v[..., 2]
            fx, fy = p.grad_f(x, y)
            gx, gy = p.grad_g(x, y)
            hx, hy = p.grad_h(x, y)
            px, py, pz = p.grad_Phi(x, y, z)
            ux, uy = p.grad_U(x, y)
            out = np.empty(np.broadcast(q, v).shape)
            out[..., 0] = fx * a ** 2 + gx * a * b + hx * b ** 2 + px * cc ** 2 - ux
            out[..., 1] = fy * a ** 2 + gy * a * b + hy * b ** 2 + py * cc ** 2 - uy
            out[..., 2] = pz * cc ** 2
            return out

        def d2_dvdq(q, v):
            q = np.asarray(q, dtype=float)
            v = np.asarray(v, dtype=float)
            x, y, z = q[..., 0], q[..., 1], q[..., 2]
            a, b, cc = v[..., 0], v[..., 1], v[..., 2]
            fx, fy = p.grad_f(x, y)
            gx, gy = p.grad_g(x, y)
            hx, hy = p.grad_h(x, y)
            px, py, pz = p.grad_Phi(x, y, z)
            out = np.zeros(np.broadcast(q, v).shape[:-1] + (3, 3))
            out[..., 0, 0] = 2.0 * fx * a + gx * b
            out[..., 0, 1] = 2.0 * fy * a + gy * b
            out[..., 1, 0] = gx * a + 2.0 * hx * b
            out[..., 1, 1] = gy * a + 2.0 * hy * b
            out[..., 2, 0] = 2.0 * px * cc
            out[..., 2, 1] = 2.0 * py * cc
            out[..., 2, 2] = 2.0 * pz * cc
            return out

    L = LagrangianSpec(dim=3, eval=value, d_dv=d_dv, d_dq=d_dq,
                       d2_dvdv=d2_dvdv, d2_dvdq=d2_dvdq,
                       vectorized=p.vectorized and p.has_gradients())
    return SystemSpec(name="gen-heisenberg", algebra=alg, splitting=split, frame=frame,
                      lagrangian=L, params={}, fast=None)


def polynomial_gen_heisenberg(f0=1.0, fx2=1.0, gxy=1.0, h0=2.0,
                              phi0=1.0, phiz2=1.0, u2=1.0) -> SystemSpec:
    """Concrete family f = f0 + fx2 x^2, g = gxy xy, h = h0, Phi = phi0 + phiz2 z^2,
    U = u2 (x^2 + y^2); defaults give a genuinely position-dependent instance."""
    p = GenHeisenbergParams(
        f=lambda x, y: f0 + fx2 * x ** 2,
        g=lambda x, y: gxy * x * y,
        h=lambda x, y: h0 + 0.0 * x,
        Phi=lambda x, y, z: phi0 + phiz2 * z ** 2,
        U=lambda x, y: u2 * (x ** 2 + y ** 2),
        grad_f=lambda x, y: (2.0 * fx2 * x, 0.0 * x),
        grad_g=lambda x, y: (gxy * y, gxy * x),
        grad_h=lambda x, y: (0.0 * x, 0.0 * x),
        grad_Phi=lambda x, y, z: (0.0 * x, 0.0 * x, 2.0 * phiz2 * z),
        grad_U=lambda x, y: (2.0 * u2 * x, 2.0 * u2 * y),
        vectorized=True,
    )
    sys = build_generalized_heisenberg(p)
    params = {"f0": f0, "fx2": fx2, "gxy": gxy, "h0": h0,
              "phi0": phi0, "phiz2": phiz2, "u2": u2}
    return SystemSpec(name="gen-heisenberg", algebra=sys.algebra, splitting=sys.splitting,
                      frame=sys.frame, lagrangian=sys.lagrangian, params=params, fast=None)


# ---------------------------------------------------------------------------
# holonomic fixture
# ---------------------------------------------------------------------------

def build_holonomic_demo() -> SystemSpec:
    """Abelian free particle with an integrable constraint plane."""
    dim = 3
    c = np.zeros((dim, dim, dim))
    alg = LieAlgebraSpec(dim=dim, basis_labels=("e1", "e2", "e3"), c=c)
    frame = identity_frame(dim)
    D = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    Dp = np.array([[0.0], [0.0], [1.0]])
    split = ConstraintSplitting.from_bases(D, Dp)
    M = np.eye(dim)
    L = _quadratic_lagrangian(M, dim=dim)
    fast = FastSystemData(frame_code=FRAME_IDENTITY, mass=M, c=c, d_basis=D,
                          mass_dd_inv=np.linalg.inv(D.T @ M @ D))
    return SystemSpec(name="holonomic-demo", algebra=alg, splitting=split, frame=frame,
                      lagrangian=L, params={}, fast=fast)


# ---------------------------------------------------------------------------
# registry for the command line
# ---------------------------------------------------------------------------

def _build_unicycle_cfg(params: dict) -> SystemSpec:
    return build_unicycle(UnicycleParams(**params))


def _build_carriage_cfg(params: dict) -> SystemSpec:
    return build_carriage(CarriageParams(**params))


def _build_heisenberg_cfg(params: dict) -> SystemSpec:
    if params:
        raise ContractError("heisenberg takes no parameters")
    return build_heisenberg()


def _build_gen_heisenberg_cfg(params: dict) -> SystemSpec:
    return polynomial_gen_heisenberg(**params)


def _build_holonomic_cfg(params: dict) -> SystemSpec:
    if params:
        raise ContractError("holonomic-demo takes no parameters")
    return build_holonomic_demo()


REGISTRY = {
    "unicycle": (_build_unicycle_cfg, {"q0": [0.0] * 4, "v0": [1.0, 2.0]}),
    "carriage": (_build_carriage_cfg, {"q0": [0.0] * 5, "v0": [1.0, 2.0]}),
    "heisenberg": (_build_heisenberg_cfg, {"q0": [0.0] * 3, "v0": [1.0, 0.5]}),
    "gen-heisenberg": (_build_gen_heisenberg_cfg, {"q0": [0.0] * 3, "v0": [0.4, 0.3]}),
    "holonomic-demo": (_build_holonomic_cfg, {"q0": [0.0] * 3, "v0": [1.0, 0.5]}),
}


def build_from_registry(name: str, params: dict) -> SystemSpec:
    if name not in REGISTRY:
        raise ContractError(f"unknown system '{name}'; choose from {sorted(REGISTRY)}")
    builder, _ = REGISTRY[name]
    try:
        return builder(dict(params))
    except TypeError as exc:
        raise ContractError(f"bad parameters for system '{name}': {exc}") from exc
