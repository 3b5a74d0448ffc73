import numpy as np
import pytest

from nhvak import build_carriage, build_heisenberg, build_holonomic_demo, build_unicycle
from nhvak.comparison import _simpson_uniform
from nhvak.frame import StatePoint, variation_lift
from nhvak.systems import CarriageParams, carriage_l_for_unit_xy, polynomial_gen_heisenberg


@pytest.fixture(scope="session")
def unicycle():
    return build_unicycle()


@pytest.fixture(scope="session")
def carriage():
    return build_carriage()


@pytest.fixture(scope="session")
def carriage_xy1():
    p = CarriageParams()
    lstar = carriage_l_for_unit_xy(p.m0, p.m1, p.R, p.w, p.I, p.J)
    return build_carriage(CarriageParams(l=lstar))


@pytest.fixture(scope="session")
def heisenberg():
    return build_heisenberg()


@pytest.fixture(scope="session")
def gen_heisenberg():
    return polynomial_gen_heisenberg()


@pytest.fixture(scope="session")
def holonomic():
    return build_holonomic_demo()


def bump_generators(sys, traj, count, seed):
    """End-point-vanishing generators with values in d, plus exact rates."""
    rng = np.random.default_rng(seed)
    t = traj.t
    span = float(t[-1] - t[0])
    s = (t - t[0]) / span
    out = []
    for j in range(count):
        u = rng.normal(size=sys.k)
        u /= np.linalg.norm(u)
        freq = j + 1
        prof = np.sin(np.pi * freq * s) ** 2
        dprof = (np.pi * freq / span) * np.sin(2.0 * np.pi * freq * s)
        direction = sys.splitting.d_basis @ u
        out.append((prof[:, None] * direction[None, :],
                    dprof[:, None] * direction[None, :]))
    return out


def action_derivative(sys, traj, w, wdot, eps=1e-4):
    """Central-difference derivative of the action along the lifted variation.

    Uses only Lagrangian evaluations, the variation formula and quadrature,
    so it is independent of every covector/acceleration code path.
    """
    N = len(traj)
    dq = np.empty_like(traj.q)
    dv = np.empty_like(traj.v)
    for i in range(N):
        dq[i], dv[i] = variation_lift(sys.frame, StatePoint(traj.q[i], traj.v[i]),
                                      w[i], wdot[i])

    def action(shift):
        vals = np.array([sys.lagrangian.eval(traj.q[i] + shift * dq[i],
                                             traj.v[i] + shift * dv[i])
                         for i in range(N)])
        return _simpson_uniform(vals, traj.step)

    return (action(eps) - action(-eps)) / (2.0 * eps)
