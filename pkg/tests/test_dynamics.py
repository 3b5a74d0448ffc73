import numpy as np
import pytest
from scipy.integrate import solve_ivp

import nhvak
from nhvak.dynamics import (SystemSpec, el_covector, energy,
                            integrate_nonholonomic, nh_accel, solve_multiplier,
                            trajectory_tables, vak_residual, write_trajectory_csv)
from nhvak.errors import ContractError, DivergenceError, RegularityError
from nhvak.frame import identity_frame
from nhvak.lagrangian import LagrangianSpec
from nhvak.lie import ConstraintSplitting, LieAlgebraSpec
from nhvak.systems import CarriageParams, build_carriage

from conftest import action_derivative, bump_generators


def _free_particle():
    alg = LieAlgebraSpec(3, ("x", "y", "z"), np.zeros((3, 3, 3)))
    split = ConstraintSplitting.from_bases(np.eye(3)[:, :2], np.eye(3)[:, 2:])
    L = LagrangianSpec(dim=3, eval=lambda q, v: 0.5 * float(v @ v),
                       d_dv=lambda q, v: np.asarray(v, dtype=float))
    return SystemSpec(name="free", algebra=alg, splitting=split,
                      frame=identity_frame(3), lagrangian=L, params={})


def test_el_covector_free_particle():
    sys = _free_particle()
    rng = np.random.default_rng(0)
    psi = el_covector(sys, rng.normal(size=3), rng.normal(size=3), np.zeros(3))
    assert np.max(np.abs(psi)) <= 1e-9


def test_el_covector_heisenberg_vanishes_on_constraints(heisenberg):
    rng = np.random.default_rng(1)
    q = rng.uniform(-1, 1, 3)
    v = heisenberg.splitting.embed_d(rng.uniform(-1, 1, 2))
    psi = el_covector(heisenberg, q, v, np.zeros(3))
    assert np.max(np.abs(psi)) <= 1e-12


def test_el_covector_unicycle_constraint_direction(unicycle):
    # on constraints with the nonholonomic acceleration, psi kills d and
    # pairs with e2 as -m*alpha*phidot
    p = unicycle.params
    alpha, phidot = 0.8, -1.3
    q = np.array([0.2, -0.4, 0.7, 0.0])
    vd = np.array([alpha, phidot])
    v = unicycle.splitting.embed_d(vd)
    vdot = unicycle.splitting.embed_d(nh_accel(unicycle, q, vd))
    psi = el_covector(unicycle, q, v, vdot)
    assert np.max(np.abs(psi @ unicycle.splitting.d_basis)) <= 1e-12
    assert abs(psi[1] - (-p["m"] * alpha * phidot)) <= 1e-12


def test_nh_accel_closed_forms(unicycle, carriage, heisenberg):
    rng = np.random.default_rng(2)
    p = carriage.params
    for _ in range(100):
        q = rng.uniform(-2, 2, 5)
        vd = rng.uniform(-2, 2, 2)
        acc = nh_accel(carriage, q, vd)
        assert abs(acc[0] - p["X"] * vd[1] ** 2) <= 1e-10
        assert abs(acc[1] + p["Y"] * vd[0] * vd[1]) <= 1e-10
    for _ in range(20):
        assert np.max(np.abs(nh_accel(unicycle, rng.uniform(-2, 2, 4),
                                      rng.uniform(-2, 2, 2)))) <= 1e-12
        assert np.max(np.abs(nh_accel(heisenberg, rng.uniform(-2, 2, 3),
                                      rng.uniform(-2, 2, 2)))) <= 1e-12


def test_nh_accel_regularity_error():
    # vanishing axis and wheel inertias collapse the steering row of the
    # reduced mass matrix while every parameter stays positive
    sys = build_carriage(CarriageParams(J=1e-15, I=1e-16))
    with pytest.raises(RegularityError, match="regularity"):
        nh_accel(sys, np.zeros(5), np.array([1.0, 2.0]))


def test_integrate_unicycle_constants(unicycle):
    traj = integrate_nonholonomic(unicycle, np.zeros(4), np.array([1.0, 2.0]), 10.0, 1e-3)
    assert len(traj) == 10001
    assert np.max(np.abs(traj.vd[:, 0] - 1.0)) <= 1e-9
    assert np.max(np.abs(traj.vd[:, 1] - 2.0)) <= 1e-9


def test_integrate_heisenberg_straight_lines(heisenberg):
    q0 = np.array([0.3, -0.1, 0.5])
    traj = integrate_nonholonomic(heisenberg, q0, np.array([0.7, -0.4]), 10.0, 1e-3)
    qdot0 = heisenberg.frame.matrix(q0) @ traj.v[0]
    line = q0[None, :] + traj.t[:, None] * qdot0[None, :]
    assert np.max(np.abs(traj.q - line)) <= 1e-9


def test_integrate_zero_horizon(unicycle):
    traj = integrate_nonholonomic(unicycle, np.zeros(4), np.array([1.0, 2.0]), 0.0, 1e-3)
    assert len(traj) == 1
    assert np.array_equal(traj.q[0], np.zeros(4))
    assert np.array_equal(traj.vd[0], [1.0, 2.0])


def test_integrate_divergence_reported():
    # repulsive quartic potential escapes to infinity in finite time
    alg = LieAlgebraSpec(2, ("x", "y"), np.zeros((2, 2, 2)))
    split = ConstraintSplitting.from_bases(np.eye(2)[:, :1], np.eye(2)[:, 1:])
    L = LagrangianSpec(dim=2, eval=lambda q, v: 0.5 * float(v @ v) + q[0] ** 4,
                       d_dv=lambda q, v: np.asarray(v, dtype=float),
                       d_dq=lambda q, v: np.array([4.0 * q[0] ** 3, 0.0]))
    sys = SystemSpec(name="runaway", algebra=alg, splitting=split,
                     frame=identity_frame(2), lagrangian=L, params={})
    with np.errstate(invalid="ignore", over="ignore"):
        with pytest.raises(DivergenceError):
            integrate_nonholonomic(sys, np.array([1.0, 0.0]), np.array([1.0]), 20.0, 0.05)


def test_constraint_satisfaction_and_reconstruction(carriage):
    traj = integrate_nonholonomic(carriage, np.zeros(5), np.array([1.0, 2.0]), 2.0, 1e-3)
    off = traj.v @ carriage.splitting.Pprime.T
    assert np.max(np.abs(off)) <= 1e-9
    # fourth-order differenced qdot matches A(q) v
    from nhvak.comparison import _fd_derivative
    qdot = _fd_derivative(traj.q, traj.step)
    Av = np.einsum("tab,tb->ta", np.asarray(carriage.frame.A(traj.q), dtype=float), traj.v)
    assert np.max(np.abs(qdot - Av)) <= 1e-9


def test_el_covector_annihilates_d_along_trajectories(unicycle, carriage, gen_heisenberg):
    for sys, v0 in [(unicycle, [1.0, 2.0]), (carriage, [1.0, 2.0]),
                    (gen_heisenberg, [0.4, 0.3])]:
        traj = integrate_nonholonomic(sys, np.zeros(sys.dim), np.array(v0), 2.0, 1e-3)
        idx = np.linspace(0, len(traj) - 1, 25).astype(int)
        for i in idx:
            vdot = sys.splitting.embed_d(nh_accel(sys, traj.q[i], traj.vd[i]))
            psi = el_covector(sys, traj.q[i], traj.v[i], vdot)
            assert np.max(np.abs(psi @ sys.splitting.d_basis)) <= 1e-10


def test_rk4_order_on_carriage(carriage):
    def endpoint(h):
        t = integrate_nonholonomic(carriage, np.zeros(5), np.array([1.0, 2.0]), 2.0, h)
        return np.concatenate([t.q[-1], t.vd[-1]])

    ref = endpoint(1e-5)
    e1 = np.max(np.abs(endpoint(8e-3) - ref))
    e2 = np.max(np.abs(endpoint(4e-3) - ref))
    assert 12.0 <= e1 / e2 <= 20.0


def test_action_derivative_oracle(unicycle, carriage, gen_heisenberg):
    rng_seeds = {"unicycle": 10, "carriage": 11, "gen-heisenberg": 12}
    for sys, v0 in [(unicycle, [1.0, 2.0]), (carriage, [1.0, 2.0]),
                    (gen_heisenberg, [0.4, 0.3])]:
        traj = integrate_nonholonomic(sys, np.zeros(sys.dim), np.array(v0), 4.0, 1e-3)
        for w, wdot in bump_generators(sys, traj, 5, rng_seeds[sys.name]):
            assert abs(action_derivative(sys, traj, w, wdot)) <= 1e-5


# ---------------------------------------------------------------------------
# multiplier transport
# ---------------------------------------------------------------------------

def test_solve_multiplier_heisenberg_constant(heisenberg):
    traj = integrate_nonholonomic(heisenberg, np.zeros(3), np.array([1.0, 0.5]), 10.0, 1e-3)
    lam = solve_multiplier(heisenberg, traj, np.array([0.7]))
    assert np.max(np.abs(lam.lam - 0.7)) <= 1e-10


def test_solve_multiplier_unicycle_vs_ivp_oracle(unicycle):
    # coefficient equations: f' = g phidot + m alphadot, g' = phidot (m alpha - f)
    p = unicycle.params
    alpha, phidot = 1.0, 2.0
    traj = integrate_nonholonomic(unicycle, np.zeros(4), np.array([alpha, phidot]), 5.0, 1e-3)
    lam0 = np.array([0.3, -0.2])
    lam = solve_multiplier(unicycle, traj, lam0)

    def rhs(t, y):
        return [y[1] * phidot, phidot * (p["m"] * alpha - y[0])]

    ref = solve_ivp(rhs, [0.0, 5.0], lam0, rtol=1e-12, atol=1e-14, dense_output=True)
    assert np.max(np.abs(lam.lam - ref.sol(traj.t).T)) <= 1e-9


def test_solve_multiplier_carriage_vs_ivp_oracle(carriage):
    # closed-form coefficient equations in (f, g, h) joined with the reduced flow;
    # multiplier coordinates follow the d'-basis order (e1, e2, e_phi) = (f, h, g)
    p = carriage.params
    m, m0, l, J = p["m0"] + 2 * p["m1"], p["m0"], p["l"], p["J"]
    X, Y = p["X"], p["Y"]
    v0 = np.array([1.0, 2.0])
    T = 4.0
    traj = integrate_nonholonomic(carriage, np.zeros(5), v0, T, 1e-3)
    lam0_fhg = np.array([0.2, -0.4, 0.6])
    lam = solve_multiplier(carriage, traj, lam0_fhg)

    def rhs(t, y):
        alpha, phidot, f, g, h = y
        alphadot = X * phidot ** 2
        phiddot = -Y * alpha * phidot
        fdot = m * alphadot - m0 * l * phidot ** 2 + phidot * h
        gdot = J * phiddot + m0 * l * phidot * alpha - alpha * h
        hdot = m0 * l * phiddot + m * alpha * phidot - phidot * f
        return [alphadot, phiddot, fdot, gdot, hdot]

    y0 = [v0[0], v0[1], lam0_fhg[0], lam0_fhg[2], lam0_fhg[1]]
    ref = solve_ivp(rhs, [0.0, T], y0, rtol=1e-12, atol=1e-14, dense_output=True)
    vals = ref.sol(traj.t)
    assert np.max(np.abs(lam.lam[:, 0] - vals[2])) <= 1e-8   # f
    assert np.max(np.abs(lam.lam[:, 2] - vals[3])) <= 1e-8   # g
    assert np.max(np.abs(lam.lam[:, 1] - vals[4])) <= 1e-8   # h


def test_solve_multiplier_too_coarse(unicycle):
    traj = integrate_nonholonomic(unicycle, np.zeros(4), np.array([1.0, 2.0]), 3e-3, 1e-3)
    with pytest.raises(ContractError):
        solve_multiplier(unicycle, traj, np.zeros(2))


# ---------------------------------------------------------------------------
# vakonomic residual
# ---------------------------------------------------------------------------

def test_vak_residual_zero_multiplier_reduces_to_el(unicycle):
    rng = np.random.default_rng(5)
    q = rng.uniform(-1, 1, 4)
    v = rng.uniform(-1, 1, 4)
    vdot = rng.uniform(-1, 1, 4)
    assert np.allclose(vak_residual(unicycle, q, v, vdot, np.zeros(4), np.zeros(4)),
                       el_covector(unicycle, q, v, vdot), atol=1e-14)


def test_vak_residual_along_unicycle_with_least_squares_multiplier(unicycle):
    from nhvak.comparison import check_nh_is_vak_multiplier
    traj = integrate_nonholonomic(unicycle, np.zeros(4), np.array([1.0, 2.0]), 5.0, 1e-3)
    _, best = check_nh_is_vak_multiplier(unicycle, traj)
    dual_p = unicycle.splitting.dual[unicycle.k:]
    tab = trajectory_tables(unicycle, traj)
    idx = np.linspace(0, len(traj) - 1, 20).astype(int)
    worst = 0.0
    for i in idx:
        vdot = unicycle.splitting.embed_d(nh_accel(unicycle, traj.q[i], traj.vd[i]))
        mudot = -tab.sample.psi_p[i] + tab.sample.G_lam[i] @ best.lam[i]
        res = vak_residual(unicycle, traj.q[i], traj.v[i], vdot,
                           best.lam[i] @ dual_p, mudot @ dual_p)
        worst = max(worst, np.max(np.abs(res)))
    assert worst <= 1e-7


def test_vak_residual_obstruction_for_detuned_carriage():
    p = CarriageParams(l=0.4)
    sys = build_carriage(p)
    assert abs(p.xy_product - 1.0) > 0.1
    traj = integrate_nonholonomic(sys, np.zeros(5), np.array([1.0, 2.0]), 5.0, 1e-3)
    from nhvak.comparison import check_nh_is_vak_multiplier
    _, best = check_nh_is_vak_multiplier(sys, traj)
    dual_p = sys.splitting.dual[sys.k:]
    tab = trajectory_tables(sys, traj)
    idx = np.linspace(0, len(traj) - 1, 40).astype(int)
    worst_on_d = 0.0
    for i in idx:
        vdot = sys.splitting.embed_d(nh_accel(sys, traj.q[i], traj.vd[i]))
        mudot = -tab.sample.psi_p[i] + tab.sample.G_lam[i] @ best.lam[i]
        res = vak_residual(sys, traj.q[i], traj.v[i], vdot,
                           best.lam[i] @ dual_p, mudot @ dual_p)
        worst_on_d = max(worst_on_d, np.max(np.abs(res @ sys.splitting.d_basis)))
    assert worst_on_d >= 1e-3


def test_vak_residual_requires_annihilator(unicycle):
    with pytest.raises(ContractError):
        vak_residual(unicycle, np.zeros(4), np.zeros(4), np.zeros(4),
                     np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(4))


# ---------------------------------------------------------------------------
# energy and CSV output
# ---------------------------------------------------------------------------

def test_energy_drift(unicycle, carriage):
    for sys, v0 in [(unicycle, [1.0, 2.0]), (carriage, [1.0, 2.0])]:
        traj = integrate_nonholonomic(sys, np.zeros(sys.dim), np.array(v0), 10.0, 1e-3)
        E = energy(sys, traj)
        assert np.max(np.abs(E - E[0])) <= 1e-6


def test_energy_rest_state(unicycle):
    traj = integrate_nonholonomic(unicycle, np.zeros(4), np.zeros(2), 1.0, 1e-2)
    E = energy(unicycle, traj)
    assert np.max(np.abs(E)) == 0.0


def test_energy_requires_time_independent(unicycle):
    import dataclasses
    L = dataclasses.replace(unicycle.lagrangian, time_independent=False, spot_check=False)
    sys = dataclasses.replace(unicycle, lagrangian=L)
    traj = integrate_nonholonomic(sys, np.zeros(4), np.array([1.0, 2.0]), 0.1, 1e-2)
    with pytest.raises(ContractError):
        energy(sys, traj)


def test_trajectory_csv_roundtrip(tmp_path, unicycle):
    traj = integrate_nonholonomic(unicycle, np.zeros(4), np.array([1.0, 2.0]), 0.1, 1e-2)
    lam = solve_multiplier(unicycle, traj, np.array([0.5, -0.5]))
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path, lam=lam)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,q0,q1,q2,q3,v0,v1,v2,v3,lam0,lam1"
    assert len(lines) == len(traj) + 1
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.allclose(data[:, 0], traj.t, atol=0.0)
    assert np.allclose(data[:, 1:5], traj.q, atol=0.0)
    assert np.allclose(data[:, 5:9], traj.v, atol=0.0)
    assert np.allclose(data[:, 9:], lam.lam, atol=0.0)
