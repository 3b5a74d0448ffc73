"""Trajectory-level comparison criteria.

Given an integrated nonholonomic trajectory, these checks decide whether it
is simultaneously an extremal of the unconstrained problem (pointwise test
of the Euler-Lagrange covector on d'), of the constrained variational
problem (an integral test over closed generator pairs, or equivalently the
existence of a multiplier transported by the linear multiplier equation that
annihilates all brackets [v, d]), and conversely whether a certified
vakonomic trajectory with a given multiplier is nonholonomic.

All quadratures are composite Simpson on the integrator's uniform grid, with
a 3/8 tail when the interval count is odd.  Verdicts follow residuals at the
stated default tolerances; every tolerance is an explicit argument.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import (MultiplierPath, SystemSpec, Trajectory,
                       _transport_multiplier, trajectory_tables, vak_residual)
from .errors import ContractError, NumericalError
from .frame import variation_lift, StatePoint
from .lie import change_complement

CRITERIA = ("NH_IS_UNCONSTRAINED", "NH_IS_VAK_INTEGRAL",
            "NH_IS_VAK_MULTIPLIER", "VAK_IS_NH")

POINTWISE_TOL = 1e-6
INTEGRAL_TOL = 1e-5
DEFAULT_SEED = 42


@dataclass(frozen=True)
class ComparisonReport:
    criterion: str
    residual: float
    tolerance: float
    verdict: bool
    samples: int
    details: np.ndarray

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ContractError(f"unknown criterion '{self.criterion}'")
        if self.verdict != (self.residual <= self.tolerance):
            raise ContractError("verdict must equal (residual <= tolerance)")


def _make_report(criterion, residual, tolerance, samples, details) -> ComparisonReport:
    residual = float(residual)
    return ComparisonReport(criterion=criterion, residual=residual,
                            tolerance=float(tolerance),
                            verdict=bool(residual <= tolerance),
                            samples=int(samples),
                            details=np.asarray(details, dtype=float))


@dataclass(frozen=True)
class GeneratorPair:
    """Sampled generator of an admissible variation, split into parts.

    ``a`` holds d-coordinates, ``b`` d'-coordinates; for closed pairs both
    vanish at the end-points and b is transported by the variation equation
    along the reference trajectory.
    """

    t: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def sup_norm(self) -> float:
        return max(float(np.max(np.abs(self.a))), float(np.max(np.abs(self.b))))


def _simpson_uniform(y: np.ndarray, h: float) -> float:
    """Composite Simpson on a uniform grid; 3/8 rule absorbs an odd tail."""
    y = np.asarray(y, dtype=float)
    N = y.shape[0]
    if N < 5:
        raise ContractError("quadrature needs at least 5 samples")
    intervals = N - 1

    def composite(seg):
        return (h / 3.0) * (seg[0] + seg[-1]
                            + 4.0 * float(np.sum(seg[1:-1:2]))
                            + 2.0 * float(np.sum(seg[2:-2:2])))

    if intervals % 2 == 0:
        return composite(y)
    main = composite(y[:intervals - 2])  # first (intervals - 3) intervals, even count
    tail = (3.0 * h / 8.0) * (y[-4] + 3.0 * y[-3] + 3.0 * y[-2] + y[-1])
    return main + tail


def _fd_derivative(y: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite-difference time derivative on a uniform grid."""
    N = y.shape[0]
    if N < 5:
        raise ContractError("derivative stencil needs at least 5 samples")
    d = np.empty_like(y)
    d[2:-2] = (y[:-4] - 8.0 * y[1:-3] + 8.0 * y[3:-1] - y[4:]) / (12.0 * h)
    d[0] = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / (12.0 * h)
    d[1] = (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]) / (12.0 * h)
    d[-2] = (3.0 * y[-1] + 10.0 * y[-2] - 18.0 * y[-3] + 6.0 * y[-4] - y[-5]) / (12.0 * h)
    d[-1] = (25.0 * y[-1] - 48.0 * y[-2] + 36.0 * y[-3] - 16.0 * y[-4] + 3.0 * y[-5]) / (12.0 * h)
    return d


# ---------------------------------------------------------------------------
# pointwise criterion: nonholonomic extremal vs unconstrained extremal
# ---------------------------------------------------------------------------

def check_unconstrained(sys: SystemSpec, traj: Trajectory,
                        tol: float = POINTWISE_TOL, _tables=None) -> ComparisonReport:
    """Max over samples of the Euler-Lagrange covector paired with d'."""
    tab = _tables if _tables is not None else trajectory_tables(sys, traj)
    per_sample = np.max(np.abs(tab.sample.psi_p), axis=1)
    return _make_report("NH_IS_UNCONSTRAINED", float(np.max(per_sample)), tol,
                        len(traj), per_sample)


# ---------------------------------------------------------------------------
# generator pairs and the integral criterion
# ---------------------------------------------------------------------------

def _bump_profiles(t: np.ndarray, n: int, k_dim: int, seed: int):
    """n smooth end-point-vanishing d-direction profiles; draws are sequential
    in pair index so enlarging n extends the family instead of reshuffling it."""
    rng = np.random.default_rng(seed)
    t0, t1 = float(t[0]), float(t[-1])
    span = t1 - t0
    dirs = np.empty((n, k_dim))
    freqs = np.empty(n)
    for j in range(n):
        u = rng.normal(size=k_dim)
        dirs[j] = u / np.linalg.norm(u)
        freqs[j] = j + 1
    def eval_at(tau):
        s = (np.asarray(tau, dtype=float) - t0) / span
        win = np.sin(np.pi * freqs[:, None] * s[None, :]) ** 2  # (n, Nt)
        return win[..., None] * dirs[:, None, :]  # (n, Nt, k)
    return eval_at


def generate_vak_pairs(sys: SystemSpec, traj: Trajectory, n: int,
                       seed: int = DEFAULT_SEED, _tables=None) -> list:
    """Closed generator pairs of variations tangent to the constraints.

    Builds n raw pairs from bump profiles, transports the vertical part from
    b(t0) = 0 by RK4 along the trajectory, and returns unit-norm null-space
    combinations whose vertical part also vanishes at t1.  At least
    n - dim(d') closed pairs come back.
    """
    m = sys.dim - sys.k
    if n < m + 1:
        raise ContractError(f"need at least dim(d') + 1 = {m + 1} raw pairs, got {n}")
    tab = _tables if _tables is not None else trajectory_tables(sys, traj)
    t = traj.t
    h = traj.step
    N = t.shape[0]
    profiles = _bump_profiles(t, n, sys.k, seed)
    a_s = profiles(t)                      # (n, N, k) at samples
    a_m = profiles(t[:-1] + 0.5 * h)       # (n, N-1, k) at midpoints
    B = np.zeros((N, n, m))
    s, md = tab.sample, tab.mid

    def rhs(G_b, R_a, a_rows, Y):
        return -(Y @ G_b.T + a_rows @ R_a.T)

    for i in range(N - 1):
        Y = B[i]
        k1 = rhs(s.G_b[i], s.R_a[i], a_s[:, i], Y)
        k2 = rhs(md.G_b[i], md.R_a[i], a_m[:, i], Y + 0.5 * h * k1)
        k3 = rhs(md.G_b[i], md.R_a[i], a_m[:, i], Y + 0.5 * h * k2)
        k4 = rhs(s.G_b[i + 1], s.R_a[i + 1], a_s[:, i + 1], Y + h * k3)
        B[i + 1] = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    ends = B[-1]  # (n, m): b_j(t1)
    u_svd, sing, vh = np.linalg.svd(ends.T, full_matrices=True)
    cutoff = (sing[0] * 1e-10) if sing.size and sing[0] > 0 else 0.0
    rank = int(np.sum(sing > cutoff))
    combos = vh[rank:]  # rows: coefficient vectors with ends.T @ kappa = 0
    pairs = []
    for kappa in combos:
        a = np.einsum("j,jtk->tk", kappa, a_s)
        b = np.einsum("j,jtm->tm", kappa, B.transpose(1, 0, 2))
        if max(np.max(np.abs(b[0])), np.max(np.abs(b[-1])),
               np.max(np.abs(a[0])), np.max(np.abs(a[-1]))) > 1e-9:
            raise NumericalError("generator closure failed: end-point residual > 1e-9")
        pairs.append(GeneratorPair(t=t, a=a, b=b))
    return pairs


def _integral_tables(sys: SystemSpec, tab):
    """Per-sample covector pairings entering the integral criterion."""
    split = sys.splitting
    s = tab.sample
    base = np.einsum("ta,aj->tj", s.AtLq, split.dprime_basis)
    w_dp = np.einsum("ta,ab,tjb->tj", s.Lv, split.P, s.br_dp)
    w_d = np.einsum("ta,ab,tib->ti", s.Lv, split.Pprime, s.br_d)
    return base, w_dp, w_d


def _pair_integral(base, w_dp, w_d, pair: GeneratorPair, h: float) -> float:
    integrand = (np.einsum("tj,tj->t", base + w_dp, pair.b)
                 - np.einsum("ti,ti->t", w_d, pair.a))
    return _simpson_uniform(integrand, h)


def check_nh_is_vak_integral(sys: SystemSpec, traj: Trajectory, n: int = 8,
                             seed: int = DEFAULT_SEED, tol: float = INTEGRAL_TOL,
                             workers: int = 1, _tables=None) -> ComparisonReport:
    """Integral criterion over closed generator pairs.

    For each closed pair the horizontal-derivative side is integrated against
    the vertical part and the bracket side against the horizontal part; a
    nonholonomic trajectory is vakonomic exactly when all such integrals
    vanish.  Residuals are normalized by (1 + sup-norm of the pair).
    """
    tab = _tables if _tables is not None else trajectory_tables(sys, traj)
    pairs = generate_vak_pairs(sys, traj, n, seed, _tables=tab)
    base, w_dp, w_d = _integral_tables(sys, tab)
    h = traj.step

    def one(pair):
        return abs(_pair_integral(base, w_dp, w_d, pair, h)) / (1.0 + pair.sup_norm())

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_pair = list(pool.map(one, pairs))
    else:
        per_pair = [one(p) for p in pairs]
    per_pair = np.asarray(per_pair)
    residual = float(np.max(per_pair)) if per_pair.size else 0.0
    return _make_report("NH_IS_VAK_INTEGRAL", residual, tol, len(pairs), per_pair)


# ---------------------------------------------------------------------------
# multiplier criterion
# ---------------------------------------------------------------------------

def check_nh_is_vak_multiplier(sys: SystemSpec, traj: Trajectory,
                               m_samples: int = 200, tol: float = INTEGRAL_TOL,
                               _tables=None):
    """Least-squares search for a transported multiplier killing all [v, d].

    Every solution of the multiplier equation is a particular solution plus
    fundamental-matrix columns; the initial condition is chosen by linear
    least squares to minimize the pairing of the multiplier with the
    d'-parts of brackets [v(t), a] over d-basis directions a.  Returns the
    report and the minimizing multiplier path.
    """
    tab = _tables if _tables is not None else trajectory_tables(sys, traj)
    m = sys.dim - sys.k
    N = tab.t.shape[0]
    ics = np.vstack([np.zeros((1, m)), np.eye(m)])
    mask = np.zeros(m + 1, dtype=bool)
    mask[1:] = True  # fundamental columns carry no forcing
    sol = _transport_multiplier(tab, ics, homogeneous_mask=mask)  # (N, m+1, m)
    lam_p = sol[:, 0, :]
    fund = sol[:, 1:, :]  # fund[t, j, :] = homogeneous solution with IC e_j

    idx = np.unique(np.linspace(0, N - 1, max(2, min(m_samples, N))).round().astype(int))
    R_a = tab.sample.R_a  # (N, m, k)
    # rows over (t, i): <lam_p + c . fund, [v(t), D_i]> must vanish
    A_rows = np.einsum("tjm,tmi->tij", fund[idx], R_a[idx])
    A_ls = A_rows.reshape(-1, m)
    target = -np.einsum("tm,tmi->ti", lam_p[idx], R_a[idx]).reshape(-1)
    if not (np.all(np.isfinite(A_ls)) and np.all(np.isfinite(target))):
        raise NumericalError("multiplier fundamental system is degenerate")
    c, *_ = np.linalg.lstsq(A_ls, target, rcond=None)
    lam_best = lam_p + np.einsum("tjm,j->tm", fund, c)
    pairings = np.einsum("tm,tmi->ti", lam_best[idx], R_a[idx])
    per_sample = np.sqrt(np.mean(pairings ** 2, axis=1))
    residual = float(np.sqrt(np.mean(pairings ** 2)))
    report = _make_report("NH_IS_VAK_MULTIPLIER", residual, tol, len(idx), per_sample)
    return report, MultiplierPath(t=tab.t, lam=lam_best)


def check_vak_is_nh(sys: SystemSpec, traj: Trajectory, lam: MultiplierPath,
                    tol: float = POINTWISE_TOL, cert_tol: float = 1e-6) -> ComparisonReport:
    """Pointwise bracket-annihilation test for a certified vakonomic pair.

    First certifies that (traj, lam) satisfies the modified Euler-Lagrange
    equations (accelerations and multiplier rates are rebuilt by high-order
    differencing of the stored samples, so the input need not come from the
    nonholonomic integrator); then tests <lam(t), [v(t), a]> over d-basis
    directions a.
    """
    if lam.lam.shape[0] != len(traj):
        raise ContractError("multiplier path does not match the trajectory sampling")
    h = traj.step
    vdot = _fd_derivative(traj.vd, h) @ sys.splitting.d_basis.T
    mudot = _fd_derivative(lam.lam, h)
    lam_full = lam.covectors(sys.splitting)
    dual_p = sys.splitting.dual[sys.k:]
    worst = 0.0
    for i in range(len(traj)):
        res = vak_residual(sys, traj.q[i], traj.v[i], vdot[i],
                           lam_full[i], mudot[i] @ dual_p)
        worst = max(worst, float(np.max(np.abs(res))))
    if worst > cert_tol:
        raise ContractError(f"input not vakonomic (vak residual {worst:.3e})")
    tab = trajectory_tables(sys, traj)
    pairings = np.einsum("tm,tmi->ti", lam.lam, tab.sample.R_a)
    per_sample = np.max(np.abs(pairings), axis=1)
    return _make_report("VAK_IS_NH", float(np.max(per_sample)), tol,
                        len(traj), per_sample)


# ---------------------------------------------------------------------------
# splitting independence and the holonomic coincidence check
# ---------------------------------------------------------------------------

def splitting_independence(sys: SystemSpec, traj: Trajectory, trials: int = 10,
                           seed: int = DEFAULT_SEED, n: int = 8) -> float:
    """Max change of the integral-criterion residuals under complement changes.

    Each trial redraws the complement d' through a random d-valued map and
    re-evaluates the per-pair integrals on the same generators, re-decomposed
    in the new splitting; both sides share the original normalization so the
    comparison isolates the integrand identity.
    """
    tab = trajectory_tables(sys, traj)
    pairs = generate_vak_pairs(sys, traj, n, seed, _tables=tab)
    base, w_dp, w_d = _integral_tables(sys, tab)
    h = traj.step
    ref = np.array([_pair_integral(base, w_dp, w_d, p, h) / (1.0 + p.sup_norm())
                    for p in pairs])
    split = sys.splitting
    D, Dp = split.d_basis, split.dprime_basis
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        Z = rng.uniform(-1.0, 1.0, (sys.k, sys.dim - sys.k))
        deltaP = D @ Z @ split.dual[sys.k:]
        new_split = change_complement(split, deltaP)
        sys2 = replace(sys, splitting=new_split)
        tab2 = trajectory_tables(sys2, traj)
        base2, w_dp2, w_d2 = _integral_tables(sys2, tab2)
        for ref_val, p in zip(ref, pairs):
            xi = p.a @ D.T + p.b @ Dp.T  # full generator, splitting-free
            a2 = xi @ new_split.dual[:sys.k].T
            b2 = xi @ new_split.dual[sys.k:].T
            p2 = GeneratorPair(t=p.t, a=a2, b=b2)
            val = _pair_integral(base2, w_dp2, w_d2, p2, h) / (1.0 + p.sup_norm())
            worst = max(worst, abs(val - ref_val))
    return worst


def holonomic_variation_check(sys: SystemSpec, traj: Trajectory, n: int = 10,
                              seed: int = DEFAULT_SEED) -> float:
    """Max d'-component of lifted-variation velocities for integrable d.

    Meaningful only when d is closed under the bracket: then variations
    generated inside d stay tangent to the constraints, so the d'-part of
    the lifted velocity must vanish identically.
    """
    split = sys.splitting
    if sys.dim == sys.k:
        return 0.0
    for i in range(sys.k):
        for j in range(i + 1, sys.k):
            from .lie import bracket
            br = bracket(sys.algebra, split.d_basis[:, i], split.d_basis[:, j])
            if np.max(np.abs(split.Pprime @ br)) > 1e-12:
                raise ContractError(
                    f"constraint subspace is not bracket-closed (d-basis pair {i}, {j})")
    t = traj.t
    span = float(t[-1] - t[0])
    rng = np.random.default_rng(seed)
    dual_p = split.dual[sys.k:]
    worst = 0.0
    for j in range(n):
        u = rng.normal(size=sys.k)
        u /= np.linalg.norm(u)
        freq = (j % n) + 1
        s = (t - t[0]) / span
        prof = np.sin(np.pi * freq * s) ** 2
        dprof = (np.pi * freq / span) * np.sin(2.0 * np.pi * freq * s)
        w = prof[:, None] * (split.d_basis @ u)[None, :]
        wdot = dprof[:, None] * (split.d_basis @ u)[None, :]
        for i in range(len(traj)):
            _, dv = variation_lift(sys.frame, StatePoint(traj.q[i], traj.v[i]),
                                   w[i], wdot[i])
            worst = max(worst, float(np.max(np.abs(dual_p @ dv))))
    return worst
