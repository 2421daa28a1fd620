"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are collected in ``conftest.ACCEPTANCE_LINES`` and printed in the
terminal summary.  The round-trip runs are shared through module fixtures.
"""
import json
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from conftest import flight_data, linear_model, record_criterion, textbook_kf
from rrr_ekf.aircraft import builtin_model
from rrr_ekf.diagnostics import crb_percent, weak_parameter_screen
from rrr_ekf.ekf import ekf_forward, rts_smooth
from rrr_ekf.io import write_report
from rrr_ekf.simulator import SimConfig, simulate_dataset
from rrr_ekf.statespace import numeric_jacobian
from rrr_ekf.tuning import RecipeConfig, compute_costs, estimate

SEEDS = tuple(range(10))
N_SAMPLES = 2000
DT = 0.02
ITERATIONS = 100
# J4 is a bias term that sits near zero, so its relative spread is meaningless
PLATEAU_COSTS = (0, 1, 2, 4, 5, 6, 7)


def _quiet(fn, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fn(*args, **kwargs)


def _simulate(seed):
    return simulate_dataset(SimConfig(case=1, N=N_SAMPLES, dt=DT, seed=seed))


@pytest.fixture(scope="module")
def round_trips():
    out = []
    for seed in SEEDS:
        sim = _simulate(seed)
        start = time.perf_counter()
        rep = _quiet(estimate, sim.model, sim.data, RecipeConfig(max_iterations=ITERATIONS))
        out.append((sim, rep, time.perf_counter() - start))
    return out


@pytest.fixture(scope="module")
def method_runs(round_trips):
    sim, ref, _ = round_trips[0]
    cfg = RecipeConfig(max_iterations=ITERATIONS)
    return sim, ref, {m: _quiet(estimate, sim.model, sim.data, cfg, m) for m in ("mt", "ms")}


def test_criterion_1_round_trip(round_trips):
    z = np.array([np.abs(rep.theta_hat - sim.truth.theta) / rep.sigma_theta
                  for sim, rep, _ in round_trips])
    truth = round_trips[0][0].truth
    Q_ratio = np.mean([np.diag(rep.Q) for _, rep, _ in round_trips], axis=0) / truth.Q_diag
    R_ratio = np.mean([np.diag(rep.R) for _, rep, _ in round_trips], axis=0) / truth.R_diag
    times = np.array([t for _, _, t in round_trips])
    ratios = np.concatenate([Q_ratio, R_ratio])
    ok = bool(z.max() <= 5.0 and np.all((ratios >= 0.5) & (ratios <= 2.0)) and times.max() < 60.0)
    record_criterion(1, ok, f"max |dtheta|/sigma = {z.max():.2f} over {len(SEEDS)} seeds; "
                            f"mean Q/Q* = {np.round(Q_ratio, 2)}, mean R/R* = {np.round(R_ratio, 2)}; "
                            f"runtime mean {times.mean():.1f} s, max {times.max():.1f} s")
    assert z.max() <= 5.0
    assert np.all((ratios >= 0.5) & (ratios <= 2.0))
    assert times.max() < 60.0


def test_criterion_2_cost_calibration(round_trips):
    m, n = 5, 3
    J = np.array([rep.costs for _, rep, _ in round_trips])
    cv = np.array([np.std(rep.cost_history[-20:], axis=0) / np.abs(np.mean(rep.cost_history[-20:], axis=0))
                   for _, rep, _ in round_trips])[:, PLATEAU_COSTS]
    in_m = (J[:, :3] >= m - 1) & (J[:, :3] <= m + 1)
    in_n = (J[:, 5:8] >= n - 1) & (J[:, 5:8] <= n + 1)
    small = J[:, 3] < 0.01
    ok = bool(in_m.all() and in_n.all() and small.all() and cv.max() < 0.05)
    record_criterion(2, ok, f"J1-J3 in [{J[:, :3].min():.3f}, {J[:, :3].max():.3f}], "
                            f"J6-J8 in [{J[:, 5:8].min():.3f}, {J[:, 5:8].max():.3f}], "
                            f"max J4 = {J[:, 3].max():.2e}, max cost CV over last 20 iterations = {cv.max():.4f}")
    assert in_m.all() and in_n.all() and small.all()
    assert cv.max() < 0.05


def test_criterion_3_method_separation(method_runs):
    sim, ref, runs = method_runs
    Qt, Rt = sim.truth.Q_diag, sim.truth.R_diag
    under = np.diag(runs["ms"].Q) <= Qt / 10.0
    differs = {name: not (np.allclose(np.diag(r.Q), np.diag(ref.Q), rtol=0.1)
                          and np.allclose(np.diag(r.R), np.diag(ref.R), rtol=0.1))
               for name, r in runs.items()}
    ok = bool(under.sum() >= 2 and all(differs.values()))
    record_criterion(3, ok, f"MS Q/Q* = {np.array2string(np.diag(runs['ms'].Q) / Qt, precision=2)} "
                            f"({under.sum()} of 3 channels >= 10x under); "
                            f"MT Q/Q* = {np.array2string(np.diag(runs['mt'].Q) / Qt, precision=2)}; "
                            f"MT R/R* = {np.array2string(np.diag(runs['mt'].R) / Rt, precision=2)}")
    assert under.sum() >= 2
    assert all(differs.values())


def _rel(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def test_criterion_4_oracle_equivalence():
    A = np.array([[0.95, 0.1], [-0.1, 0.9]])
    C = np.array([[1.0, 0.0], [0.5, 1.0]])
    Q, R = np.diag([0.01, 0.02]), np.diag([0.1, 0.05])
    rng = np.random.default_rng(0)
    x, Z = np.array([1.0, -0.5]), []
    for _ in range(100):
        Z.append(C @ x + rng.multivariate_normal(np.zeros(2), R))
        x = A @ x + rng.multivariate_normal(np.zeros(2), Q)
    Z = np.array(Z)
    traj = ekf_forward(linear_model(A, C), flight_data(Z), [], np.zeros(2), np.eye(2), Q, R)
    ref = textbook_kf(A, C, Q, R, np.zeros(2), np.eye(2), Z)
    kf_err = max(_rel(getattr(traj, k), ref[k]) for k in ("x_prior", "P_prior", "x_post", "P_post"))

    # three-step scalar smoother written out by hand
    a, q, r, z = 0.9, 1.0, 1.0, [0.5, -0.2, 0.8]
    sm = rts_smooth(ekf_forward(linear_model([[a]], [[1.0]]), flight_data(z), [], [0.0], [[1.0]],
                                [[q]], [[r]]))
    xp, pp, xf, pf = [0.0], [1.0], [], []
    for k in range(3):
        g = pp[k] / (pp[k] + r)
        xf.append(xp[k] + g * (z[k] - xp[k]))
        pf.append((1 - g) * pp[k])
        xp.append(a * xf[k])
        pp.append(a * a * pf[k] + q)
    xs, ps = [0.0, 0.0, xf[2]], [0.0, 0.0, pf[2]]
    for k in (1, 0):
        g = pf[k] * a / pp[k + 1]
        xs[k] = xf[k] + g * (xs[k + 1] - xp[k + 1])
        ps[k] = pf[k] + g * g * (ps[k + 1] - pp[k + 1])
    rts_err = max(_rel(sm.x_smooth[:, 0], np.array(xs)), _rel(sm.P_smooth[:, 0, 0], np.array(ps)))
    ok = kf_err < 1e-10 and rts_err < 1e-10
    record_criterion(4, ok, f"filter vs textbook {kf_err:.1e} over 100 steps; smoother vs hand recursion {rts_err:.1e}")
    assert kf_err < 1e-10
    assert rts_err < 1e-10


def _five_point_jacobian(fn, at):
    """Fourth-order central differences with steps unrelated to the library default."""
    at = np.asarray(at, dtype=float)
    h = 1e-3 * np.maximum(np.abs(at), 0.1)
    cols = []
    for j in range(at.size):
        def f(s):
            x = at.copy()
            x[j] += s * h[j]
            return np.asarray(fn(x), dtype=float)
        cols.append((-f(2) + 8 * f(1) - 8 * f(-1) + f(-2)) / (12 * h[j]))
    return np.column_stack(cols)


def _random_point(model, rng):
    x = rng.uniform(-0.2, 0.2, model.n_states)
    th = np.asarray(model.theta_init) * rng.uniform(0.5, 1.5, model.n_params) + rng.normal(0, 0.05, model.n_params)
    u = rng.uniform(-0.1, 0.1, len(model.input_names))
    if "V_m" in model.input_names:
        u[model.input_names.index("V_m")] = rng.uniform(300.0, 500.0)
    return np.concatenate([x, th]), u


def test_criterion_5_jacobians():
    rng = np.random.default_rng(2024)
    worst = {}
    for case in (1, 2, 3):
        model = builtin_model(case, qbar=190.0) if case == 2 else builtin_model(case)
        for _ in range(100):
            xa, u = _random_point(model, rng)
            for label, fn in (("f", lambda v: model.augmented_dynamics(v, u)),
                              ("h", lambda v: model.observe(v, u))):
                J1 = numeric_jacobian(fn, xa)
                J2 = _five_point_jacobian(fn, xa)
                err = np.max(np.abs(J1 - J2)) / np.max(np.abs(J2))
                key = f"case {case} {label}"
                worst[key] = max(worst.get(key, 0.0), err)
    top = max(worst.values())
    record_criterion(5, top < 1e-5, f"worst relative difference {top:.1e} over 100 random states "
                                    f"per case (dynamics and measurement)")
    assert top < 1e-5, worst


def test_criterion_6_diagnostics(round_trips):
    sym = all(np.array_equal(rep.corr_100, rep.corr_100.T) and np.all(np.diag(rep.corr_100) == 100)
              for _, rep, _ in round_trips)
    pct = float(crb_percent([4.6469], [[0.0179 ** 2]])[0][0])
    crb_ok = round(pct, 3) == 0.385
    flagged = [weak_parameter_screen(rep) for _, rep, _ in round_trips]
    seed0 = flagged[0]
    hit0 = "theta_0" in seed0 and "C_A_delta_e" in seed0
    freq = {name: sum(name in f for f in flagged) for name in ("theta_0", "C_A_delta_e")}
    ok = bool(sym and crb_ok and hit0)
    record_criterion(6, ok, f"corr_100 symmetric with diagonal 100 on all runs: {sym}; %CRB = {pct:.4f}; "
                            f"seed 0 weak set {seed0}; theta_0 flagged on {freq['theta_0']}/{len(SEEDS)} seeds, "
                            f"C_A_delta_e on {freq['C_A_delta_e']}/{len(SEEDS)}")
    assert sym
    assert crb_ok
    assert hit0


def test_criterion_7_chi_square():
    rng = np.random.default_rng(7)
    A = np.array([[0.9, 0.2, 0.0], [-0.2, 0.85, 0.1], [0.0, 0.0, 0.95]])
    C = rng.normal(size=(5, 3))
    Q, R = np.diag([0.05, 0.02, 0.01]), np.diag([0.1, 0.2, 0.05, 0.3, 0.15])
    N = 10_000
    x, Z = np.zeros(3), np.empty((N, 5))
    for k in range(N):
        Z[k] = C @ x + rng.multivariate_normal(np.zeros(5), R)
        x = A @ x + rng.multivariate_normal(np.zeros(3), Q)
    traj = rts_smooth(ekf_forward(linear_model(A, C), flight_data(Z), [], np.zeros(3), np.eye(3) * 1e-12, Q, R))
    J1 = compute_costs(traj).J1
    band = 3 * np.sqrt(2 * 5 / N)
    ok = abs(J1 - 5) <= band
    record_criterion(7, ok, f"J1 = {J1:.4f}, allowed 5 +/- {band:.4f} at N = {N}")
    assert ok


def test_criterion_8_determinism(tmp_path):
    def run(tag):
        sim = simulate_dataset(SimConfig(case=1, N=N_SAMPLES, dt=DT, seed=3))
        rep = _quiet(estimate, sim.model, sim.data, RecipeConfig(max_iterations=10))
        files = write_report(rep, tmp_path / tag)
        return json.dumps(rep.to_dict(), sort_keys=True), {Path(p).name: Path(p).read_bytes() for p in files}

    a, b = run("a"), run("b")
    ok = a[0] == b[0] and a[1] == b[1]
    record_criterion(8, ok, f"report state and {len(a[1])} report files identical across two runs: {ok}")
    assert a[0] == b[0]
    assert a[1] == b[1]

