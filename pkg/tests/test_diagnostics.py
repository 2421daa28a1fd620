import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from rrr_ekf.diagnostics import (EstimationReport, autocorrelation, correlation_matrix, crb_percent,
                                 noise_samples, round_half_away, weak_parameter_screen)
from rrr_ekf.errors import ConfigError


def test_crb_percent_examples():
    pct, inf = crb_percent([-0.09], [[1.2e-7]])
    assert pct[0] == pytest.approx(100 * np.sqrt(1.2e-7) / 0.09, rel=1e-12)
    assert pct[0] == pytest.approx(0.385, abs=5e-4)
    assert not inf[0]
    assert crb_percent([2.0], [[0.0]])[0][0] == 0.0
    assert crb_percent([-17.0], [[1.7 ** 2]])[0][0] == pytest.approx(10.0, rel=1e-12)


def test_crb_percent_zero_estimate_is_flagged():
    pct, inf = crb_percent([0.0, 1.0], np.diag([1.0, 1.0]))
    assert np.isinf(pct[0]) and inf[0] and not inf[1]
    with pytest.raises(ConfigError):
        crb_percent([1.0], [[-1.0]])


def test_correlation_examples():
    assert correlation_matrix([[4.0, -2.0], [-2.0, 1.0]]).tolist() == [[100, -100], [-100, 100]]
    assert correlation_matrix([[4.0, 1.0], [1.0, 1.0]])[0, 1] == 50
    # 100 * 0.005 rounds half away from zero
    assert correlation_matrix([[1.0, -0.005], [-0.005, 1.0]])[0, 1] == -1
    assert round_half_away([0.5, -0.5, 1.49]).tolist() == [1.0, -1.0, 1.0]


def test_correlation_zero_variance_names_parameter():
    with pytest.raises(ConfigError, match="C_m_q"):
        correlation_matrix(np.diag([1.0, 0.0]), names=("C_N_alpha", "C_m_q"))


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.float64, (4, 6), elements=st.floats(-3, 3)))
def test_correlation_properties(A):
    P = A @ A.T + 1e-3 * np.eye(4)
    C = correlation_matrix(P)
    assert np.array_equal(C, C.T)
    assert np.all(np.diag(C) == 100)
    assert np.all(np.abs(C) <= 100)


def test_autocorrelation_alternating():
    r = autocorrelation(np.array([1.0, -1.0, 1.0, -1.0]), max_lag=2)
    assert r[0] == 1.0
    # biased convention: the lag sum is divided by N, so lag 1 gives -3/4
    assert r[1] == pytest.approx(-0.75)
    ru = autocorrelation(np.array([1.0, -1.0, 1.0, -1.0]), max_lag=2, convention="unbiased")
    assert ru[1] == pytest.approx(-1.0) and ru[2] == pytest.approx(1.0)


def test_autocorrelation_constant_and_zero():
    assert np.allclose(autocorrelation(np.full(20, 3.0), max_lag=5, convention="unbiased"), 1.0)
    assert np.all(autocorrelation(np.zeros(10), max_lag=3) == 0.0)
    with pytest.raises(ConfigError):
        autocorrelation(np.zeros(0))
    with pytest.raises(ConfigError):
        autocorrelation(np.ones(5), convention="fft")


def test_white_noise_is_white():
    x = np.random.default_rng(0).normal(size=(5000, 2))
    r = autocorrelation(x, max_lag=50)
    assert r.shape == (51, 2)
    assert np.all(np.abs(r[1:]) < 3 / np.sqrt(5000) * 1.5)


def test_report_contents(case1_report, case1_sim):
    rep = case1_report
    p = case1_sim.model.n_params
    assert rep.theta_hat.shape == (p,) and rep.corr_100.shape == (p, p)
    assert np.array_equal(rep.theta_trajectory[-1], rep.theta_hat)
    assert rep.cost_history.shape == (rep.iterations, 8)
    assert np.array_equal(rep.costs, rep.cost_history[-1])
    assert np.allclose(rep.sigma_theta, np.sqrt(np.diag(rep.P_theta)))
    assert any("not converged" in f for f in rep.flags)


def test_report_dict_round_trip(case1_report):
    d = json.loads(json.dumps(case1_report.to_dict()))
    back = EstimationReport.from_dict(d)
    for name in EstimationReport._ARRAYS:
        a, b = getattr(case1_report, name), getattr(back, name)
        assert np.array_equal(a, b, equal_nan=a.dtype.kind == "f"), name
    assert back.flags == case1_report.flags
    assert np.array_equal(back.residues.smoothed, case1_report.residues.smoothed)
    with pytest.raises(ConfigError):
        EstimationReport.from_dict({"model_name": "x"})


def test_weak_screen(case1_report):
    rep = case1_report
    assert weak_parameter_screen(rep, threshold=np.inf) == []
    everything = weak_parameter_screen(rep, threshold=0.0)
    assert sorted(everything) == sorted(rep.param_names)
    pct = [rep.pct_crb[rep.param_names.index(n)] for n in everything]
    assert pct == sorted(pct, reverse=True)


def test_weak_screen_spread_across_runs(case1_report):
    rep = case1_report
    other = replace(rep, theta_hat=rep.theta_hat * np.where(np.arange(rep.theta_hat.size) == 2, 2.0, 1.0))
    out = weak_parameter_screen(rep, threshold=np.inf, others=[other], spread_threshold=50.0)
    assert out == [rep.param_names[2]]


def test_noise_samples_shapes(case1_report):
    ns = noise_samples(case1_report.trajectory, max_lag=10)
    N = case1_report.times.size
    assert ns.v.shape == (N, 5) and ns.w.shape == (N - 1, 3)
    assert ns.autocorr_v.shape == (11, 5)
    assert np.all(ns.autocorr_v[0] == 1.0)
