import math

import numpy as np
import pytest

from rrr_ekf.errors import ConfigError
from rrr_ekf.simulator import SimConfig, doublet_input, simulate_dataset, trim_case
from rrr_ekf.statespace import ModelDefinition


def test_doublet_zero_amplitude():
    d = doublet_input(0.0, 0.5, 1.0, 1.5)
    assert np.all(d.values == 0.0)


def test_doublet_counts_and_zero_integral():
    d = doublet_input(2.0, 1.0, 2.0, 3.0, dt=0.05)
    a = math.radians(2.0)
    assert int(np.sum(d.values == a)) == 20
    assert int(np.sum(d.values == -a)) == 20
    assert np.sum(d.values) * 0.05 == pytest.approx(0.0, abs=1e-15)
    assert d.values[0] == 0.0 and d.values[-1] == 0.0


@pytest.mark.parametrize("times", [(1.0, 1.0, 2.0), (1.0, 2.0, 1.5), (-0.1, 1.0, 2.0)])
def test_doublet_ordering(times):
    with pytest.raises(ConfigError):
        doublet_input(1.0, *times)


def test_clean_simulation_has_no_noise():
    sim = simulate_dataset(SimConfig(case=1, N=200, Q_diag=np.zeros(3), R_diag=np.zeros(5)))
    assert np.array_equal(sim.data.Z, sim.truth.clean_measurements)
    assert np.all(sim.truth.process_noise == 0.0)


def test_simulation_is_deterministic():
    a = simulate_dataset(SimConfig(case=1, N=300, seed=7))
    b = simulate_dataset(SimConfig(case=1, N=300, seed=7))
    c = simulate_dataset(SimConfig(case=1, N=300, seed=8))
    assert np.array_equal(a.data.Z, b.data.Z)
    assert not np.array_equal(a.data.Z, c.data.Z)


def test_noise_variances_match_configuration():
    # a single decaying state observed directly keeps the check cheap at N = 1e5
    model = ModelDefinition(
        n_states=1, n_meas=1, n_params=1,
        dynamics=lambda x, th, u: -th[0] * x,
        measurement=lambda x, xd, th, u: x,
        state_names=("x",), meas_names=("z",), param_names=("k",), input_names=())
    sim = simulate_dataset(SimConfig(model=model, theta_true=np.array([1.0]), Q_diag=np.array([0.04]),
                                     R_diag=np.array([0.25]), N=100_000, dt=0.01, inputs={}))
    assert sim.truth.process_noise.var() == pytest.approx(0.04, rel=0.02)
    assert sim.truth.measurement_noise.var() == pytest.approx(0.25, rel=0.02)
    assert np.allclose(sim.data.Z - sim.truth.clean_measurements, sim.truth.measurement_noise)


@pytest.mark.parametrize("case", [1, 2, 3])
def test_builtin_cases_simulate(case):
    sim = simulate_dataset(SimConfig(case=case, N=400))
    m = sim.model
    assert sim.data.Z.shape == (400, m.n_meas)
    assert set(m.input_names) <= set(sim.channels)
    assert np.all(np.isfinite(sim.data.Z))


@pytest.mark.parametrize("case", [1, 2, 3])
def test_trim_zeroes_the_balanced_derivatives(case):
    sim = simulate_dataset(SimConfig(case=case, N=20))
    m = sim.model
    x, u = trim_case(m, sim.truth.theta)
    f = m.dynamics(x, sim.truth.theta, u)
    # longitudinal: alpha-dot and q-dot; lateral: beta-dot, p-dot and r-dot
    idx = [0, 1] if case != 3 else [0, 1, 3]
    assert np.max(np.abs(f[idx])) < 1e-10


def test_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(dt=0.0)
    with pytest.raises(ConfigError):
        SimConfig(N=3)
    with pytest.raises(ConfigError):
        SimConfig(Q_diag=[-1.0, 0.0, 0.0])
    with pytest.raises(ConfigError):
        simulate_dataset(SimConfig(case=1, theta_true=np.zeros(2)))
