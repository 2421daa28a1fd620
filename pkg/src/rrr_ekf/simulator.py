"""Synthetic flight records for desk-scale validation.

States are propagated with the same one-step-per-sample RK4 the filter uses,
then perturbed by discrete process noise ``w_k ~ N(0, Q)``; measurements get
additive ``v_k ~ N(0, R)``.  The built-in input sets trim the aircraft at the
requested parameters and add elevator (or aileron/rudder) doublets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .aircraft import CaseId, builtin_model, parse_case
from .errors import ConfigError, DivergenceError
from .reference_values import Q_REF, R_REF, theta_ref
from .statespace import (ChannelSeries, FlightData, InputSchedule, ModelDefinition,
                         _rk4, numeric_jacobian)

__all__ = ["SimConfig", "SimulationResult", "TruthRecord", "doublet_input",
           "simulate_dataset", "trim_case", "builtin_inputs"]


def doublet_input(amplitude_deg: float, t_start: float, t_up: float, t_down: float, *,
                  dt: float = 0.02, span: Optional[float] = None,
                  name: str = "delta_e") -> ChannelSeries:
    """Up-down doublet in radians: ``+A`` on ``[t_start, t_up)``, ``-A`` on ``[t_up, t_down)``.

    ``span`` defaults to ``t_down`` plus one sample.
    """
    if not (0 <= t_start < t_up < t_down):
        raise ConfigError(f"doublet needs 0 <= t_start < t_up < t_down, got "
                          f"{t_start}, {t_up}, {t_down}")
    if span is None:
        span = t_down + dt
    if span < t_down:
        raise ConfigError("doublet extends beyond the record span")
    n = int(round(span / dt)) + 1
    t = np.arange(n) * dt
    a = math.radians(amplitude_deg)
    # sample index boundaries, rounded to absorb floating error in t_up/dt
    i0, i1, i2 = (int(round(v / dt)) for v in (t_start, t_up, t_down))
    v = np.zeros(n)
    v[i0:i1] = a
    v[i1:i2] = -a
    return ChannelSeries(name, t, v)


@dataclass(frozen=True)
class SimConfig:
    """Settings of one synthetic record.

    ``case`` selects a built-in model unless ``model`` is given.  Unset
    ``theta_true``/``Q_diag``/``R_diag`` default to the reference
    estimates of the case.  ``doublets`` holds ``(amplitude_deg, t_start,
    t_up, t_down)`` tuples for the primary control(s); ``inputs`` supplies
    recorded channels instead of the built-in set.
    """

    case: Optional[object] = 1
    model: Optional[ModelDefinition] = None
    theta_true: Optional[np.ndarray] = None
    Q_diag: Optional[np.ndarray] = None
    R_diag: Optional[np.ndarray] = None
    x0: Optional[np.ndarray] = None
    dt: float = 0.02
    N: int = 2000
    seed: int = 0
    doublets: Optional[Sequence[tuple]] = None
    inputs: Optional[Mapping[str, ChannelSeries]] = None
    airspeed: float = 400.0
    lateral_amplitude: float = 0.01

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt!r}")
        if int(self.N) < 10:
            raise ConfigError(f"N must be >= 10, got {self.N!r}")
        for name in ("Q_diag", "R_diag"):
            v = getattr(self, name)
            if v is not None and np.any(np.asarray(v, dtype=float) < 0):
                raise ConfigError(f"{name} entries must be >= 0")
        if self.model is None and self.case is None:
            raise ConfigError("either case or model must be given")


@dataclass(frozen=True)
class TruthRecord:
    theta: np.ndarray
    Q_diag: np.ndarray
    R_diag: np.ndarray
    states: np.ndarray
    process_noise: np.ndarray
    measurement_noise: np.ndarray
    clean_measurements: np.ndarray


@dataclass(frozen=True)
class SimulationResult:
    data: FlightData
    truth: TruthRecord
    model: ModelDefinition = field(repr=False)

    @property
    def channels(self):
        return self.data.channels

    @property
    def measurements(self):
        return self.data.Z


def _newton(fn, x, iters=50, tol=1e-13):
    for _ in range(iters):
        r = fn(x)
        if np.max(np.abs(r)) < tol:
            break
        J = numeric_jacobian(fn, x)
        x = x - np.linalg.solve(J, r)
    return x


def trim_case(model: ModelDefinition, theta, airspeed: float = 400.0):
    """Trim states and controls of a built-in model at parameters ``theta``.

    Longitudinal cases: wings level, ``q = 0`` and pitch equal to angle of
    attack, solving for ``(alpha, delta_e)``.  Lateral case: ``p = r = phi = 0``
    with small fixed longitudinal inputs, solving for ``(beta, delta_a, delta_r)``.
    Returns ``(x_trim, u_trim)`` in the model's state and input order.
    """
    case = CaseId(model.kernel[0])
    th = np.asarray(theta, dtype=float)
    if case is CaseId.Case3Lateral:
        theta_m, alpha_m = 0.05, 0.05

        def res(v):
            x = np.array([v[0], 0.0, 0.0, 0.0])
            u = np.array([v[1], v[2], theta_m, 0.0, alpha_m])
            f = model.dynamics(x, th, u)
            return np.array([f[0], f[1], f[3]])

        v = _newton(res, np.zeros(3))
        return np.array([v[0], 0.0, 0.0, 0.0]), np.array([v[1], v[2], theta_m, 0.0, alpha_m])

    def u_of(a, de):
        if case is CaseId.Case1Longitudinal:
            return np.array([de, 0.0, 0.0, 0.0, 0.0, a])
        return np.array([de, 0.0, 0.0, airspeed, 0.0, 0.0, a])

    def res(v):
        x = np.array([v[0], 0.0, v[0]])
        return model.dynamics(x, th, u_of(v[0], v[1]))[:2]

    v = _newton(res, np.array([0.05, 0.0]))
    return np.array([v[0], 0.0, v[0]]), u_of(v[0], v[1])


def _default_doublets(case, span):
    if case is CaseId.Case3Lateral:
        return [(3.0, 0.05 * span, 0.10 * span, 0.15 * span),
                (-3.0, 0.55 * span, 0.60 * span, 0.65 * span)]
    # one short doublet: roughly the information content of the reference
    # case-1 standard deviations at a 40 s record
    return [(1.0, 0.05 * span, 0.08 * span, 0.11 * span)]


def _doublet_sum(doublets, t, dt):
    out = np.zeros(t.size)
    for amp, t0, t1, t2 in doublets:
        out += doublet_input(amp, t0, t1, t2, dt=dt, span=t[-1]).values[: t.size]
    return out


def builtin_inputs(model: ModelDefinition, theta, times, doublets=None,
                   airspeed: float = 400.0, lateral_amplitude: float = 0.01):
    """Trimmed inputs with doublets; returns ``(channels, x_trim)``.

    For the longitudinal cases the measured angle-of-attack input channel is
    the alpha history of a noise-free run in which that input follows the
    state, so the record is self-consistent.
    """
    case = CaseId(model.kernel[0])
    t = np.asarray(times, dtype=float)
    dt = float(t[1] - t[0])
    span = float(t[-1])
    doublets = _default_doublets(case, span) if doublets is None else list(doublets)
    x_trim, u_trim = trim_case(model, theta, airspeed)
    exc = _doublet_sum(doublets, t, dt)
    a = lateral_amplitude
    cols = {}
    if case is CaseId.Case3Lateral:
        dr_exc = _doublet_sum([(-0.5 * d[0],) + tuple(d[1:]) for d in doublets], t, dt)
        # rudder doublets are delayed so both controls are excited separately
        shift = int(round(0.2 * span / dt))
        dr_exc = np.roll(dr_exc, shift)
        dr_exc[:shift] = 0.0
        cols["delta_a"] = u_trim[0] + exc
        cols["delta_r"] = u_trim[1] + dr_exc
        cols["theta_m"] = u_trim[2] + 0.2 * a * np.sin(0.7 * t)
        cols["q_m"] = 0.2 * a * 0.7 * np.cos(0.7 * t)
        cols["alpha_m"] = u_trim[4] + 0.1 * a * np.sin(1.3 * t)
        return {k: ChannelSeries(k, t, v) for k, v in cols.items()}, x_trim
    cols["delta_e"] = u_trim[0] + exc
    cols["phi_m"] = a * np.sin(0.4 * t)
    cols["beta_m"] = 0.5 * a * np.sin(0.9 * t + 1.0)
    cols["p_m"] = a * 0.4 * np.cos(0.4 * t)
    cols["r_m"] = 0.5 * a * np.sin(0.3 * t + 0.5)
    if case is CaseId.Case2Longitudinal:
        cols["V_m"] = np.full(t.size, airspeed)
        # a full aileron roll between 30% and 60% of the record separates
        # alpha-dot from q through the gravity terms
        t0, t1 = 0.3 * span, 0.6 * span
        s = np.clip((t - t0) / (t1 - t0), 0.0, 1.0)
        cols["phi_m"] = cols["phi_m"] + math.pi * (1.0 - np.cos(math.pi * s))
        rate = np.where((t > t0) & (t < t1), math.pi * math.pi / (t1 - t0) * np.sin(math.pi * s), 0.0)
        cols["p_m"] = cols["p_m"] + rate
    # noise-free pilot run with alpha_m tied to the alpha state
    names = model.input_names
    ia = names.index("alpha_m")
    U = np.column_stack([cols[n] if n != "alpha_m" else np.zeros(t.size) for n in names])
    Um = 0.5 * (U[:-1] + U[1:])
    th = np.asarray(theta, dtype=float)

    def f(x, th_, u):
        u = u.copy()
        u[ia] = x[0]
        return model.dynamics(x, th_, u)

    alpha = np.empty(t.size)
    x = x_trim.copy()
    alpha[0] = x[0]
    for k in range(t.size - 1):
        x = _rk4(f, x, th, U[k], Um[k], U[k + 1], dt, t[k])
        alpha[k + 1] = x[0]
    cols["alpha_m"] = alpha
    return {k: ChannelSeries(k, t, v) for k, v in cols.items()}, x_trim


def simulate_dataset(config: SimConfig) -> SimulationResult:
    """Simulate one noisy record; deterministic for a given ``config.seed``."""
    if config.model is not None:
        model = config.model
        case = None
    else:
        case = parse_case(config.case)
        overrides = {}
        if case is CaseId.Case2Longitudinal:
            c = builtin_model(case).constants
            if c.qbar is None and c.rho is None:
                overrides["qbar"] = 0.5 * 0.002377 * config.airspeed ** 2
        model = builtin_model(case, **overrides)
    N = int(config.N)
    n, m = model.n_states, model.n_meas
    theta = config.theta_true
    if theta is None:
        if case is None:
            if model.theta_init is None:
                raise ConfigError("custom model needs theta_true")
            theta = model.theta_init
        else:
            theta = theta_ref(case)
    theta = np.asarray(theta, dtype=float)
    Qd = np.asarray(config.Q_diag if config.Q_diag is not None else
                    (Q_REF[case] if case is not None else np.zeros(n)), dtype=float)
    Rd = np.asarray(config.R_diag if config.R_diag is not None else
                    (R_REF[case] if case is not None else np.zeros(m)), dtype=float)
    if Qd.shape != (n,) or Rd.shape != (m,) or theta.shape != (model.n_params,):
        raise ConfigError("theta_true/Q_diag/R_diag have the wrong length")
    times = np.arange(N) * config.dt
    if config.inputs is not None:
        channels = dict(config.inputs)
        x_start = None
    elif case is not None:
        channels, x_start = builtin_inputs(model, theta, times, config.doublets,
                                           config.airspeed, config.lateral_amplitude)
    else:
        raise ConfigError("custom model needs recorded input channels")
    x0 = config.x0 if config.x0 is not None else x_start
    if x0 is None:
        x0 = np.zeros(n)
    x0 = np.asarray(x0, dtype=float)

    sched = InputSchedule(channels, model.input_names)
    U, Um = sched.rk4_grid(times)
    rng = np.random.default_rng(config.seed)
    W = rng.standard_normal((N - 1, n)) * np.sqrt(Qd)
    Vn = rng.standard_normal((N, m)) * np.sqrt(Rd)
    X = np.empty((N, n))
    Y = np.empty((N, m))
    X[0] = x0
    for k in range(N):
        Y[k] = model.measurement(X[k], model.dynamics(X[k], theta, U[k]), theta, U[k])
        if k + 1 < N:
            X[k + 1] = _rk4(model.dynamics, X[k], theta, U[k], Um[k], U[k + 1],
                            config.dt, times[k]) + W[k]
            if not np.all(np.isfinite(X[k + 1])):
                raise DivergenceError(f"simulated trajectory diverged at step {k + 1}",
                                      step=k + 1, time=float(times[k + 1]))
    Z = Y + Vn
    data = FlightData(times, Z, model.meas_names, channels)
    truth = TruthRecord(theta=theta, Q_diag=Qd, R_diag=Rd, states=X, process_noise=W,
                        measurement_noise=Vn, clean_measurements=Y)
    return SimulationResult(data=data, truth=truth, model=model)
