"""Continuous-time nonlinear state-space models with exogenous channels.

A :class:`ModelDefinition` bundles the dynamics ``f(x, theta, u)`` and the
measurement ``h(x, xdot, theta, u)``.  The unknown parameters ``theta`` are
appended to the state as random constants, so every routine here works on the
augmented vector ``[x, theta]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import ChannelRangeError, ConfigError, NumericError

__all__ = [
    "ChannelSeries",
    "InputSchedule",
    "FlightData",
    "ModelDefinition",
    "AugmentedState",
    "interpolate_channel",
    "rk4_step",
    "numeric_jacobian",
    "jacobian_steps",
]


@dataclass(frozen=True)
class ChannelSeries:
    """A sampled exogenous channel (angles in radians)."""

    name: str
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or v.shape != t.shape:
            raise ConfigError(f"channel {self.name!r}: times and values must be 1-D of equal length")
        if t.size < 2:
            raise ConfigError(f"channel {self.name!r}: need at least 2 samples")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(v)):
            raise ConfigError(f"channel {self.name!r}: non-finite sample")
        bad = np.nonzero(np.diff(t) <= 0)[0]
        if bad.size:
            raise ConfigError(
                f"channel {self.name!r}: times not strictly increasing at index {bad[0] + 1}"
            )
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


def interpolate_channel(series: ChannelSeries, t: float) -> float:
    """Linearly interpolate ``series`` at time ``t`` (exact at the knots)."""
    times = series.times
    lo, hi = times[0], times[-1]
    if not (lo <= t <= hi):
        raise ChannelRangeError(series.name, t, lo, hi)
    k = int(np.searchsorted(times, t, side="right")) - 1
    if k >= times.size - 1:
        return float(series.values[-1])
    if t == times[k]:
        return float(series.values[k])
    w = (t - times[k]) / (times[k + 1] - times[k])
    return float(series.values[k] + w * (series.values[k + 1] - series.values[k]))


class InputSchedule:
    """The exogenous channels a model reads, in the model's input order."""

    def __init__(self, channels: Mapping[str, ChannelSeries], names: Sequence[str]):
        missing = [n for n in names if n not in channels]
        if missing:
            raise ConfigError(f"missing input channel(s): {', '.join(missing)}")
        self.names = tuple(names)
        self.channels = {n: channels[n] for n in names}

    def at(self, t: float) -> np.ndarray:
        return np.array([interpolate_channel(self.channels[n], t) for n in self.names])

    def sample(self, times: np.ndarray) -> np.ndarray:
        """Vectorised interpolation at many times; shape ``(len(times), n_inputs)``."""
        times = np.asarray(times, dtype=float)
        out = np.empty((times.size, len(self.names)))
        for j, n in enumerate(self.names):
            ch = self.channels[n]
            if times.size and (times.min() < ch.times[0] or times.max() > ch.times[-1]):
                bad = times[(times < ch.times[0]) | (times > ch.times[-1])][0]
                raise ChannelRangeError(n, float(bad), ch.times[0], ch.times[-1])
            out[:, j] = np.interp(times, ch.times, ch.values)
        return out

    def rk4_grid(self, times: np.ndarray):
        """Inputs at each sample and at each interval midpoint, as RK4 consumes them."""
        times = np.asarray(times, dtype=float)
        u = self.sample(times)
        umid = self.sample(0.5 * (times[:-1] + times[1:]))
        return u, umid


@dataclass(frozen=True)
class FlightData:
    """A measured record: sample times, measurement matrix and input channels.

    ``Z`` has one row per sample and one column per measurement, in the
    order of ``meas_names``.
    """

    times: np.ndarray
    Z: np.ndarray
    meas_names: tuple
    channels: Mapping[str, ChannelSeries]

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        z = np.array(self.Z, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ConfigError("flight data needs at least 2 samples")
        if z.ndim != 2 or z.shape[0] != t.size or z.shape[1] != len(self.meas_names):
            raise ConfigError(
                f"measurement matrix shape {z.shape} does not match "
                f"{t.size} samples x {len(self.meas_names)} channels")
        bad = np.nonzero(np.diff(t) <= 0)[0]
        if bad.size:
            raise ConfigError(f"sample times not strictly increasing at index {bad[0] + 1}")
        if not np.all(np.isfinite(z)):
            raise ConfigError("measurement matrix contains non-finite values")
        t.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "Z", z)
        object.__setattr__(self, "meas_names", tuple(self.meas_names))
        object.__setattr__(self, "channels", dict(self.channels))

    @property
    def n_samples(self) -> int:
        return self.times.size

    def inputs(self, names: Sequence[str]) -> InputSchedule:
        return InputSchedule(self.channels, names)


@dataclass(frozen=True)
class ModelDefinition:
    """Nonlinear continuous-time model with measured-input channels.

    ``dynamics(x, theta, u) -> xdot`` and ``measurement(x, xdot, theta, u) -> y``.
    The optional hooks replace the numerical defaults: ``transition`` returns
    ``(x_next_aug, Phi)`` for one discrete step, ``dynamics_jacobian`` and
    ``measurement_jacobian`` return Jacobians with respect to the augmented
    vector.  ``kernel`` names a compiled fast path for built-in models.
    """

    n_states: int
    n_meas: int
    n_params: int
    dynamics: Callable
    measurement: Callable
    state_names: tuple
    meas_names: tuple
    param_names: tuple
    input_names: tuple
    constants: object = None
    theta_init: Optional[np.ndarray] = None
    name: str = "custom"
    transition: Optional[Callable] = None
    dynamics_jacobian: Optional[Callable] = None
    measurement_jacobian: Optional[Callable] = None
    kernel: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        for attr, size in (
            ("state_names", self.n_states),
            ("meas_names", self.n_meas),
            ("param_names", self.n_params),
        ):
            names = tuple(getattr(self, attr))
            if len(names) != size:
                raise ConfigError(f"{attr} has {len(names)} entries, expected {size}")
            object.__setattr__(self, attr, names)
        object.__setattr__(self, "input_names", tuple(self.input_names))
        if self.theta_init is not None:
            th = np.array(self.theta_init, dtype=float)
            if th.shape != (self.n_params,):
                raise ConfigError("theta_init has the wrong length")
            th.setflags(write=False)
            object.__setattr__(self, "theta_init", th)

    @property
    def n_aug(self) -> int:
        return self.n_states + self.n_params

    def split(self, xa):
        return xa[: self.n_states], xa[self.n_states:]

    def augmented_dynamics(self, xa, u):
        """``d/dt [x, theta] = [f(x, theta, u), 0]``."""
        x, th = self.split(xa)
        out = np.zeros(self.n_aug)
        out[: self.n_states] = self.dynamics(x, th, u)
        return out

    def observe(self, xa, u):
        """Composite measurement ``h(x, f(x), theta, u)``."""
        x, th = self.split(xa)
        xdot = self.dynamics(x, th, u)
        return np.asarray(self.measurement(x, xdot, th, u), dtype=float)

    def with_kernel(self, kernel):
        return replace(self, kernel=kernel)


@dataclass(frozen=True)
class AugmentedState:
    x: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        th = np.array(self.theta, dtype=float)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(th))):
            raise NumericError("augmented state is not finite")
        x.setflags(write=False)
        th.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "theta", th)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.theta])

    @classmethod
    def from_vector(cls, v, n_states):
        v = np.asarray(v, dtype=float)
        return cls(v[:n_states], v[n_states:])


def rk4_step(model: ModelDefinition, state: AugmentedState, t: float, dt: float,
             inputs) -> AugmentedState:
    """Advance the states one classical Runge-Kutta step; parameters are held.

    ``inputs`` is either an :class:`InputSchedule` or a tuple
    ``(u_t, u_mid, u_next)`` of input vectors already evaluated at ``t``,
    ``t + dt/2`` and ``t + dt``.
    """
    if not dt > 0:
        raise ConfigError(f"rk4_step needs dt > 0, got {dt!r}")
    if isinstance(inputs, InputSchedule):
        u0, um, u1 = inputs.at(t), inputs.at(t + 0.5 * dt), inputs.at(t + dt)
    else:
        u0, um, u1 = inputs
    x1 = _rk4(model.dynamics, state.x, state.theta, u0, um, u1, dt, t)
    return AugmentedState(x1, state.theta)


def _rk4(f, x, th, u0, um, u1, dt, t=None):
    k1 = np.asarray(f(x, th, u0), dtype=float)
    k2 = np.asarray(f(x + 0.5 * dt * k1, th, um), dtype=float)
    k3 = np.asarray(f(x + 0.5 * dt * k2, th, um), dtype=float)
    k4 = np.asarray(f(x + dt * k3, th, u1), dtype=float)
    if not (np.all(np.isfinite(k1)) and np.all(np.isfinite(k2))
            and np.all(np.isfinite(k3)) and np.all(np.isfinite(k4))):
        raise NumericError(f"non-finite state derivative at t={t!r}", time=t)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def jacobian_steps(at, rel=1e-6, floor=1e-6) -> np.ndarray:
    """Default central-difference step ``max(floor, rel*|x_j|)`` per component."""
    return np.maximum(floor, rel * np.abs(np.asarray(at, dtype=float)))


def numeric_jacobian(fn: Callable, at, scale=None) -> np.ndarray:
    """Central-difference Jacobian ``d fn_i / d x_j`` evaluated at ``at``."""
    at = np.asarray(at, dtype=float)
    h = jacobian_steps(at) if scale is None else np.broadcast_to(
        np.asarray(scale, dtype=float), at.shape)
    cols = []
    for j in range(at.size):
        xp = at.copy()
        xm = at.copy()
        xp[j] += h[j]
        xm[j] -= h[j]
        fp = np.atleast_1d(np.asarray(fn(xp), dtype=float))
        fm = np.atleast_1d(np.asarray(fn(xm), dtype=float))
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NumericError(f"non-finite function value when perturbing component {j}")
        cols.append((fp - fm) / (2.0 * h[j]))
    return np.column_stack(cols)
