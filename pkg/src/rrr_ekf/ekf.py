"""Augmented-state extended Kalman filter and Rauch-Tung-Striebel smoother.

The filter state is ``[x, theta]``; the parameters are random constants with
zero process noise, so ``Q`` is given for the model states only.  At every
sample the filter first updates with the measurement and then predicts to the
next sample, so ``(x0, P0)`` is the prior at the first sample time.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError
from .kernels import make_kernel
from .statespace import FlightData, ModelDefinition

__all__ = [
    "FilterTrajectory",
    "ResidueBounds",
    "ResidueSeries",
    "prepare_kernel",
    "augment_Q",
    "ekf_forward",
    "rts_smooth",
    "residue_series",
]


def prepare_kernel(model: ModelDefinition, data: FlightData, backend: Optional[str] = None):
    """Sample the model's input channels on the data grid and build a kernel."""
    if tuple(data.meas_names) != tuple(model.meas_names):
        raise ConfigError(
            f"data channels {data.meas_names} do not match the model measurements {model.meas_names}")
    u, umid = data.inputs(model.input_names).rk4_grid(data.times)
    return make_kernel(model, data.times, u, umid, backend=backend)


def augment_Q(Q, n_params):
    """``diag(Q, 0)`` over the augmented dimension."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    out = np.zeros((n + n_params, n + n_params))
    out[:n, :n] = Q
    return out


def _check_cov(name, A, size, tol=1e-12):
    A = np.asarray(A, dtype=float)
    if A.shape != (size, size):
        raise ConfigError(f"{name} must be {size}x{size}, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ConfigError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > 1e-9 * scale:
        raise ConfigError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(0.5 * (A + A.T))[0] < -tol * scale:
        raise ConfigError(f"{name} is not positive semidefinite")
    return 0.5 * (A + A.T)


@dataclass(frozen=True)
class FilterTrajectory:
    """Per-sample filter, smoother and open-loop quantities for one pass.

    ``Phi[k]`` maps sample ``k`` to ``k+1``; ``C_lag[k]`` is the smoothed
    cross-covariance ``Cov(x_{k+1}, x_k | all data)``.  Smoother fields are
    ``None`` until :func:`rts_smooth` has run.
    """

    times: np.ndarray
    Z: np.ndarray
    n_states: int
    x0: np.ndarray
    P0: np.ndarray
    Qaug: np.ndarray
    R: np.ndarray
    x_prior: np.ndarray
    P_prior: np.ndarray
    x_post: np.ndarray
    P_post: np.ndarray
    Phi: np.ndarray
    y_prior: np.ndarray
    H_prior: np.ndarray
    nu: np.ndarray
    S: np.ndarray
    K: np.ndarray
    y_post: np.ndarray
    H_post: np.ndarray
    Xd: Optional[np.ndarray] = None
    x_smooth: Optional[np.ndarray] = None
    P_smooth: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None
    C_lag: Optional[np.ndarray] = None
    y_smooth: Optional[np.ndarray] = None
    H_smooth: Optional[np.ndarray] = None
    kernel: object = field(default=None, repr=False, compare=False)

    @property
    def n_samples(self) -> int:
        return self.times.size

    @property
    def Q(self) -> np.ndarray:
        n = self.n_states
        return self.Qaug[:n, :n]

    @property
    def theta_hat(self) -> np.ndarray:
        return self.x_post[-1, self.n_states:].copy()

    @property
    def theta_trajectory(self) -> np.ndarray:
        return self.x_post[:, self.n_states:]

    @property
    def filtered_residue(self) -> np.ndarray:
        return self.Z - self.y_post

    @property
    def smoothed_residue(self) -> np.ndarray:
        if self.y_smooth is None:
            raise ConfigError("trajectory has not been smoothed")
        return self.Z - self.y_smooth

    @property
    def smoothed(self) -> bool:
        return self.x_smooth is not None


def ekf_forward(model: ModelDefinition, data: FlightData, theta0, x0, P0, Q, R, *,
                kernel=None, backend: Optional[str] = None,
                open_loop: bool = True) -> FilterTrajectory:
    """Run the augmented EKF over the whole record.

    ``x0`` holds the initial model states and ``theta0`` the initial
    parameters; ``P0`` covers both.  With ``open_loop`` the noise-free
    trajectory ``Xd`` is integrated from ``x0`` using the final estimate of
    the parameters.
    """
    n, p, m = model.n_states, model.n_params, model.n_meas
    d = n + p
    x0 = np.asarray(x0, dtype=float)
    theta0 = np.asarray(theta0, dtype=float)
    if x0.shape != (n,) or theta0.shape != (p,):
        raise ConfigError(f"x0/theta0 must have lengths {n}/{p}")
    P0 = _check_cov("P0", P0, d)
    Q = _check_cov("Q", Q, n)
    R = _check_cov("R", R, m)
    if kernel is None:
        kernel = prepare_kernel(model, data, backend)
    xa0 = np.concatenate([x0, theta0])
    Qaug = augment_Q(Q, p)
    out = kernel.forward(xa0, P0, Qaug, R, np.ascontiguousarray(data.Z))
    Xd = None
    if open_loop:
        Xd = kernel.open_loop(np.concatenate([x0, out["x_post"][-1, n:]]))[:, :n]
    return FilterTrajectory(
        times=data.times, Z=data.Z, n_states=n, x0=xa0, P0=P0, Qaug=Qaug, R=R,
        Xd=Xd, kernel=kernel, **out)


def rts_smooth(traj: FilterTrajectory, model: ModelDefinition = None, Q=None) -> FilterTrajectory:
    """Backward RTS pass; returns a copy of ``traj`` with the smoother fields.

    ``Q`` is accepted for interface symmetry; the gains only need the stored
    prior covariances, which already contain it.
    """
    if Q is not None and not np.allclose(np.asarray(Q, dtype=float), traj.Q, rtol=0, atol=0):
        raise ConfigError("Q differs from the one used in the forward pass")
    k = traj.kernel
    xs, Ps, G, C = k.smooth(traj.x_prior, traj.P_prior, traj.x_post, traj.P_post, traj.Phi)
    ys, Hs = k.observe(xs)
    return replace(traj, x_smooth=xs, P_smooth=Ps, G=G, C_lag=C, y_smooth=ys, H_smooth=Hs)


@dataclass(frozen=True)
class ResidueBounds:
    """One-sigma bounds of the three residue series.

    The filtered and smoothed variances ``R - H P H^T`` can go negative; such
    entries are flagged and the bound is the square root of the magnitude.
    """

    innovation: np.ndarray
    filtered: np.ndarray
    smoothed: np.ndarray
    filtered_negative: np.ndarray
    smoothed_negative: np.ndarray

    @property
    def n_flags(self) -> int:
        return int(self.filtered_negative.sum() + self.smoothed_negative.sum())


@dataclass(frozen=True)
class ResidueSeries:
    innovation: np.ndarray
    filtered: np.ndarray
    smoothed: np.ndarray
    bounds: ResidueBounds


def _hph_diag(H, P):
    # diag(H P H^T) per step
    return np.einsum("kij,kij->ki", H @ P, H)


def residue_series(traj: FilterTrajectory, R=None) -> ResidueSeries:
    """Innovations, filtered and smoothed residues with their bounds."""
    if not traj.smoothed:
        raise ConfigError("residue_series needs a smoothed trajectory")
    R = traj.R if R is None else np.asarray(R, dtype=float)
    r = np.diag(R)
    var_i = r + _hph_diag(traj.H_prior, traj.P_prior)
    var_f = r - _hph_diag(traj.H_post, traj.P_post)
    var_s = r - _hph_diag(traj.H_smooth, traj.P_smooth)
    bounds = ResidueBounds(
        innovation=np.sqrt(var_i),
        filtered=np.sqrt(np.abs(var_f)),
        smoothed=np.sqrt(np.abs(var_s)),
        filtered_negative=var_f < 0,
        smoothed_negative=var_s < 0,
    )
    return ResidueSeries(traj.nu.copy(), traj.filtered_residue, traj.smoothed_residue, bounds)
