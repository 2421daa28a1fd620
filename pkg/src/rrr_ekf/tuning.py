"""Outer-loop tuning of the filter statistics and the J1-J8 cost suite.

Each iteration of :func:`reference_recipe` runs the filter and smoother over
the whole record, restarts the next pass from the final parameter estimate,
and re-estimates ``P0``, ``Q`` and ``R`` from the smoothed outputs.  The
Myers-Tapley (MT) and Mohamed-Schwarz (MS) estimators plug into the same
loop through :func:`run_recipe`.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, fields, replace
from typing import List, Optional

import numpy as np

from .ekf import FilterTrajectory, ekf_forward, prepare_kernel, rts_smooth
from .errors import ConfigError, DivergenceError, EmptyDataError, NumericError
from .statespace import FlightData, ModelDefinition

log = logging.getLogger(__name__)

__all__ = [
    "estimate",
    "METHODS",
    "Q_FLOOR",
    "NoiseStatistics",
    "CostVector",
    "RecipeConfig",
    "RecipeHistory",
    "estimate_R_smoothed",
    "estimate_Q_smoothed",
    "update_P0",
    "mt_estimate",
    "ms_estimate",
    "compute_costs",
    "initial_statistics",
    "run_recipe",
    "reference_recipe",
]

METHODS = ("reference", "mt", "ms")
Q_FLOOR = 1e-14


class ClampWarning(UserWarning):
    """A covariance estimate had negative diagonal entries that were clamped."""


@dataclass(frozen=True)
class NoiseStatistics:
    """``P0``, ``Q``, ``R`` with the method that produced them."""

    P0: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    method: str = "reference"
    clamped: tuple = ()

    def __post_init__(self):
        if self.method not in METHODS + ("initial",):
            raise ConfigError(f"unknown method tag {self.method!r}")
        for name in ("P0", "Q", "R"):
            A = np.asarray(getattr(self, name), dtype=float)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise ConfigError(f"{name} must be square")
            if np.any(np.diag(A) < 0):
                raise ConfigError(f"{name} has negative diagonal entries")
            object.__setattr__(self, name, A)


@dataclass(frozen=True)
class CostVector:
    """The eight diagnostic costs of one pass.

    J1-J3 expect about the number of measurements, J6-J8 about the number of
    states, J4 about zero; J5 is the innovation negative log-likelihood.
    """

    J1: float
    J2: float
    J3: float
    J4: float
    J5: float
    J6: float
    J7: float
    J8: float
    J2_indefinite_steps: int = 0
    J3_indefinite_steps: int = 0
    skipped_steps: int = 0

    def as_array(self) -> np.ndarray:
        return np.array([self.J1, self.J2, self.J3, self.J4, self.J5, self.J6, self.J7, self.J8])

    @property
    def J2_flag(self) -> bool:
        return self.J2_indefinite_steps > 0 or self.J2 < 0


@dataclass(frozen=True)
class RecipeConfig:
    """Outer-loop settings.

    ``p0_param_policy`` decides the parameter block of the next ``P0``:
    ``"reset"`` restarts from the initial parameter covariance (times
    ``p0_scale``) so each pass weighs the record once; ``"smoothed"`` carries
    the smoothed covariance at the first sample over.  The initial parameter
    standard deviation is ``theta_sd_rel*|theta0| + theta_sd_floor``; it should
    be wide compared with what the record determines, otherwise the prior
    limits how far one pass can move a poor initial guess and dominates the
    reported standard deviations.
    """

    max_iterations: int = 100
    tolerance: float = 1e-4
    patience: int = 5
    p0_scale: Optional[float] = None
    em_cross_terms: bool = True
    diagonal: bool = True
    p0_param_policy: str = "reset"
    theta_sd_rel: float = 0.5
    theta_sd_floor: float = 0.5
    state_var: float = 1e-4
    Q_seed: float = 1e-8
    stat_window: Optional[int] = None
    update_x0: bool = True
    acceleration: str = "aitken"
    accel_max_factor: float = 3.0

    def __post_init__(self):
        if int(self.max_iterations) < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be > 0")
        if int(self.patience) < 1:
            raise ConfigError("patience must be >= 1")
        if self.p0_scale is not None and not self.p0_scale > 0:
            raise ConfigError("p0_scale must be > 0")
        if self.p0_param_policy not in ("reset", "smoothed"):
            raise ConfigError("p0_param_policy must be 'reset' or 'smoothed'")
        if not (self.theta_sd_rel >= 0 and self.theta_sd_floor >= 0 and self.state_var > 0):
            raise ConfigError("initial covariance settings must be non-negative")
        if not self.Q_seed > 0:
            raise ConfigError("Q_seed must be > 0")
        if self.acceleration not in ("none", "aitken"):
            raise ConfigError("acceleration must be 'none' or 'aitken'")
        if not self.accel_max_factor >= 1:
            raise ConfigError("accel_max_factor must be >= 1")

    def scale_for(self, method: str) -> float:
        if self.p0_scale is not None:
            return float(self.p0_scale)
        return 1.0 if method == "reference" else 100.0

    def updated(self, **changes) -> "RecipeConfig":
        known = {f.name for f in fields(self)}
        bad = set(changes) - known
        if bad:
            raise ConfigError(f"unknown recipe option(s): {', '.join(sorted(bad))}")
        return replace(self, **changes)


# ------------------------------------------------------------ helpers

def _sym(A):
    return 0.5 * (A + A.swapaxes(-1, -2))


def _clamp_diag(A, what, diagonal=True):
    """Project onto a PSD matrix with diagonal >= Q_FLOOR; report clamped indices."""
    A = _sym(np.asarray(A, dtype=float))
    if diagonal:
        A = np.diag(np.diag(A))
    d = np.diag(A).copy()
    bad = tuple(int(i) for i in np.nonzero(d < Q_FLOOR)[0])
    if bad:
        warnings.warn(f"{what}: diagonal entries {list(bad)} below {Q_FLOOR:g}, clamped",
                      ClampWarning, stacklevel=3)
    if diagonal:
        return np.diag(np.maximum(d, Q_FLOOR)), bad
    w, V = np.linalg.eigh(A)
    A = (V * np.maximum(w, 0.0)) @ V.T
    A[np.diag_indices_from(A)] = np.maximum(np.diag(A), Q_FLOOR)
    return _sym(A), bad


def _require_smoothed(traj):
    if not traj.smoothed:
        raise ConfigError("operation needs a smoothed trajectory (run rts_smooth first)")
    if traj.n_samples == 0:
        raise EmptyDataError("trajectory has no samples")


def _quad_forms(resid, A, skip_singular=True):
    """Per-step ``r_k^T A_k^{-1} r_k``; returns (values, ok mask, indefinite mask)."""
    N = resid.shape[0]
    vals = np.zeros(N)
    ok = np.ones(N, dtype=bool)
    indef = np.zeros(N, dtype=bool)
    w = np.linalg.eigvalsh(A)
    indef = w[:, 0] <= 0
    cond_bad = np.abs(w).min(axis=1) <= 1e-14 * np.abs(w).max(axis=1)
    for k in np.nonzero(cond_bad)[0]:
        ok[k] = False
    idx = np.nonzero(ok)[0]
    if idx.size:
        sol = np.linalg.solve(A[idx], resid[idx][..., None])[..., 0]
        vals[idx] = np.einsum("ki,ki->k", resid[idx], sol)
    return vals, ok, indef


def _hph(H, P):
    return H @ P @ H.swapaxes(1, 2)


# ------------------------------------------------------------ estimators

def estimate_R_smoothed(traj: FilterTrajectory, model: ModelDefinition = None,
                        diagonal: bool = True) -> np.ndarray:
    """``R = mean_k (s_k s_k^T + H_k P_s,k H_k^T)`` over the smoothed residues.

    The raw estimate is returned; :func:`run_recipe` clamps its diagonal at
    :data:`Q_FLOOR` before the next pass.
    """
    if traj.n_samples == 0:
        raise EmptyDataError("cannot estimate R from an empty record")
    _require_smoothed(traj)
    s = traj.smoothed_residue
    R = (s.T @ s) / s.shape[0] + _hph(traj.H_smooth, traj.P_smooth).mean(axis=0)
    R = _sym(R)
    return np.diag(np.diag(R)) if diagonal else R


def smoothed_process_noise(traj: FilterTrajectory):
    """``w_k = x_s,k+1 - f_d(x_s,k)`` (state block) and the smoothing correction.

    The correction ``M_k = P_s,k+1 + Phi P_s,k Phi^T - C_k Phi^T - Phi C_k^T``
    is the covariance of the error of ``w_k``; both use the filter's
    transition matrices.
    """
    _require_smoothed(traj)
    n = traj.n_states
    xs = traj.x_smooth
    pred, _ = traj.kernel.propagate(xs)
    w = xs[1:, :n] - pred[:, :n]
    Phi, Ps, C = traj.Phi, traj.P_smooth, traj.C_lag
    PhiT = Phi.swapaxes(1, 2)
    PC = C @ PhiT
    M = Ps[1:] + Phi @ Ps[:-1] @ PhiT - PC - PC.swapaxes(1, 2)
    return w, _sym(M[:, :n, :n])


def estimate_Q_smoothed(traj: FilterTrajectory, model: ModelDefinition = None,
                        em: bool = True, diagonal: bool = True) -> np.ndarray:
    """Process-noise covariance from smoothed process-noise samples.

    With ``em`` the smoothing correction is added (EM update); otherwise the
    result is the plain sample covariance of the samples.  Diagonal entries
    below :data:`Q_FLOOR` are clamped with a :class:`ClampWarning`.
    """
    if traj.n_samples < 2:
        raise EmptyDataError("need at least two samples to estimate Q")
    w, M = smoothed_process_noise(traj)
    Q = (w.T @ w) / w.shape[0]
    if em:
        Q = Q + M.mean(axis=0)
    return _clamp_diag(Q, "Q estimate", diagonal)[0]


def update_P0(traj: FilterTrajectory, scale: float = 1.0, *, policy: str = "smoothed",
              theta_block=None) -> np.ndarray:
    """Next initial covariance.

    ``policy="smoothed"`` takes the smoothed covariance at the first sample.
    ``policy="reset"`` keeps its state block but replaces the parameter block
    (and the state-parameter cross terms) by ``theta_block``.  The parameter
    block is then multiplied by ``scale``.
    """
    _require_smoothed(traj)
    n = traj.n_states
    P0 = _sym(traj.P_smooth[0].copy())
    if policy == "reset":
        if theta_block is None:
            raise ConfigError("policy 'reset' needs theta_block")
        P0[n:, :] = 0.0
        P0[:, n:] = 0.0
        P0[n:, n:] = np.asarray(theta_block, dtype=float)
    elif policy != "smoothed":
        raise ConfigError(f"unknown P0 policy {policy!r}")
    P0[n:, n:] *= scale
    return _sym(P0)


def _window(N, window):
    """Trailing sample window for the innovation-based estimators.

    The default is the second half of the record: early samples carry the
    large initial parameter covariance, whose ``H P H^T`` would otherwise
    dominate the averages.
    """
    window = N - N // 2 if window is None else int(window)
    if window > N:
        raise ConfigError(f"estimator window {window} exceeds the record length {N}")
    if window < 3:
        raise ConfigError("estimator window must be at least 3 samples")
    return window


def mt_estimate(traj: FilterTrajectory, model: ModelDefinition = None, window: Optional[int] = None,
                diagonal: bool = True, P0=None) -> NoiseStatistics:
    """Myers-Tapley sample estimates over the last ``window`` samples.

    ``R`` comes from the innovations, ``Q`` from the state corrections
    ``d_k = x_post,k - x_prior,k``.
    """
    N = traj.n_samples
    window = _window(N, window)
    n = traj.n_states
    sl = slice(N - window, N)
    nu = traj.nu[sl]
    R = np.cov(nu, rowvar=False, ddof=1).reshape(nu.shape[1], nu.shape[1])
    R = R - _hph(traj.H_prior[sl], traj.P_prior[sl]).mean(axis=0)
    ks = np.arange(max(N - window, 1), N)
    d = (traj.x_post[ks] - traj.x_prior[ks])[:, :n]
    Qs = np.cov(d, rowvar=False, ddof=1).reshape(n, n)
    Phi = traj.Phi[ks - 1]
    pp = Phi @ traj.P_post[ks - 1] @ Phi.swapaxes(1, 2) - traj.P_post[ks]
    Qs = Qs - pp[:, :n, :n].mean(axis=0)
    R, rc = _clamp_diag(R, "MT R estimate", diagonal)
    Qs, qc = _clamp_diag(Qs, "MT Q estimate", diagonal)
    clamped = tuple(f"R[{i}]" for i in rc) + tuple(f"Q[{i}]" for i in qc)
    return NoiseStatistics(traj.P0 if P0 is None else P0, Qs, R, "mt", clamped)


def ms_estimate(traj: FilterTrajectory, model: ModelDefinition = None, window: Optional[int] = None,
                diagonal: bool = True, P0=None) -> NoiseStatistics:
    """Mohamed-Schwarz estimates from the innovation covariance.

    ``R = C_nu - mean(H P_prior H^T)`` and ``Q = K C_nu K^T`` with the gain
    of the last sample (state block); averages run over the last ``window``
    samples.
    """
    if traj.n_samples == 0:
        raise EmptyDataError("cannot estimate from an empty record")
    N = traj.n_samples
    sl = slice(N - _window(N, window), N)
    n = traj.n_states
    nu = traj.nu[sl]
    C = (nu.T @ nu) / nu.shape[0]
    R = C - _hph(traj.H_prior[sl], traj.P_prior[sl]).mean(axis=0)
    K = traj.K[-1]
    Qs = (K @ C @ K.T)[:n, :n]
    R, rc = _clamp_diag(R, "MS R estimate", diagonal)
    Qs, qc = _clamp_diag(Qs, "MS Q estimate", diagonal)
    clamped = tuple(f"R[{i}]" for i in rc) + tuple(f"Q[{i}]" for i in qc)
    return NoiseStatistics(traj.P0 if P0 is None else P0, Qs, R, "ms", clamped)


# ------------------------------------------------------------ costs

def compute_costs(traj: FilterTrajectory, model: ModelDefinition = None, Q=None, R=None) -> CostVector:
    """J1-J8 for a smoothed trajectory.

    Measurement side: innovations, filtered and smoothed residues weighted by
    their own covariances (J1-J3), the smoothed-residue bias (J4) and the
    innovation negative log-likelihood without constant terms (J5).  State
    side: process-noise samples built from the prior (J6), posterior (J7)
    and smoothed (J8) estimates, weighted by the inverse ``Q`` (J6, J7) and
    by the covariance of the smoothed sample (J8).
    """
    _require_smoothed(traj)
    n = traj.n_states
    Q = traj.Q if Q is None else np.asarray(Q, dtype=float)
    R = traj.R if R is None else np.asarray(R, dtype=float)
    N = traj.n_samples
    nu = traj.nu
    S = traj.S
    q1, ok1, _ = _quad_forms(nu, S)
    J1 = q1[ok1].mean()
    sign, logdet = np.linalg.slogdet(S)
    J5 = float(np.mean(logdet[ok1] + q1[ok1]))

    r = traj.filtered_residue
    q2, ok2, ind2 = _quad_forms(r, R - _hph(traj.H_post, traj.P_post))
    J2 = q2[ok2].mean()
    s = traj.smoothed_residue
    q3, ok3, ind3 = _quad_forms(s, R - _hph(traj.H_smooth, traj.P_smooth))
    J3 = q3[ok3].mean()
    sbar = s.mean(axis=0)
    J4 = float(sbar @ np.linalg.solve(R, sbar))

    # prior-based samples: x_prior,k+1 - f_d(x_prior,k)
    pred, _ = traj.kernel.propagate(traj.x_prior)
    w6 = traj.x_prior[1:, :n] - pred[:, :n]
    # posterior-based samples: f_d(x_post,k) is the next prior
    w7 = (traj.x_post[1:] - traj.x_prior[1:])[:, :n]
    Qi = np.linalg.inv(Q)
    J6 = float(np.einsum("ki,ij,kj->k", w6, Qi, w6).mean())
    J7 = float(np.einsum("ki,ij,kj->k", w7, Qi, w7).mean())
    w8, M = smoothed_process_noise(traj)
    q8, ok8, ind8 = _quad_forms(w8, Q[None] - M)
    ok8 &= ~ind8
    J8 = float(q8[ok8].mean()) if ok8.any() else float("nan")
    skipped = int((~ok1).sum() + (~ok2).sum() + (~ok3).sum() + (~ok8).sum())
    if skipped:
        log.info("compute_costs skipped %d singular normalizer steps", skipped)
    return CostVector(float(J1), float(J2), float(J3), J4, J5, J6, J7, J8,
                      J2_indefinite_steps=int(ind2.sum()), J3_indefinite_steps=int(ind3.sum()),
                      skipped_steps=skipped)


# ------------------------------------------------------------ recipe

def initial_statistics(model: ModelDefinition, data: FlightData, theta0, config: RecipeConfig,
                       method: str = "reference") -> NoiseStatistics:
    """Seed statistics for the first pass.

    ``Q = Q_seed * I``; ``R`` is half the sample variance of the first
    difference of each measurement channel; ``P0`` is diagonal with
    ``state_var`` on the states and ``(theta_sd_rel*|theta0| + theta_sd_floor)^2``
    on the parameters, the latter scaled by the method's ``P0`` factor.
    """
    n, p = model.n_states, model.n_params
    dz = np.diff(data.Z, axis=0)
    r = dz.var(axis=0, ddof=1) / 2.0
    r = np.maximum(r, Q_FLOOR)
    P0 = np.zeros((n + p, n + p))
    P0[np.arange(n), np.arange(n)] = config.state_var
    P0[n:, n:] = _theta_block(theta0, config) * config.scale_for(method)
    return NoiseStatistics(P0, np.eye(n) * config.Q_seed, np.diag(r), "initial")


def _theta_block(theta0, config):
    sd = config.theta_sd_rel * np.abs(np.asarray(theta0, dtype=float)) + config.theta_sd_floor
    return np.diag(sd * sd)


@dataclass
class RecipeHistory:
    """Per-iteration record of one recipe run."""

    method: str
    theta: List[np.ndarray] = field(default_factory=list)
    sigma_theta: List[np.ndarray] = field(default_factory=list)
    Q: List[np.ndarray] = field(default_factory=list)
    R: List[np.ndarray] = field(default_factory=list)
    costs: List[CostVector] = field(default_factory=list)
    clamps: List[tuple] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.costs)


class _DiagonalAccelerator:
    """Aitken extrapolation of slowly converging covariance diagonals.

    Works on the logarithm of each diagonal entry.  When two consecutive
    update steps point the same way and shrink by a ratio ``r`` in (0, 1),
    the step is stretched to ``step / (1 - r)``, the geometric-series limit,
    capped at a factor ``max_factor`` of the current value.  An extrapolated
    iteration is always followed by a plain one so the next ratio is clean.
    """

    min_step = 1e-3

    def __init__(self, max_factor):
        self.cap = math.log(max_factor)
        self.prev_step = None
        self.skip = False

    def __call__(self, current, proposed):
        cur = np.log(np.maximum(np.diag(current), Q_FLOOR))
        new = np.log(np.maximum(np.diag(proposed), Q_FLOOR))
        step = new - cur
        prev, self.prev_step = self.prev_step, step
        if prev is None or self.skip:
            self.skip = False
            return proposed
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(prev != 0, step / prev, 0.0)
        # near the fixed point plain steps are cheap and extrapolating them
        # only adds jitter to the iteration history
        use = (r > 0) & (r < 1) & (np.abs(step) > self.min_step)
        if not use.any():
            return proposed
        stretched = np.where(use, step / np.where(use, 1.0 - r, 1.0), step)
        stretched = np.clip(stretched, -self.cap, self.cap)
        stretched = np.where(np.abs(stretched) < np.abs(step), step, stretched)
        self.skip = True
        self.prev_step = None
        return np.diag(np.exp(cur + stretched))


def _rel_change(new, old):
    scale = np.maximum(np.abs(old), 1e-12)
    return float(np.max(np.abs(new - old) / scale))


def run_recipe(model: ModelDefinition, data: FlightData, config: Optional[RecipeConfig] = None,
               method: str = "reference", *, theta0=None, x0=None, stats: Optional[NoiseStatistics] = None,
               backend: Optional[str] = None):
    """Iterate filter, smoother and statistics update.

    Returns ``(trajectory, statistics, history, converged)`` where the
    trajectory and costs belong to the last pass and ``statistics`` are the
    ones that pass used.
    """
    from .aircraft import check_runtime_constants

    config = RecipeConfig() if config is None else config
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    check_runtime_constants(model)
    n = model.n_states
    theta = np.array(model.theta_init if theta0 is None else theta0, dtype=float)
    if theta.shape != (model.n_params,):
        raise ConfigError(f"theta0 must have {model.n_params} entries")
    if x0 is None:
        x_init = _initial_state_from_measurements(model, data)
    else:
        x_init = np.array(x0, dtype=float)
    stats = initial_statistics(model, data, theta, config, method) if stats is None else stats
    theta_block = _theta_block(theta, config)
    scale = config.scale_for(method)
    kernel = prepare_kernel(model, data, backend)
    history = RecipeHistory(method)
    accelerate = config.acceleration == "aitken" and config.diagonal and method == "reference"
    acc_Q = _DiagonalAccelerator(config.accel_max_factor)
    acc_R = _DiagonalAccelerator(config.accel_max_factor)
    converged = False
    streak = 0
    prev = None
    traj = None
    for it in range(int(config.max_iterations)):
        try:
            traj = ekf_forward(model, data, theta, x_init, stats.P0, stats.Q, stats.R,
                               kernel=kernel, open_loop=False)
            traj = rts_smooth(traj)
        except DivergenceError as exc:
            exc.iteration = it + 1
            raise
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ClampWarning)
            costs = compute_costs(traj)
            theta_new = traj.theta_hat
            if method == "reference":
                R_new = estimate_R_smoothed(traj, diagonal=config.diagonal)
                Q_new = estimate_Q_smoothed(traj, em=config.em_cross_terms, diagonal=config.diagonal)
                clamped = ()
            else:
                est = (mt_estimate(traj, window=config.stat_window, diagonal=config.diagonal)
                       if method == "mt" else ms_estimate(traj, window=config.stat_window, diagonal=config.diagonal))
                R_new, Q_new, clamped = est.R, est.Q, est.clamped
            R_new = _clamp_diag(R_new, "R estimate", config.diagonal)[0]
        q_clamp = tuple(str(w.message) for w in caught if issubclass(w.category, ClampWarning))
        history.theta.append(theta_new.copy())
        history.sigma_theta.append(np.sqrt(np.diag(traj.P_post[-1])[n:]))
        history.Q.append(stats.Q.copy())
        history.R.append(stats.R.copy())
        history.costs.append(costs)
        history.clamps.append(tuple(clamped) + q_clamp)
        final_stats = stats
        probe = np.concatenate([theta_new, costs.as_array()[[0, 2, 5, 7]]])
        if prev is not None:
            streak = streak + 1 if _rel_change(probe, prev) < config.tolerance else 0
        prev = probe
        if streak >= config.patience:
            converged = True
            break
        if it + 1 == int(config.max_iterations):
            break
        P0 = update_P0(traj, scale, policy=config.p0_param_policy, theta_block=theta_block)
        if config.update_x0:
            x_init = traj.x_smooth[0, :n].copy()
        theta = theta_new
        if accelerate:
            Q_new = acc_Q(stats.Q, Q_new)
            R_new = acc_R(stats.R, R_new)
        stats = NoiseStatistics(P0, Q_new, R_new, method)
    try:
        Xd = kernel.open_loop(np.concatenate([x_init, traj.theta_hat]))[:, :n]
    except NumericError:
        # the open-loop run is a diagnostic only; report it as unavailable
        Xd = np.full((traj.n_samples, n), np.nan)
    traj = replace(traj, Xd=Xd)
    return traj, final_stats, history, converged


def _initial_state_from_measurements(model, data):
    """Initial states read off the first sample of same-named measurements."""
    n = model.n_states
    x = np.zeros(n)
    names = list(data.meas_names)
    alias = {"theta_pitch": "theta"}
    for i, s in enumerate(model.state_names):
        key = s if s in names else alias.get(s)
        if key in names:
            x[i] = data.Z[0, names.index(key)]
    return x


def reference_recipe(model: ModelDefinition, data: FlightData, config: Optional[RecipeConfig] = None,
                     **kwargs):
    """Run the reference recipe and assemble an :class:`EstimationReport`."""
    from .diagnostics import build_report

    return build_report(model, *run_recipe(model, data, config, "reference", **kwargs))


def estimate(model: ModelDefinition, data: FlightData, config: Optional[RecipeConfig] = None,
             method: str = "reference", **kwargs):
    """Run the recipe with ``method`` statistics and assemble a report."""
    from .diagnostics import build_report

    return build_report(model, *run_recipe(model, data, config, method, **kwargs))
