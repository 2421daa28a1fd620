"""Estimation report, CRB percentages, correlations and noise-sample checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ekf import FilterTrajectory, ResidueBounds, ResidueSeries, residue_series
from .errors import ConfigError

__all__ = [
    "EstimationReport",
    "NoiseSamples",
    "build_report",
    "crb_percent",
    "correlation_matrix",
    "round_half_away",
    "autocorrelation",
    "noise_samples",
    "weak_parameter_screen",
]


def crb_percent(theta, P_theta):
    """``100 * sqrt(P_ii) / |theta_i|``; returns ``(percent, infinite_mask)``.

    Components with ``theta_i == 0`` come back as ``inf`` and are flagged
    rather than raising.
    """
    theta = np.asarray(theta, dtype=float)
    P = np.asarray(P_theta, dtype=float)
    var = np.diag(P) if P.ndim == 2 else P
    if np.any(var < 0):
        raise ConfigError("parameter covariance has a negative diagonal entry")
    sd = np.sqrt(var)
    zero = theta == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        pct = np.where(zero, np.inf, 100.0 * sd / np.where(zero, 1.0, np.abs(theta)))
    return pct, zero


def round_half_away(x):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def correlation_matrix(P_theta, names: Optional[Sequence[str]] = None) -> np.ndarray:
    """Integer matrix ``round(100 * P_ij / sqrt(P_ii P_jj))``, half away from zero."""
    P = np.asarray(P_theta, dtype=float)
    P = 0.5 * (P + P.T)
    d = np.diag(P)
    bad = np.nonzero(~(d > 0))[0]
    if bad.size:
        i = int(bad[0])
        label = names[i] if names is not None else f"#{i}"
        raise ConfigError(f"parameter {label} has zero variance; correlation undefined")
    s = np.sqrt(d)
    C = P / np.outer(s, s)
    C = np.clip(0.5 * (C + C.T), -1.0, 1.0)
    out = round_half_away(100.0 * C).astype(int)
    np.fill_diagonal(out, 100)
    return out


def autocorrelation(x, max_lag: Optional[int] = None, convention: str = "biased"):
    """Normalized autocorrelation of each column of ``x`` about zero.

    ``biased`` divides every lag sum by ``N`` (tapering towards long lags);
    ``unbiased`` divides by ``N - lag``.  Both are normalized by the lag-0
    value.  ``max_lag`` defaults to ``N // 10``.
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    N = x.shape[0]
    if N == 0:
        raise ConfigError("empty series")
    L = N // 10 if max_lag is None else int(max_lag)
    L = max(0, min(L, N - 1))
    if convention not in ("biased", "unbiased"):
        raise ConfigError(f"unknown autocorrelation convention {convention!r}")
    out = np.empty((L + 1, x.shape[1]))
    for lag in range(L + 1):
        s = np.einsum("ij,ij->j", x[: N - lag], x[lag:])
        out[lag] = s / (N if convention == "biased" else N - lag)
    c0 = out[0].copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(c0 > 0, out / np.where(c0 > 0, c0, 1.0), 0.0)
    out[0] = np.where(c0 > 0, 1.0, 0.0)
    return out[:, 0] if squeeze else out


@dataclass(frozen=True)
class NoiseSamples:
    """Measurement (smoothed residue) and process-noise samples with autocorrelations."""

    v: np.ndarray
    w: np.ndarray
    autocorr_v: np.ndarray
    autocorr_w: np.ndarray


def noise_samples(traj: FilterTrajectory, model=None, max_lag: Optional[int] = None,
                  convention: str = "biased") -> NoiseSamples:
    from .tuning import smoothed_process_noise

    v = traj.smoothed_residue
    w, _ = smoothed_process_noise(traj)
    return NoiseSamples(v, w, autocorrelation(v, max_lag, convention),
                        autocorrelation(w, max_lag, convention))


@dataclass(frozen=True)
class EstimationReport:
    """Final estimates of one recipe run plus everything needed to serialize it.

    ``P_theta`` is the parameter block of the posterior covariance at the
    last sample of the last pass.  Per-iteration histories hold one row per
    executed pass.
    """

    model_name: str
    method: str
    param_names: tuple
    state_names: tuple
    meas_names: tuple
    theta_hat: np.ndarray
    sigma_theta: np.ndarray
    pct_crb: np.ndarray
    pct_crb_infinite: np.ndarray
    corr_100: np.ndarray
    P_theta: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    P0: np.ndarray
    cost_history: np.ndarray
    J2_flags: np.ndarray
    theta_history: np.ndarray
    Q_history: np.ndarray
    R_history: np.ndarray
    times: np.ndarray
    Z: np.ndarray
    Xd: np.ndarray
    x_prior: np.ndarray
    x_post: np.ndarray
    x_smooth: np.ndarray
    residues: ResidueSeries
    theta_trajectory: np.ndarray
    iterations: int
    converged: bool
    flags: tuple = ()
    trajectory: Optional[FilterTrajectory] = field(default=None, repr=False, compare=False)

    @property
    def costs(self) -> np.ndarray:
        """J1-J8 of the last pass."""
        return self.cost_history[-1]

    # -- plain-data round trip (used by the CLI ``report`` command) ---------
    _ARRAYS = ("theta_hat", "sigma_theta", "pct_crb", "pct_crb_infinite", "corr_100", "P_theta",
               "Q", "R", "P0", "cost_history", "J2_flags", "theta_history", "Q_history",
               "R_history", "times", "Z", "Xd", "x_prior", "x_post", "x_smooth",
               "theta_trajectory")

    def to_dict(self) -> dict:
        out = {
            "model_name": self.model_name, "method": self.method,
            "param_names": list(self.param_names), "state_names": list(self.state_names),
            "meas_names": list(self.meas_names), "iterations": int(self.iterations),
            "converged": bool(self.converged), "flags": list(self.flags),
        }
        for name in self._ARRAYS:
            out[name] = _encode(getattr(self, name))
        r = self.residues
        b = r.bounds
        out["residues"] = {
            "innovation": _encode(r.innovation), "filtered": _encode(r.filtered),
            "smoothed": _encode(r.smoothed), "bound_innovation": _encode(b.innovation),
            "bound_filtered": _encode(b.filtered), "bound_smoothed": _encode(b.smoothed),
            "filtered_negative": _encode(b.filtered_negative),
            "smoothed_negative": _encode(b.smoothed_negative),
        }
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "EstimationReport":
        try:
            kw = {name: _decode(d[name]) for name in cls._ARRAYS}
            r = d["residues"]
            bounds = ResidueBounds(
                _decode(r["bound_innovation"]), _decode(r["bound_filtered"]),
                _decode(r["bound_smoothed"]), _decode(r["filtered_negative"]).astype(bool),
                _decode(r["smoothed_negative"]).astype(bool))
            kw["residues"] = ResidueSeries(_decode(r["innovation"]), _decode(r["filtered"]),
                                           _decode(r["smoothed"]), bounds)
            kw["pct_crb_infinite"] = kw["pct_crb_infinite"].astype(bool)
            kw["J2_flags"] = kw["J2_flags"].astype(bool)
            kw["corr_100"] = kw["corr_100"].astype(int)
            return cls(model_name=d["model_name"], method=d["method"],
                       param_names=tuple(d["param_names"]), state_names=tuple(d["state_names"]),
                       meas_names=tuple(d["meas_names"]), iterations=int(d["iterations"]),
                       converged=bool(d["converged"]), flags=tuple(d["flags"]), **kw)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"saved report is malformed: {exc}") from None


def _encode(a):
    a = np.asarray(a)
    if a.dtype == bool:
        return {"shape": list(a.shape), "bool": a.ravel().astype(int).tolist()}
    flat = [None if not math.isfinite(v) else float(v) for v in a.astype(float).ravel()]
    special = {i: ("inf" if v > 0 else "-inf") if math.isinf(v) else "nan"
               for i, v in enumerate(a.astype(float).ravel()) if not math.isfinite(v)}
    return {"shape": list(a.shape), "data": flat, "special": {str(k): v for k, v in special.items()}}


def _decode(d):
    shape = tuple(d["shape"])
    if "bool" in d:
        return np.array(d["bool"], dtype=bool).reshape(shape)
    vals = [np.nan if v is None else v for v in d["data"]]
    a = np.array(vals, dtype=float)
    for k, v in d.get("special", {}).items():
        a[int(k)] = float(v)
    return a.reshape(shape)


def build_report(model, traj: FilterTrajectory, stats, history, converged: bool) -> EstimationReport:
    """Assemble the report of a finished recipe run."""
    n = model.n_states
    P_theta = 0.5 * (traj.P_post[-1][n:, n:] + traj.P_post[-1][n:, n:].T)
    theta = traj.theta_hat
    pct, inf_mask = crb_percent(theta, P_theta)
    corr = correlation_matrix(P_theta, model.param_names)
    res = residue_series(traj)
    costs = np.array([c.as_array() for c in history.costs])
    j2 = np.array([c.J2_flag for c in history.costs], dtype=bool)
    flags = []
    if not converged:
        flags.append(f"not converged after {history.iterations} iterations")
    n_it = len(history.costs)
    for label, attr in (("J2 normalizer indefinite", "J2_indefinite_steps"),
                        ("J3 normalizer indefinite", "J3_indefinite_steps"),
                        ("singular cost normalizer skipped", "skipped_steps")):
        hit = [(i, getattr(c, attr)) for i, c in enumerate(history.costs, start=1) if getattr(c, attr)]
        if hit:
            flags.append(f"{label} in {len(hit)} of {n_it} iterations "
                         f"(last: iteration {hit[-1][0]}, {hit[-1][1]} steps)")
    clamps = [(i, msg) for i, cl in enumerate(history.clamps, start=1) for msg in cl]
    if clamps:
        its = sorted({i for i, _ in clamps})
        flags.append(f"clamped negative covariance entries in {len(its)} of {n_it} iterations "
                     f"(last: iteration {clamps[-1][0]}: {clamps[-1][1]})")
    b = res.bounds
    for label, mask in (("filtered", b.filtered_negative), ("smoothed", b.smoothed_negative)):
        for j, name in enumerate(model.meas_names):
            cnt = int(mask[:, j].sum())
            if cnt:
                flags.append(f"{label} bound variance negative for {name} at {cnt} steps")
    for j in np.nonzero(inf_mask)[0]:
        flags.append(f"%CRB infinite for {model.param_names[j]} (estimate is zero)")
    Xd = traj.Xd if traj.Xd is not None else np.full((traj.n_samples, n), np.nan)
    if np.isnan(Xd).any():
        flags.append("open-loop trajectory diverged with the final estimates; Xd not available")
    return EstimationReport(
        model_name=model.name, method=history.method, param_names=tuple(model.param_names),
        state_names=tuple(model.state_names), meas_names=tuple(model.meas_names),
        theta_hat=theta, sigma_theta=np.sqrt(np.diag(P_theta)), pct_crb=pct,
        pct_crb_infinite=inf_mask, corr_100=corr, P_theta=P_theta,
        Q=np.array(stats.Q), R=np.array(stats.R), P0=np.array(stats.P0),
        cost_history=costs, J2_flags=j2, theta_history=np.array(history.theta),
        Q_history=np.array([np.diag(q) for q in history.Q]),
        R_history=np.array([np.diag(r) for r in history.R]),
        times=np.array(traj.times), Z=np.array(traj.Z), Xd=np.array(Xd),
        x_prior=traj.x_prior[:, :n].copy(), x_post=traj.x_post[:, :n].copy(),
        x_smooth=traj.x_smooth[:, :n].copy(), residues=res,
        theta_trajectory=traj.theta_trajectory.copy(), iterations=history.iterations,
        converged=bool(converged), flags=tuple(flags), trajectory=traj)


def weak_parameter_screen(report: EstimationReport, threshold: float = 20.0,
                          others: Sequence[EstimationReport] = (),
                          spread_threshold: Optional[float] = None):
    """Names of weakly determined parameters, worst first.

    A parameter is weak when its %CRB exceeds ``threshold``, or, with other
    runs on the same data supplied in ``others``, when the spread of the
    estimates across runs exceeds ``spread_threshold`` percent of the
    estimate.
    """
    pct = np.asarray(report.pct_crb, dtype=float)
    score = pct.copy()
    weak = pct > threshold
    if others and spread_threshold is not None:
        est = np.vstack([report.theta_hat] + [o.theta_hat for o in others])
        with np.errstate(divide="ignore", invalid="ignore"):
            spread = 100.0 * (est.max(axis=0) - est.min(axis=0)) / np.abs(report.theta_hat)
        spread = np.where(np.isnan(spread), 0.0, spread)
        weak |= spread > spread_threshold
        score = np.maximum(score, np.where(spread > spread_threshold, spread, 0.0))
    idx = [int(i) for i in np.nonzero(weak)[0]]
    # stable sort keeps layout order among ties
    idx.sort(key=lambda i: -score[i])
    return [report.param_names[i] for i in idx]
