"""CSV datasets, report files and the key = value run configuration.

Dataset columns are ``time_s`` plus ``<channel>_<unit>`` for every
measurement and input channel, e.g. ``alpha_deg``, ``q_radps``, ``an_g``,
``V_m_fps``.  Values are converted to internal units (radians, rad/s, g,
model speed unit) on reading.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, fields, replace
from typing import Dict, Optional

import numpy as np

from .diagnostics import EstimationReport
from .errors import ConfigError, DatasetError
from .statespace import ChannelSeries, FlightData, ModelDefinition

__all__ = [
    "UNITS",
    "channel_kind",
    "read_dataset",
    "write_dataset",
    "write_report",
    "write_truth",
    "save_report_state",
    "load_report_state",
    "RunConfig",
    "read_run_config",
    "REPORT_FILES",
]

FT_PER_M = 1.0 / 0.3048

# unit suffix -> physical kind
UNITS = {
    "rad": "angle", "deg": "angle",
    "radps": "rate", "degps": "rate",
    "g": "accel", "fps2": "accel", "mps2": "accel",
    "fps": "speed", "mps": "speed",
}

_KINDS = {
    "alpha": "angle", "theta": "angle", "beta": "angle", "phi": "angle",
    "q": "rate", "p": "rate", "r": "rate",
    "an": "accel", "ax": "accel", "ay": "accel",
    "V": "speed",
}

# unit written for each kind
_INTERNAL = {"angle": "rad", "rate": "radps", "accel": "g", "speed": "fps"}
_DISPLAY = {"angle": "deg", "rate": "degps", "accel": "g", "speed": "fps"}

REPORT_FILES = ("theta.csv", "corr100.csv", "qr.csv", "costs.csv", "residues.csv",
                "trajectory.csv", "flags.txt")


def channel_kind(name: str) -> str:
    """Physical kind of a channel from its base name (``delta_*`` are angles)."""
    if name.startswith("delta_"):
        return "angle"
    base = name[:-2] if name.endswith("_m") else name
    try:
        return _KINDS[base]
    except KeyError:
        raise DatasetError(f"no unit kind known for channel {name!r}") from None


def _imperial(model: ModelDefinition) -> bool:
    g = getattr(model.constants, "g", None)
    return g is None or g > 20.0


def _to_internal(values, unit, kind, model):
    if unit == "deg" or unit == "degps":
        return np.radians(values)
    if kind == "accel":
        g = getattr(model.constants, "g", None) or 32.174
        if unit == "g":
            return values
        if unit == "fps2":
            return values / (g if _imperial(model) else g * FT_PER_M)
        return values / (g / FT_PER_M if _imperial(model) else g)
    if kind == "speed":
        if unit == "fps":
            return values if _imperial(model) else values / FT_PER_M
        return values * FT_PER_M if _imperial(model) else values
    return values


def _from_internal(values, unit, kind, model):
    if unit in ("deg", "degps"):
        return np.degrees(values)
    if kind == "speed" and not _imperial(model):
        return values * FT_PER_M if unit == "fps" else values
    if kind == "accel" and unit != "g":
        raise ConfigError("accelerations are written in g")
    return values


def _split_column(col: str):
    if "_" not in col:
        raise DatasetError(f"column {col!r} has no unit suffix")
    base, unit = col.rsplit("_", 1)
    if unit not in UNITS:
        raise DatasetError(f"column {col!r}: unknown unit suffix {unit!r}")
    return base, unit


def read_dataset(path, model: ModelDefinition) -> FlightData:
    """Read a CSV flight record and route its columns to the model's channels.

    Raises :class:`DatasetError` naming the offending column or row.  A
    missing ``alpha_m`` input falls back to the ``alpha`` measurement.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from None
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    if "time_s" not in header:
        raise DatasetError(f"{path}: missing required column 'time_s'")
    if len(set(header)) != len(header):
        raise DatasetError(f"{path}: duplicate column names")
    cols: Dict[str, tuple] = {}
    for h in header:
        if h == "time_s":
            continue
        base, unit = _split_column(h)
        if base in cols:
            raise DatasetError(f"{path}: channel {base!r} appears twice")
        cols[base] = (h, unit)
    data = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DatasetError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if not cell:
                raise DatasetError(f"{path}: missing value in column {header[j]!r} at row {i}")
            try:
                data[i - 2, j] = float(cell)
            except ValueError:
                raise DatasetError(f"{path}: bad number {cell!r} in column {header[j]!r} at row {i}") from None
    if data.shape[0] < 2:
        raise DatasetError(f"{path}: need at least 2 data rows")
    t = data[:, header.index("time_s")]
    bad = np.nonzero(~(np.diff(t) > 0))[0]
    if bad.size:
        # report the 1-based file row (header is row 1)
        raise DatasetError(f"{path}: time_s not strictly increasing at data index {bad[0] + 1} "
                           f"(file row {bad[0] + 3})")
    if not np.all(np.isfinite(data)):
        raise DatasetError(f"{path}: non-finite values")

    def column(name):
        h, unit = cols[name]
        kind = channel_kind(name)
        if UNITS[unit] != kind:
            raise DatasetError(f"column {h!r}: unit {unit!r} does not fit a {kind} channel")
        return _to_internal(data[:, header.index(h)], unit, kind, model)

    missing = [m for m in model.meas_names if m not in cols]
    inputs = [u for u in model.input_names if u not in cols and not (u == "alpha_m" and "alpha" in cols)]
    if missing or inputs:
        raise DatasetError(f"{path}: missing column(s) for channel(s) {', '.join(missing + inputs)}")
    Z = np.column_stack([column(m) for m in model.meas_names])
    channels = {}
    for u in model.input_names:
        src = u if u in cols else "alpha"
        channels[u] = ChannelSeries(u, t, column(src))
    return FlightData(t, Z, model.meas_names, channels)


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_dataset(data: FlightData, path, model: ModelDefinition, units: str = "internal") -> None:
    """Write ``data`` as CSV; ``units`` is ``internal`` (exact round trip) or ``display``."""
    table = {"internal": _INTERNAL, "display": _DISPLAY}.get(units)
    if table is None:
        raise ConfigError("units must be 'internal' or 'display'")
    t = data.times
    header = ["time_s"]
    columns = [t]
    for j, m in enumerate(data.meas_names):
        kind = channel_kind(m)
        header.append(f"{m}_{table[kind]}")
        columns.append(_from_internal(data.Z[:, j], table[kind], kind, model))
    for u in model.input_names:
        ch = data.channels[u]
        kind = channel_kind(u)
        vals = ch.values if np.array_equal(ch.times, t) else np.interp(t, ch.times, ch.values)
        header.append(f"{u}_{table[kind]}")
        columns.append(_from_internal(vals, table[kind], kind, model))
    _write_csv(path, header, np.column_stack(columns))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def write_truth(sim, path) -> None:
    """Truth of a simulated record as JSON (parameters, noise levels, constants)."""
    model = sim.model
    c = model.constants
    consts = {f.name: getattr(c, f.name) for f in fields(c)} if c is not None else {}
    doc = {
        "model": model.name,
        "param_names": list(model.param_names),
        "theta": [float(v) for v in sim.truth.theta],
        "Q_diag": [float(v) for v in sim.truth.Q_diag],
        "R_diag": [float(v) for v in sim.truth.R_diag],
        "x0": [float(v) for v in sim.truth.states[0]],
        "constants": consts,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_report(report: EstimationReport, out_dir) -> list:
    """Write the seven report files into ``out_dir``; returns their paths."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out_dir}: {exc}") from exc
    p = lambda name: os.path.join(out_dir, name)  # noqa: E731
    names = report.param_names
    rows = [[n, report.theta_hat[i], report.sigma_theta[i], report.pct_crb[i]]
            for i, n in enumerate(names)]
    _write_csv(p("theta.csv"), ["name", "estimate", "sigma", "pct_crb"], rows)
    _write_csv(p("corr100.csv"), ["name"] + list(names),
               [[n] + [str(int(v)) for v in report.corr_100[i]] for i, n in enumerate(names)])
    qr = [["Q", s, report.Q[i, i]] for i, s in enumerate(report.state_names)]
    qr += [["R", m, report.R[i, i]] for i, m in enumerate(report.meas_names)]
    _write_csv(p("qr.csv"), ["matrix", "channel", "value"], qr)
    costs = [[str(i + 1)] + list(c) + [str(int(report.J2_flags[i]))]
             for i, c in enumerate(report.cost_history)]
    _write_csv(p("costs.csv"), ["iteration"] + [f"J{k}" for k in range(1, 9)] + ["J2_flag"], costs)
    r = report.residues
    b = r.bounds
    header = ["time_s"]
    cols = [report.times]
    for j, m in enumerate(report.meas_names):
        header += [f"{m}_innovation", f"{m}_innovation_bound", f"{m}_filtered",
                   f"{m}_filtered_bound", f"{m}_filtered_flag", f"{m}_smoothed",
                   f"{m}_smoothed_bound", f"{m}_smoothed_flag"]
        cols += [r.innovation[:, j], b.innovation[:, j], r.filtered[:, j], b.filtered[:, j],
                 b.filtered_negative[:, j].astype(float), r.smoothed[:, j], b.smoothed[:, j],
                 b.smoothed_negative[:, j].astype(float)]
    _write_csv(p("residues.csv"), header, np.column_stack(cols))
    header = ["time_s"]
    cols = [report.times]
    for j, s in enumerate(report.state_names):
        header += [f"{s}_Xd", f"{s}_prior", f"{s}_post", f"{s}_smooth"]
        cols += [report.Xd[:, j], report.x_prior[:, j], report.x_post[:, j], report.x_smooth[:, j]]
    for j, m in enumerate(report.meas_names):
        header.append(f"{m}_Z")
        cols.append(report.Z[:, j])
    _write_csv(p("trajectory.csv"), header, np.column_stack(cols))
    with open(p("flags.txt"), "w") as fh:
        fh.write(f"method: {report.method}\n")
        fh.write(f"iterations: {report.iterations}\n")
        fh.write(f"converged: {'yes' if report.converged else 'no'}\n")
        for f in report.flags:
            fh.write(f + "\n")
    return [p(n) for n in REPORT_FILES]


def save_report_state(report: EstimationReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, allow_nan=False)


def load_report_state(path) -> EstimationReport:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load saved report {path}: {exc}") from None
    return EstimationReport.from_dict(doc)


# ------------------------------------------------------------ run config

@dataclass(frozen=True)
class RunConfig:
    """Everything a ``fit``/``compare`` run needs besides the data.

    Recipe keys mirror :class:`~rrr_ekf.tuning.RecipeConfig`; model keys
    cover the constants a case leaves open (case-2 dynamic pressure, roll length).
    """

    case: int = 1
    method: str = "reference"
    iterations: int = 100
    tolerance: float = 1e-4
    patience: int = 5
    p0_scale: Optional[float] = None
    em_cross_terms: bool = True
    diagonal: bool = True
    p0_param_policy: str = "reset"
    theta_sd_rel: float = 0.5
    theta_sd_floor: float = 0.5
    state_var: float = 1e-4
    q_seed: float = 1e-8
    acceleration: str = "aitken"
    stat_window: Optional[int] = None
    roll_length: str = "b"
    qbar: Optional[float] = None
    rho: Optional[float] = None
    backend: Optional[str] = None

    def __post_init__(self):
        from .tuning import METHODS

        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {', '.join(METHODS)}, got {self.method!r}")
        if self.case not in (1, 2, 3):
            raise ConfigError(f"case must be 1, 2 or 3, got {self.case!r}")
        if self.roll_length not in ("b", "cbar"):
            raise ConfigError("roll_length must be 'b' or 'cbar'")
        if self.qbar is not None and not self.qbar > 0:
            raise ConfigError("qbar must be > 0")
        if self.rho is not None and not self.rho > 0:
            raise ConfigError("rho must be > 0")
        if self.backend not in (None, "compiled", "python"):
            raise ConfigError("backend must be 'compiled' or 'python'")
        self.recipe()  # validates the recipe fields

    def recipe(self):
        from .tuning import RecipeConfig

        return RecipeConfig(
            max_iterations=self.iterations, tolerance=self.tolerance, patience=self.patience,
            p0_scale=self.p0_scale, em_cross_terms=self.em_cross_terms, diagonal=self.diagonal,
            p0_param_policy=self.p0_param_policy, theta_sd_rel=self.theta_sd_rel,
            theta_sd_floor=self.theta_sd_floor, state_var=self.state_var, Q_seed=self.q_seed,
            acceleration=self.acceleration, stat_window=self.stat_window)

    def model(self) -> ModelDefinition:
        from .aircraft import builtin_model

        over = {"roll_length": self.roll_length}
        if self.qbar is not None:
            over["qbar"] = self.qbar
        if self.rho is not None:
            over["rho"] = self.rho
        return builtin_model(self.case, **over)

    def updated(self, **changes) -> "RunConfig":
        known = {f.name for f in fields(self)}
        bad = set(changes) - known
        if bad:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(bad))}")
        return replace(self, **changes)


def _parse_value(key, raw, typ):
    raw = raw.strip()
    optional = "Optional" in str(typ)
    if optional and raw.lower() in ("", "none", "null"):
        return None
    base = str(typ)
    try:
        if "bool" in base:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "int" in base:
            return int(raw)
        if "float" in base:
            v = float(raw)
            if math.isnan(v):
                raise ValueError(raw)
            return v
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from None
    return raw


def read_run_config(path) -> RunConfig:
    """Parse a ``key = value`` file (``#`` starts a comment) into a :class:`RunConfig`."""
    types = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for i, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"{path}:{i}: unknown config key {key!r}")
        values[key] = _parse_value(key, raw, types[key])
    return RunConfig(**values)
