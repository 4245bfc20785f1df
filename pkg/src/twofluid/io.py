"""Configuration files, binary snapshots and report serialization.

Config files are line-oriented ``key = value`` text; ``#`` starts a comment.
The full key list is documented in ``docs/config_keys.md``.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from .core import FluidState, Grid, ModelParams, ValidationError, validate_params
from .diagnostics import DefectReport, EnergyBudget
from .harness import ConvergenceResult, InitialSpec, LadderResult, Scenario

__all__ = [
    "ConfigError",
    "SnapshotError",
    "RunConfig",
    "parse_config",
    "serialize_config",
    "load_config",
    "write_snapshot",
    "read_snapshot",
    "write_report",
    "CSV_COLUMNS",
    "SNAPSHOT_MAGIC",
    "SNAPSHOT_VERSION",
]


class ConfigError(ValidationError):
    """Rejected configuration text; names the offending line and key."""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(": ".join(where + [message]))
        self.line = line
        self.key = key


class SnapshotError(OSError):
    """Malformed, truncated or unsupported snapshot file."""


# ---------------------------------------------------------------------------
# configuration


def _opt(kind):
    return ("optional", kind)


# key -> type; order is the serialization order
_KEYS: Dict[str, Any] = {
    # model parameters
    "mu": float, "lam": float, "gamma": float, "alpha": float, "beta": float,
    "epsilon": float, "delta": float, "c0": _opt(float),
    "validation": str,
    # grid and basis
    "extent": "floats", "points": "ints", "k": int,
    # initial data
    "profile": str, "rho_level": float, "n_level": float, "amplitude": float,
    "width": float, "n_ratio": _opt(float), "momentum": float, "momentum_mode": int,
    "mollifier_radius": _opt(float),
    # schedule
    "T": float, "dt": float, "stride": int,
    # ladder
    "ladder_kind": _opt(str), "ladder_values": "floats", "workers": int,
    # output
    "out_dir": str, "write_snapshots": bool, "write_csv": bool,
}
REQUIRED_KEYS = ("gamma", "alpha")
VALIDATION_MODES = ("window", "comparability", "none")


@dataclass
class RunConfig:
    """Flat, serializable description of a run or a ladder."""

    gamma: float
    alpha: float
    mu: float = 1.0
    lam: float = 0.0
    beta: float = 5.0
    epsilon: float = 1e-2
    delta: float = 1e-3
    c0: Optional[float] = None
    validation: str = "window"
    extent: List[float] = field(default_factory=lambda: [1.0])
    points: List[int] = field(default_factory=lambda: [128])
    k: int = 16
    profile: str = "mixture"
    rho_level: float = 1.0
    n_level: float = 1.0
    amplitude: float = 0.5
    width: float = 0.25
    n_ratio: Optional[float] = None
    momentum: float = 1.0
    momentum_mode: int = 1
    mollifier_radius: Optional[float] = 0.05
    T: float = 0.1
    dt: float = 1e-3
    stride: int = 10
    ladder_kind: Optional[str] = None
    ladder_values: List[float] = field(default_factory=list)
    workers: int = 1
    out_dir: str = "out"
    write_snapshots: bool = False
    write_csv: bool = True

    def params(self) -> ModelParams:
        return ModelParams(mu=self.mu, lam=self.lam, gamma=self.gamma, alpha=self.alpha,
                           beta=self.beta, epsilon=self.epsilon, delta=self.delta, c0=self.c0)

    def grid(self) -> Grid:
        return Grid(tuple(self.extent), tuple(self.points))

    def initial(self) -> InitialSpec:
        return InitialSpec(profile=self.profile, rho_level=self.rho_level,
                           n_level=self.n_level, amplitude=self.amplitude, width=self.width,
                           n_ratio=self.n_ratio, momentum=self.momentum,
                           momentum_mode=self.momentum_mode, c0=self.c0,
                           mollifier_radius=self.mollifier_radius)

    def scenario(self) -> Scenario:
        return Scenario(self.grid(), self.params(), self.initial(), self.k, self.T, self.dt,
                        self.stride)


def _convert(raw: str, kind, line: int, key: str):
    try:
        if isinstance(kind, tuple):
            if raw.lower() == "none":
                return None
            return _convert(raw, kind[1], line, key)
        if kind is float:
            return float(raw)
        if kind is int:
            return int(raw)
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if kind is str:
            return raw
        if kind == "floats":
            return [float(v) for v in raw.split(",") if v.strip()]
        if kind == "ints":
            return [int(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        name = kind if isinstance(kind, str) else getattr(kind, "__name__", str(kind))
        if isinstance(kind, tuple):
            name = f"{kind[1].__name__} or none"
        raise ConfigError(f"cannot read {raw!r} as {name}", line, key) from None
    raise AssertionError(kind)


# leading symbol of an invariant message -> keys to blame, most specific first
_SYMBOL_KEYS = (
    ("β", ("beta",)), ("2μ+λ", ("lam", "mu")), ("μ", ("mu",)), ("γ", ("gamma",)),
    ("α", ("alpha",)), ("ε", ("epsilon",)), ("δ", ("delta",)), ("c0", ("c0",)),
    ("extent", ("extent",)), ("dimension", ("extent", "points")), ("cells", ("points",)),
    ("profile", ("profile",)), ("width", ("width",)), ("momentum_mode", ("momentum_mode",)),
    ("nonnegative", ("rho_level", "n_level", "amplitude", "n_ratio")),
)


def _blame_keys(message: str) -> tuple:
    for symbol, keys in _SYMBOL_KEYS:
        if message.startswith(symbol) or symbol in message.split()[0:3]:
            return keys
    for symbol, keys in _SYMBOL_KEYS:
        if symbol in message:
            return keys
    return ("gamma",)


def parse_config(text: str) -> RunConfig:
    """Parse and validate ``key = value`` text.

    Raises
    ------
    ConfigError
        Unknown, duplicated or missing keys, unreadable values, or parameters
        rejected by the model invariants or the chosen validation mode.
    """
    values: Dict[str, Any] = {}
    lines: Dict[str, int] = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        content = raw_line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError("expected 'key = value'", number)
        key, raw = (part.strip() for part in content.split("=", 1))
        if key not in _KEYS:
            raise ConfigError("unknown key", number, key)
        if key in values:
            raise ConfigError(f"duplicate key (first set on line {lines[key]})", number, key)
        values[key] = _convert(raw, _KEYS[key], number, key)
        lines[key] = number
    for key in REQUIRED_KEYS:
        if key not in values:
            raise ConfigError("missing required key", None, key)

    if values.get("validation", "window") not in VALIDATION_MODES:
        raise ConfigError(f"must be one of {VALIDATION_MODES}", lines["validation"], "validation")
    cfg = RunConfig(**values)

    def blame(*candidates):
        for key in candidates:
            if key in lines:
                return lines[key], key
        return None, candidates[0]

    try:
        p = cfg.params()
        cfg.grid()
        cfg.initial()
    except ValidationError as exc:
        msg = str(exc)
        line, key = blame(*_blame_keys(msg))
        raise ConfigError(msg, line, key) from None
    if cfg.validation != "none":
        verdict = validate_params(p, cfg.validation)
        if not verdict:
            reason = verdict.reason
            if "c0" in reason:
                order = ("c0", "validation")
            elif reason.startswith("α"):
                order = ("alpha", "gamma")
            else:
                order = ("gamma", "alpha")
            line, key = blame(*order)
            raise ConfigError(reason, line, key)
    if cfg.ladder_kind is not None and cfg.ladder_kind not in ("epsilon", "delta", "basis_k"):
        line, key = blame("ladder_kind")
        raise ConfigError("must be epsilon, delta or basis_k", line, key)
    return cfg


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_format(v) for v in value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    """Text that :func:`parse_config` reads back to an equal RunConfig."""
    lines = ["# twofluid run configuration"]
    for key in _KEYS:
        lines.append(f"{key} = {_format(getattr(cfg, key))}")
    return "\n".join(lines) + "\n"


def load_config(path: Union[str, os.PathLike], overrides: Sequence[str] = ()) -> RunConfig:
    """Read a config file and apply ``key=value`` overrides (later lines win)."""
    text = Path(path).read_text()
    return parse_config(apply_overrides(text, overrides))


def apply_overrides(text: str, overrides: Sequence[str]) -> str:
    """Drop config lines for overridden keys and append the overrides."""
    if not overrides:
        return text
    keys = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        keys[key] = value
    kept = []
    for raw_line in text.splitlines():
        content = raw_line.split("#", 1)[0]
        if "=" in content and content.split("=", 1)[0].strip() in keys:
            kept.append("# overridden: " + raw_line)
        else:
            kept.append(raw_line)
    kept += [f"{k} = {v}" for k, v in keys.items()]
    return "\n".join(kept) + "\n"


# ---------------------------------------------------------------------------
# snapshots

SNAPSHOT_MAGIC = "TWOFLUID-SNAPSHOT"
SNAPSHOT_VERSION = 1
_END = "END"


def write_snapshot(state: FluidState, path: Union[str, os.PathLike]) -> None:
    """Text header followed by little-endian float64 ``rho, n, u_1 ... u_d``."""
    g = state.grid
    header = [
        SNAPSHOT_MAGIC,
        f"version = {SNAPSHOT_VERSION}",
        f"dim = {g.dim}",
        "extent = " + " ".join(repr(float(L)) for L in g.extent),
        "points = " + " ".join(str(p) for p in g.points),
        f"time = {float(state.time)!r}",
        "fields = rho n " + " ".join(f"u{a}" for a in range(g.dim)),
        "encoding = float64-le",
        _END,
    ]
    payload = np.concatenate(
        [state.rho.values.ravel(), state.n.values.ravel(), state.u.components.ravel()]
    ).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(payload.tobytes())


def read_snapshot(path: Union[str, os.PathLike]) -> FluidState:
    with open(path, "rb") as fh:
        data = fh.read()
    lines, pos = [], 0
    while True:
        end = data.find(b"\n", pos)
        if end < 0:
            raise SnapshotError(f"{path}: header not terminated")
        try:
            line = data[pos:end].decode("ascii")
        except UnicodeDecodeError:
            raise SnapshotError(f"{path}: header is not text") from None
        pos = end + 1
        if not lines and line != SNAPSHOT_MAGIC:
            raise SnapshotError(f"{path}: bad magic {line[:32]!r}")
        if line == _END:
            break
        lines.append(line)
    meta = {}
    for line in lines[1:]:
        if "=" not in line:
            raise SnapshotError(f"{path}: malformed header line {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        meta[k] = v
    try:
        version = int(meta["version"])
    except (KeyError, ValueError):
        raise SnapshotError(f"{path}: missing version") from None
    if version != SNAPSHOT_VERSION:
        raise SnapshotError(f"{path}: unsupported snapshot version {version}")
    try:
        dim = int(meta["dim"])
        extent = tuple(float(v) for v in meta["extent"].split())
        points = tuple(int(v) for v in meta["points"].split())
        time = float(meta["time"])
    except (KeyError, ValueError) as exc:
        raise SnapshotError(f"{path}: header mismatch ({exc})") from None
    if meta.get("encoding") != "float64-le":
        raise SnapshotError(f"{path}: unsupported encoding {meta.get('encoding')!r}")
    if len(extent) != dim or len(points) != dim:
        raise SnapshotError(f"{path}: header mismatch (dim {dim} vs extents {extent})")
    grid = Grid(extent, points)
    count = (2 + dim) * grid.size
    payload = data[pos:]
    if len(payload) != 8 * count:
        raise SnapshotError(
            f"{path}: payload has {len(payload)} bytes, expected {8 * count} (truncated?)"
        )
    arr = np.frombuffer(payload, dtype="<f8").astype(float)
    rho = arr[:grid.size].reshape(grid.shape)
    n = arr[grid.size:2 * grid.size].reshape(grid.shape)
    u = arr[2 * grid.size:].reshape((dim,) + grid.shape)
    return FluidState.from_arrays(grid, rho, n, u, time)


# ---------------------------------------------------------------------------
# reports

CSV_COLUMNS = (
    "time", "kinetic", "potential_n", "potential_rho", "artificial", "dissipation_rate",
    "residual", "comparability_margin", "convex_ratio_rho", "convex_ratio_n",
    "llogl_rho", "llogl_n",
)


def _clean(obj):
    """JSON-safe copy: arrays to lists, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _rows(report: DefectReport) -> List[dict]:
    rows = []
    for i, t in enumerate(report.times):
        row = {"time": t}
        if i < len(report.energy):
            e = report.energy[i]
            for key in ("kinetic", "potential_n", "potential_rho", "artificial",
                        "dissipation_rate"):
                row[key] = e[key]
        if i < len(report.energy_residual):
            row["residual"] = report.energy_residual[i]
        if i < len(report.comparability_series):
            row["comparability_margin"] = report.comparability_series[i]
        for which in ("rho", "n"):
            if i < len(report.convex_ratio_series[which]):
                row[f"convex_ratio_{which}"] = report.convex_ratio_series[which][i]
            if i < len(report.llogl_series[which]):
                row[f"llogl_{which}"] = report.llogl_series[which][i]
        rows.append(row)
    return rows


def _write_csv(rows: List[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(float(v)) for k, v in row.items()})


def write_report(report, path: Union[str, os.PathLike]) -> None:
    """Serialize a report.

    ``.csv`` paths receive the per-snapshot time series of a
    :class:`DefectReport` (or a sequence of :class:`EnergyBudget`) with the
    columns of :data:`CSV_COLUMNS`; every other path receives JSON.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if isinstance(report, DefectReport):
            rows = _rows(report)
        elif isinstance(report, (list, tuple)) and all(isinstance(e, EnergyBudget) for e in report):
            rows = [
                {k: getattr(e, k) for k in ("kinetic", "potential_n", "potential_rho",
                                           "artificial", "dissipation_rate")}
                for e in report
            ]
        else:
            raise TypeError(f"cannot write {type(report).__name__} as CSV")
        _write_csv(rows, path)
        return
    if isinstance(report, (DefectReport, LadderResult, ConvergenceResult)):
        payload = report.to_dict()
    elif isinstance(report, EnergyBudget):
        payload = report.as_dict()
    elif isinstance(report, (list, tuple)) and all(isinstance(e, EnergyBudget) for e in report):
        payload = [e.as_dict() for e in report]
    elif isinstance(report, dict):
        payload = report
    else:
        raise TypeError(f"cannot serialize {type(report).__name__}")
    with open(path, "w") as fh:
        json.dump(_clean(payload), fh, indent=2, allow_nan=False)
        fh.write("\n")
