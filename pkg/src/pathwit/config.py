"""Flat ``key = value`` files for experiment configs and measured counts."""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidDataError, InvalidParameterError
from .source import SourceParams
from .witness import ClickStats, outcome_strings

__all__ = [
    "EXPERIMENTS",
    "Grid",
    "ExperimentConfig",
    "parse_key_values",
    "parse_grid",
    "load_config",
    "load_counts",
    "parse_counts",
    "format_counts",
]

EXPERIMENTS = ("bs-sweep", "loss-sweep", "n-scaling", "tripartite", "verdict")

# detector dark-count probability per gate and measured coincidence bound of the bipartite runs
_BIPARTITE_NOISE = (1e-2, "1e-4")


@dataclass(frozen=True)
class Grid:
    lo: float
    hi: float
    step: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and np.isfinite(self.step)):
            raise ConfigError("grid bounds must be finite")
        if self.step <= 0:
            raise ConfigError(f"grid step must be positive, got {self.step}")
        if self.lo > self.hi:
            raise ConfigError(f"grid bounds out of order: {self.lo} > {self.hi}")

    def points(self) -> np.ndarray:
        # integer stepping keeps the points identical across platforms
        count = int(np.floor((self.hi - self.lo) / self.step + 1e-9)) + 1
        return self.lo + self.step * np.arange(count)


def parse_grid(text: str) -> Grid:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must look like lo:hi:step, got {text!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"grid must look like lo:hi:step, got {text!r}") from exc
    return Grid(lo, hi, step)


@dataclass
class ExperimentConfig:
    experiment: str = "bs-sweep"
    alpha: float = 0.83
    t_g: float = float(np.sqrt(1e-3))
    eta_h: float = 0.5
    eta_total: float = 0.31
    transmittivity: float = 0.5
    dark_count: float | None = None
    pc: str = ""  # a number, or "model" to derive it from the photon statistics
    grid: Grid | None = None
    alpha_err: float = 0.01
    eta_err: float = 0.01
    arm_transmission: float = 0.19
    cascade: str = "0,1,0.5;1,2,0.3"
    n_min: int = 2
    n_max: int = 8
    sdp_max_modes: int = 4
    counts: str = ""
    output: str = ""

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.n_min < 2 or self.n_max < self.n_min:
            raise ConfigError(f"invalid mode range {self.n_min}..{self.n_max}")
        self.pc_value()
        self.cascade_steps()
        try:
            SourceParams(self.t_g, self.eta_h, self.eta_total, self.transmittivity, self.alpha,
                         self.dark_count_value())
        except InvalidParameterError as exc:
            raise ConfigError(str(exc)) from exc
        if not 0.0 <= self.arm_transmission <= 1.0:
            raise ConfigError(f"arm_transmission must lie in [0, 1], got {self.arm_transmission}")
        if self.alpha_err < 0 or self.eta_err < 0:
            raise ConfigError("uncertainty half-widths must be non-negative")

    def dark_count_value(self) -> float:
        """Per-detector accidental click probability; 1e-2 for the bipartite sweeps, 0 otherwise."""
        if self.dark_count is not None:
            return float(self.dark_count)
        return _BIPARTITE_NOISE[0] if self.experiment in ("bs-sweep", "loss-sweep") else 0.0

    def pc_value(self) -> float | None:
        """Coincidence bound; None means derived from the model photon statistics."""
        text = self.pc.strip().lower()
        if not text:
            text = _BIPARTITE_NOISE[1] if self.experiment in ("bs-sweep", "loss-sweep") else "model"
        if text == "model":
            return None
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"pc must be a number or 'model', got {self.pc!r}") from exc

    def cascade_steps(self) -> tuple[tuple[int, int, float], ...]:
        steps = []
        try:
            for item in self.cascade.split(";"):
                a, b, t = item.split(",")
                steps.append((int(a), int(b), float(t)))
        except ValueError as exc:
            raise ConfigError(f"cascade must look like 'a,b,T;a,b,T', got {self.cascade!r}") from exc
        return tuple(steps)


_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")


def parse_key_values(text: str, source: str = "<string>", error=ConfigError) -> dict[str, tuple[str, int]]:
    """Parse ``key = value`` lines; returns key -> (raw value, line number)."""
    out: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m or not m.group(2):
            raise error(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key = m.group(1)
        if key in out:
            raise error(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = (m.group(2), lineno)
    return out


def _convert(name: str, raw: str, kind, source: str, lineno: int):
    try:
        if name == "grid":
            return parse_grid(raw)
        if kind is bool:
            if raw.lower() not in ("true", "false"):
                raise ValueError(raw)
            return raw.lower() == "true"
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"{source}:{lineno}: invalid value for {name}: {raw!r}") from exc


_KINDS = {"str": str, "float": float, "float | None": float, "int": int, "bool": bool, "Grid | None": Grid}


def load_config(path: str | Path | None = None, **overrides) -> ExperimentConfig:
    """Read a config file (if given) and apply keyword overrides on top."""
    values = {}
    known = {f.name: _KINDS.get(str(f.type), str) for f in fields(ExperimentConfig)}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for key, (raw, lineno) in parse_key_values(text, str(path)).items():
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _convert(key, raw, known[key], str(path), lineno)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


# ---------------------------------------------------------------------------
# counts files


def _pair_suffix(pair: tuple[int, int], n_modes: int) -> str:
    return "_disp" if n_modes == 2 else f"_disp{pair[0] + 1}{pair[1] + 1}"


def parse_counts(text: str, source: str = "<string>") -> ClickStats:
    """Counts file: ``P_<outcome>`` (no displacement), ``P_<outcome>_disp`` (two modes) or
    ``P_<outcome>_disp<i><j>`` (displacement on modes i and j, 1-based), ``pc_<i>`` and ``alpha``.
    """
    entries = parse_key_values(text, source, InvalidDataError)

    def number(key):
        raw, lineno = entries[key]
        try:
            return float(raw)
        except ValueError as exc:
            raise InvalidDataError(f"{source}:{lineno}: {key} is not a number: {raw!r}") from exc

    lengths = {len(k.split("_")[1]) for k in entries if k.startswith("P_")}
    if len(lengths) != 1:
        raise InvalidDataError(f"{source}: outcome strings must all have the same length")
    n = lengths.pop()
    keys = outcome_strings(n)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    expected = {f"P_{k}" for k in keys}
    expected |= {f"P_{k}{_pair_suffix(p, n)}" for k in keys for p in pairs}
    expected |= {f"pc_{i + 1}" for i in range(n)} | {"alpha"}
    for key, (_, lineno) in entries.items():
        if key not in expected:
            raise InvalidDataError(f"{source}:{lineno}: unknown key {key!r}")
    missing = sorted(k for k in expected if k not in entries and k.startswith("P_") and "_disp" not in k)
    missing += sorted(f"pc_{i + 1}" for i in range(n) if f"pc_{i + 1}" not in entries)
    if missing:
        raise InvalidDataError(f"{source}: missing keys {missing}")
    undisplaced = {k: number(f"P_{k}") for k in keys}
    displaced = {}
    for p in pairs:
        names = [f"P_{k}{_pair_suffix(p, n)}" for k in keys]
        present = [nm in entries for nm in names]
        if any(present) and not all(present):
            raise InvalidDataError(f"{source}: incomplete displaced table {_pair_suffix(p, n)}")
        if all(present):
            displaced[p] = {k: number(nm) for k, nm in zip(keys, names)}
    pcs = tuple(number(f"pc_{i + 1}") for i in range(n))
    alpha = number("alpha") if "alpha" in entries else None
    try:
        return ClickStats(n, undisplaced, displaced, pcs, alpha)
    except InvalidDataError as exc:
        raise InvalidDataError(f"{source}: {exc}") from exc


def load_counts(path: str | Path) -> ClickStats:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidDataError(f"cannot read counts file {path}: {exc}") from exc
    return parse_counts(text, str(path))


def format_counts(stats: ClickStats) -> str:
    """Inverse of :func:`parse_counts`."""
    n = stats.n_modes
    lines = []
    if stats.alpha is not None:
        lines.append(f"alpha = {stats.alpha:.12g}")
    lines += [f"P_{k} = {v:.12g}" for k, v in stats.undisplaced.items()]
    for pair, table in sorted(stats.displaced.items()):
        lines += [f"P_{k}{_pair_suffix(pair, n)} = {v:.12g}" for k, v in table.items()]
    lines += [f"pc_{i + 1} = {p:.12g}" for i, p in enumerate(stats.pc)]
    return "\n".join(lines) + "\n"
