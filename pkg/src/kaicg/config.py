"""
Flat ``key = value`` experiment files.

Lists are comma separated; correlation rows are separated by ``;``.
``#`` starts a comment. Example::

    m = 12
    p = 2
    angles_deg = 15, 17
    n_snapshots = 100
    snr_db_list = -6, -2, 0, 2, 4
    rho = 0.9
    trials = 150
    seed = 2024
    algorithms = CG, MS-KAI-CG
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bench import ESTIMATORS
from .cg import AngleGrid
from .covariance import SmoothingConfig
from .errors import ValidationError
from .kai import KaiConfig
from .signal_model import ArrayGeometry, ScenarioConfig, SourceSet

REQUIRED = ("m", "p", "angles_deg", "n_snapshots", "snr_db_list", "trials", "seed", "algorithms")
OPTIONAL = ("d_over_lambda", "powers", "rho", "correlation", "grid_step_deg", "iota", "iterations",
            "subarray_l")


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = "<config>", line: int | None = None):
        self.path = path
        self.line = line
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")


@dataclass
class Experiment:
    scenario: ScenarioConfig
    snr_db_list: list
    trials: int
    algorithms: list
    kai: KaiConfig
    smoothing: SmoothingConfig
    subarray_l_default: bool
    raw: dict = field(default_factory=dict)

    def with_seed(self, seed: int) -> "Experiment":
        self.scenario = self.scenario.with_seed(seed)
        self.raw["seed"] = str(seed)
        return self


def _parse_lines(text: str, path: str) -> tuple[dict, dict]:
    values, lines = {}, {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", path, no)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in REQUIRED and key not in OPTIONAL:
            raise ConfigError(f"unknown key {key!r}", path, no)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", path, no)
        if not value:
            raise ConfigError(f"empty value for {key!r}", path, no)
        values[key] = value
        lines[key] = no
    return values, lines


class _Reader:
    def __init__(self, values, lines, path):
        self.values, self.lines, self.path = values, lines, path

    def fail(self, key, message):
        raise ConfigError(f"{key}: {message}", self.path, self.lines.get(key))

    def _convert(self, key, text, kind):
        try:
            return kind(text)
        except ValueError:
            self.fail(key, f"cannot read {text!r} as {kind.__name__}")

    def scalar(self, key, kind, default=None):
        if key not in self.values:
            return default
        return self._convert(key, self.values[key], kind)

    def items(self, key, kind):
        if key not in self.values:
            return None
        return [self._convert(key, item.strip(), kind) for item in self.values[key].split(",") if item.strip()]


def _as_int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(text)
    return int(value)


def parse_config(text: str, path: str = "<config>") -> Experiment:
    values, lines = _parse_lines(text, path)
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}", path)
    rd = _Reader(values, lines, path)

    m = rd.scalar("m", _as_int)
    if m < 1:
        rd.fail("m", "must be at least 1")
    p = rd.scalar("p", _as_int)
    if p < 1:
        rd.fail("p", "must be at least 1")
    angles = rd.items("angles_deg", float)
    if len(angles) != p:
        rd.fail("angles_deg", f"expected {p} angles, got {len(angles)}")
    if any(not -90.0 <= a <= 90.0 for a in angles):
        rd.fail("angles_deg", "angles must lie in [-90, 90]")
    powers = rd.items("powers", float)
    if powers is not None and len(powers) != p:
        rd.fail("powers", f"expected {p} powers, got {len(powers)}")
    if "rho" in values and "correlation" in values:
        rd.fail("correlation", "give either rho or correlation, not both")
    corr = None
    if "rho" in values:
        rho = rd.scalar("rho", float)
        corr = np.full((p, p), rho, dtype=complex)
        np.fill_diagonal(corr, 1.0)
    elif "correlation" in values:
        rows = [row for row in values["correlation"].split(";") if row.strip()]
        try:
            corr = np.array([[complex(c.strip().replace(" ", "")) for c in row.split(",")] for row in rows])
        except ValueError:
            rd.fail("correlation", "rows must be comma-separated numbers separated by ';'")

    snrs = rd.items("snr_db_list", float)
    algorithms = [a.strip() for a in values["algorithms"].split(",") if a.strip()]
    for alg in algorithms:
        if alg not in ESTIMATORS:
            rd.fail("algorithms", f"unknown algorithm {alg!r}; expected one of {', '.join(ESTIMATORS)}")
    if not algorithms:
        rd.fail("algorithms", "no algorithms listed")
    if not snrs:
        rd.fail("snr_db_list", "no SNR values listed")

    try:
        key = "d_over_lambda"
        geometry = ArrayGeometry(m, rd.scalar("d_over_lambda", float, 0.5))
        key = next((k for k in ("rho", "correlation", "powers") if k in values), "angles_deg")
        sources = SourceSet(tuple(angles), powers, corr)
        n_snapshots = rd.scalar("n_snapshots", _as_int)
        if n_snapshots < 1:
            rd.fail("n_snapshots", "must be at least 1")
        key = "p"
        scenario = ScenarioConfig(geometry, sources, n_snapshots, snrs[0], rd.scalar("seed", _as_int))
        key = "grid_step_deg"
        grid = AngleGrid(rd.scalar("grid_step_deg", float, 0.2))
        key = "iota"
        kai = KaiConfig(rd.scalar("iterations", _as_int, 4), rd.scalar("iota", float, 0.1), grid)
        key = "subarray_l"
        l_value = rd.scalar("subarray_l", _as_int)
        smoothing = SmoothingConfig.default(m, p) if l_value is None else SmoothingConfig(m, l_value, p)
    except ValidationError as exc:
        rd.fail(key, str(exc))

    trials = rd.scalar("trials", _as_int)
    if trials < 1:
        rd.fail("trials", "must be at least 1")
    return Experiment(scenario, snrs, trials, algorithms, kai, smoothing, l_value is None, dict(values))


def load_config(path) -> Experiment:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from exc
    return parse_config(text, str(path))


def bundled_scenarios() -> dict[str, Path]:
    folder = Path(__file__).parent / "scenarios"
    return {p.stem: p for p in sorted(folder.glob("*.cfg"))}


def resolve_config_path(name_or_path: str) -> Path:
    """Accept a file path or the stem of a bundled scenario."""
    path = Path(name_or_path)
    if path.exists():
        return path
    bundled = bundled_scenarios()
    if name_or_path in bundled:
        return bundled[name_or_path]
    return path
