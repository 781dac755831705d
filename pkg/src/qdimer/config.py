"""Flat ``key = value`` run configuration."""

from __future__ import annotations

import math
import typing
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from .analysis.modes import ANALYSIS_BASES, Thresholds
from .dynamics import TimeGrid
from .errors import ConfigError
from .fockspace import DEFAULT_MAX_DIM, BasisSpec, ModelParams, check_dimension
from .spectral import METHODS
from .states import CONVENTIONS, StateRecipe


@dataclass(frozen=True)
class RunConfig:
    c_h: float = 0.5
    c_a: float = 0.02
    c_c: float = 0.2
    levels: int = 40
    method: str = "lapack"
    max_dim: int = DEFAULT_MAX_DIM
    workers: int = 0

    state: str = "osd"
    x0: float = 3.5
    convention: str = "standard"

    t_start: float = 0.0
    t_end: float = 200.0
    t_points: int = 4001
    c_a_list: tuple = ()
    occupations: bool = False
    decay_threshold: float = 0.5
    decay_t_min: float = 5.0
    decay_window: float = 2.0 * math.pi

    l_tun: float = 0.80
    l_del: float = 0.55
    pair_gate: bool = True
    pair_split_ratio: float = 0.25
    analysis_basis: str = "local"

    select_indices: tuple = ()
    select_e_min: Optional[float] = None
    select_e_max: Optional[float] = None

    sweep_c_min: float = 0.0
    sweep_c_max: float = 0.3
    sweep_points: int = 301
    sweep_e_min: float = 9.1
    sweep_e_max: float = 11.4
    crossing_gap_fraction: float = 1.0
    overlap_min: float = 0.5
    refine_depth: int = 6

    n_list: tuple = (10, 20)
    conv_tol: float = 1e-3
    conv_bottom_fraction: float = 0.8

    out: str = "out"

    # derived objects; validation happens when they are built
    @property
    def params(self) -> ModelParams:
        return ModelParams(self.c_h, self.c_a, self.c_c)

    @property
    def basis(self) -> BasisSpec:
        return BasisSpec(self.levels)

    @property
    def recipe(self) -> StateRecipe:
        return StateRecipe(self.state, self.x0, self.convention)

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.t_start, self.t_end, self.t_points)

    @property
    def thresholds(self) -> Thresholds:
        return Thresholds(self.l_tun, self.l_del, self.pair_gate, self.pair_split_ratio, self.analysis_basis)

    @property
    def n_workers(self) -> Optional[int]:
        return None if self.workers == 0 else self.workers

    def validate(self) -> "RunConfig":
        """Build every derived object so that bad values fail before any computation."""
        self.params
        check_dimension(self.basis, self.max_dim)
        self.recipe
        self.grid
        self.thresholds
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.convention not in CONVENTIONS:
            raise ConfigError(f"convention must be one of {CONVENTIONS}")
        if self.analysis_basis not in ANALYSIS_BASES:
            raise ConfigError(f"analysis_basis must be one of {ANALYSIS_BASES}")
        if self.workers < 0:
            raise ConfigError("workers must be >= 0 (0 picks a default)")
        for c in self.c_a_list:
            ModelParams(self.c_h, c, self.c_c)
        if self.decay_window <= 0:
            raise ConfigError("decay_window must be positive")
        if any(k < 0 for k in self.select_indices):
            raise ConfigError("select_indices must be non-negative")
        if (self.select_e_min is None) != (self.select_e_max is None):
            raise ConfigError("select_e_min and select_e_max must be given together")
        if self.select_e_min is not None and self.select_e_max < self.select_e_min:
            raise ConfigError("select_e_max must be >= select_e_min")
        if self.sweep_points < 1:
            raise ConfigError("sweep_points must be >= 1")
        if self.sweep_points > 1 and self.sweep_c_max <= self.sweep_c_min:
            raise ConfigError("sweep_c_max must exceed sweep_c_min")
        if self.sweep_e_max <= self.sweep_e_min:
            raise ConfigError("sweep_e_max must exceed sweep_e_min")
        if not 0.0 < self.overlap_min < 1.0:
            raise ConfigError("overlap_min must lie in (0, 1)")
        if self.refine_depth < 0:
            raise ConfigError("refine_depth must be >= 0")
        if self.crossing_gap_fraction <= 0:
            raise ConfigError("crossing_gap_fraction must be positive")
        if len(self.n_list) < 2 or any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ConfigError(f"n_list must hold at least two ascending truncations, got {self.n_list}")
        for n in self.n_list:
            check_dimension(BasisSpec(n), self.max_dim)
        if self.conv_tol <= 0:
            raise ConfigError("conv_tol must be positive")
        if not 0.0 < self.conv_bottom_fraction <= 1.0:
            raise ConfigError("conv_bottom_fraction must lie in (0, 1]")
        return self

    def to_text(self, include_out: bool = True) -> str:
        lines = [f"{f.name} = {format_value(getattr(self, f.name))}" for f in fields(self)
                 if include_out or f.name != "out"]
        return "\n".join(lines) + "\n"


_HINTS = typing.get_type_hints(RunConfig)
LIST_ITEM = {"c_a_list": float, "select_indices": int, "n_list": int}


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_scalar(key: str, text: str, kind):
    try:
        if kind is bool:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            value = float(text)
            if not math.isfinite(value):
                raise ValueError(text)
            return value
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None


def parse_value(key: str, text: str):
    if key not in _HINTS:
        raise ConfigError(f"unknown config key {key!r}")
    text = text.strip()
    if key in LIST_ITEM:
        if text == "":
            return ()
        return tuple(_parse_scalar(key, part.strip(), LIST_ITEM[key]) for part in text.split(","))
    hint = _HINTS[key]
    if hint == Optional[float]:
        return None if text == "" else _parse_scalar(key, text, float)
    return _parse_scalar(key, text, hint)


def parse_assignment(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ConfigError(f"expected key=value, got {item!r}")
    key, text = item.split("=", 1)
    key = key.strip()
    return key, parse_value(key, text)


def read_config_file(path) -> dict:
    """Parse a config file: one ``key = value`` per line, ``#`` starts a comment."""
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    values = {}
    for lineno, line in enumerate(raw.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            key, value = parse_assignment(line)
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
        values[key] = value
    return values


def resolve_config(config_path=None, overrides=(), out=None) -> RunConfig:
    """Defaults, then the config file, then each ``key=value`` override, then ``out``."""
    values = {}
    if config_path is not None:
        values.update(read_config_file(config_path))
    for item in overrides:
        key, value = parse_assignment(item)
        values[key] = value
    if out is not None:
        values["out"] = str(out)
    return replace(RunConfig(), **values).validate()
