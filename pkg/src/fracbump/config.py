"""Experiment scenarios and their line-oriented ``key = value`` config format."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .orlicz import parse_young
from .specs import format_value
from .weights import parse_weight

__all__ = ["Scenario", "KINDS", "parse_scenario", "parse_scenario_text", "write_scenario", "ConfigError"]

KINDS = ("sufficiency", "sparse_necessity", "thm17_necessity", "bloom", "kernel_sep", "verify_all")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


@dataclass(frozen=True)
class Scenario:
    kind: str = "sufficiency"
    dim: int = 1
    grid: int = 128
    half_width: float = 1.0
    p: float = 2.0
    q: float | None = None
    alpha: float = 0.25
    m: int = 1
    delta: float = 0.5
    seed: int = 0
    trials: int = 20
    mu: str = "const(c=1)"
    nu: str = "const(c=1)"
    lam: str = "const(c=1)"
    eta: str = ""
    b: str = "linear(c=1)"
    young_a: str = ""
    young_b: str = ""
    young_c: str = ""
    young_d: str = ""
    min_cells: int = 4
    refine_factor: float = 1.5
    tolerance: float = 0.05
    epsilons: tuple = (0.2, 0.3, 0.5)
    separations: tuple = (4.0, 8.0, 16.0, 32.0, 64.0)
    radius: float = 1.0
    doubling_max: float = 64.0
    output: str = ""
    base_dir: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.dim not in (1, 2):
            raise ConfigError(f"dim must be 1 or 2, got {self.dim}")
        if self.grid < 8 or self.grid & (self.grid - 1):
            raise ConfigError(f"grid must be a power of two >= 8, got {self.grid}")
        if not self.half_width > 0:
            raise ConfigError("half_width must be positive")
        if not 1 < self.p < math.inf:
            raise ConfigError(f"p must lie in (1, inf), got {self.p}")
        if not 0 < self.alpha < self.dim:
            raise ConfigError(f"alpha must lie in (0, {self.dim}), got {self.alpha}")
        if self.q is not None and not self.p <= self.q < math.inf:
            raise ConfigError(f"q must satisfy p <= q < inf, got {self.q}")
        if self.q is None and not 1 / self.p - self.alpha / self.dim > 0:
            raise ConfigError("q cannot be derived: need 1/p > alpha/dim")
        if self.m < 0:
            raise ConfigError("m must be nonnegative")
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        for name in ("mu", "nu", "lam"):
            parse_weight(getattr(self, name))
        if self.eta:
            parse_weight(self.eta)
        for name in ("young_a", "young_b", "young_c", "young_d"):
            text = getattr(self, name)
            if text and not text.startswith("table"):
                parse_young(text)

    @property
    def q_value(self) -> float:
        """``q`` as given, or from ``1/p - 1/q = alpha/dim``."""
        if self.q is not None:
            return self.q
        return 1.0 / (1.0 / self.p - self.alpha / self.dim)

    def replace(self, **changes) -> Scenario:
        return dataclasses.replace(self, **changes)

    def echo(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "base_dir"}
        out["q_value"] = self.q_value
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}


_FIELDS = {f.name: f for f in fields(Scenario) if f.name != "base_dir"}


def _convert(name: str, text: str):
    kind = _FIELDS[name].type
    if name == "q":
        return None if text in ("", "auto") else float(text)
    if name in ("epsilons", "separations"):
        return _floats(text)
    if kind == "int":
        value = float(text)
        if not value.is_integer():
            raise ValueError(f"expected an integer, got {text!r}")
        return int(value)
    if kind == "float":
        return float(text)
    return text


def parse_scenario_text(text: str, base_dir: str = "") -> Scenario:
    """Parse config text.  ``#`` starts a comment; values may be quoted."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        value = value.strip("\"'")
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _convert(key, value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    try:
        return Scenario(**values, base_dir=base_dir)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def parse_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario_text(path.read_text(), str(path.parent))


def _render(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return ", ".join(format_value(float(v)) for v in value)
    if isinstance(value, str):
        return f'"{value}"' if value else '""'
    return format_value(value)


def write_scenario(s: Scenario, path=None) -> str:
    text = "".join(f"{name} = {_render(getattr(s, name))}\n" for name in _FIELDS)
    if path is not None:
        Path(path).write_text(text)
    return text
