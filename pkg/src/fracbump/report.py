"""Per-cube scan results with a reported maximiser."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import CubeRegion

__all__ = ["BumpReport", "scan_report"]


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, np.bool_):
        return bool(v)
    return v if isinstance(v, (int, str, bool)) or v is None else str(v)


@dataclass(frozen=True)
class BumpReport:
    """``per_cube`` holds ``(label, value)`` pairs in input order."""

    per_cube: tuple
    sup: float
    argmax: str
    params: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.sup)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.per_cube])

    def to_dict(self) -> dict:
        return {
            "params": _jsonable(self.params),
            "sup": _jsonable(self.sup),
            "argmax_cube": self.argmax,
            "per_cube": [[lab, _jsonable(v)] for lab, v in self.per_cube],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cube", "value"])
        for lab, v in self.per_cube:
            w.writerow([lab, repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def scan_report(cubes: list[CubeRegion], values, params=None) -> BumpReport:
    """Build a report; ties for the max go to the lexicographically smallest address."""
    values = np.asarray(values, dtype=float)
    if values.shape != (len(cubes),) or not len(cubes):
        raise ValueError("need one value per cube")
    if np.any(np.isnan(values)):
        raise ArithmeticError("NaN in per-cube values")
    top = values.max()
    best = min((Q.sort_key(), k) for k, Q in enumerate(cubes) if values[k] == top)[1]
    return BumpReport(
        tuple((Q.label(), float(v)) for Q, v in zip(cubes, values)),
        float(top),
        cubes[best].label(),
        dict(params or {}),
    )
