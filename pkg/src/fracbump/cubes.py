"""Batched per-cube evaluation: group equal-size cubes and work on stacked rows."""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from .dyadic import DyadicLattice, enumerate_cubes
from .grid import CubeRegion, Domain
from .orlicz import YoungFunction, luxemburg_batch

__all__ = ["default_cubes", "group_rows", "cube_means", "cube_luxemburg"]


def default_cubes(domain: Domain, cubes=None) -> list[CubeRegion]:
    """``cubes`` as a list, or every dyadic cube of the domain when it is None."""
    if cubes is None:
        return enumerate_cubes(DyadicLattice(domain), 1)
    cubes = list(cubes)
    if not cubes:
        raise ValueError("empty cube list")
    for Q in cubes:
        if Q.domain != domain:
            raise ValueError("cube lies in a different domain")
    return cubes


def group_rows(values: np.ndarray, cubes) -> list[tuple[list[int], np.ndarray]]:
    """Group cubes by size; each group gives cube indices and a ``(k, cells)`` array."""
    groups = defaultdict(list)
    for k, Q in enumerate(cubes):
        groups[Q.cells].append(k)
    out = []
    for _, ks in sorted(groups.items()):
        rows = np.stack([values[cubes[k].slices].ravel() for k in ks])
        out.append((ks, rows))
    return out


def cube_means(values: np.ndarray, cubes) -> np.ndarray:
    res = np.empty(len(cubes))
    for ks, rows in group_rows(values, cubes):
        res[ks] = rows.mean(axis=1)
    return res


def cube_luxemburg(values: np.ndarray, A: YoungFunction | None, cubes) -> np.ndarray:
    """``||v||_{A,Q}`` for every cube; the plain average of ``|v|`` when ``A`` is None."""
    res = np.empty(len(cubes))
    for ks, rows in group_rows(values, cubes):
        res[ks] = np.abs(rows).mean(axis=1) if A is None else luxemburg_batch(rows, A)
    return res
