"""Uniform cell-centred grids on the box [-L, L]^dim and the functions living on them.

Every quantity in the package (test functions, symbols, weights) is a
:class:`GridFunction`: one real sample per cell, taken at the cell centre.
Integrals are midpoint sums, ``sum(values) * h**dim``.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Domain",
    "GridFunction",
    "CubeRegion",
    "cube_average",
    "lp_norm",
    "weak_lq_norm",
]

_BINARY_MAGIC = b"FBGF"
_BINARY_HEADER = struct.Struct("<4sIId")


@dataclass(frozen=True)
class Domain:
    """The box ``[-half_width, half_width]^dim`` cut into ``n_cells`` cells per side."""

    dim: int
    half_width: float
    n_cells: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        n = self.n_cells
        if n < 8 or n & (n - 1):
            raise ValueError(f"n_cells must be a power of two >= 8, got {n}")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n_cells

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_cells,) * self.dim

    @property
    def size(self) -> int:
        return self.n_cells**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def depth(self) -> int:
        """Number of halvings from the root box down to single cells."""
        return self.n_cells.bit_length() - 1

    def axis(self) -> np.ndarray:
        return -self.half_width + (np.arange(self.n_cells) + 0.5) * self.h

    def coords(self) -> tuple[np.ndarray, ...]:
        """Cell-centre coordinates, one array of ``shape`` per axis."""
        ax = self.axis()
        return tuple(np.meshgrid(*([ax] * self.dim), indexing="ij"))

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c**2 for c in self.coords()))

    def points(self) -> np.ndarray:
        """Cell centres as a ``(size, dim)`` array in C order."""
        return np.stack([c.ravel() for c in self.coords()], axis=1)

    def refine(self, factor: int = 2) -> Domain:
        return Domain(self.dim, self.half_width, self.n_cells * factor)

    def full_cube(self) -> CubeRegion:
        return CubeRegion(self, (0,) * self.dim, self.n_cells, address=(0, (0,) * self.dim))

    def cube_from_bounds(self, lower, upper) -> CubeRegion:
        """Cube made of the cells whose centres lie in ``[lower, upper)`` on every axis.

        The bounds may be scalars (same on every axis) or per-axis sequences;
        the selected block must be square.
        """
        lower = np.broadcast_to(np.asarray(lower, dtype=float), (self.dim,))
        upper = np.broadcast_to(np.asarray(upper, dtype=float), (self.dim,))
        ax = self.axis()
        starts, sizes = [], []
        for lo, hi in zip(lower, upper):
            idx = np.nonzero((ax >= lo) & (ax < hi))[0]
            if idx.size == 0:
                raise ValueError("degenerate cube")
            starts.append(int(idx[0]))
            sizes.append(int(idx.size))
        if len(set(sizes)) != 1:
            raise ValueError(f"bounds do not select a cube: sides {sizes}")
        return CubeRegion(self, tuple(starts), sizes[0])

    def function(self, values) -> GridFunction:
        return GridFunction(self, values)

    def constant(self, c: float) -> GridFunction:
        return GridFunction(self, np.full(self.shape, float(c)))

    def from_callable(self, fn) -> GridFunction:
        """Sample ``fn(*coords)`` at the cell centres."""
        vals = np.broadcast_to(np.asarray(fn(*self.coords()), dtype=float), self.shape)
        return GridFunction(self, vals)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples of a real function at the cell centres of ``domain``.

    ``values`` has shape ``domain.shape`` and is read-only.
    """

    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.size != self.domain.size:
            raise ValueError(
                f"expected {self.domain.size} values for {self.domain}, got {vals.size}"
            )
        vals = vals.reshape(self.domain.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    # -- algebra -------------------------------------------------------

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.domain != self.domain:
                raise ValueError("domain mismatch")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.domain, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.domain, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self.domain, self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.domain, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.domain, self.values / self._other(other))

    def __rtruediv__(self, other):
        return GridFunction(self.domain, self._other(other) / self.values)

    def __pow__(self, exponent):
        return GridFunction(self.domain, self.values ** self._other(exponent))

    def __neg__(self):
        return GridFunction(self.domain, -self.values)

    def __abs__(self):
        return GridFunction(self.domain, np.abs(self.values))

    def map(self, fn) -> GridFunction:
        return GridFunction(self.domain, fn(self.values))

    @property
    def is_weight(self) -> bool:
        return bool(np.all(self.values > 0))

    def require_weight(self, name: str = "weight") -> GridFunction:
        if not self.is_weight:
            raise ValueError(f"{name} must be strictly positive")
        return self

    def integral(self) -> float:
        return float(self.values.sum() * self.domain.cell_volume)

    def restrict(self, cube: CubeRegion) -> np.ndarray:
        """Values on the cells of ``cube`` (a view)."""
        return self.values[cube.slices]

    def at(self, point) -> float:
        """Piecewise-linear interpolation between cell centres."""
        from scipy.interpolate import RegularGridInterpolator

        ax = self.domain.axis()
        interp = RegularGridInterpolator(
            (ax,) * self.domain.dim, self.values, bounds_error=True
        )
        return float(interp(np.atleast_1d(np.asarray(point, dtype=float)))[0])

    # -- serialisation -------------------------------------------------

    def to_csv(self, path=None) -> str:
        """CSV with columns ``index, x[, y], value``; returns the text."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = ["x", "y"][: self.domain.dim]
        writer.writerow(
            [f"# dim={self.domain.dim} n_cells={self.domain.n_cells} "
             f"half_width={self.domain.half_width!r}"]
        )
        writer.writerow(["index", *names, "value"])
        pts = self.domain.points()
        for i, (pt, v) in enumerate(zip(pts, self.values.ravel())):
            writer.writerow([i, *(repr(float(c)) for c in pt), repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path) -> GridFunction:
        return cls.parse_csv(Path(path).read_text())

    @classmethod
    def parse_csv(cls, text: str) -> GridFunction:
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# "):
            raise ValueError("missing grid header line")
        meta = dict(tok.split("=", 1) for tok in lines[0][2:].split())
        domain = Domain(int(meta["dim"]), float(meta["half_width"]), int(meta["n_cells"]))
        rows = list(csv.reader(lines[2:]))
        if len(rows) != domain.size:
            raise ValueError(f"expected {domain.size} rows, got {len(rows)}")
        values = np.empty(domain.size)
        for row in rows:
            values[int(row[0])] = float(row[-1])
        return cls(domain, values)

    def to_bytes(self) -> bytes:
        """Binary dump: magic, dim (u32), n_cells (u32), half_width (f64), raw f64 values, all little-endian."""
        d = self.domain
        head = _BINARY_HEADER.pack(_BINARY_MAGIC, d.dim, d.n_cells, d.half_width)
        return head + self.values.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, blob: bytes) -> GridFunction:
        magic, dim, n, L = _BINARY_HEADER.unpack_from(blob)
        if magic != _BINARY_MAGIC:
            raise ValueError("not a grid-function dump")
        domain = Domain(dim, L, n)
        vals = np.frombuffer(blob, dtype="<f8", offset=_BINARY_HEADER.size)
        return cls(domain, vals.astype(float))


@dataclass(frozen=True)
class CubeRegion:
    """A square block of cells: ``start`` index per axis and ``cells`` per side.

    ``address`` is ``(depth, index tuple)`` for dyadic cubes and ``None``
    otherwise.
    """

    domain: Domain
    start: tuple[int, ...]
    cells: int
    address: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.cells < 1:
            raise ValueError("degenerate cube")
        if len(self.start) != self.domain.dim:
            raise ValueError("start index has wrong dimension")
        for s in self.start:
            if s < 0 or s + self.cells > self.domain.n_cells:
                raise ValueError(f"cube {self.start}+{self.cells} leaves the domain")

    @property
    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(s, s + self.cells) for s in self.start)

    @property
    def n_cells(self) -> int:
        return self.cells**self.domain.dim

    @property
    def side(self) -> float:
        return self.cells * self.domain.h

    @property
    def measure(self) -> float:
        return self.n_cells * self.domain.cell_volume

    @property
    def center(self) -> np.ndarray:
        d = self.domain
        return -d.half_width + (np.asarray(self.start) + 0.5 * self.cells) * d.h

    def mask(self) -> np.ndarray:
        m = np.zeros(self.domain.shape, dtype=bool)
        m[self.slices] = True
        return m

    def contains_cube(self, other: CubeRegion) -> bool:
        return all(
            s <= o and o + other.cells <= s + self.cells
            for s, o in zip(self.start, other.start)
        )

    def dilate(self, factor: int = 2) -> CubeRegion:
        """Concentric cube with ``factor`` times the side; raises if it leaves the domain."""
        if (self.cells * (factor - 1)) % 2:
            raise ValueError("dilated cube is not cell aligned")
        pad = self.cells * (factor - 1) // 2
        return CubeRegion(self.domain, tuple(s - pad for s in self.start), self.cells * factor)

    def label(self) -> str:
        if self.address is not None:
            depth, idx = self.address
            return ":".join(str(v) for v in (depth, *idx))
        return "@" + ",".join(map(str, self.start)) + f"+{self.cells}"

    def sort_key(self) -> tuple:
        if self.address is not None:
            depth, idx = self.address
            return (0, depth, tuple(idx))
        return (1, self.cells, self.start)


def _check_same(f: GridFunction, *others):
    for g in others:
        if g.domain != f.domain:
            raise ValueError("domain mismatch")


def cube_average(f: GridFunction, cube: CubeRegion) -> float:
    if cube.domain != f.domain:
        raise ValueError("cube lies in a different domain")
    vals = f.restrict(cube)
    if vals.size == 0:
        raise ValueError("degenerate cube")
    return float(vals.mean())


def lp_norm(f: GridFunction, w: GridFunction | None, p: float) -> float:
    """``(sum |f|^p w h^dim)^(1/p)``; ``w=None`` means Lebesgue measure."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    wv = 1.0
    if w is not None:
        _check_same(f, w)
        wv = w.require_weight().values
    total = float(np.sum(np.abs(f.values) ** p * wv)) * f.domain.cell_volume
    return total ** (1.0 / p)


def weak_lq_norm(f: GridFunction, w: GridFunction | None, q: float) -> float:
    """``sup_t t * w({|f| > t})^(1/q)``.

    On a grid the supremum is approached as ``t`` increases to one of the
    sampled values ``v``, where the level set becomes ``{|f| >= v}``.
    """
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    wv = np.ones(f.domain.shape)
    if w is not None:
        _check_same(f, w)
        wv = w.require_weight().values
    a = np.abs(f.values).ravel()
    order = np.argsort(-a, kind="stable")
    a, mass = a[order], np.cumsum(wv.ravel()[order]) * f.domain.cell_volume
    # ties: the level set for v contains every sample equal to v
    run_end = np.searchsorted(-a, -a, side="right") - 1
    mass = mass[run_end]
    return float(np.max(a * mass ** (1.0 / q))) if a.size else 0.0
