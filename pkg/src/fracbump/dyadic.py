"""Dyadic lattice of the domain box, stopping-time sparse families, sparsity certificates.

A cube is addressed by ``(depth, index)`` where ``index`` is a tuple with one
entry per axis; the root is ``(0, (0,)*dim)`` and a cube at depth ``d`` has
``n_cells >> d`` cells per side.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import CubeRegion, Domain, GridFunction

__all__ = [
    "DyadicLattice",
    "SparseFamily",
    "enumerate_cubes",
    "construct_sparse_family",
    "sparsity_verify",
    "check_lattice_properties",
    "packing_ratio",
    "default_threshold",
    "DEFAULT_MIN_CELLS",
]

DEFAULT_MIN_CELLS = 4


def default_threshold(dim: int) -> float:
    return float(2 ** (dim + 1))


@dataclass(frozen=True)
class DyadicLattice:
    domain: Domain

    @property
    def max_depth(self) -> int:
        return self.domain.depth

    @property
    def dim(self) -> int:
        return self.domain.dim

    def cells_per_side(self, depth: int) -> int:
        return self.domain.n_cells >> depth

    def cube(self, address) -> CubeRegion:
        depth, idx = address
        idx = tuple(int(i) for i in idx)
        if not 0 <= depth <= self.max_depth or any(not 0 <= i < 2**depth for i in idx):
            raise ValueError(f"no cube at address {address}")
        size = self.cells_per_side(depth)
        return CubeRegion(self.domain, tuple(i * size for i in idx), size, address=(depth, idx))

    @property
    def root(self) -> CubeRegion:
        return self.cube((0, (0,) * self.dim))

    def children(self, address) -> list[tuple]:
        depth, idx = address
        if depth >= self.max_depth:
            return []
        return [
            (depth + 1, tuple(2 * i + o for i, o in zip(idx, offs)))
            for offs in itertools.product((0, 1), repeat=self.dim)
        ]

    def parent(self, address):
        depth, idx = address
        if depth == 0:
            return None
        return (depth - 1, tuple(i // 2 for i in idx))

    def addresses(self, depth: int):
        return [(depth, idx) for idx in itertools.product(range(2**depth), repeat=self.dim)]

    def containing(self, cell, depth: int):
        """Address of the depth-``depth`` cube containing the cell with index tuple ``cell``."""
        size = self.cells_per_side(depth)
        return (depth, tuple(int(c) // size for c in cell))

    def average_pyramid(self, f: GridFunction) -> list[np.ndarray]:
        """``pyr[d][idx]`` is the mean of ``f`` over the depth-``d`` cube ``idx``."""
        if f.domain != self.domain:
            raise ValueError("function lives on another domain")
        levels = [np.asarray(f.values, dtype=float)]
        for _ in range(self.max_depth):
            v = levels[-1]
            n = v.shape[0] // 2
            shape = sum(((n, 2) for _ in range(self.dim)), ())
            levels.append(v.reshape(shape).mean(axis=tuple(range(1, 2 * self.dim, 2))))
        return levels[::-1]


def enumerate_cubes(lat: DyadicLattice, min_cells_per_side: int = 1) -> list[CubeRegion]:
    """All lattice cubes with at least ``min_cells_per_side`` cells per side, root first."""
    m = min_cells_per_side
    if m < 1 or m & (m - 1):
        raise ValueError(f"min_cells_per_side must be a power of two, got {m}")
    out = []
    for depth in range(lat.max_depth + 1):
        if lat.cells_per_side(depth) < m:
            break
        out.extend(lat.cube(a) for a in lat.addresses(depth))
    return out


def check_lattice_properties(lat: DyadicLattice) -> dict:
    """Exhaustive check of the three lattice axioms on the finite lattice.

    (1) children of lattice cubes are lattice cubes and tile their parent;
    (2) every pair of cubes has a common ancestor containing both;
    (3) the root contains every cell of the domain.
    """
    cubes = enumerate_cubes(lat, 1)
    present = {c.address for c in cubes}
    children_ok = True
    for c in cubes:
        kids = lat.children(c.address)
        if not kids:
            continue
        if any(k not in present for k in kids):
            children_ok = False
            break
        cover = np.zeros(lat.domain.shape, dtype=int)
        for k in kids:
            kc = lat.cube(k)
            if not c.contains_cube(kc):
                children_ok = False
            cover[kc.slices] += 1
        if not np.array_equal(cover, c.mask().astype(int)):
            children_ok = False

    depth = np.array([c.address[0] for c in cubes])
    idx = np.array([c.address[1] for c in cubes])
    start = np.array([c.start for c in cubes])
    side = np.array([c.cells for c in cubes])
    ancestor_ok = True
    for i in range(len(cubes)):
        # deepest level at which both addresses agree
        best = np.zeros(len(cubes), dtype=int)
        for k in range(1, lat.max_depth + 1):
            ok = (np.minimum(depth[i], depth) >= k) & np.all(
                (idx[i] >> max(depth[i] - k, 0))[None, :] == (idx >> np.maximum(depth - k, 0)[:, None]),
                axis=1,
            )
            best = np.where(ok, k, best)
        anc_side = lat.domain.n_cells >> best
        anc_start = (idx[i][None, :] >> (depth[i] - best)[:, None]) * anc_side[:, None]
        for st, sd in ((start[i][None, :], side[i]), (start, side[:, None])):
            inside = (anc_start <= st) & (st + sd <= anc_start + anc_side[:, None])
            ancestor_ok &= bool(inside.all())

    root = lat.root
    covers = bool(root.mask().all()) and root.n_cells == lat.domain.size
    return {"children": children_ok, "common_ancestor": ancestor_ok, "root_covers": covers}


@dataclass(frozen=True, eq=False)
class SparseFamily:
    """Cubes of a lattice plus pairwise disjoint sets ``E_Q`` (flat cell indices)."""

    lattice: DyadicLattice
    cubes: tuple
    certificate: dict = field(repr=False)
    eta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "cubes", tuple(sorted(self.cubes)))

    def regions(self) -> list[CubeRegion]:
        return [self.lattice.cube(a) for a in self.cubes]

    def __len__(self):
        return len(self.cubes)

    # -- text format -----------------------------------------------------

    def dumps(self) -> str:
        d = self.lattice.domain
        lines = [
            "# sparse family",
            f"dim {d.dim}",
            f"n_cells {d.n_cells}",
            f"half_width {d.half_width!r}",
            f"eta {self.eta!r}",
            f"cubes {len(self.cubes)}",
        ]
        lines += [_fmt_address(a) for a in self.cubes]
        lines.append("certificate")
        for a in self.cubes:
            lines.append(f"E {_fmt_address(a)} {_fmt_ranges(self.certificate[a])}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> SparseFamily:
        rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        head = {}
        pos = 0
        while pos < len(rows) and not rows[pos].startswith("cubes"):
            key, val = rows[pos].split(None, 1)
            head[key] = val
            pos += 1
        if pos == len(rows):
            raise ValueError("missing 'cubes' section")
        count = int(rows[pos].split()[1])
        addrs = [_parse_address(r) for r in rows[pos + 1 : pos + 1 + count]]
        pos += 1 + count
        if pos >= len(rows) or rows[pos] != "certificate":
            raise ValueError("missing 'certificate' section")
        cert = {}
        for r in rows[pos + 1 :]:
            tag, addr, *rest = r.split()
            if tag != "E":
                raise ValueError(f"unexpected line {r!r}")
            cert[_parse_address(addr)] = _parse_ranges(rest[0] if rest else "")
        if set(cert) != set(addrs):
            raise ValueError("certificate does not match the cube list")
        domain = Domain(int(head["dim"]), float(head["half_width"]), int(head["n_cells"]))
        return cls(DyadicLattice(domain), tuple(addrs), cert, float(head.get("eta", 0.0)))

    @classmethod
    def load(cls, path) -> SparseFamily:
        return cls.loads(Path(path).read_text())


def _fmt_address(a) -> str:
    depth, idx = a
    return ":".join(str(v) for v in (depth, *idx))


def _parse_address(text: str):
    parts = [int(v) for v in text.split(":")]
    return (parts[0], tuple(parts[1:]))


def _fmt_ranges(cells) -> str:
    cells = np.sort(np.asarray(cells, dtype=int))
    if cells.size == 0:
        return "-"
    breaks = np.nonzero(np.diff(cells) != 1)[0]
    starts = np.r_[cells[0], cells[breaks + 1]]
    ends = np.r_[cells[breaks], cells[-1]]
    return ",".join(f"{s}" if s == e else f"{s}-{e}" for s, e in zip(starts, ends))


def _parse_ranges(text: str) -> np.ndarray:
    if text in ("", "-"):
        return np.zeros(0, dtype=int)
    out = []
    for part in text.split(","):
        lo, _, hi = part.partition("-")
        out.extend(range(int(lo), int(hi or lo) + 1))
    return np.asarray(out, dtype=int)


def _flat_cells(cube: CubeRegion) -> np.ndarray:
    return np.flatnonzero(cube.mask())


def construct_sparse_family(
    f: GridFunction,
    lat: DyadicLattice,
    threshold_factor: float | None = None,
    min_cells: int = DEFAULT_MIN_CELLS,
) -> SparseFamily:
    """Calderon-Zygmund stopping cubes of ``|f|``.

    From each stopping cube ``P`` we descend and stop at the maximal
    descendants ``Q`` (with at least ``min_cells`` cells per side) where
    ``avg_Q |f| > tau * avg_P |f|``.  ``E_P`` is ``P`` minus its stopping
    children, so ``|E_P| >= (1 - 1/tau) |P|``.
    """
    tau = default_threshold(lat.dim) if threshold_factor is None else float(threshold_factor)
    if tau <= 1:
        raise ValueError(f"threshold factor must exceed 1, got {tau}")
    if not np.any(f.values):
        raise ValueError("cannot build a stopping family for f = 0")
    pyr = lat.average_pyramid(abs(f))
    deepest = lat.max_depth
    while deepest > 0 and lat.cells_per_side(deepest) < min_cells:
        deepest -= 1

    family, cert = [], {}
    stack = [lat.root.address]
    while stack:
        top = stack.pop()
        level = tau * pyr[top[0]][top[1]]
        stops, frontier = [], lat.children(top) if top[0] < deepest else []
        while frontier:
            a = frontier.pop()
            if pyr[a[0]][a[1]] > level:
                stops.append(a)
            elif a[0] < deepest:
                frontier.extend(lat.children(a))
        family.append(top)
        mask = lat.cube(top).mask()
        for s in stops:
            mask[lat.cube(s).slices] = False
        cert[top] = np.flatnonzero(mask)
        stack.extend(stops)

    ratios = [cert[a].size / lat.cube(a).n_cells for a in family]
    return SparseFamily(lat, tuple(family), cert, float(min(ratios)))


def sparsity_verify(S: SparseFamily) -> float:
    """Largest certified sparsity constant.

    Validates the stored sets (inside their cube, pairwise disjoint), then
    builds the greedy certificate that gives each cell to the smallest family
    cube containing it, and returns the better of the two minimum ratios.
    """
    if not S.cubes:
        raise ValueError("empty family")
    lat = S.lattice
    size = lat.domain.size
    counts = np.zeros(size, dtype=int)
    stored = []
    for a in S.cubes:
        cube = lat.cube(a)
        cells = np.asarray(S.certificate[a], dtype=int)
        if cells.size and (cells.min() < 0 or cells.max() >= size):
            raise ValueError("invalid certificate: cell index out of range")
        if not np.all(cube.mask().ravel()[cells]):
            raise ValueError(f"invalid certificate: E_Q leaves Q at {_fmt_address(a)}")
        if np.unique(cells).size != cells.size:
            raise ValueError("invalid certificate: repeated cells")
        counts[cells] += 1
        stored.append(cells.size / cube.n_cells)
    if np.any(counts > 1):
        raise ValueError("invalid certificate: sets E_Q overlap")

    owner_depth = np.full(size, -1)
    owner = np.full(size, -1)
    for k, a in enumerate(S.cubes):
        cells = _flat_cells(lat.cube(a))
        deeper = owner_depth[cells] < a[0]
        owner[cells[deeper]] = k
        owner_depth[cells[deeper]] = a[0]
    greedy = np.bincount(owner[owner >= 0], minlength=len(S.cubes))
    greedy_ratio = min(greedy[k] / lat.cube(a).n_cells for k, a in enumerate(S.cubes))
    return float(max(min(stored), greedy_ratio))


def packing_ratio(S: SparseFamily) -> float:
    """``sum_{Q in S} |Q| / |root|``; at most ``tau / (tau - 1)`` for stopping families."""
    return sum(S.lattice.cube(a).n_cells for a in S.cubes) / S.lattice.domain.size
