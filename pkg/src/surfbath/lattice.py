"""Planar surface-code geometry.

Qubits live on the edges of a square lattice with two kinds of boundary.
The vertex grid has ``m + 1`` rows and ``n`` columns.  Every row carries
``n + 1`` horizontal edges, the outer two dangling off the left and right
(open) boundaries; between consecutive vertex rows there are ``n`` vertical
edges.  This gives

    N = nm + (n + 1)(m + 1),   N_star = (m + 1) n,   N_plaq = (n + 1) m.

Qubit ids are assigned row band by row band, top to bottom: the ``n + 1``
horizontal edges of vertex row ``i`` (left to right) followed by the ``n``
vertical edges hanging below it.  This ordering is part of the output
contract (masks and CSV rows depend on it) and is tagged by
:data:`ORDERING_VERSION`.

Positions are edge midpoints in units of the lattice constant ``a``:
horizontal edge ``(i, p)`` sits at ``(p, i)``, vertical edge ``(i, c)`` at
``(c + 1/2, i + 1/2)``; ``y`` grows downwards.

Sets of qubits are plain Python ``int`` bit masks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ORDERING_VERSION = "rowband-h-then-v/1"

QubitSet = int


def mask_of(qubits: Iterable[int]) -> QubitSet:
    out = 0
    for q in qubits:
        out |= 1 << q
    return out


def qubits_of(mask: QubitSet) -> list[int]:
    out = []
    q = 0
    while mask:
        if mask & 1:
            out.append(q)
        mask >>= 1
        q += 1
    return out


def popcount(mask: QubitSet) -> int:
    return bin(mask).count("1")


def overlap_parity(a: QubitSet, b: QubitSet) -> int:
    """0 if the two Pauli strings commute (even overlap), else 1."""
    return popcount(a & b) & 1


@dataclass(frozen=True)
class LatticeSpec:
    n: int
    m: int
    a: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")
        if not self.a > 0:
            raise ValueError(f"lattice constant must be positive, got {self.a!r}")


@dataclass(frozen=True, eq=False)
class Lattice:
    """Immutable surface-code lattice; build with :func:`build_lattice`."""

    spec: LatticeSpec
    positions: np.ndarray  # (N, 2), units of a
    stars: tuple[QubitSet, ...]
    plaquettes: tuple[QubitSet, ...]
    gamma_x: QubitSet
    gamma_z: QubitSet
    _h: dict = field(repr=False)
    _v: dict = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.positions)

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def distance(self) -> int:
        """Length of the shortest logical string, min(n, m) + 1."""
        return min(self.n, self.m) + 1

    def horizontal(self, row: int, p: int) -> int:
        return self._h[row, p]

    def vertical(self, row: int, c: int) -> int:
        return self._v[row, c]

    def physical_positions(self) -> np.ndarray:
        return self.positions * self.spec.a

    def __eq__(self, other):
        if not isinstance(other, Lattice):
            return NotImplemented
        return (
            self.spec == other.spec
            and np.array_equal(self.positions, other.positions)
            and self.stars == other.stars
            and self.plaquettes == other.plaquettes
            and self.gamma_x == other.gamma_x
            and self.gamma_z == other.gamma_z
        )

    def __hash__(self):
        return hash((self.spec, self.stars, self.plaquettes, self.gamma_x, self.gamma_z))

    def to_dict(self) -> dict:
        width = (self.N + 3) // 4
        hexmask = lambda q: format(q, f"0{width}x")  # noqa: E731
        return {
            "spec": {"n": self.n, "m": self.m, "a": self.spec.a},
            "ordering": ORDERING_VERSION,
            "N": self.N,
            "positions": [[float(x), float(y)] for x, y in self.positions],
            "stars": [hexmask(s) for s in self.stars],
            "plaquettes": [hexmask(p) for p in self.plaquettes],
            "gamma_x": hexmask(self.gamma_x),
            "gamma_z": hexmask(self.gamma_z),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def build_lattice(spec: LatticeSpec | tuple) -> Lattice:
    if not isinstance(spec, LatticeSpec):
        spec = LatticeSpec(*spec)
    n, m = spec.n, spec.m

    h: dict[tuple[int, int], int] = {}
    v: dict[tuple[int, int], int] = {}
    pos: list[tuple[float, float]] = []
    for i in range(m + 1):
        for p in range(n + 1):
            h[i, p] = len(pos)
            pos.append((float(p), float(i)))
        if i < m:
            for c in range(n):
                v[i, c] = len(pos)
                pos.append((c + 0.5, i + 0.5))

    stars = []
    for i in range(m + 1):
        for c in range(n):
            q = [h[i, c], h[i, c + 1]]
            if i > 0:
                q.append(v[i - 1, c])
            if i < m:
                q.append(v[i, c])
            stars.append(mask_of(q))

    plaquettes = []
    for i in range(m):
        for p in range(n + 1):
            q = [h[i, p], h[i + 1, p]]
            if p > 0:
                q.append(v[i, p - 1])
            if p < n:
                q.append(v[i, p])
            plaquettes.append(mask_of(q))

    positions = np.array(pos, dtype=float)
    positions.setflags(write=False)
    # default logical strings run through the middle strip / middle row
    lat = Lattice(
        spec=spec,
        positions=positions,
        stars=tuple(stars),
        plaquettes=tuple(plaquettes),
        gamma_x=mask_of(h[i, n // 2] for i in range(m + 1)),
        gamma_z=mask_of(h[m // 2, p] for p in range(n + 1)),
        _h=h,
        _v=v,
    )
    return lat


def logical_x_path(lattice: Lattice, column_index: int) -> QubitSet:
    """Top-to-bottom string through the tile strip ``column_index``.

    Strip ``p`` (0..n) is bounded by vertex columns ``p - 1`` and ``p``; the
    string picks up the horizontal edge crossed at each of the ``m + 1``
    tile-to-tile (or boundary-to-tile) transitions.
    """
    if not 0 <= column_index <= lattice.n:
        raise IndexError(f"tile strip {column_index} outside 0..{lattice.n}")
    return mask_of(lattice.horizontal(i, column_index) for i in range(lattice.m + 1))


def logical_z_path(lattice: Lattice, row_index: int) -> QubitSet:
    """Left-to-right string along vertex row ``row_index`` (open to open boundary)."""
    if not 0 <= row_index <= lattice.m:
        raise IndexError(f"vertex row {row_index} outside 0..{lattice.m}")
    return mask_of(lattice.horizontal(row_index, p) for p in range(lattice.n + 1))


NN_RANGE = 1 / math.sqrt(2)


def neighbor_pairs(lattice: Lattice, range_: float | None = None) -> list[tuple[int, int, float]]:
    """All unordered pairs ``(i, j, distance)`` with ``distance <= range_``.

    Distances are physical (multiplied by ``a``).  The default range
    ``a / sqrt(2)`` selects perpendicular edges meeting at a vertex.
    """
    a = lattice.spec.a
    if range_ is None:
        range_ = a * NN_RANGE
    if not range_ > 0:
        raise ValueError("range must be positive")
    pts = lattice.physical_positions()
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    limit = range_ * (1 + 1e-12)
    ii, jj = np.nonzero(np.triu(dist <= limit, k=1))
    return [(int(i), int(j), float(dist[i, j])) for i, j in zip(ii, jj)]


def distance_matrix(lattice: Lattice) -> np.ndarray:
    pts = lattice.physical_positions()
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff**2).sum(-1))


def check_invariants(lattice: Lattice) -> list[str]:
    """Return a list of violated lattice invariants (empty when sound)."""
    problems = []
    n, m, N = lattice.n, lattice.m, lattice.N
    if N != n * m + (n + 1) * (m + 1):
        problems.append("qubit count")
    if len(lattice.stars) != (m + 1) * n:
        problems.append("star count")
    if len(lattice.plaquettes) != (n + 1) * m:
        problems.append("plaquette count")
    full = (1 << N) - 1
    for group in (lattice.stars, lattice.plaquettes, (lattice.gamma_x, lattice.gamma_z)):
        if any(q & ~full for q in group):
            problems.append("mask wider than N")
    for s in lattice.stars:
        if popcount(s) not in (3, 4):
            problems.append("star size")
        if overlap_parity(s, lattice.gamma_z):
            problems.append("gamma_z anticommutes with a star")
        for p in lattice.plaquettes:
            if overlap_parity(s, p):
                problems.append("star/plaquette anticommute")
    for p in lattice.plaquettes:
        if popcount(p) not in (3, 4):
            problems.append("plaquette size")
        if overlap_parity(p, lattice.gamma_x):
            problems.append("gamma_x anticommutes with a plaquette")
    if not overlap_parity(lattice.gamma_x, lattice.gamma_z):
        problems.append("logical operators commute")
    return problems


def boundary_qubits(lattice: Lattice) -> QubitSet:
    """Qubits on the outermost rows and columns of edges (bounding box)."""
    x, y = lattice.positions[:, 0], lattice.positions[:, 1]
    on = (x == x.min()) | (x == x.max()) | (y == y.min()) | (y == y.max())
    return mask_of(np.nonzero(on)[0].tolist())


def central_qubit(lattice: Lattice) -> int:
    """Qubit nearest the centroid of all positions; lowest id wins ties."""
    pos = lattice.positions
    d2 = ((pos - pos.mean(axis=0)) ** 2).sum(axis=1)
    best = d2.min()
    return int(np.nonzero(np.isclose(d2, best, rtol=0, atol=1e-12))[0][0])


def masks_to_array(masks: Sequence[QubitSet]) -> np.ndarray:
    if any(q >> 64 for q in masks):
        raise ValueError("vectorised enumeration supports at most 64 qubits")
    return np.array(masks, dtype=np.uint64)
