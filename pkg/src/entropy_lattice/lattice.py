"""Rational lattices inside convex regions.

Points are stored as integer grid indices; the real coordinate along axis
``i`` is ``index_i * b_i / N``. Axis-aligned boxes are handled with exact
index arithmetic, general convex regions through a membership predicate
applied on top of a bounding box.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import DegenerateNormal, EmptyLattice, EmptySchedule, SizeOverflow

DEFAULT_POINT_CAP = 10**8
DEFAULT_CHUNK = 4096


def to_fraction(value) -> Fraction:
    """Exact rational for ints, Fractions, decimal strings and floats.

    Floats go through their shortest repr so ``0.3`` becomes ``3/10`` rather
    than the nearest binary fraction.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    return Fraction(repr(float(value)))


def default_point_cap() -> int:
    env = os.environ.get("LL_POINT_CAP")
    return int(env) if env else DEFAULT_POINT_CAP


@dataclass(frozen=True)
class Box:
    lower: tuple[Fraction, ...]
    upper: tuple[Fraction, ...]

    @classmethod
    def from_bounds(cls, bounds) -> "Box":
        """Accept ``[(l1, u1), (l2, u2), ...]`` or an existing Box."""
        if isinstance(bounds, Box):
            return bounds
        lo = tuple(to_fraction(b[0]) for b in bounds)
        hi = tuple(to_fraction(b[1]) for b in bounds)
        for a, b in zip(lo, hi):
            if not a < b:
                raise ValueError(f"box side [{a}, {b}] has empty interior")
        return cls(lo, hi)

    @property
    def dim(self) -> int:
        return len(self.lower)


@dataclass(frozen=True)
class LatticeDomain:
    """The finite grid of points ``index * b / N`` inside a convex region."""

    m: int
    N: int
    spacings: tuple[Fraction, ...]
    box: Box
    predicate: Callable[[np.ndarray], np.ndarray] | None = None
    rotation: np.ndarray = field(default=None, compare=False)  # type: ignore[assignment]
    point_cap: int = DEFAULT_POINT_CAP

    def __post_init__(self):
        if self.rotation is None:
            object.__setattr__(self, "rotation", np.eye(self.m))

    # -- index arithmetic -------------------------------------------------
    @property
    def index_bounds(self) -> tuple[tuple[int, int], ...]:
        out = []
        for lo, hi, b in zip(self.box.lower, self.box.upper, self.spacings):
            out.append((math.ceil(lo * self.N / b), math.floor(hi * self.N / b)))
        return tuple(out)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(max(hi - lo + 1, 0) for lo, hi in self.index_bounds)

    @property
    def steps(self) -> np.ndarray:
        return np.array([float(b / self.N) for b in self.spacings])

    @property
    def box_count(self) -> int:
        return math.prod(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(math.prod(b / self.N for b in self.spacings))

    def index_to_points(self, idx: np.ndarray) -> np.ndarray:
        num = np.array([b.numerator for b in self.spacings], dtype=np.float64)
        den = np.array([b.denominator for b in self.spacings], dtype=np.float64)
        return (idx * num) / (den * self.N)

    def _box_index_chunk(self, start: int, stop: int) -> np.ndarray:
        flat = np.arange(start, stop, dtype=np.int64)
        offs = np.stack(np.unravel_index(flat, self.shape), axis=-1).astype(np.int64)
        lo = np.array([b[0] for b in self.index_bounds], dtype=np.int64)
        return offs + lo

    def iter_index_chunks(self, chunk: int = DEFAULT_CHUNK) -> Iterator[np.ndarray]:
        """Integer indices of the lattice points, lexicographic, in blocks."""
        total = self.box_count
        for start in range(0, total, chunk):
            idx = self._box_index_chunk(start, min(start + chunk, total))
            if self.predicate is not None:
                idx = idx[np.asarray(self.predicate(self.index_to_points(idx)), dtype=bool)]
            if idx.size:
                yield idx

    def iter_chunks(self, chunk: int = DEFAULT_CHUNK) -> Iterator[np.ndarray]:
        for idx in self.iter_index_chunks(chunk):
            yield self.index_to_points(idx)

    def indices(self) -> np.ndarray:
        parts = list(self.iter_index_chunks(max(self.box_count, 1)))
        if not parts:
            return np.empty((0, self.m), dtype=np.int64)
        return np.concatenate(parts)

    def points(self) -> np.ndarray:
        return self.index_to_points(self.indices())

    @property
    def count(self) -> int:
        if self.predicate is None:
            return self.box_count
        return sum(len(c) for c in self.iter_index_chunks(1 << 16))

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Membership of real points in the (closed) region."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lo = np.array([float(v) for v in self.box.lower])
        hi = np.array([float(v) for v in self.box.upper])
        ok = np.all((x >= lo) & (x <= hi), axis=-1)
        if self.predicate is not None:
            ok &= np.asarray(self.predicate(x), dtype=bool)
        return ok

    def on_box_boundary(self, idx: np.ndarray) -> np.ndarray:
        """Per-axis flags: -1 at the lower face, +1 at the upper face, else 0."""
        idx = np.asarray(idx)
        lo = np.array([b[0] for b in self.index_bounds])
        hi = np.array([b[1] for b in self.index_bounds])
        return np.where(idx == lo, -1, np.where(idx == hi, 1, 0))

    def with_N(self, N: int) -> "LatticeDomain":
        return build_lattice(self.m, N, self.spacings, self.box, predicate=self.predicate,
                             rotation=self.rotation, point_cap=self.point_cap)


@dataclass(frozen=True)
class BoundarySpec:
    """Hyperplane carrying a boundary maximum.

    ``normal`` points into the region; in rotated coordinates ``v = T^T x``
    the facet is ``v_1 = offset`` and ``v_1`` grows inward.
    """

    normal: tuple[float, ...]
    offset: Fraction
    q: int = 0

    def __post_init__(self):
        object.__setattr__(self, "offset", to_fraction(self.offset))
        object.__setattr__(self, "normal", tuple(float(v) for v in self.normal))
        if self.q == 0:
            object.__setattr__(self, "q", self.offset.denominator)
        if self.q < 1:
            raise ValueError("q must be a positive integer")

    @property
    def axis(self) -> int | None:
        """Index of the coordinate axis the normal is aligned with, if any."""
        n = np.asarray(self.normal)
        nz = np.flatnonzero(np.abs(n) > 1e-12)
        if len(nz) == 1 and abs(abs(n[nz[0]]) - 1.0) <= 1e-12:
            return int(nz[0])
        return None

    @classmethod
    def for_box_face(cls, box: Box, axis: int, side: int, spacing=1) -> "BoundarySpec":
        """Face ``x_axis = lower`` (side=-1) or ``x_axis = upper`` (side=+1)."""
        m = box.dim
        normal = [0.0] * m
        if side < 0:
            normal[axis] = 1.0
            offset = box.lower[axis]
        else:
            normal[axis] = -1.0
            offset = -box.upper[axis]
        q = (offset / to_fraction(spacing)).denominator
        return cls(tuple(normal), offset, q)


def build_lattice(m: int, N: int, spacings: Sequence, region, *, predicate=None,
                  rotation=None, point_cap: int | None = None) -> LatticeDomain:
    """Grid points with step ``b_i / N`` inside ``region``.

    Parameters
    ----------
    m : int
        Dimension.
    N : int
        Refinement parameter, ``N >= 1``.
    spacings : sequence
        Per-axis ``b_i > 0`` (rationals; floats are read by their repr).
    region : Box or sequence of (lower, upper)
        Bounding box. Closed: points on the faces are included.
    predicate : callable, optional
        Extra convex membership test on real ``(n, m)`` arrays.
    point_cap : int, optional
        Maximum number of points; defaults to ``LL_POINT_CAP`` or 10**8.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    spacings = tuple(to_fraction(b) for b in spacings)
    if len(spacings) != m or any(b <= 0 for b in spacings):
        raise ValueError("need m positive spacings")
    box = Box.from_bounds(region)
    if box.dim != m:
        raise ValueError("region dimension does not match m")
    cap = default_point_cap() if point_cap is None else point_cap
    rot = np.eye(m) if rotation is None else np.asarray(rotation, dtype=float)
    dom = LatticeDomain(m, int(N), spacings, box, predicate, rot, cap)
    if dom.box_count > cap:
        raise SizeOverflow(f"{dom.box_count} grid points exceed the cap {cap}")
    if dom.box_count == 0 or (predicate is not None and dom.count == 0):
        raise EmptyLattice(f"no grid point of spacing b/{N} lies in the region")
    return dom


def enumerate_points(domain: LatticeDomain) -> Iterator[np.ndarray]:
    """Yield every lattice point once, lexicographic by integer index."""
    for block in domain.iter_chunks():
        yield from block


def build_rotation(boundary: BoundarySpec) -> np.ndarray:
    """Orthonormal ``T`` with ``T e_1 = normal`` (Householder reflection)."""
    n = np.asarray(boundary.normal, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise DegenerateNormal(f"normal has norm {np.linalg.norm(n)!r}")
    m = n.size
    e1 = np.zeros(m)
    e1[0] = 1.0
    w = e1 - n
    if n[0] > 0:
        # 1 - n0 cancels for normals close to e1; use (1 - n0^2)/(1 + n0) instead
        w[0] = float(n[1:] @ n[1:]) / (1.0 + n[0])
    ww = w @ w
    if ww < 1e-30:
        return np.eye(m)
    return np.eye(m) - 2.0 * np.outer(w, w) / ww


def admissible_subsequence(boundary: BoundarySpec, schedule: Sequence[int]) -> list[int]:
    out = [int(N) for N in schedule if int(N) % boundary.q == 0]
    if not out:
        raise EmptySchedule(f"no N in {list(schedule)} is divisible by q={boundary.q}")
    return out
