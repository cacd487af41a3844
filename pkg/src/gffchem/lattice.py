"""Integer lattice geometry on Z^d.

Sites are plain tuples of ints.  Boxes are stored as inclusive integer
intervals; the half-open boxes of the renormalization hierarchy are converted
once, in :func:`renorm_boxes`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

Site = tuple[int, ...]


class GeometryError(ValueError):
    """Invalid lattice geometry (bad box, bad scale, wrong dimension)."""


def as_site(x: Iterable[int]) -> Site:
    return tuple(int(c) for c in x)


def l1(x: Sequence[int], y: Sequence[int] | None = None) -> int:
    if y is None:
        return int(sum(abs(int(a)) for a in x))
    return int(sum(abs(int(a) - int(b)) for a, b in zip(x, y)))


def l2(x: Sequence[int], y: Sequence[int] | None = None) -> float:
    if y is None:
        y = (0,) * len(x)
    return float(np.sqrt(sum((int(a) - int(b)) ** 2 for a, b in zip(x, y))))


def linf(x: Sequence[int], y: Sequence[int] | None = None) -> int:
    if y is None:
        return int(max(abs(int(a)) for a in x))
    return int(max(abs(int(a) - int(b)) for a, b in zip(x, y)))


def unit_vectors(d: int) -> np.ndarray:
    """The 2d nearest-neighbour steps, shape (2d, d)."""
    e = np.eye(d, dtype=np.int64)
    return np.concatenate([e, -e])


@dataclass(frozen=True)
class BoxRegion:
    """Axis-aligned box ``prod_i [lower_i, upper_i]`` (inclusive)."""

    lower: Site
    upper: Site

    def __post_init__(self):
        lo, up = as_site(self.lower), as_site(self.upper)
        if len(lo) != len(up):
            raise GeometryError(f"dimension mismatch: {lo} vs {up}")
        if any(a > b for a, b in zip(lo, up)):
            raise GeometryError(f"empty box: lower {lo} exceeds upper {up}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @classmethod
    def ball(cls, radius: int, d: int, center: Sequence[int] | None = None) -> "BoxRegion":
        """``B_R(center) = {y : |y - center|_inf <= R}``."""
        if radius < 0:
            raise GeometryError(f"negative radius {radius}")
        c = (0,) * d if center is None else as_site(center)
        return cls(tuple(a - radius for a in c), tuple(a + radius for a in c))

    @classmethod
    def from_shape(cls, shape: Sequence[int], origin: Sequence[int] | None = None) -> "BoxRegion":
        o = (0,) * len(shape) if origin is None else as_site(origin)
        return cls(o, tuple(a + int(m) - 1 for a, m in zip(o, shape)))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lower, self.upper))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    def __len__(self) -> int:
        return self.size

    def __contains__(self, x) -> bool:
        return len(x) == self.dim and all(a <= int(c) <= b for a, c, b in zip(self.lower, x, self.upper))

    def contains_box(self, other: "BoxRegion") -> bool:
        return all(a <= c and e <= b for a, b, c, e in zip(self.lower, self.upper, other.lower, other.upper))

    def intersect(self, other: "BoxRegion") -> "BoxRegion | None":
        lo = tuple(max(a, b) for a, b in zip(self.lower, other.lower))
        up = tuple(min(a, b) for a, b in zip(self.upper, other.upper))
        if any(a > b for a, b in zip(lo, up)):
            return None
        return BoxRegion(lo, up)

    def expand(self, r: int) -> "BoxRegion":
        return BoxRegion(tuple(a - r for a in self.lower), tuple(b + r for b in self.upper))

    def translate(self, v: Sequence[int]) -> "BoxRegion":
        return BoxRegion(tuple(a + int(c) for a, c in zip(self.lower, v)),
                         tuple(b + int(c) for b, c in zip(self.upper, v)))

    def slices(self, outer: "BoxRegion") -> tuple[slice, ...]:
        """Index slices selecting ``self`` inside an array laid out over ``outer``."""
        if not outer.contains_box(self):
            raise GeometryError(f"{self} not inside {outer}")
        return tuple(slice(a - o, b - o + 1) for a, b, o in zip(self.lower, self.upper, outer.lower))

    def index(self, x: Sequence[int]) -> tuple[int, ...]:
        return tuple(int(c) - a for c, a in zip(x, self.lower))

    def coords(self) -> np.ndarray:
        """All sites in row-major order, shape (size, d)."""
        axes = [np.arange(a, b + 1) for a, b in zip(self.lower, self.upper)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1).astype(np.int64)

    def __iter__(self) -> Iterator[Site]:
        return itertools.product(*(range(a, b + 1) for a, b in zip(self.lower, self.upper)))

    def to_siteset(self) -> "SiteSet":
        return SiteSet(self.coords())

    def linf_diameter(self) -> int:
        return max(self.shape) - 1


class SiteSet:
    """A finite set of lattice sites with O(1) membership.

    Coordinates are kept as a sorted, duplicate-free ``(n, d)`` integer array;
    the order is the canonical indexing used by every linear system built on
    the set.
    """

    __slots__ = ("coords", "dim", "_lookup")

    def __init__(self, coords, dim: int | None = None):
        arr = np.asarray(coords, dtype=np.int64)
        if arr.size == 0:
            if dim is None:
                dim = arr.shape[1] if arr.ndim == 2 else 0
            arr = np.zeros((0, dim), dtype=np.int64)
        else:
            if arr.ndim == 1:
                arr = arr[None, :]
            arr = np.unique(arr, axis=0)
        self.coords = arr
        self.dim = arr.shape[1]
        self._lookup: dict[Site, int] | None = None

    @classmethod
    def from_sites(cls, sites: Iterable[Sequence[int]], dim: int) -> "SiteSet":
        return cls(np.array([as_site(s) for s in sites], dtype=np.int64).reshape(-1, dim), dim=dim)

    @classmethod
    def from_mask(cls, box: BoxRegion, mask: np.ndarray) -> "SiteSet":
        idx = np.argwhere(mask)
        return cls(idx + np.asarray(box.lower, dtype=np.int64), dim=box.dim)

    @property
    def lookup(self) -> dict[Site, int]:
        if self._lookup is None:
            self._lookup = {tuple(int(c) for c in row): i for i, row in enumerate(self.coords)}
        return self._lookup

    def index_of(self, x: Sequence[int]) -> int:
        return self.lookup[as_site(x)]

    def __len__(self) -> int:
        return self.coords.shape[0]

    def __contains__(self, x) -> bool:
        return as_site(x) in self.lookup

    def __iter__(self) -> Iterator[Site]:
        return (tuple(int(c) for c in row) for row in self.coords)

    def __eq__(self, other) -> bool:
        return isinstance(other, SiteSet) and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())

    def __repr__(self) -> str:
        return f"SiteSet(n={len(self)}, d={self.dim})"

    def bounding_box(self) -> BoxRegion:
        if len(self) == 0:
            raise GeometryError("empty site set has no bounding box")
        return BoxRegion(tuple(self.coords.min(axis=0)), tuple(self.coords.max(axis=0)))

    def mask(self, box: BoxRegion | None = None) -> np.ndarray:
        """Boolean indicator over ``box`` (default: bounding box)."""
        box = self.bounding_box() if box is None else box
        m = np.zeros(box.shape, dtype=bool)
        if len(self):
            rel = self.coords - np.asarray(box.lower)
            ok = np.all((rel >= 0) & (rel < np.asarray(box.shape)), axis=1)
            m[tuple(rel[ok].T)] = True
        return m

    def union(self, other: "SiteSet") -> "SiteSet":
        return SiteSet(np.concatenate([self.coords, other.coords]), dim=self.dim)

    def difference(self, other: "SiteSet") -> "SiteSet":
        keep = [i for i, s in enumerate(self) if s not in other]
        return SiteSet(self.coords[keep], dim=self.dim)

    def issubset(self, other: "SiteSet") -> bool:
        return all(s in other for s in self)

    def translate(self, v: Sequence[int]) -> "SiteSet":
        return SiteSet(self.coords + np.asarray(v, dtype=np.int64), dim=self.dim)

    def linf_diameter(self) -> int:
        if len(self) == 0:
            return 0
        return int((self.coords.max(axis=0) - self.coords.min(axis=0)).max())


def boundary(U: SiteSet) -> SiteSet:
    """Outer vertex boundary ``{x not in U : |x - y|_1 = 1 for some y in U}``."""
    if len(U) == 0:
        return SiteSet(np.zeros((0, U.dim), dtype=np.int64), dim=U.dim)
    box = U.bounding_box().expand(1)
    inside = U.mask(box)
    grown = inside.copy()
    for ax in range(U.dim):
        grown[tuple(slice(1, None) if i == ax else slice(None) for i in range(U.dim))] |= \
            inside[tuple(slice(None, -1) if i == ax else slice(None) for i in range(U.dim))]
        grown[tuple(slice(None, -1) if i == ax else slice(None) for i in range(U.dim))] |= \
            inside[tuple(slice(1, None) if i == ax else slice(None) for i in range(U.dim))]
    return SiteSet.from_mask(box, grown & ~inside)


@dataclass(frozen=True)
class RenormIndex:
    """A coarse-lattice site ``z`` of ``L Z^d`` with separation parameter ``K``."""

    z: Site
    L: int
    K: int = 4

    def __post_init__(self):
        object.__setattr__(self, "z", as_site(self.z))
        if self.L < 1:
            raise GeometryError(f"scale L must be >= 1, got {self.L}")
        if any(c % self.L for c in self.z):
            raise GeometryError(f"{self.z} is not on the coarse lattice {self.L}Z^d")

    @property
    def dim(self) -> int:
        return len(self.z)

    def neighbors(self) -> list["RenormIndex"]:
        """Coarse nearest neighbours (|x - z|_1 = L)."""
        out = []
        for e in unit_vectors(self.dim):
            out.append(RenormIndex(tuple(c + self.L * int(s) for c, s in zip(self.z, e)), self.L, self.K))
        return out


def renorm_boxes(z: RenormIndex) -> tuple[BoxRegion, BoxRegion, BoxRegion]:
    """``C_z = z + [0, L)^d``, ``D_z = z + [-3L, 4L)^d``, ``U_z = z + [-KL+1, L+KL-1)^d``."""
    if z.K < 4:
        raise GeometryError(f"K = {z.K} < 4: U_z would not contain D_z")
    L, K = z.L, z.K

    def box(a: int, b: int) -> BoxRegion:
        # half-open [a, b) -> inclusive [a, b-1]
        return BoxRegion(tuple(c + a for c in z.z), tuple(c + b - 1 for c in z.z))

    return box(0, L), box(-3 * L, 4 * L), box(-K * L + 1, L + K * L - 1)


def coarse_cover(B: BoxRegion, L: int, K: int = 4) -> list[RenormIndex]:
    """All ``z`` in ``L Z^d`` whose cell ``C_z`` meets ``B``, in row-major order."""
    if L < 1:
        raise GeometryError(f"scale L must be >= 1, got {L}")
    ranges = [range((a // L) * L, (b // L) * L + 1, L) for a, b in zip(B.lower, B.upper)]
    return [RenormIndex(z, L, K) for z in itertools.product(*ranges)]


def cell_of(x: Sequence[int], L: int) -> Site:
    """The coarse site ``l(x)`` with ``x in C_{l(x)}``."""
    return tuple((int(c) // L) * L for c in x)
