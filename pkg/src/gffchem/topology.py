"""Level sets, clusters, chemical distance and local connectivity events.

All adjacency is nearest-neighbour (``|x - y|_1 = 1``); diameters are
``l_inf`` diameters.  Searches run on boolean masks padded with a ``False``
border so the flat-index kernels never leave the array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit
from scipy import ndimage

from .lattice import BoxRegion, GeometryError, RenormIndex, Site, as_site, l1, renorm_boxes
from .sampler import FieldSample

INF = math.inf


def diameter_threshold(L: int) -> int:
    """``ceil(L / 10)``: the integer reading of "diameter at least L/10"."""
    return -(-int(L) // 10)


@dataclass
class EventReport:
    kind: str
    outcome: bool
    witness: dict | None = None


# ---------------------------------------------------------------------------
# labeling


@dataclass
class ClusterLabeling:
    """Connected components of ``{field >= h}`` inside the field's box.

    ``labels`` is 0 off the level set and ``1..n`` on it; per-cluster arrays
    are indexed by ``label - 1``.
    """

    box: BoxRegion
    level: float
    labels: np.ndarray
    sizes: np.ndarray
    diameters: np.ndarray
    lower: np.ndarray  # (n, d) bounding-box corners, absolute coordinates
    upper: np.ndarray

    @property
    def count(self) -> int:
        return len(self.sizes)

    def label_of(self, x: Sequence[int]) -> int:
        return int(self.labels[self.box.index(x)])

    def cluster_sites(self, label: int) -> np.ndarray:
        return np.argwhere(self.labels == label) + np.asarray(self.box.lower)

    def large(self, N: int) -> np.ndarray:
        """Labels of clusters with diameter strictly greater than ``N``."""
        return np.flatnonzero(self.diameters > N) + 1


def _structure(d: int) -> np.ndarray:
    return ndimage.generate_binary_structure(d, 1)


def label_mask(mask: np.ndarray) -> tuple[np.ndarray, int]:
    return ndimage.label(mask, structure=_structure(mask.ndim))


def level_clusters(field_: FieldSample, h: float) -> ClusterLabeling:
    """Label ``{x : field(x) >= h}`` (sites without a value are never in the set)."""
    with np.errstate(invalid="ignore"):
        mask = field_.values >= h
    return labeling_from_mask(field_.box, mask, h)


def labeling_from_mask(box: BoxRegion, mask: np.ndarray, level: float = float("nan")) -> ClusterLabeling:
    labels, n = label_mask(mask)
    d = box.dim
    sizes = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    lower = np.zeros((n, d), dtype=np.int64)
    upper = np.zeros((n, d), dtype=np.int64)
    for i, sl in enumerate(ndimage.find_objects(labels)):
        lower[i] = [s.start for s in sl]
        upper[i] = [s.stop - 1 for s in sl]
    off = np.asarray(box.lower, dtype=np.int64)
    diam = (upper - lower).max(axis=1) if n else np.zeros(0, dtype=np.int64)
    return ClusterLabeling(box, level, labels, sizes, diam, lower + off, upper + off)


# ---------------------------------------------------------------------------
# breadth-first search kernels


@njit(cache=True)
def _bfs(flat_mask, offsets, sources, dist, parent):
    queue = np.empty(flat_mask.size, np.int64)
    head = 0
    tail = 0
    for s in sources:
        if flat_mask[s] and dist[s] < 0:
            dist[s] = 0
            parent[s] = -1
            queue[tail] = s
            tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u] + 1
        for o in offsets:
            v = u + o
            if flat_mask[v] and dist[v] < 0:
                dist[v] = du
                parent[v] = u
                queue[tail] = v
                tail += 1
    return tail


@njit(cache=True)
def _bidirectional(flat_mask, offsets, s, t):
    if s == t:
        return 0
    n = flat_mask.size
    da = np.full(n, -1, np.int64)
    db = np.full(n, -1, np.int64)
    qa = np.empty(n, np.int64)
    qb = np.empty(n, np.int64)
    da[s] = 0
    db[t] = 0
    qa[0] = s
    qb[0] = t
    ha, ta, hb, tb = 0, 1, 0, 1
    best = -1
    while ha < ta and hb < tb:
        # expand one full level of the smaller frontier
        if ta - ha <= tb - hb:
            end = ta
            while ha < end:
                u = qa[ha]
                ha += 1
                for o in offsets:
                    v = u + o
                    if flat_mask[v] and da[v] < 0:
                        da[v] = da[u] + 1
                        qa[ta] = v
                        ta += 1
                        if db[v] >= 0:
                            c = da[v] + db[v]
                            if best < 0 or c < best:
                                best = c
        else:
            end = tb
            while hb < end:
                u = qb[hb]
                hb += 1
                for o in offsets:
                    v = u + o
                    if flat_mask[v] and db[v] < 0:
                        db[v] = db[u] + 1
                        qb[tb] = v
                        tb += 1
                        if da[v] >= 0:
                            c = da[v] + db[v]
                            if best < 0 or c < best:
                                best = c
        if best >= 0:
            return best
    return -1


class Grid:
    """A boolean mask over a box, padded for the flat-index kernels."""

    def __init__(self, box: BoxRegion, mask: np.ndarray):
        self.box = box
        self.padded = np.pad(np.asarray(mask, dtype=np.bool_), 1)
        self.flat = self.padded.ravel()
        strides = np.array(self.padded.strides) // self.padded.itemsize
        self.offsets = np.concatenate([strides, -strides]).astype(np.int64)

    def flat_index(self, x: Sequence[int]) -> int:
        idx = [int(c) - a + 1 for c, a in zip(x, self.box.lower)]
        return int(np.ravel_multi_index(idx, self.padded.shape))

    def flat_indices(self, sites: np.ndarray) -> np.ndarray:
        rel = np.asarray(sites, dtype=np.int64) - np.asarray(self.box.lower) + 1
        return np.ravel_multi_index(tuple(rel.T), self.padded.shape).astype(np.int64)

    def site(self, flat: int) -> Site:
        idx = np.unravel_index(int(flat), self.padded.shape)
        return tuple(int(i) - 1 + a for i, a in zip(idx, self.box.lower))

    def distances(self, sources: np.ndarray, with_parent: bool = False):
        """BFS distances from a set of sources (``-1`` = unreachable), shaped like the box."""
        dist = np.full(self.flat.size, -1, np.int64)
        parent = np.full(self.flat.size, -1, np.int64)
        _bfs(self.flat, self.offsets, np.asarray(sources, dtype=np.int64), dist, parent)
        inner = tuple(slice(1, -1) for _ in self.box.shape)
        out = dist.reshape(self.padded.shape)[inner]
        if with_parent:
            return out, parent
        return out

    def path_to(self, parent: np.ndarray, target_flat: int) -> list[Site]:
        path = []
        u = int(target_flat)
        while u >= 0:
            path.append(self.site(u))
            u = int(parent[u])
        return path[::-1]

    def point_distance(self, x: Sequence[int], y: Sequence[int]) -> int:
        s, t = self.flat_index(x), self.flat_index(y)
        if not (self.flat[s] and self.flat[t]):
            return -1
        return int(_bidirectional(self.flat, self.offsets, s, t))


# ---------------------------------------------------------------------------
# chemical distance


def level_mask(field_: FieldSample, h: float, window: BoxRegion | None = None) -> np.ndarray:
    arr = field_.values if window is None else field_.array_on(window)
    with np.errstate(invalid="ignore"):
        return arr >= h


def chemical_distance(field_: FieldSample, h: float, x: Sequence[int], y: Sequence[int],
                      window: BoxRegion | None = None) -> float:
    """Shortest nearest-neighbour path length from ``x`` to ``y`` inside ``{field >= h} ∩ window``.

    Returns ``inf`` when either endpoint is below the level or the two are not
    connected inside the window.
    """
    window = field_.box if window is None else window
    x, y = as_site(x), as_site(y)
    if x not in window or y not in window:
        raise GeometryError(f"endpoints {x}, {y} must lie in the window {window}")
    grid = Grid(window, level_mask(field_, h, window))
    d = grid.point_distance(x, y)
    return INF if d < 0 else int(d)


def distance_map(field_: FieldSample, h: float, sources: Sequence[Sequence[int]],
                 window: BoxRegion | None = None) -> np.ndarray:
    """Chemical distance from the nearest source to every window site (``-1`` = unreachable)."""
    window = field_.box if window is None else window
    grid = Grid(window, level_mask(field_, h, window))
    return grid.distances(grid.flat_indices(np.atleast_2d(np.asarray(sources))))


# ---------------------------------------------------------------------------
# S_N(h) representatives and stretch


def _extremal_sites(sites: np.ndarray) -> np.ndarray:
    """Sites minimizing / maximizing each coordinate and each diagonal direction sum."""
    d = sites.shape[1]
    picks = []
    for ax in range(d):
        picks.append(np.argmin(sites[:, ax]))
        picks.append(np.argmax(sites[:, ax]))
    for signs in np.array(np.meshgrid(*[[-1, 1]] * d, indexing="ij")).reshape(d, -1).T:
        proj = sites @ signs
        picks.append(np.argmax(proj))
    return sites[np.unique(picks)]


def large_cluster_sites(labeling: ClusterLabeling, N: int, B: BoxRegion) -> dict[int, np.ndarray]:
    """Sites of ``S_N(h) ∩ B`` grouped by cluster label."""
    inter = labeling.box.intersect(B)
    if inter is None:
        return {}
    lab = labeling.labels[inter.slices(labeling.box)]
    out = {}
    for c in labeling.large(N):
        idx = np.argwhere(lab == c)
        if len(idx):
            out[int(c)] = idx + np.asarray(inter.lower)
    return out


def large_cluster_pairs(labeling: ClusterLabeling, N: int, B: BoxRegion,
                        mode: str = "extremal") -> list[tuple[Site, Site]]:
    """Pairs of representatives of ``S_N(h) ∩ B``.

    ``mode="all"`` uses every site (quadratic, for small windows);
    ``mode="extremal"`` uses the extreme sites of each large cluster in every
    coordinate and diagonal direction.  Cross-cluster pairs are included.
    """
    groups = large_cluster_sites(labeling, N, B)
    reps = []
    for c, sites in sorted(groups.items()):
        chosen = sites if mode == "all" else _extremal_sites(sites)
        reps.extend(tuple(int(v) for v in s) for s in chosen)
    return [(reps[i], reps[j]) for i in range(len(reps)) for j in range(i + 1, len(reps))]


@dataclass
class StretchReport:
    """Largest chemical distance between representatives of ``S_N(h) ∩ B``."""

    max_distance: float          # over connected pairs (0 if none)
    disconnected: bool           # some pair of large clusters is not connected in the window
    n_clusters: int
    n_sources: int
    witness: tuple | None = None  # (x, y, rho) attaining max_distance


def stretch(field_: FieldSample, h: float, N: int, B: BoxRegion, window: BoxRegion | None = None,
            mode: str = "extremal") -> StretchReport:
    """Max of ``rho_h(x, y)`` over representative pairs in ``S_N(h) ∩ B``.

    Clusters and distances are both taken inside ``window``.  Each source
    representative is searched exhaustively, so the maximum is exact over
    pairs (source, any site of ``S_N(h) ∩ B`` in the same cluster).
    """
    window = field_.box if window is None else window
    sub = field_.restrict(window) if window != field_.box else field_
    lab = level_clusters(sub, h)
    groups = large_cluster_sites(lab, N, B)
    if not groups:
        return StretchReport(0.0, False, 0, 0)
    grid = Grid(window, lab.labels > 0)
    best, witness, n_src = 0, None, 0
    for c, sites in groups.items():
        srcs = sites if mode == "all" else _extremal_sites(sites)
        rel = tuple((sites - np.asarray(window.lower)).T)
        for s in srcs:
            dist = grid.distances(grid.flat_indices(s[None, :]))
            dvals = dist[rel]
            j = int(np.argmax(dvals))
            n_src += 1
            if dvals[j] > best:
                best = int(dvals[j])
                witness = (tuple(int(v) for v in s), tuple(int(v) for v in sites[j]), best)
    return StretchReport(float(best), len(groups) > 1, len(groups), n_src, witness)


# ---------------------------------------------------------------------------
# events


def _components_in_box(chi: FieldSample, box: BoxRegion, h: float, min_diam: int) -> list[np.ndarray]:
    """Components of ``{chi >= h} ∩ box`` (box restriction) with diameter ``>= min_diam``."""
    lab = labeling_from_mask(box, level_mask(chi, h, box), h)
    return [lab.cluster_sites(c) for c in np.flatnonzero(lab.diameters >= min_diam) + 1]


def _require(chi: FieldSample, boxes: Sequence[BoxRegion]) -> None:
    for b in boxes:
        miss = chi.missing(b, limit=1)
        if miss:
            raise GeometryError(f"field domain too small: no value at {miss[0]}")


def local_uniqueness_events(chi: FieldSample, z: RenormIndex, h1: float, h2: float) -> dict[str, EventReport]:
    """``Exist``, ``Unique`` and ``LocUniq`` for the coarse site ``z``.

    Components are those of the level set restricted to each ``L``-box.
    ``Unique`` asks, for each coarse neighbour ``x``, that all large
    components of ``C_x`` and ``C_z`` lie in one component of
    ``{chi >= h1} ∩ D_z``.
    """
    if h1 > h2:
        raise ValueError(f"need h1 <= h2, got {h1} > {h2}")
    C, D, _ = renorm_boxes(z)
    nbr_boxes = [renorm_boxes(x)[0] for x in z.neighbors()]
    _require(chi, [D] + nbr_boxes)
    t = diameter_threshold(z.L)
    own = _components_in_box(chi, C, h2, t)
    exist = EventReport("Exist", bool(own), {"components": len(own), "threshold": t})
    D_lab, _ = label_mask(level_mask(chi, h1, D))
    off = np.asarray(D.lower)

    def h1_label(sites: np.ndarray) -> int:
        # components are connected, so one site decides; 0 means not in {chi >= h1} ∩ D
        return int(D_lab[tuple(sites[0] - off)])

    own_labels = {h1_label(c) for c in own}
    unique, bad = True, None
    for xb in nbr_boxes:
        comps = _components_in_box(chi, xb, h2, t)
        labels = own_labels | {h1_label(c) for c in comps}
        if len(labels) > 1 or 0 in labels:
            unique, bad = False, list(xb.lower)
            break
    uniq = EventReport("Unique", unique, None if unique else {"neighbor_box": bad})
    both = EventReport("LocUniq", exist.outcome and unique)
    return {"Exist": exist, "Unique": uniq, "LocUniq": both}


def arm_event(field_: FieldSample, h: float, x: Sequence[int], R: int, witness: bool = False) -> EventReport:
    """``x`` connects to ``dB_R(x)`` through ``{field >= h}``."""
    x = as_site(x)
    ball = BoxRegion.ball(R + 1, len(x), x)
    _require(field_, [ball])
    mask = level_mask(field_, h, ball)
    grid = Grid(ball, mask)
    if not grid.flat[grid.flat_index(x)]:
        return EventReport("Arm", False)
    dist, parent = grid.distances([grid.flat_index(x)], with_parent=True)
    shell = np.zeros(ball.shape, dtype=bool)
    shell[...] = True
    shell[tuple(slice(1, -1) for _ in ball.shape)] = False
    hits = np.argwhere((dist >= 0) & shell)
    if not len(hits):
        return EventReport("Arm", False)
    w = None
    if witness:
        target = tuple(int(a + b) for a, b in zip(hits[0], ball.lower))
        w = {"path": grid.path_to(parent, grid.flat_index(target))}
    return EventReport("Arm", True, w)


def box_crossing(field_: FieldSample, h: float, box: BoxRegion, axis: int = 0) -> bool:
    """``{field >= h} ∩ box`` connects the two faces of ``box`` orthogonal to ``axis``."""
    _require(field_, [box])
    lab, n = label_mask(level_mask(field_, h, box))
    if n == 0:
        return False
    lo = np.take(lab, 0, axis=axis)
    hi = np.take(lab, -1, axis=axis)
    a = set(np.unique(lo[lo > 0]).tolist())
    return any(int(v) in a for v in np.unique(hi[hi > 0]))
