"""Discrete potential theory for the simple random walk on Z^d.

Everything here is built on one object: the Green's function of the walk
killed on leaving a finite set ``U``,

    g_U = (I - P_U)^{-1} = 2d (2d I - A_U)^{-1},

where ``A_U`` is the adjacency matrix of ``U``.  The free Green's function is
approached from below by killed Green's functions on growing centred cubes,
with Richardson extrapolation in the cube radius.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lattice import BoxRegion, GeometryError, Site, SiteSet, as_site, boundary

log = logging.getLogger(__name__)

DENSE_CAP = 20_000
ITERATIVE_RTOL = 1e-10
# Largest number of eigenmodes (per cube) the spectral Green tables may sum.
SPECTRAL_MODE_CAP = 3_000_000_000


class CapacityExceededError(RuntimeError):
    """A direct solve was requested on a domain larger than the configured cap."""

    def __init__(self, size: int, limit: int):
        super().__init__(f"domain has {size} sites; direct solves are limited to {limit}")
        self.size = size
        self.limit = limit


class ConvergenceError(RuntimeError):
    """An extrapolated sequence did not settle before the size limit."""

    def __init__(self, message: str, iterates):
        super().__init__(f"{message}; last iterates: {list(iterates)[-2:]}")
        self.iterates = list(iterates)


# ---------------------------------------------------------------------------
# linear algebra on a finite site set


def _index_grid(U: SiteSet) -> tuple[BoxRegion, np.ndarray]:
    """Index of each site of ``U`` on its bounding box padded by one (-1 = outside)."""
    box = U.bounding_box().expand(1)
    grid = np.full(box.shape, -1, dtype=np.int64)
    rel = U.coords - np.asarray(box.lower)
    grid[tuple(rel.T)] = np.arange(len(U))
    return box, grid


def _shifted(a: np.ndarray, ax: int, step: int) -> tuple[tuple, tuple]:
    """Slices (src, dst) so that dst-site = src-site + step * e_ax."""
    n = a.ndim
    src = [slice(None)] * n
    dst = [slice(None)] * n
    if step > 0:
        src[ax], dst[ax] = slice(None, -1), slice(1, None)
    else:
        src[ax], dst[ax] = slice(1, None), slice(None, -1)
    return tuple(src), tuple(dst)


def dirichlet_matrix(U: SiteSet) -> sp.csr_matrix:
    """Sparse ``2d I - A_U`` in the canonical site order of ``U``."""
    n, d = len(U), U.dim
    if n == 0:
        raise GeometryError("empty domain")
    _, grid = _index_grid(U)
    rows, cols = [], []
    for ax in range(d):
        src, dst = _shifted(grid, ax, +1)
        a, b = grid[src], grid[dst]
        ok = (a >= 0) & (b >= 0)
        rows.append(a[ok])
        cols.append(b[ok])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    adj = sp.coo_matrix((np.ones(2 * len(r)), (np.concatenate([r, c]), np.concatenate([c, r]))), shape=(n, n))
    return (2 * d * sp.identity(n, format="csr") - adj.tocsr()).tocsr()


def exit_adjacency(U: SiteSet) -> tuple[SiteSet, sp.csr_matrix]:
    """Boundary sites ``dU`` and the count matrix ``E[x, y] = 1{x ~ y}`` (x in U, y in dU)."""
    dU = boundary(U)
    n, d = len(U), U.dim
    box = U.bounding_box().expand(1)
    gin = np.full(box.shape, -1, dtype=np.int64)
    gin[tuple((U.coords - np.asarray(box.lower)).T)] = np.arange(n)
    gout = np.full(box.shape, -1, dtype=np.int64)
    gout[tuple((dU.coords - np.asarray(box.lower)).T)] = np.arange(len(dU))
    rows, cols = [], []
    for ax in range(d):
        for step in (+1, -1):
            src, dst = _shifted(gin, ax, step)
            a, b = gin[src], gout[dst]
            ok = (a >= 0) & (b >= 0)
            rows.append(a[ok])
            cols.append(b[ok])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    E = sp.coo_matrix((np.ones(len(r)), (r, c)), shape=(n, len(dU))).tocsr()
    return dU, E


def _solve(A: sp.csr_matrix, b: np.ndarray, cap: int = DENSE_CAP) -> np.ndarray:
    """Direct sparse solve up to ``cap`` unknowns, conjugate gradients above."""
    n = A.shape[0]
    if n == 0:
        return np.zeros(b.shape)
    if n <= cap:
        return spla.splu(A.tocsc()).solve(np.asarray(b, dtype=float))
    b = np.asarray(b, dtype=float)
    cols = b.reshape(n, -1)
    out = np.empty_like(cols)
    for j in range(cols.shape[1]):
        x, info = spla.cg(A, cols[:, j], rtol=ITERATIVE_RTOL, maxiter=50 * int(np.sqrt(n)) + 1000)
        if info != 0:
            raise ConvergenceError(f"conjugate gradients stalled on {n} unknowns (info={info})", [])
        out[:, j] = x
    return out.reshape(b.shape)


@dataclass
class KilledGreenOperator:
    """``g_U(x, y)`` for ``x, y`` in a finite domain ``U``.

    Entries are produced from a sparse LU factorization of ``2d I - A_U``;
    the full matrix is only materialized on request.
    """

    domain: SiteSet
    _lu: spla.SuperLU = field(repr=False)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Apply ``g_U`` to a vector (or columns) indexed like ``domain``."""
        return 2 * self.dim * self._lu.solve(np.asarray(b, dtype=float))

    def column(self, y: Sequence[int]) -> np.ndarray:
        e = np.zeros(len(self.domain))
        e[self.domain.index_of(y)] = 1.0
        return self.solve(e)

    def entry(self, x: Sequence[int], y: Sequence[int]) -> float:
        return float(self.column(y)[self.domain.index_of(x)])

    def matrix(self) -> np.ndarray:
        G = self.solve(np.eye(len(self.domain)))
        return 0.5 * (G + G.T)


def killed_green(U: SiteSet, cap: int = DENSE_CAP) -> KilledGreenOperator:
    """Green's function of the walk killed on exiting ``U``."""
    if len(U) == 0:
        raise GeometryError("killed Green's function needs a nonempty domain")
    if len(U) > cap:
        raise CapacityExceededError(len(U), cap)
    return KilledGreenOperator(U, spla.splu(dirichlet_matrix(U).tocsc()))


# ---------------------------------------------------------------------------
# free Green's function via killed Green's functions on cubes


def _cube_modes(M: int) -> tuple[np.ndarray, np.ndarray]:
    """Odd DST-I frequencies of the cube ``B_M`` and their 1D Laplacian eigenvalues."""
    k = np.arange(1, 2 * M + 2, 2, dtype=float)
    return k, 2.0 * (1.0 - np.cos(np.pi * k / (2 * M + 2)))


def killed_green_table(M: int, extents: Sequence[int]) -> np.ndarray:
    """``g_{B_M}(0, v)`` for ``0 <= v_i <= extents[i]`` (exact eigen-sum).

    Only odd modes see the centre of the cube, and for those
    ``phi_k(0) phi_k(v) = cos(pi k v / (2M + 2)) / (M + 1)``, so the sum
    factorizes axis by axis.  Values at ``v`` with negative coordinates
    follow by reflection symmetry.
    """
    ext = [int(e) for e in extents]
    d = len(ext)
    if d < 3:
        raise GeometryError("the free field needs d >= 3")
    if any(e < 0 or e > M for e in ext):
        raise GeometryError(f"extents {ext} must lie in [0, {M}]")
    k, lam1 = _cube_modes(M)
    n = len(k)
    if float(n) ** d > SPECTRAL_MODE_CAP:
        raise CapacityExceededError(int(float(n) ** d), SPECTRAL_MODE_CAP)
    # cheapest contraction order: small extents first, largest on the chunked axis
    order = sorted(range(d), key=lambda i: ext[i])
    chunk_axis = order[-1]
    inner = order[:-1]
    A = {i: np.cos(np.pi * np.outer(k, np.arange(ext[i] + 1)) / (2 * M + 2)) / (M + 1) for i in range(d)}
    budget = 1 << 23
    chunk = max(1, budget // max(1, n ** (d - 1)))
    lam_inner = np.zeros((n,) * (d - 1))
    for j in range(d - 1):
        shape = [1] * (d - 1)
        shape[j] = n
        lam_inner = lam_inner + lam1.reshape(shape)
    out = np.zeros([ext[chunk_axis] + 1] + [ext[i] + 1 for i in inner])
    for s in range(0, n, chunk):
        lam = lam1[s:s + chunk].reshape((-1,) + (1,) * (d - 1)) + lam_inner
        X = (2.0 * d) / lam
        # contract the innermost k-axes, smallest extent first
        for i in inner:
            X = np.tensordot(X, A[i], axes=([1], [0]))
        out += np.tensordot(A[chunk_axis][s:s + chunk], X, axes=([0], [0]))
    axes_now = [chunk_axis] + inner
    return np.transpose(out, np.argsort(axes_now))


def richardson(values: Sequence, orders: Sequence[float], ratio: float = 2.0) -> list:
    """Richardson table for a sequence sampled at geometrically growing sizes.

    ``values[j]`` is the approximation at size ``M0 * ratio**j`` whose error
    expands in powers ``M**-p`` for ``p`` in ``orders``.  Returns the best
    available extrapolant after each level.
    """
    best = []
    rows: list[list] = []
    for j, v in enumerate(values):
        row = [np.asarray(v, dtype=float)]
        for i, p in enumerate(orders[:j]):
            f = ratio ** p
            row.append((f * row[i] - rows[j - 1][i]) / (f - 1.0))
        rows.append(row)
        best.append(row[-1])
    return best


def _default_orders(d: int) -> tuple[int, ...]:
    return tuple(range(d - 2, d + 2))


@dataclass
class GreenTable:
    """Extrapolated free Green's function ``g(0, v)`` on a box of offsets."""

    extents: tuple[int, ...]
    values: np.ndarray
    radii: list[int]
    iterates: list[float]  # g(0, 0) after each level
    raw: np.ndarray  # killed values on the largest cube: a lower bound

    def __call__(self, v: Sequence[int]) -> float:
        return float(self.values[tuple(abs(int(c)) for c in v)])

    def lookup(self, diffs: np.ndarray) -> np.ndarray:
        """Vectorized lookup for an array of offsets with last axis ``d``."""
        a = np.abs(np.asarray(diffs, dtype=np.int64))
        return self.values[tuple(np.moveaxis(a, -1, 0))]


def _initial_radius(extents: Sequence[int]) -> int:
    return max(8, 2 * max(extents))


@lru_cache(maxsize=32)
def _free_green_table_cached(extents: tuple[int, ...], tol: float, M0: int, max_M: int) -> GreenTable:
    d = len(extents)
    orders = _default_orders(d)
    radii, raws = [], []
    M = M0
    best_prev = None
    while True:
        raws.append(killed_green_table(M, extents))
        radii.append(M)
        best = richardson(raws, orders)
        if best_prev is not None:
            change = float(np.max(np.abs(best[-1] - best_prev)))
            log.debug("free green table %s: M=%d change=%.3g", extents, M, change)
            if change < tol and len(raws) >= 3:
                return GreenTable(extents, best[-1], radii, [float(b.flat[0]) for b in best], raws[-1])
        best_prev = best[-1]
        if 2 * M > max_M:
            raise ConvergenceError(f"free Green table {extents} not within tol {tol} by M={M}",
                                   [float(b.flat[0]) for b in best])
        M *= 2


def _max_radius(d: int) -> int:
    # largest cube whose odd-mode count stays under the spectral cap
    n = int(SPECTRAL_MODE_CAP ** (1.0 / d))
    return n - 1


def free_green_table(extents: Sequence[int], tol: float = 1e-5, M0: int | None = None,
                     max_M: int | None = None) -> GreenTable:
    """``g(0, v)`` for ``|v_i| <= extents[i]``, extrapolated from killed cubes.

    The cube radius doubles from ``M0`` until the extrapolated table moves by
    less than ``tol`` (sup norm) between levels.  Tables are computed for the
    sorted extents rounded up to a multiple of 4 and cached, so nearby
    requests share work.
    """
    ext = tuple(int(e) for e in extents)
    key = tuple(sorted(-(-max(e, 1) // 4) * 4 for e in ext))
    M0 = _initial_radius(key) if M0 is None else int(M0)
    max_M = _max_radius(len(ext)) if max_M is None else int(max_M)
    base = _free_green_table_cached(key, float(tol), M0, max_M)
    # undo the sort: axis i of the request reads the sorted axis holding its extent
    perm = np.argsort(np.argsort(ext, kind="stable"), kind="stable")
    values = np.transpose(base.values, perm)[tuple(slice(0, e + 1) for e in ext)]
    raw = np.transpose(base.raw, perm)[tuple(slice(0, e + 1) for e in ext)]
    return GreenTable(ext, values, base.radii, base.iterates, raw)


@dataclass
class GreenEstimate:
    value: float          # extrapolated g(x, y)
    lower: float          # g_{B_M}(x, y) on the largest cube used (a lower bound)
    radii: list[int]
    raw: list[float]      # killed values, increasing in M
    extrapolated: list[float]


def free_green(x: Sequence[int], y: Sequence[int], tol: float = 1e-4, M0: int | None = None,
               max_M: int | None = None) -> GreenEstimate:
    """Free Green's function ``g(x, y)`` of the walk on Z^d, ``d >= 3``.

    The killed values ``g_{B_M(x)}(x, y)`` increase with ``M``; the returned
    ``value`` is their Richardson limit, stopped once successive extrapolants
    differ by less than ``tol``.
    """
    x, y = as_site(x), as_site(y)
    if len(x) != len(y):
        raise GeometryError("dimension mismatch")
    d = len(x)
    if d < 3:
        raise GeometryError("the free Green's function is finite only for d >= 3")
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = tuple(abs(a - b) for a, b in zip(x, y))
    M = _initial_radius(v) if M0 is None else int(M0)
    max_M = _max_radius(d) if max_M is None else int(max_M)
    orders = _default_orders(d)
    radii, raw = [], []
    while True:
        raw.append(float(killed_green_table(M, v)[v]))
        radii.append(M)
        ext = [float(b) for b in richardson(raw, orders)]
        if len(ext) >= 3 and abs(ext[-1] - ext[-2]) < tol:
            return GreenEstimate(ext[-1], raw[-1], radii, raw, ext)
        if 2 * M > max_M:
            raise ConvergenceError(f"g({x},{y}) did not converge to tol {tol} by M={M}", ext)
        M *= 2


# ---------------------------------------------------------------------------
# harmonic measure, equilibrium measure, capacity


@dataclass
class ExitDistribution:
    """Law of ``X_{T_U}`` under ``P^x``."""

    start: Site
    sites: SiteSet
    probs: np.ndarray

    def as_dict(self) -> dict[Site, float]:
        return {s: float(p) for s, p in zip(self.sites, self.probs)}


def harmonic_measure(U: SiteSet, x: Sequence[int], cap: int = DENSE_CAP) -> ExitDistribution:
    """``P^x[X_{T_U} = y]`` for ``y`` in the outer boundary of ``U``.

    Uses ``P^x[X_{T_U} = y] = sum_{u in U, u ~ y} g_U(x, u) / 2d``.
    """
    x = as_site(x)
    if x not in U:
        raise GeometryError(f"start {x} is not in the domain")
    d = U.dim
    A = dirichlet_matrix(U)
    e = np.zeros(len(U))
    e[U.index_of(x)] = 1.0
    # g_U(x, .) = 2d A^{-1} e_x  (A symmetric)
    gx = 2 * d * _solve(A, e, cap)
    dU, E = exit_adjacency(U)
    probs = (E.T @ gx) / (2 * d)
    return ExitDistribution(x, dU, probs)


@dataclass
class EquilibriumMeasure:
    """Escape probabilities ``e_{K,U}(x) = P^x[H_K > T_U]`` on ``K``."""

    target: SiteSet
    domain: SiteSet | None  # None: whole space
    weights: np.ndarray
    capacity: float
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict[Site, float]:
        return {s: float(w) for s, w in zip(self.target, self.weights)}


def _relative_equilibrium(K: SiteSet, U: SiteSet, cap: int = DENSE_CAP) -> np.ndarray:
    """``e_{K,U}`` via the hitting problem on ``U \\ K``.

    With ``u(y) = P^y[hit K before leaving U]`` (``u = 1`` on ``K``, ``0`` off
    ``U``), ``e_{K,U}(x) = (1/2d) sum_{y ~ x} (1 - u(y))``.
    """
    d = K.dim
    if len(K) == 0:
        return np.zeros(0)
    free = U.difference(K)
    u_free = np.zeros(0)
    if len(free):
        A = dirichlet_matrix(free)
        # right-hand side: number of K-neighbours of each free site
        box = U.bounding_box().expand(1)
        kmask = K.mask(box)
        rel = free.coords - np.asarray(box.lower)
        b = np.zeros(len(free))
        for ax in range(d):
            for step in (+1, -1):
                nb = rel.copy()
                nb[:, ax] += step
                b += kmask[tuple(nb.T)]
        u_free = _solve(A, b, cap)
    box = U.bounding_box().expand(1)
    u = np.zeros(box.shape)
    u[tuple((K.coords - np.asarray(box.lower)).T)] = 1.0
    if len(free):
        u[tuple((free.coords - np.asarray(box.lower)).T)] = u_free
    rel = K.coords - np.asarray(box.lower)
    esc = np.zeros(len(K))
    for ax in range(d):
        for step in (+1, -1):
            nb = rel.copy()
            nb[:, ax] += step
            esc += 1.0 - u[tuple(nb.T)]
    return esc / (2 * d)


def inner_boundary(K: SiteSet) -> np.ndarray:
    """Boolean flag per site of ``K``: does it have a neighbour outside ``K``?"""
    box = K.bounding_box().expand(1)
    m = K.mask(box)
    rel = K.coords - np.asarray(box.lower)
    out = np.zeros(len(K), dtype=bool)
    for ax in range(K.dim):
        for step in (+1, -1):
            nb = rel.copy()
            nb[:, ax] += step
            out |= ~m[tuple(nb.T)]
    return out


def _green_matrix(coords: np.ndarray, table: "GreenTable") -> np.ndarray:
    n = len(coords)
    G = np.empty((n, n))
    step = max(1, (1 << 22) // max(1, n))
    for s in range(0, n, step):
        G[s:s + step] = table.lookup(coords[s:s + step, None, :] - coords[None, :, :])
    return G


def _whole_space_green(K: SiteSet, tol: float) -> tuple[np.ndarray, dict]:
    """Solve ``sum_y g(x, y) e(y) = 1`` on ``K`` with the extrapolated free Green's function.

    Only the inner boundary of ``K`` carries mass (a walk leaving ``K``
    passes through it last), so the system is solved there.
    """
    ext = tuple(int(e) for e in (K.coords.max(axis=0) - K.coords.min(axis=0)))
    table = free_green_table(ext, tol=tol)
    edge = inner_boundary(K)
    G = _green_matrix(K.coords[edge], table)
    G = 0.5 * (G + G.T)
    e = np.zeros(len(K))
    e[edge] = scipy.linalg.cho_solve(scipy.linalg.cho_factor(G, overwrite_a=True), np.ones(int(edge.sum())))
    return e, {"method": "green", "table_radii": table.radii}


def box_green_columns(box: BoxRegion, sources: np.ndarray) -> np.ndarray:
    """``g_box(x, s)`` for all ``x`` in ``box`` and each source ``s`` (DST-I, exact).

    Returns an array of shape ``(len(sources),) + box.shape``.
    """
    from scipy import fft

    d = box.dim
    lam = np.zeros(box.shape)
    for ax, m in enumerate(box.shape):
        shape = [1] * d
        shape[ax] = m
        lam = lam + (2.0 * (1.0 - np.cos(np.pi * np.arange(1, m + 1) / (m + 1)))).reshape(shape)
    weight = (2.0 * d) / lam
    del lam
    out = np.empty((len(sources),) + box.shape)
    for j, s in enumerate(np.asarray(sources, dtype=np.int64)):
        a = np.zeros(box.shape)
        a[box.index(s)] = 1.0
        a = fft.dstn(a, type=1, norm="ortho")
        a *= weight
        out[j] = fft.idstn(a, type=1, norm="ortho")
    return out


def _whole_space_box(K: SiteSet, tol: float, M0: int | None, max_sites: int) -> tuple[np.ndarray, dict]:
    """Monotone limit of ``e_{K, B_M(c)}`` over doubling cubes, extrapolated.

    Each relative equilibrium measure solves ``G_{B_M}|_K e = 1`` with the
    killed columns computed spectrally, so this is meant for small ``K``.
    """
    d = K.dim
    lo, hi = K.coords.min(axis=0), K.coords.max(axis=0)
    c = (lo + hi) // 2
    r = int(max(np.max(hi - c), np.max(c - lo)))
    M = max(8, 4 * (r + 1)) if M0 is None else int(M0)
    orders = _default_orders(d)
    radii, raw_w, inv_caps = [], [], []
    while True:
        box = BoxRegion.ball(M, d, c)
        cols = box_green_columns(box, K.coords)
        rel = K.coords - np.asarray(box.lower)
        G = cols[(slice(None),) + tuple(rel.T)].T
        w = np.linalg.solve(0.5 * (G + G.T), np.ones(len(K)))
        raw_w.append(w)
        inv_caps.append(1.0 / w.sum())
        radii.append(M)
        inv = [float(b) for b in richardson(inv_caps, orders)]
        caps = [1.0 / b for b in inv]
        if len(caps) >= 3 and abs(caps[-1] - caps[-2]) < tol * caps[-1]:
            wx = richardson(raw_w, orders)[-1]
            return wx, {"method": "box", "radii": radii, "raw": [1.0 / a for a in inv_caps], "extrapolated": caps}
        if (2 * (2 * M) + 1) ** d > max_sites:
            raise ConvergenceError(f"whole-space capacity not within rtol {tol} by M={M}", caps)
        M *= 2


def equilibrium_and_capacity(K: SiteSet, U: SiteSet | None = None, tol: float = 1e-4,
                             method: str = "green", cap: int = DENSE_CAP,
                             max_sites: int = 20_000_000, green_tol: float = 1e-5) -> EquilibriumMeasure:
    """Equilibrium measure and capacity of ``K`` relative to ``U``.

    ``U=None`` means the whole lattice.  Whole-space values come either from
    the extrapolated free Green's function (``method="green"``:
    ``e_K = G_K^{-1} 1``) or from the decreasing limit of relative capacities
    on doubling cubes (``method="box"``, practical for small ``K`` only).
    """
    if len(K) == 0:
        return EquilibriumMeasure(K, U, np.zeros(0), 0.0)
    if U is not None:
        if K.dim != U.dim:
            raise GeometryError("dimension mismatch")
        missing = [s for s in K if s not in U]
        if missing:
            raise GeometryError(f"K is not contained in U (e.g. {missing[0]})")
        w = _relative_equilibrium(K, U, cap)
        return EquilibriumMeasure(K, U, w, float(w.sum()), {"method": "relative"})
    if K.dim < 3:
        raise GeometryError("whole-space capacity needs d >= 3")
    if method == "green":
        w, meta = _whole_space_green(K, tol=green_tol)
    elif method == "box":
        w, meta = _whole_space_box(K, tol, None, max_sites)
    else:
        raise ValueError(f"unknown method {method!r}")
    return EquilibriumMeasure(K, None, w, float(w.sum()), meta)


def capacity(K: SiteSet, U: SiteSet | None = None, **kw) -> float:
    return equilibrium_and_capacity(K, U, **kw).capacity


def green_row_sums(U: SiteSet, tol: float = 1e-5) -> np.ndarray:
    """``sum_{y in U} g(x, y)`` for every ``x`` in ``U``."""
    ext = tuple(int(e) for e in (U.coords.max(axis=0) - U.coords.min(axis=0)))
    table = free_green_table(ext, tol=tol)
    out = np.empty(len(U))
    step = max(1, (1 << 22) // max(1, len(U)))
    for s in range(0, len(U), step):
        diffs = U.coords[s:s + step, None, :] - U.coords[None, :, :]
        out[s:s + step] = table.lookup(diffs).sum(axis=1)
    return out


def capacity_volume_bound(U: SiteSet, tol: float = 1e-5) -> float:
    """``|U| / max_{x in U} sum_{y in U} g(x, y)``, a lower bound for ``Cap(U)``."""
    if len(U) == 0:
        return 0.0
    return float(len(U) / green_row_sums(U, tol).max())
