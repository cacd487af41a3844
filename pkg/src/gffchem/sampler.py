"""Exact samplers for the Dirichlet free field and the Gibbs-Markov split.

The Dirichlet field on a box is sampled spectrally: the Dirichlet Laplacian
of a box is diagonalized by the orthonormal type-I sine transform, so

    psi = S diag(sqrt(2d / lambda_k)) z,   z ~ N(0, I),

has covariance exactly ``g_box``.  The free field on Z^d is replaced by the
Dirichlet field on a padded box restricted to the window of interest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy import fft

from . import rng
from .lattice import BoxRegion, GeometryError, Site, SiteSet, as_site, boundary
from .walk import DENSE_CAP, CapacityExceededError, _solve, dirichlet_matrix, free_green, killed_green

DENSE_SAMPLER_CAP = 6_000


class MissingBoundaryValueError(KeyError):
    """Boundary data is missing at a site the walk can exit to."""

    def __init__(self, site):
        super().__init__(f"no boundary value at exit site {site}")
        self.site = site


@dataclass
class FieldSample:
    """A real field on the sites of ``box`` (``NaN`` marks sites off the domain)."""

    box: BoxRegion
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != self.box.shape:
            raise GeometryError(f"values shape {self.values.shape} != box shape {self.box.shape}")

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def mask(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def __getitem__(self, x: Sequence[int]) -> float:
        if x not in self.box:
            raise KeyError(f"{tuple(x)} outside field box {self.box}")
        return float(self.values[self.box.index(x)])

    def sites(self) -> SiteSet:
        return SiteSet.from_mask(self.box, self.mask)

    def covers(self, region: BoxRegion | SiteSet) -> bool:
        return not self.missing(region, limit=1)

    def missing(self, region: BoxRegion | SiteSet, limit: int | None = None) -> list[Site]:
        """Sites of ``region`` where the field has no value."""
        out: list[Site] = []
        if isinstance(region, BoxRegion):
            inter = self.box.intersect(region)
            if inter is None or inter != region:
                for s in region:
                    if s not in self.box:
                        out.append(s)
                        if limit and len(out) >= limit:
                            return out
            if inter is not None:
                sub = np.isnan(self.values[inter.slices(self.box)])
                for idx in np.argwhere(sub)[: (limit or None)]:
                    out.append(tuple(int(a + b) for a, b in zip(idx, inter.lower)))
            return out[: (limit or None)]
        for s in region:
            if s not in self.box or np.isnan(self.values[self.box.index(s)]):
                out.append(s)
                if limit and len(out) >= limit:
                    break
        return out

    def restrict(self, box: BoxRegion) -> "FieldSample":
        if not self.box.contains_box(box):
            raise GeometryError(f"{box} not inside field box {self.box}")
        meta = dict(self.meta)
        meta["window"] = [list(box.lower), list(box.upper)]
        return FieldSample(box, self.values[box.slices(self.box)].copy(), meta)

    def array_on(self, box: BoxRegion) -> np.ndarray:
        """View of the values over ``box`` (must lie inside the field box)."""
        return self.values[box.slices(self.box)]


@dataclass
class GibbsMarkovSplit:
    domain: BoxRegion | SiteSet
    psi: FieldSample
    xi: FieldSample


# ---------------------------------------------------------------------------


def _box_eigenvalues(shape: Sequence[int]) -> np.ndarray:
    """``lambda_k = sum_i 2 (1 - cos(pi k_i / (m_i + 1)))`` on the mode grid."""
    d = len(shape)
    lam = np.zeros(tuple(shape))
    for ax, m in enumerate(shape):
        s = [1] * d
        s[ax] = m
        lam = lam + (2.0 * (1.0 - np.cos(np.pi * np.arange(1, m + 1) / (m + 1)))).reshape(s)
    return lam


@lru_cache(maxsize=8)
def _spectral_scale(shape: tuple[int, ...]) -> np.ndarray:
    return np.sqrt(2.0 * len(shape) / _box_eigenvalues(shape))


def sample_dirichlet_spectral(box: BoxRegion, seed: int, index: int = 0, stream: int = 0) -> FieldSample:
    """Exact sample of the Dirichlet field ``psi^box`` (covariance ``g_box``)."""
    if box.size == 0:
        raise GeometryError("degenerate box")
    z = rng.standard_normals(seed, index, box.size, stream).reshape(box.shape)
    z *= _spectral_scale(box.shape)
    values = fft.idstn(z, type=1, norm="ortho")
    meta = {"law": "dirichlet-box", "seed": int(seed), "index": int(index), "stream": int(stream),
            "box": [list(box.lower), list(box.upper)]}
    return FieldSample(box, values, meta)


def sample_dirichlet_dense(U: SiteSet, seed: int, index: int = 0, stream: int = 0,
                           cap: int = DENSE_SAMPLER_CAP) -> FieldSample:
    """Exact sample of ``psi^U`` via a Cholesky factor of ``g_U``."""
    if len(U) == 0:
        raise GeometryError("empty domain")
    if len(U) > cap:
        raise CapacityExceededError(len(U), cap)
    G = killed_green(U).matrix()
    chol = scipy.linalg.cholesky(G, lower=True)
    z = rng.standard_normals(seed, index, len(U), stream)
    box = U.bounding_box()
    values = np.full(box.shape, np.nan)
    values[tuple((U.coords - np.asarray(box.lower)).T)] = chol @ z
    meta = {"law": "dirichlet-dense", "seed": int(seed), "index": int(index), "stream": int(stream),
            "sites": int(len(U))}
    return FieldSample(box, values, meta)


# ---------------------------------------------------------------------------
# harmonic extension


def _lookup_boundary(values, site: Site) -> float:
    if isinstance(values, FieldSample):
        if site not in values.box:
            raise MissingBoundaryValueError(site)
        v = values.values[values.box.index(site)]
    else:
        try:
            v = values[site]
        except KeyError:
            raise MissingBoundaryValueError(site) from None
    if v is None or np.isnan(v):
        raise MissingBoundaryValueError(site)
    return float(v)


def _box_rhs(box: BoxRegion, values) -> np.ndarray:
    """Sum of exterior neighbour values for every site of ``box``."""
    d = box.dim
    b = np.zeros(box.shape)
    if isinstance(values, FieldSample) and values.box.contains_box(box.expand(1)):
        for ax in range(d):
            for side in (0, 1):
                lo, up = list(box.lower), list(box.upper)
                if side == 0:
                    lo[ax] = up[ax] = box.lower[ax] - 1
                else:
                    lo[ax] = up[ax] = box.upper[ax] + 1
                face = values.array_on(BoxRegion(tuple(lo), tuple(up)))
                if np.isnan(face).any():
                    j = np.argwhere(np.isnan(face))[0]
                    raise MissingBoundaryValueError(tuple(int(a + c) for a, c in zip(j, lo)))
                sl = [slice(None)] * d
                sl[ax] = slice(0, 1) if side == 0 else slice(-1, None)
                b[tuple(sl)] += face
        return b
    for ax in range(d):
        for side in (0, 1):
            sl = [slice(None)] * d
            sl[ax] = slice(0, 1) if side == 0 else slice(-1, None)
            face_box_lo, face_box_up = list(box.lower), list(box.upper)
            if side == 0:
                face_box_lo[ax] = face_box_up[ax] = box.lower[ax]
            else:
                face_box_lo[ax] = face_box_up[ax] = box.upper[ax]
            face = BoxRegion(tuple(face_box_lo), tuple(face_box_up))
            add = np.empty(face.shape)
            step = -1 if side == 0 else 1
            for s in face:
                y = list(s)
                y[ax] += step
                add[face.index(s)] = _lookup_boundary(values, tuple(y))
            b[tuple(sl)] += add
    return b


def _dirichlet_solve_box(box: BoxRegion, b: np.ndarray) -> np.ndarray:
    """Solve ``(2d I - A_box) u = b`` exactly with the sine transform."""
    a = fft.dstn(b, type=1, norm="ortho")
    a /= _box_eigenvalues(box.shape)
    return fft.idstn(a, type=1, norm="ortho")


def harmonic_extension(U: BoxRegion | SiteSet, boundary_values: Mapping[Site, float] | FieldSample,
                       cap: int = DENSE_CAP) -> FieldSample:
    """Discrete harmonic function on ``U`` with the given exterior values.

    ``xi(x) = E^x[f(X_{T_U})]``; at each ``x`` in ``U`` it equals the average
    of its ``2d`` neighbours, reading ``f`` off ``U``.
    """
    if isinstance(U, BoxRegion):
        b = _box_rhs(U, boundary_values)
        return FieldSample(U, _dirichlet_solve_box(U, b), {"law": "derived", "kind": "harmonic-extension"})
    d = U.dim
    dU = boundary(U)
    fvals = {s: _lookup_boundary(boundary_values, s) for s in dU}
    lookup = U.lookup
    b = np.zeros(len(U))
    for i, x in enumerate(U):
        for ax in range(d):
            for step in (-1, 1):
                y = list(x)
                y[ax] += step
                y = tuple(y)
                if y not in lookup:
                    b[i] += fvals[y]
    xi = _solve(dirichlet_matrix(U), b, cap)
    box = U.bounding_box()
    values = np.full(box.shape, np.nan)
    values[tuple((U.coords - np.asarray(box.lower)).T)] = xi
    return FieldSample(box, values, {"law": "derived", "kind": "harmonic-extension"})


def gibbs_markov_split(field_: FieldSample, U: BoxRegion | SiteSet, cap: int = DENSE_CAP) -> GibbsMarkovSplit:
    """``phi = psi^U + xi^U`` on ``U``, with ``xi^U`` the harmonic extension of ``phi|_{U^c}``."""
    exits = boundary(U.to_siteset() if isinstance(U, BoxRegion) else U)
    region = U if isinstance(U, BoxRegion) else U
    miss = field_.missing(region, limit=1) or field_.missing(exits, limit=1)
    if miss:
        raise GeometryError(f"U is not interior to the field domain (missing {miss[0]})")
    xi = harmonic_extension(U, field_, cap)
    phi_on = field_.array_on(xi.box)
    psi_vals = phi_on - xi.values  # NaN off U carries over from xi
    meta = dict(field_.meta)
    meta["kind"] = "psi"
    return GibbsMarkovSplit(U, FieldSample(xi.box, psi_vals, meta), xi)


# ---------------------------------------------------------------------------
# free-field surrogate


@lru_cache(maxsize=64)
def center_variance_deficit(M: int, d: int) -> float:
    """``g(0,0) - g_{B_M}(0,0)``: the covariance lost at the centre of the padded box."""
    from .walk import killed_green_table

    g00 = free_green((0,) * d, (0,) * d, tol=1e-7).value
    return float(g00 - killed_green_table(M, (0,) * d)[(0,) * d])


def padded_box(window: BoxRegion, kappa: float) -> BoxRegion:
    """The box on which the Dirichlet field is sampled for a given window."""
    if kappa < 1:
        raise ValueError("padding factor kappa must be >= 1")
    R = max(-(-(b - a) // 2) for a, b in zip(window.lower, window.upper))
    return window.expand(int(np.ceil((kappa - 1.0) * max(R, 1))))


def sample_gff(window: BoxRegion, seed: int, index: int = 0, kappa: float = 3.0) -> FieldSample:
    """Free-field surrogate on ``window``: ``psi^{padded box}`` restricted to it."""
    outer = padded_box(window, kappa)
    full = sample_dirichlet_spectral(outer, seed, index)
    out = full.restrict(window)
    M = min(min(b - a for a, b in zip(outer.lower, outer.upper)) // 2, 1440)
    out.meta.update({"law": "gff-surrogate", "kappa": float(kappa),
                     "outer": [list(outer.lower), list(outer.upper)],
                     "center_variance_deficit": center_variance_deficit(M, window.dim)})
    return out
