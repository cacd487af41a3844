"""Good and bad boxes on the coarse lattice, bad-box census, scale schedules.

A coarse site ``z`` of ``L Z^d`` is classified from one global field
sample: the Gibbs-Markov split on ``U_z`` gives ``xi^{U_z}`` (harmonic part)
and ``psi^{U_z}`` (local part), which are tested separately.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import ndimage

from .lattice import BoxRegion, GeometryError, RenormIndex, Site, as_site, coarse_cover, renorm_boxes
from .sampler import FieldSample, gibbs_markov_split
from .topology import (EventReport, Grid, _extremal_sites, diameter_threshold, labeling_from_mask,
                       level_mask, local_uniqueness_events, stretch)


@dataclass
class BoxClassification:
    z: Site
    L: int
    K: int
    xi_good: bool
    psi_good: bool
    eps: float
    h1: float
    h2: float
    C1: float
    details: dict = field(default_factory=dict)

    @property
    def good(self) -> bool:
        return self.xi_good and self.psi_good

    def record(self) -> dict:
        out = asdict(self)
        out["z"] = list(self.z)
        out["good"] = self.good
        return out


# ---------------------------------------------------------------------------
# xi- and psi-goodness


def classify_xi(xi_field: FieldSample, z: RenormIndex, eps: float) -> bool:
    """``inf_{D_z} xi > -eps`` (strict: a value of exactly ``-eps`` is bad)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    _, D, _ = renorm_boxes(z)
    miss = xi_field.missing(D, limit=1)
    if miss:
        raise GeometryError(f"xi is not defined on all of D_z (missing {miss[0]})")
    return bool(np.min(xi_field.array_on(D)) > -eps)


def local_eta_max(psi: FieldSample, z: RenormIndex, h1: float, h2: float, mode: str = "exact") -> float:
    """``max eta_{z,h1}(x, y)`` over ``x, y`` in ``S^psi_z(h2) ∩ D_z``.

    ``S^psi_z(h)`` is taken as the union of components of ``{psi >= h} ∩ D_z``
    with diameter at least ``ceil(L/10)``, and paths stay inside it.  Returns
    ``inf`` if two such points are not joined, 0 if there are none.
    ``mode="exact"`` searches from every point; ``mode="sweep"`` only from the
    extreme points of each component (a lower bound, for large boxes).
    """
    _, D, _ = renorm_boxes(z)
    t = diameter_threshold(z.L)
    lab2 = labeling_from_mask(D, level_mask(psi, h2, D))
    targets_mask = np.isin(lab2.labels, np.flatnonzero(lab2.diameters >= t) + 1)
    if not targets_mask.any():
        return 0.0
    lab1 = labeling_from_mask(D, level_mask(psi, h1, D))
    big1 = np.flatnonzero(lab1.diameters >= t) + 1
    s_mask = np.isin(lab1.labels, big1)
    hit = np.unique(lab1.labels[targets_mask])
    if len(hit) > 1 or not s_mask[targets_mask].all():
        return math.inf
    targets = np.argwhere(targets_mask)
    grid = Grid(D, s_mask)
    if mode == "exact":
        sources = targets
    elif mode == "sweep":
        sources = _extremal_sites(targets)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    rel = tuple(targets.T)
    off = np.asarray(D.lower)
    best = 0
    for s in sources:
        dist = grid.distances(grid.flat_indices((s + off)[None, :]))
        best = max(best, int(dist[rel].max()))
    return float(best)


def classify_psi(psi_field: FieldSample, z: RenormIndex, h1: float, h2: float, C1: float,
                 eta_mode: str = "auto", details: dict | None = None) -> bool:
    """``LocUniq(psi, z, h1, h2)`` and ``eta_{z,h1} <= C1 L`` on ``S^psi_z(h2) ∩ D_z``."""
    if h1 > h2:
        raise ValueError(f"need h1 <= h2, got {h1} > {h2}")
    ev = local_uniqueness_events(psi_field, z, h1, h2)
    if details is not None:
        details.update({k: v.outcome for k, v in ev.items()})
    if not ev["LocUniq"].outcome:
        return False
    mode = eta_mode
    if mode == "auto":
        mode = "exact" if (7 * z.L) ** z.dim <= 30_000 else "sweep"
    eta = local_eta_max(psi_field, z, h1, h2, mode)
    if details is not None:
        details["eta_max"] = eta
        details["eta_mode"] = mode
    return bool(eta <= C1 * z.L)


def classify_box(field_: FieldSample, z: RenormIndex, eps: float, h1: float, h2: float, C1: float,
                 eta_mode: str = "auto") -> BoxClassification:
    """Split ``field`` on ``U_z`` and classify ``z``."""
    _, D, U = renorm_boxes(z)
    split = gibbs_markov_split(field_, U)
    xi_good = classify_xi(split.xi, z, eps)
    det: dict = {"xi_min": float(np.min(split.xi.array_on(D)))}
    psi_good = classify_psi(split.psi, z, h1, h2, C1, eta_mode, det)
    return BoxClassification(z.z, z.L, z.K, xi_good, psi_good, eps, h1, h2, C1, det)


def required_field_box(window: BoxRegion, L: int, K: int) -> BoxRegion:
    """Field coverage needed to classify every ``z`` meeting ``window``: all ``U_z`` plus one layer."""
    zs = coarse_cover(window, L, K)
    lo = np.min([renorm_boxes(z)[2].lower for z in zs], axis=0) - 1
    up = np.max([renorm_boxes(z)[2].upper for z in zs], axis=0) + 1
    return BoxRegion(tuple(lo), tuple(up))


def classify_window(field_: FieldSample, window: BoxRegion, L: int, K: int, eps: float, h1: float,
                    h2: float, C1: float, eta_mode: str = "auto") -> dict[Site, BoxClassification]:
    """Classify every coarse site whose cell meets ``window``."""
    return {z.z: classify_box(field_, z, eps, h1, h2, C1, eta_mode) for z in coarse_cover(window, L, K)}


def calibrate_C1(fields: Iterable[FieldSample], zs: Sequence[RenormIndex], h1: float, h2: float,
                 quantile: float = 0.99, eta_mode: str = "auto") -> dict:
    """``quantile`` of ``eta / L`` over boxes where ``LocUniq`` holds and ``eta`` is finite."""
    ratios = []
    for f in fields:
        for z in zs:
            _, _, U = renorm_boxes(z)
            psi = gibbs_markov_split(f, U).psi
            if not local_uniqueness_events(psi, z, h1, h2)["LocUniq"].outcome:
                continue
            mode = eta_mode if eta_mode != "auto" else ("exact" if (7 * z.L) ** z.dim <= 30_000 else "sweep")
            eta = local_eta_max(psi, z, h1, h2, mode)
            if math.isfinite(eta):
                ratios.append(eta / z.L)
    if not ratios:
        raise ValueError("no box satisfied LocUniq in the calibration run")
    return {"C1": float(np.quantile(ratios, quantile)), "quantile": quantile, "n_boxes": len(ratios)}


# ---------------------------------------------------------------------------
# census


@dataclass
class BadCluster:
    sites: list[Site]
    diameter: int          # l_inf diameter in lattice units
    closure: list[Site]    # the cluster and its *-boundary on the coarse lattice


@dataclass
class BadClusterMap:
    L: int
    bad: list[Site]
    clusters: list[BadCluster]

    def region(self, cluster: BadCluster, K: int = 4) -> BoxRegion:
        """Bounding box of the union of ``D_z`` over the closure of ``cluster``."""
        boxes = [renorm_boxes(RenormIndex(z, self.L, K))[1] for z in cluster.closure]
        return BoxRegion(tuple(np.min([b.lower for b in boxes], axis=0)),
                         tuple(np.max([b.upper for b in boxes], axis=0)))

    def closure_mask(self, cluster: BadCluster, box: BoxRegion, K: int = 4) -> np.ndarray:
        """Indicator over ``box`` of the union of ``D_z``, ``z`` in the closure."""
        m = np.zeros(box.shape, dtype=bool)
        for z in cluster.closure:
            D = renorm_boxes(RenormIndex(z, self.L, K))[1]
            inter = D.intersect(box)
            if inter is not None:
                m[inter.slices(box)] = True
        return m


def census(window: BoxRegion, classifications: Mapping[Site, BoxClassification], L: int,
           K: int = 4) -> tuple[int, BadClusterMap]:
    """Count bad coarse sites meeting ``window`` and split them into *-components."""
    zs = coarse_cover(window, L, K)
    for z in zs:
        if z.z not in classifications:
            raise KeyError(f"no classification for coarse site {z.z}")
    bad = [z.z for z in zs if not classifications[z.z].good]
    if not bad:
        return 0, BadClusterMap(L, [], [])
    d = len(bad[0])
    arr = np.array(bad) // L
    lo = arr.min(axis=0) - 1
    grid = np.zeros(tuple(arr.max(axis=0) - lo + 2), dtype=bool)
    grid[tuple((arr - lo).T)] = True
    labels, n = ndimage.label(grid, structure=np.ones((3,) * d, dtype=bool))
    clusters = []
    for c in range(1, n + 1):
        comp = labels == c
        sites = [tuple(int(v) for v in (idx + lo) * L) for idx in np.argwhere(comp)]
        ring = ndimage.binary_dilation(comp, structure=np.ones((3,) * d, dtype=bool)) & ~comp
        closure = sites + [tuple(int(v) for v in (idx + lo) * L) for idx in np.argwhere(ring)]
        coords = np.array(sites)
        diam = int((coords.max(axis=0) - coords.min(axis=0)).max()) + L - 1
        clusters.append(BadCluster(sites, diam, closure))
    return len(bad), BadClusterMap(L, bad, clusters)


def write_classifications(records: Iterable[BoxClassification], path: str | os.PathLike) -> None:
    """One JSON object per line, one line per coarse site."""
    from .io import atomic_write_text

    lines = [json.dumps(r.record(), sort_keys=True, default=_json_default) for r in records]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_classifications(path: str | os.PathLike) -> list[BoxClassification]:
    out = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        r = json.loads(line)
        r.pop("good", None)
        r["z"] = tuple(r["z"])
        out.append(BoxClassification(**r))
    return out


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, float) and math.isinf(o):
        return "inf"
    raise TypeError(type(o))


# ---------------------------------------------------------------------------
# scale schedule


@dataclass
class ScaleSchedule:
    N: int
    M: float
    d: int
    m_N: int
    L_N: int
    volume_ratio: float   # m_N L_N^d / N
    feasibility: float    # m_N^(2/d) / L_N^(d-2)
    degenerate: bool


def scale_schedule(N: int, M: float, d: int = 3) -> ScaleSchedule:
    """``m_N = floor(N^(1-2/d) / log N)``, ``L_N = floor(M (N^(2/d) log N)^(1/d))``."""
    if N < 3:
        raise ValueError("need N >= 3 so that log N > 1")
    if M <= 0:
        raise ValueError("M must be positive")
    logN = math.log(N)
    m = math.floor(N ** (1.0 - 2.0 / d) / logN)
    L = math.floor(M * (N ** (2.0 / d) * logN) ** (1.0 / d))
    degenerate = m < 1 or L < 1
    vol = m * L ** d / N
    feas = (m ** (2.0 / d) / L ** (d - 2)) if L >= 1 else math.inf
    return ScaleSchedule(N, M, d, m, L, vol, feas, degenerate)


# ---------------------------------------------------------------------------
# path diagnostics


def good_path_check(field_: FieldSample, classifications: Mapping[Site, BoxClassification],
                    path: Sequence[Sequence[int]], L: int, K: int, eps: float, h1: float, C1: float,
                    dump_dir: str | os.PathLike | None = None) -> EventReport:
    """Look for a path in ``{phi >= h1 - eps} ∩ (∪ D_{z_i})`` from ``C_{z_1}`` to ``C_{z_n}``.

    When every ``z_i`` is good the path should exist with length at most
    ``C1 L n``; a failure is reported (and dumped if ``dump_dir`` is given).
    """
    zs = [RenormIndex(as_site(z), L, K) for z in path]
    for a, b in zip(zs, zs[1:]):
        if sum(abs(x - y) for x, y in zip(a.z, b.z)) != L:
            raise GeometryError(f"{a.z} and {b.z} are not coarse nearest neighbours")
    for z in zs:
        if z.z not in classifications:
            raise KeyError(f"coarse site {z.z} on the path is unclassified")
    Ds = [renorm_boxes(z)[1] for z in zs]
    hull = BoxRegion(tuple(np.min([b.lower for b in Ds], axis=0)), tuple(np.max([b.upper for b in Ds], axis=0)))
    allowed = np.zeros(hull.shape, dtype=bool)
    for D in Ds:
        allowed[D.slices(hull)] = True
    miss = field_.missing(hull, limit=1)
    if miss:
        raise GeometryError(f"field does not cover the D-boxes (missing {miss[0]})")
    mask = allowed & level_mask(field_, h1 - eps, hull)
    grid = Grid(hull, mask)
    C1box, Cnbox = renorm_boxes(zs[0])[0], renorm_boxes(zs[-1])[0]
    src = np.argwhere(_box_mask(hull, C1box) & mask) + np.asarray(hull.lower)
    dist = grid.distances(grid.flat_indices(src)) if len(src) else np.full(hull.shape, -1)
    reach = dist[Cnbox.slices(hull)]
    reach = reach[reach >= 0]
    found = bool(reach.size)
    length = int(reach.min()) if found else None
    bound = C1 * L * len(zs)
    all_good = all(classifications[z.z].good for z in zs)
    witness = {"length": length, "bound": bound, "all_good": all_good, "n": len(zs)}
    if all_good and (not found or length > bound):
        witness["counterexample"] = True
        if dump_dir is not None:
            _dump_counterexample(dump_dir, field_, hull, [classifications[z.z] for z in zs], witness)
    return EventReport("GoodPath", found, witness)


def _box_mask(outer: BoxRegion, inner: BoxRegion) -> np.ndarray:
    m = np.zeros(outer.shape, dtype=bool)
    m[inner.slices(outer)] = True
    return m


def _dump_counterexample(dump_dir, field_: FieldSample, hull: BoxRegion, cls: list[BoxClassification],
                         witness: dict) -> None:
    from .io import write_field

    d = Path(dump_dir)
    d.mkdir(parents=True, exist_ok=True)
    tag = "_".join(str(c) for c in cls[0].z) + f"_n{len(cls)}"
    write_field(field_.restrict(hull), d / f"counterexample_{tag}.gff")
    write_classifications(cls, d / f"counterexample_{tag}.jsonl")
    (d / f"counterexample_{tag}.json").write_text(json.dumps(witness, default=_json_default))


@dataclass
class ChemicalBoundReport:
    N: int
    L: int
    m_N: int
    bad_count: int
    within_cap: bool
    ratio: float | None        # max rho_h / N over connected pairs, if within cap
    disconnected: bool
    params: dict


def chemical_bound_diagnostic(field_: FieldSample, h: float, eps: float, N: int, L: int, m_N: int,
                              K: int = 4, C1: float = 21.0, mode: str = "extremal",
                              eta_mode: str = "auto") -> ChemicalBoundReport:
    """Bad census on ``B_{2N}``; if at most ``m_N`` bad boxes, the stretch ``max rho_h / N`` on ``B_N``.

    Uses ``h1 = h + eps`` and ``h2 = h + 2 eps``.
    """
    d = field_.dim
    h1, h2 = h + eps, h + 2 * eps
    B2N = BoxRegion.ball(2 * N, d)
    cls = classify_window(field_, B2N, L, K, eps, h1, h2, C1, eta_mode)
    count, _ = census(B2N, cls, L, K)
    params = {"h": h, "eps": eps, "h1": h1, "h2": h2, "C1": C1, "K": K, "window": "B_2N"}
    if count > m_N:
        return ChemicalBoundReport(N, L, m_N, count, False, None, False, params)
    rep = stretch(field_, h, N, BoxRegion.ball(N, d), BoxRegion.ball(2 * N, d), mode)
    return ChemicalBoundReport(N, L, m_N, count, True, rep.max_distance / N, rep.disconnected, params)
