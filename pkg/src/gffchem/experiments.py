"""Monte Carlo estimators, tube geometry and capacity studies.

Sample ``i`` of an estimate draws its field from the Philox stream keyed by
``(seed, i)``, so results do not depend on how samples are spread over
workers.  Event descriptors are plain dicts, e.g.
``{"event": "stretch", "h": 0.0, "N": 16, "C": 12.0}``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import rng
from .lattice import BoxRegion, GeometryError, SiteSet, boundary
from .sampler import FieldSample, gibbs_markov_split, sample_dirichlet_spectral, sample_gff
from .topology import (EventReport, Grid, arm_event, box_crossing, level_clusters, level_mask, label_mask,
                       stretch)
from .walk import CapacityExceededError, ConvergenceError, capacity

Z95 = 1.959963984540054


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n < 1:
        raise ValueError("n must be >= 1")
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    # keep p-hat inside the interval despite rounding at the endpoints
    return min(max(0.0, mid - half), p), max(min(1.0, mid + half), p)


@dataclass
class EstimationResult:
    event: dict
    n_samples: int
    successes: int
    p_hat: float
    ci_low: float
    ci_high: float
    seed: int
    config: dict
    values: list = field(default_factory=list)   # per-sample statistic, by sample index

    @property
    def censored(self) -> bool:
        return self.successes == 0

    def record(self) -> dict:
        r = {k: v for k, v in asdict(self).items() if k not in ("values", "event", "config")}
        r.update({f"event.{k}": v for k, v in self.event.items()})
        r["censored"] = self.censored
        return r


# ---------------------------------------------------------------------------
# events


DEFAULT_CONFIG = {"d": 3, "law": "gff", "kappa": 1.5, "window_factor": 1.0}


def _ball(params: Mapping, key: str, d: int) -> BoxRegion:
    return BoxRegion.ball(int(params[key]), d)


def event_window(event: Mapping, config: Mapping) -> BoxRegion:
    """The window on which an event is evaluated (the field is sampled there)."""
    d = int(config["d"])
    kind = event["event"]
    if kind == "site":
        x = tuple(event.get("x", (0,) * d))
        return BoxRegion(x, x)
    if kind == "arm":
        return _ball(event, "R", d).expand(1)
    if kind == "crossing":
        return _ball(event, "N", d)
    if kind == "stretch":
        return BoxRegion.ball(int(math.ceil(config.get("window_factor", 1.0) * int(event["N"]))), d)
    if kind == "lower_bound":
        tube = build_tube(int(event["N"]), int(event.get("alpha", 2)), float(event["eps"]), d)
        return tube.window
    raise ValueError(f"unknown event {kind!r}")


def sample_field(config: Mapping, window: BoxRegion, seed: int, index: int) -> FieldSample:
    law = config.get("law", "gff")
    if law == "gff":
        return sample_gff(window, seed, index, float(config.get("kappa", 1.5)))
    if law == "dirichlet":
        box = config.get("box")
        box = window if box is None else BoxRegion(tuple(box[0]), tuple(box[1]))
        if not box.contains_box(window):
            raise GeometryError(f"event window {window} not covered by the sampled box {box}")
        f = sample_dirichlet_spectral(box, seed, index)
        return f if box == window else f.restrict(window)
    raise ValueError(f"unknown law {law!r}")


def evaluate_event(event: Mapping, f: FieldSample, config: Mapping) -> tuple[bool, float | None]:
    """``(outcome, statistic)`` for one field sample."""
    kind = event["event"]
    h = float(event.get("h", 0.0))
    if kind == "site":
        return f[tuple(event.get("x", (0,) * f.dim))] >= h, None
    if kind == "arm":
        return arm_event(f, h, (0,) * f.dim, int(event["R"])).outcome, None
    if kind == "crossing":
        return box_crossing(f, h, _ball(event, "N", f.dim), int(event.get("axis", 0))), None
    if kind == "stretch":
        N = int(event["N"])
        rep = stretch(f, h, N, BoxRegion.ball(N, f.dim), f.box, event.get("mode", "extremal"))
        ratio = rep.max_distance / N
        C = float(event.get("C", math.inf))
        return bool(rep.disconnected or ratio > C), ratio
    if kind == "lower_bound":
        tube = build_tube(int(event["N"]), int(event.get("alpha", 2)), float(event["eps"]), f.dim)
        rep = lower_bound_events(f, tube, h, float(event["h_star"]), event.get("delta"),
                                 event.get("F_reading", "boundary"))
        key = event.get("report", "violation")
        if key == "violation":
            return bool(rep["violations"]), None
        return bool(rep[key].outcome), None
    raise ValueError(f"unknown event {kind!r}")


def _run_chunk(args) -> list[tuple[int, bool, float | None]]:
    event, config, seed, indices = args
    window = event_window(event, config)
    out = []
    for i in indices:
        f = sample_field(config, window, seed, i)
        ok, stat = evaluate_event(event, f, config)
        out.append((int(i), bool(ok), stat))
    return out


def run_samples(event: Mapping, config: Mapping, n: int, seed: int, workers: int = 1,
                chunk: int | None = None) -> list[tuple[int, bool, float | None]]:
    """Per-sample ``(index, outcome, statistic)``, sorted by index."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if workers <= 1:
        rows = _run_chunk((dict(event), dict(config), seed, range(n)))
    else:
        chunk = chunk or max(1, -(-n // (4 * workers)))
        jobs = [(dict(event), dict(config), seed, range(s, min(n, s + chunk))) for s in range(0, n, chunk)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = [r for part in ex.map(_run_chunk, jobs) for r in part]
    return sorted(rows, key=lambda r: r[0])


def mc_estimate(event: Mapping, config: Mapping | None, n: int, seed: int, workers: int = 1) -> EstimationResult:
    cfg = dict(DEFAULT_CONFIG)
    cfg.update(config or {})
    rows = run_samples(event, cfg, n, seed, workers)
    k = sum(ok for _, ok, _ in rows)
    lo, hi = wilson_interval(k, n)
    return EstimationResult(dict(event), n, k, k / n, lo, hi, int(seed), cfg, [s for _, _, s in rows])


# ---------------------------------------------------------------------------
# critical height bracket


@dataclass
class HStarBracket:
    h_lo: float
    h_hi: float
    grid: list
    sizes: list
    table: dict          # N -> list of crossing probabilities on the grid
    crossings: list      # estimated curve intersections for successive sizes
    method: str          # "intersection" or "half-height" (fallback)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.h_lo + self.h_hi)


def _crossing_level(f: FieldSample, N: int, grid: np.ndarray) -> int:
    """Number of grid levels at which ``B_N`` is crossed (crossing is decreasing in ``h``)."""
    box = BoxRegion.ball(N, f.dim)
    lo, hi = 0, len(grid)
    while lo < hi:
        mid = (lo + hi) // 2
        if box_crossing(f, float(grid[mid]), box):
            lo = mid + 1
        else:
            hi = mid
    return lo


def _crossing_chunk(args):
    d, N, kappa, grid, seed, indices = args
    grid = np.asarray(grid)
    window = BoxRegion.ball(N, d)
    return [(i, _crossing_level(sample_gff(window, seed, i, kappa), N, grid)) for i in indices]


def estimate_h_star(d: int, sizes: Sequence[int], n: int, seed: int, grid: Sequence[float] | None = None,
                    kappa: float = 1.5, workers: int = 1) -> HStarBracket:
    """Bracket for the critical height from box-crossing curves of successive sizes."""
    sizes = sorted(int(N) for N in sizes)
    if len(sizes) < 2:
        raise ValueError("need at least two sizes")
    grid = np.linspace(-0.5, 2.0, 26) if grid is None else np.asarray(grid, dtype=float)
    if len(grid) < 3 or np.any(np.diff(grid) <= 0):
        raise ValueError("h grid must be strictly increasing with at least 3 points")
    table = {}
    for N in sizes:
        sub = rng.derive_seed(seed, N)
        jobs = [(d, N, kappa, grid.tolist(), sub, range(s, min(n, s + 64))) for s in range(0, n, 64)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                levels = [lv for part in ex.map(_crossing_chunk, jobs) for _, lv in part]
        else:
            levels = [lv for job in jobs for _, lv in _crossing_chunk(job)]
        levels = np.asarray(levels)
        table[N] = [float(np.mean(levels > j)) for j in range(len(grid))]
    crossings = []
    for a, b in zip(sizes, sizes[1:]):
        diff = np.asarray(table[b]) - np.asarray(table[a])
        for j in range(len(grid) - 1):
            if diff[j] > 0 and diff[j + 1] <= 0:
                t = diff[j] / (diff[j] - diff[j + 1])
                crossings.append(float(grid[j] + t * (grid[j + 1] - grid[j])))
                break
    if crossings:
        return HStarBracket(min(crossings), max(crossings), grid.tolist(), sizes, table, crossings, "intersection")
    p = np.asarray(table[sizes[-1]])
    inside = np.flatnonzero((p > 0.1) & (p < 0.9))
    if not len(inside):
        raise ValueError("crossing curves never leave {0, 1} on this grid; widen it")
    return HStarBracket(float(grid[inside[0]]), float(grid[inside[-1]]), grid.tolist(), sizes, table, [],
                        "half-height")


# ---------------------------------------------------------------------------
# stretch tails


RATE_MODELS: dict[str, Callable[[float, int], float]] = {
    "N^(1-2/d)": lambda N, d: N ** (1.0 - 2.0 / d),
    "N/log N": lambda N, d: N / math.log(N),
    "N": lambda N, d: float(N),
}


def fit_decay_models(Ns: Sequence[int], p_hats: Sequence[float], d: int = 3) -> dict[str, dict]:
    """Fit ``-log p = c r(N)`` through the origin for each candidate rate ``r``.

    Rows with ``p = 0`` are censored and left out.  Returns ``c`` and the
    residual sum of squares per model (``None`` when nothing is left).
    """
    rows = [(N, p) for N, p in zip(Ns, p_hats) if p > 0]
    out = {}
    for name, r in RATE_MODELS.items():
        if not rows:
            out[name] = {"c": None, "rss": None, "n_rows": 0}
            continue
        x = np.array([r(N, d) for N, _ in rows])
        y = np.array([-math.log(p) for _, p in rows])
        c = float(x @ y / (x @ x))
        res = y - c * x
        out[name] = {"c": c, "rss": float(res @ res), "n_rows": len(rows)}
    return out


@dataclass
class StretchCurve:
    h: float
    C: float
    rows: list[dict]
    fits: dict
    config: dict


def stretch_tail_curve(h: float, C: float, Ns: Sequence[int], n: int, seed: int,
                       config: Mapping | None = None, workers: int = 1) -> StretchCurve:
    """``P[some pair in S_N(h) ∩ B_N has rho_h > C N]`` for each ``N``.

    A pair of large clusters that are not joined inside the window counts as
    ``rho = inf``.  ``N`` uses the child seed ``derive_seed(seed, N)``.
    """
    Ns = [int(N) for N in Ns]
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ValueError("Ns must be increasing")
    cfg = dict(DEFAULT_CONFIG)
    cfg.update(config or {})
    rows = []
    for N in Ns:
        ev = {"event": "stretch", "h": float(h), "N": N, "C": float(C)}
        res = mc_estimate(ev, cfg, n, rng.derive_seed(seed, N), workers)
        win = event_window(ev, cfg)
        rows.append({"N": N, "n": n, "successes": res.successes, "p_hat": res.p_hat,
                     "ci_low": res.ci_low, "ci_high": res.ci_high, "censored": res.censored,
                     "resolution": 1.0 / n, "window": int(win.upper[0]),
                     "median_stretch": float(np.median(res.values))})
    fits = fit_decay_models([r["N"] for r in rows], [r["p_hat"] for r in rows], int(cfg["d"]))
    return StretchCurve(float(h), float(C), rows, fits, cfg)


def stretch_samples(h: float, N: int, n: int, seed: int, config: Mapping | None = None,
                    workers: int = 1) -> list[float]:
    """Per-sample ``max rho / N`` (finite pairs only), e.g. for calibrating ``C``."""
    cfg = dict(DEFAULT_CONFIG)
    cfg.update(config or {})
    ev = {"event": "stretch", "h": float(h), "N": int(N)}
    return [s for _, _, s in run_samples(ev, cfg, n, rng.derive_seed(seed, N), workers)]


def non_increasing_with_overlap(rows: Sequence[Mapping]) -> tuple[bool, list]:
    """Is ``p_hat`` non-increasing in ``N``, allowing rises only between adjacent sizes with overlapping CIs?"""
    exceptions = []
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            a, b = rows[i], rows[j]
            if b["p_hat"] > a["p_hat"]:
                overlap = b["ci_low"] <= a["ci_high"]
                if j == i + 1 and overlap:
                    exceptions.append((a["N"], b["N"]))
                else:
                    return False, exceptions
    return True, exceptions


# ---------------------------------------------------------------------------
# tube geometry


def _segment_tube(axis: int, n: int, r: int, d: int, shift: Sequence[int]) -> BoxRegion:
    lo = [-r] * d
    up = [r] * d
    up[axis] = n + r
    return BoxRegion(tuple(lo), tuple(up)).translate(shift)


@dataclass
class TubeRegion:
    """The U-shaped tube through ``0 -> alpha N e_2 -> alpha N e_2 + N e_1 -> N e_1``."""

    N: int
    alpha: int
    eps: float
    d: int
    r_ball: int        # floor(N^(eps/2))
    radii: tuple       # floor(N^eps), floor(N^(2 eps)), floor(N^(3 eps))

    def pieces(self, r: int) -> list[BoxRegion]:
        aN = self.alpha * self.N
        e1 = [0] * self.d
        e1[0] = self.N
        e2 = [0] * self.d
        e2[1] = aN
        return [_segment_tube(1, aN, r, self.d, [0] * self.d),
                _segment_tube(0, self.N, r, self.d, e2),
                _segment_tube(1, aN, r, self.d, e1)]

    def P(self, r: int) -> SiteSet:
        sets = [p.to_siteset() for p in self.pieces(r)]
        return sets[0].union(sets[1]).union(sets[2])

    @property
    def U(self) -> SiteSet:
        return self.P(self.radii[0])

    @property
    def V(self) -> SiteSet:
        return self.P(self.radii[1])

    @property
    def W(self) -> SiteSet:
        return self.P(self.radii[2])

    @property
    def P0(self) -> SiteSet:
        return self.P(0)

    @property
    def window(self) -> BoxRegion:
        """Covers ``W_N`` with two layers to spare and ``B_N``."""
        W = self.W.bounding_box().expand(2)
        B = BoxRegion.ball(self.N, self.d)
        return BoxRegion(tuple(min(a, b) for a, b in zip(W.lower, B.lower)),
                         tuple(max(a, b) for a, b in zip(W.upper, B.upper)))


def build_tube(N: int, alpha: int, eps: float, d: int = 3) -> TubeRegion:
    if N < 2:
        raise ValueError("need N >= 2")
    if alpha < 1 or int(alpha) != alpha:
        raise ValueError("alpha must be a positive integer")
    if eps <= 0:
        raise ValueError("eps must be positive")
    radii = tuple(int(math.floor(N ** (k * eps))) for k in (1, 2, 3))
    if 2 * radii[2] >= N:
        raise GeometryError(f"tube arms merge: floor(N^(3 eps)) = {radii[2]} >= N/2 = {N / 2}")
    tube = TubeRegion(int(N), int(alpha), float(eps), int(d), int(math.floor(N ** (eps / 2))), radii)
    for r in sorted(set((0,) + radii)):
        P = tube.P(r)
        box = P.bounding_box()
        _, ncomp = label_mask(P.mask(box))
        if ncomp != 1:
            raise GeometryError(f"P_{r} is not connected ({ncomp} components)")
    return tube


# ---------------------------------------------------------------------------
# lower-bound events


def _mask_of(S: SiteSet, box: BoxRegion) -> np.ndarray:
    return S.mask(box)


def _sphere_mask(box: BoxRegion, R: int, center: Sequence[int]) -> np.ndarray:
    """Sites of ``box`` at l_inf distance exactly ``R`` from ``center``."""
    idx = np.indices(box.shape)
    dist = np.zeros(box.shape, dtype=np.int64)
    for ax in range(box.dim):
        dist = np.maximum(dist, np.abs(idx[ax] + box.lower[ax] - center[ax]))
    return dist == R


def _ball_mask(box: BoxRegion, R: int, center: Sequence[int]) -> np.ndarray:
    idx = np.indices(box.shape)
    dist = np.zeros(box.shape, dtype=np.int64)
    for ax in range(box.dim):
        dist = np.maximum(dist, np.abs(idx[ax] + box.lower[ax] - center[ax]))
    return dist <= R


def _connects(mask: np.ndarray, a: np.ndarray, b: np.ndarray) -> bool:
    lab, _ = label_mask(mask)
    la = set(np.unique(lab[a & mask]).tolist()) - {0}
    return any(int(v) in la for v in np.unique(lab[b & mask]))


def _set_distance(box: BoxRegion, mask: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    grid = Grid(box, mask)
    src = np.argwhere(a & mask) + np.asarray(box.lower)
    if not len(src):
        return math.inf
    dist = grid.distances(grid.flat_indices(src))
    hit = dist[b & mask]
    hit = hit[hit >= 0]
    return float(hit.min()) if hit.size else math.inf


def lower_bound_events(f: FieldSample, tube: TubeRegion, h: float, h_star: float, delta: float | None = None,
                       F_reading: str = "boundary", check_long_path: bool = True) -> dict:
    """Detectors ``D_N``, ``E_N``, ``F_N``, ``G_N`` and the two implications they should force.

    ``F_reading="boundary"``: no path in ``{f >= h}`` from ``dV_N`` to ``dW_N``
    through ``W_N``.  ``"literal"``: no such path from ``dV_N`` into ``W_N``,
    which (since ``dV_N`` lies in ``W_N``) means ``f < h`` on all of ``dV_N``.
    """
    if F_reading not in ("boundary", "literal"):
        raise ValueError(f"unknown F_N reading {F_reading!r}")
    box = tube.window
    miss = f.missing(box, limit=1)
    if miss:
        raise GeometryError(f"field does not cover the tube window (missing {miss[0]})")
    if delta is None:
        delta = 0.5 * (h_star - h)
    N, r0 = tube.N, tube.r_ball
    e1 = (N,) + (0,) * (tube.d - 1)
    origin = (0,) * tube.d
    above = level_mask(f, h, box)
    U, V, W, P0 = tube.U, tube.V, tube.W, tube.P0
    mU, mV, mW, mP0 = (_mask_of(S, box) for S in (U, V, W, P0))
    ball0, ball1 = _ball_mask(box, r0, origin), _ball_mask(box, r0, e1)

    D = _connects(above & mU, ball0, ball1)

    split = gibbs_markov_split(f, V)
    xi_U = split.xi.values[tuple((U.coords - np.asarray(split.xi.box.lower)).T)]
    E = bool(xi_U.min() >= -(h_star - h + delta))

    dV = _mask_of(boundary(V), box)
    if F_reading == "literal":
        F = not bool((above & dV).any())
    else:
        dW = _mask_of(boundary(W), box)
        F = not _connects(above & (mW | dW), dV, dW)

    dP0 = _mask_of(boundary(P0), box)
    G = bool(above[mP0].all() and not above[dP0].any())

    violations = []
    out = {"D": EventReport("D", D), "E": EventReport("E", E, {"xi_min": float(xi_U.min()), "delta": delta}),
           "F": EventReport("F", F, {"reading": F_reading}), "G": EventReport("G", G)}
    bound = (2 * tube.alpha + 1) * N - 2 * r0
    if D and F:
        rho = _set_distance(box, above, ball0, ball1)
        out["DF_distance"] = rho
        out["DF_bound"] = bound
        if rho < bound:
            violations.append({"implication": "D&F", "rho": rho, "bound": bound})
    if G and check_long_path:
        thm = long_path_event(f, h, N, tube.alpha, box)
        out["long_path"] = thm
        if not thm.outcome:
            violations.append({"implication": "G", "witness": thm.witness})
    out["violations"] = violations
    return out


def long_path_event(f: FieldSample, h: float, N: int, alpha: float, window: BoxRegion) -> EventReport:
    """``exists x, y in S_N(h) ∩ B_N`` with ``rho_h(x, y) > alpha N``, evaluated inside ``window``."""
    rep = stretch(f, h, N, BoxRegion.ball(N, f.dim), window, mode="all" if N <= 8 else "extremal")
    ok = rep.disconnected or rep.max_distance > alpha * N
    return EventReport("LongPath", bool(ok), {"max_distance": rep.max_distance, "disconnected": rep.disconnected,
                                              "n_clusters": rep.n_clusters})


# ---------------------------------------------------------------------------
# capacity growth


def capacity_growth_study(shape: str, Ns: Sequence[int], eps: float = 0.25, d: int = 3) -> list[dict]:
    """``Cap`` of ``B_N`` or of the tube ``P^(i)_{N, floor(N^eps)}`` with the matching normalization.

    Boxes report ``Cap / N^(d-2)``; tubes report ``Cap log N / N``.  A size
    the solver cannot handle yields a row with ``capacity=None`` and
    ``exceeded=True``.
    """
    rows = []
    for N in Ns:
        if shape == "box":
            K = BoxRegion.ball(N, d).to_siteset()
        elif shape in ("tube1", "tube2"):
            r = int(math.floor(N ** eps))
            K = _segment_tube(0 if shape == "tube1" else 1, N, r, d, [0] * d).to_siteset()
        else:
            raise ValueError(f"unknown shape {shape!r}")
        try:
            c = capacity(K)
        except (CapacityExceededError, ConvergenceError, MemoryError) as exc:
            rows.append({"shape": shape, "N": N, "sites": len(K), "capacity": None, "ratio": None,
                         "exceeded": True, "error": str(exc)})
            continue
        ratio = c / N ** (d - 2) if shape == "box" else c * math.log(N) / N
        rows.append({"shape": shape, "N": N, "sites": len(K), "capacity": c, "ratio": ratio, "exceeded": False})
    ratios = [r["ratio"] for r in rows if r["ratio"] is not None]
    spread = max(ratios) / min(ratios) if ratios else None
    for r in rows:
        r["band"] = spread
    return rows
