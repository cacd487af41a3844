import math

import numpy as np
import pytest

from gffchem.experiments import (build_tube, capacity_growth_study, estimate_h_star, fit_decay_models,
                                 lower_bound_events, mc_estimate, non_increasing_with_overlap, run_samples,
                                 stretch_tail_curve, wilson_interval)
from gffchem.lattice import GeometryError, SiteSet
from gffchem.sampler import FieldSample
from gffchem.walk import equilibrium_and_capacity

from oracles import graph_distance

G00 = 1.516386059


def test_wilson_coverage():
    rs = np.random.default_rng(30)
    hits = 0
    trials = 1000
    for _ in range(trials):
        p = rs.uniform(0.1, 0.9)
        n = int(rs.integers(50, 400))
        lo, hi = wilson_interval(int(rs.binomial(n, p)), n)
        hits += lo <= p <= hi
    assert 0.93 <= hits / trials <= 0.97


def test_wilson_edges():
    assert wilson_interval(0, 10)[0] == 0.0
    assert wilson_interval(10, 10)[1] == 1.0
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_site_event_symmetric():
    cfg = {"law": "dirichlet"}
    res = mc_estimate({"event": "site", "h": 0.0, "N": 4}, cfg, 2000, seed=3)
    assert res.ci_low <= 0.5 <= res.ci_high
    assert res.ci_low <= res.p_hat <= res.ci_high


def test_arm_saturation_and_impossible():
    cfg = {"law": "dirichlet"}
    never = mc_estimate({"event": "arm", "h": math.inf, "R": 8}, cfg, 20, seed=1)
    assert never.p_hat == 0 and never.censored and never.ci_low == 0 and never.ci_high > 0
    always = mc_estimate({"event": "arm", "h": -50.0, "R": 8}, cfg, 20, seed=1)
    assert always.p_hat == 1


def test_estimates_reproducible():
    ev = {"event": "stretch", "h": 0.0, "N": 4}
    a = mc_estimate(ev, None, 12, seed=9)
    b = mc_estimate(ev, None, 12, seed=9)
    assert a == b
    c = mc_estimate(ev, None, 12, seed=10)
    assert a.values != c.values


def test_run_samples_chunking_invariant():
    ev = {"event": "site", "h": 0.1, "N": 3}
    serial = run_samples(ev, {"d": 3, "law": "dirichlet"}, 10, 4)
    assert [r[0] for r in serial] == list(range(10))
    with pytest.raises(ValueError):
        run_samples(ev, {}, 0, 4)


def test_h_star_extremes_and_bracket():
    br = estimate_h_star(3, [4, 8], 16, seed=2, grid=[-10.0, 0.0, 1.0, 10.0])
    assert br.table[8][0] == 1.0 and br.table[8][-1] == 0.0
    assert br.h_lo <= br.h_hi
    with pytest.raises(ValueError):
        estimate_h_star(3, [8], 4, seed=0)
    with pytest.raises(ValueError):
        estimate_h_star(3, [4, 8], 4, seed=0, grid=[0.0, 0.0, 1.0])


def test_decay_fit_exact_on_synthetic():
    Ns = [16, 32, 64, 128]
    p = [math.exp(-0.7 * N ** (1 / 3)) for N in Ns]
    fits = fit_decay_models(Ns, p, d=3)
    assert fits["N^(1-2/d)"]["rss"] == pytest.approx(0, abs=1e-20)
    assert fits["N^(1-2/d)"]["c"] == pytest.approx(0.7, rel=1e-12)
    assert fits["N"]["rss"] > 0
    assert fit_decay_models(Ns, [0, 0, 0, 0])["N"]["c"] is None


def test_stretch_curve_censored_for_huge_C():
    curve = stretch_tail_curve(-0.5, C=(2 * 8 + 1) ** 3, Ns=[4, 8], n=6, seed=0)
    assert all(r["censored"] and r["p_hat"] == 0 for r in curve.rows)
    with pytest.raises(ValueError):
        stretch_tail_curve(0.0, 1.0, [8, 4], 2, 0)


def test_non_increasing_rule():
    row = lambda N, p, lo, hi: {"N": N, "p_hat": p, "ci_low": lo, "ci_high": hi}
    ok, ex = non_increasing_with_overlap([row(16, .5, .4, .6), row(32, .52, .42, .62), row(64, .1, .05, .2)])
    assert ok and ex == [(16, 32)]
    ok, _ = non_increasing_with_overlap([row(16, .5, .45, .55), row(32, .8, .75, .85)])
    assert not ok
    # a rise over a non-adjacent pair is never excused
    ok, _ = non_increasing_with_overlap([row(16, .5, .4, .6), row(32, .3, .2, .45), row(64, .55, .45, .65)])
    assert not ok


# --- tubes ------------------------------------------------------------------


def test_tube_path_alpha1():
    t = build_tube(8, 1, 0.1)
    P0 = t.P0
    assert len(P0) == 3 * 8 + 1
    # shortest path inside P0 follows the U-shape
    box = P0.bounding_box()
    d = graph_distance(P0.mask(box), box.index((0, 0, 0)), box.index((8, 0, 0)))
    assert d == 3 * 8


def test_tube_nesting():
    t = build_tube(16, 2, 0.2)
    assert t.radii == (1, 3, 5)
    U, V, W = t.U, t.V, t.W
    assert all(x in V for x in U) and all(x in W for x in V)
    assert len(U) < len(V) < len(W)
    with pytest.raises(GeometryError):
        build_tube(8, 2, 0.4)          # floor(8^1.2) = 12 >= 4


def tube_field(tube, h, on):
    box = tube.window
    v = np.full(box.shape, h - 1.0)
    v[on.mask(box)] = h
    return FieldSample(box, v)


def test_lower_bound_constant_field():
    t = build_tube(8, 2, 0.2)
    f = FieldSample(t.window, np.zeros(t.window.shape))
    rep = lower_bound_events(f, t, 0.0, 0.5)
    assert rep["D"].outcome and not rep["F"].outcome
    assert rep["E"].outcome


def test_lower_bound_forced_detour():
    t = build_tube(8, 2, 0.2)
    rep = lower_bound_events(tube_field(t, 0.0, t.P0), t, 0.0, 0.5)
    assert rep["G"].outcome and rep["D"].outcome and rep["F"].outcome
    assert rep["long_path"].outcome
    assert rep["DF_distance"] >= rep["DF_bound"] == 5 * 8 - 2
    assert rep["violations"] == []


def test_lower_bound_corner_cutting_counterexample():
    # the whole of V at height h: D and F hold, but the path cuts the tube's corners
    t = build_tube(8, 2, 0.2)
    rep = lower_bound_events(tube_field(t, 0.0, t.V), t, 0.0, 0.5)
    assert rep["D"].outcome and rep["F"].outcome
    assert rep["DF_distance"] == 32 < rep["DF_bound"]
    assert rep["violations"][0]["implication"] == "D&F"


def test_lower_bound_window_and_reading_errors():
    t = build_tube(8, 2, 0.2)
    small = FieldSample(t.P0.bounding_box(), np.zeros(t.P0.bounding_box().shape))
    with pytest.raises(GeometryError):
        lower_bound_events(small, t, 0.0, 0.5)
    f = FieldSample(t.window, np.zeros(t.window.shape))
    with pytest.raises(ValueError):
        lower_bound_events(f, t, 0.0, 0.5, F_reading="other")
    # literal reading: F is just "below h on all of dV"
    assert not lower_bound_events(f, t, 0.0, 0.5, F_reading="literal")["F"].outcome


def test_capacity_growth_single_site_and_errors():
    rows = capacity_growth_study("box", [1], d=3)
    assert rows[0]["sites"] == 27
    single = equilibrium_and_capacity(SiteSet.from_sites([(0, 0, 0)], 3)).capacity
    assert single == pytest.approx(1 / G00, rel=1e-5) and single == pytest.approx(0.6595, abs=1e-4)
    with pytest.raises(ValueError):
        capacity_growth_study("sphere", [4])


def test_relative_capacity_on_tube_pieces():
    t = build_tube(6, 1, 0.1)
    pieces = [p.to_siteset() for p in t.pieces(0)]
    inner = t.P(1)
    outer = t.P(2)
    caps = [equilibrium_and_capacity(p, inner).capacity for p in pieces]
    whole = equilibrium_and_capacity(t.P0, inner).capacity
    assert whole <= sum(caps) + 1e-12
    assert equilibrium_and_capacity(t.P0, outer).capacity <= whole + 1e-12


def test_h_star_bracket_vs_independent_bisection():
    from gffchem.lattice import BoxRegion
    from gffchem.sampler import sample_gff
    from oracles import crossing_threshold

    br = estimate_h_star(3, [8, 16], 200, seed=1)
    t = {N: np.array([crossing_threshold(sample_gff(BoxRegion.ball(N, 3), 777 + N, i, 1.5).values)
                      for i in range(200)]) for N in (8, 16)}
    gap = lambda h: np.mean(t[16] >= h) - np.mean(t[8] >= h)
    lo, hi = -0.5, 2.0
    assert gap(lo) >= 0 >= gap(hi)
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if gap(mid) > 0 else (lo, mid)
    step = br.grid[1] - br.grid[0]
    assert br.h_lo - 2 * step <= lo <= br.h_hi + 2 * step, (lo, br.h_lo, br.h_hi)
