import itertools

import numpy as np
import pytest

from gffchem.lattice import BoxRegion, GeometryError, RenormIndex, renorm_boxes
from gffchem.sampler import FieldSample
from gffchem.topology import (arm_event, box_crossing, chemical_distance, diameter_threshold, large_cluster_pairs,
                              level_clusters, local_uniqueness_events, stretch)

from oracles import flood_fill, graph_distance, same_partition


def field_on(box, values):
    return FieldSample(box, np.asarray(values, dtype=float).reshape(box.shape))


def random_field(rs, shape, origin=None):
    return FieldSample(BoxRegion.from_shape(shape, origin), rs.standard_normal(shape))


def test_constant_and_empty_level_sets():
    B = BoxRegion.from_shape((4, 5, 3))
    lab = level_clusters(field_on(B, np.zeros(B.size)), 0.0)
    assert lab.count == 1 and lab.sizes[0] == B.size and lab.diameters[0] == 4
    assert level_clusters(field_on(B, -np.ones(B.size)), 0.0).count == 0


def test_checkerboard_singletons():
    B = BoxRegion.from_shape((5, 5, 5))
    parity = np.indices(B.shape).sum(axis=0) % 2
    lab = level_clusters(field_on(B, np.where(parity == 0, 1.0, -1.0)), 0.5)
    assert lab.count == int((parity == 0).sum())
    assert np.all(lab.sizes == 1) and np.all(lab.diameters == 0)


def test_labeling_matches_flood_fill():
    rs = np.random.default_rng(10)
    for _ in range(100):
        f = random_field(rs, (6, 6, 6))
        h = rs.uniform(-0.5, 0.5)
        lab = level_clusters(f, h)
        ref, n = flood_fill(f.values >= h)
        assert lab.count == n and same_partition(lab.labels, ref)
        for c in range(1, n + 1):
            pts = np.argwhere(lab.labels == c)
            assert lab.diameters[c - 1] == (pts.max(axis=0) - pts.min(axis=0)).max()


def test_level_monotone_clusters():
    rs = np.random.default_rng(11)
    f = random_field(rs, (8, 8, 8))
    lo, hi = level_clusters(f, -0.2), level_clusters(f, 0.3)
    for c in range(1, hi.count + 1):
        assert len(np.unique(lo.labels[hi.labels == c])) == 1


def test_chemical_distance_trivial_cases():
    B = BoxRegion.ball(3, 3)
    f = field_on(B, np.zeros(B.size))
    assert chemical_distance(f, 0.0, (1, 2, 3), (1, 2, 3)) == 0
    assert chemical_distance(f, 0.0, (-3, -3, -3), (3, 1, 0)) == 6 + 4 + 3
    assert chemical_distance(f, 0.5, (0, 0, 0), (1, 0, 0)) == np.inf
    with pytest.raises(GeometryError):
        chemical_distance(f, 0.0, (0, 0, 0), (9, 0, 0))


def test_chemical_distance_vs_graph_oracle():
    rs = np.random.default_rng(12)
    for _ in range(100):
        f = random_field(rs, (8, 8, 8))
        x = tuple(int(v) for v in rs.integers(0, 8, 3))
        y = tuple(int(v) for v in rs.integers(0, 8, 3))
        rho = chemical_distance(f, -0.3, x, y)
        assert rho == graph_distance(f.values >= -0.3, x, y)
        if np.isfinite(rho):
            assert rho >= sum(abs(a - b) for a, b in zip(x, y))


def test_window_and_level_monotonicity():
    rs = np.random.default_rng(13)
    for _ in range(50):
        f = random_field(rs, (8, 8, 8))
        x, y = (2, 2, 2), (5, 4, 5)
        inner = BoxRegion((1, 1, 1), (6, 6, 6))
        assert chemical_distance(f, -0.4, x, y) <= chemical_distance(f, -0.4, x, y, inner)
        assert chemical_distance(f, -0.6, x, y) <= chemical_distance(f, -0.4, x, y)


def test_large_cluster_pairs_cases():
    B = BoxRegion.from_shape((9, 9, 9))
    assert large_cluster_pairs(level_clusters(field_on(B, -np.ones(B.size)), 0.0), 2, B) == []
    full = level_clusters(field_on(B, np.ones(B.size)), 0.0)
    pairs = large_cluster_pairs(full, 4, B, mode="all")
    assert len(pairs) == B.size * (B.size - 1) // 2
    # two slabs separated by a plane below the level
    v = np.ones(B.shape)
    v[4] = -1
    lab = level_clusters(field_on(B, v), 0.0)
    pairs = large_cluster_pairs(lab, 3, B)
    cross = [(a, b) for a, b in pairs if (a[0] < 4) != (b[0] < 4)]
    assert cross
    f = field_on(B, v)
    assert all(chemical_distance(f, 0.0, a, b) == np.inf for a, b in cross[:5])


def test_stretch_all_mode_matches_brute_force():
    rs = np.random.default_rng(14)
    for _ in range(10):
        f = random_field(rs, (6, 6, 6), origin=(-3, -3, -3))
        rep = stretch(f, -0.2, 2, BoxRegion.ball(2, 3), mode="all")
        lab = level_clusters(f, -0.2)
        sites = [s for s in BoxRegion.ball(2, 3) if lab.label_of(s) and lab.diameters[lab.label_of(s) - 1] > 2]
        best = 0
        for a, b in itertools.combinations(sites, 2):
            if lab.label_of(a) == lab.label_of(b):
                best = max(best, graph_distance(f.values >= -0.2, f.box.index(a), f.box.index(b)))
        assert rep.max_distance == best


def _big_field(L, value):
    z = RenormIndex((0, 0, 0), L)
    _, D, _ = renorm_boxes(z)
    return z, D, FieldSample(D, np.full(D.shape, float(value)))


def test_locuniq_constant_field():
    z, D, f = _big_field(4, 1.0)
    ev = local_uniqueness_events(f, z, 0.5, 1.0)
    assert ev["Exist"].outcome and ev["Unique"].outcome and ev["LocUniq"].outcome


def test_locuniq_vacuous_uniqueness():
    z, D, f = _big_field(4, -5.0)
    C = renorm_boxes(z)[0]
    f.values[C.slices(D)] = 1.0
    ev = local_uniqueness_events(f, z, 0.5, 1.0)
    assert ev["Exist"].outcome and ev["Unique"].outcome


def test_locuniq_domain_error():
    z = RenormIndex((0, 0, 0), 4)
    f = FieldSample(BoxRegion.ball(5, 3), np.ones((11,) * 3))
    with pytest.raises(GeometryError):
        local_uniqueness_events(f, z, 0.0, 1.0)
    with pytest.raises(ValueError):
        local_uniqueness_events(f, z, 1.0, 0.0)


def locuniq_oracle(f, z, h1, h2):
    """Enumerate every qualifying component pair and test connectivity inside D_z by flood fill."""
    C, D, _ = renorm_boxes(z)
    t = diameter_threshold(z.L)

    def comps(box):
        sub = f.array_on(box) >= h2
        labels, n = flood_fill(sub)
        out = []
        for c in range(1, n + 1):
            pts = np.argwhere(labels == c)
            if (pts.max(axis=0) - pts.min(axis=0)).max() >= t:
                out.append(tuple(int(a + b) for a, b in zip(pts[0], box.lower)))
        return out

    joined, _ = flood_fill(f.array_on(D) >= h1)

    def connected(a, b):
        la = joined[tuple(i - l for i, l in zip(a, D.lower))]
        return la != 0 and la == joined[tuple(i - l for i, l in zip(b, D.lower))]

    own = comps(C)
    exist = bool(own)
    unique = True
    for x in z.neighbors():
        pool = own + comps(renorm_boxes(x)[0])
        if any(not connected(a, b) for a, b in itertools.combinations(pool, 2)):
            unique = False
    return exist, unique


def test_locuniq_vs_pair_oracle_L10():
    rs = np.random.default_rng(15)
    z = RenormIndex((0, 0, 0), 10)
    _, D, _ = renorm_boxes(z)
    for h1, h2 in [(-0.2, 0.6), (0.4, 1.2), (0.9, 1.4)]:
        f = FieldSample(D, rs.standard_normal(D.shape))
        ev = local_uniqueness_events(f, z, h1, h2)
        ex, un = locuniq_oracle(f, z, h1, h2)
        assert (ev["Exist"].outcome, ev["Unique"].outcome) == (ex, un)


def test_locuniq_monotone_in_h1():
    rs = np.random.default_rng(16)
    z = RenormIndex((0, 0, 0), 3)
    _, D, _ = renorm_boxes(z)
    levels = np.linspace(-1.0, 1.5, 11)
    for _ in range(10):
        f = FieldSample(D, rs.standard_normal(D.shape))
        for h2 in levels[3:]:
            out = [local_uniqueness_events(f, z, h1, h2)["LocUniq"].outcome for h1 in levels if h1 <= h2]
            # once false, stays false as h1 rises
            assert all(a or not b for a, b in zip(out, out[1:]))


def test_locuniq_not_monotone_in_h2():
    # two separated dimers in C_z at heights 2 and 1: at h2 = 1 both are large and unjoined,
    # at h2 = 1.5 only one remains, so raising h2 turns LocUniq from false to true
    z, D, f = _big_field(4, -5.0)
    f.values[D.index((0, 0, 0))] = f.values[D.index((1, 0, 0))] = 2.0
    f.values[D.index((0, 3, 0))] = f.values[D.index((1, 3, 0))] = 1.0
    assert not local_uniqueness_events(f, z, 0.5, 1.0)["LocUniq"].outcome
    assert local_uniqueness_events(f, z, 0.5, 1.5)["LocUniq"].outcome


def test_arm_event_cases_and_oracle():
    B = BoxRegion.ball(5, 3)
    assert arm_event(field_on(B, np.zeros(B.size)), 0.0, (0, 0, 0), 4, witness=True).outcome
    v = np.zeros(B.shape)
    v[B.index((0, 0, 0))] = -1
    assert not arm_event(field_on(B, v), 0.0, (0, 0, 0), 4).outcome
    with pytest.raises(GeometryError):
        arm_event(field_on(B, np.zeros(B.size)), 0.0, (0, 0, 0), 5)
    rs = np.random.default_rng(17)
    for _ in range(100):
        f = FieldSample(BoxRegion.ball(4, 3), rs.standard_normal((9, 9, 9)))
        rep = arm_event(f, -0.3, (0, 0, 0), 3, witness=True)
        labels, _ = flood_fill(f.values >= -0.3)
        c = labels[(4, 4, 4)]
        shell = np.ones((9, 9, 9), bool)
        shell[1:-1, 1:-1, 1:-1] = False
        assert rep.outcome == bool(c and (labels[shell] == c).any())
        if rep.outcome:
            path = rep.witness["path"]
            assert path[0] == (0, 0, 0) and max(abs(a) for a in path[-1]) == 4
            assert all(f[p] >= -0.3 for p in path)
            assert all(sum(abs(a - b) for a, b in zip(p, q)) == 1 for p, q in zip(path, path[1:]))


def test_box_crossing_extremes():
    rs = np.random.default_rng(18)
    f = FieldSample(BoxRegion.ball(8, 3), rs.standard_normal((17,) * 3))
    assert box_crossing(f, -10.0, BoxRegion.ball(8, 3))
    assert not box_crossing(f, 10.0, BoxRegion.ball(8, 3))
