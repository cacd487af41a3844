import numpy as np
import pytest

from gffchem.lattice import (BoxRegion, GeometryError, RenormIndex, SiteSet, boundary, cell_of, coarse_cover, l1,
                             l2, linf, renorm_boxes)

from oracles import neighbours


def brute_boundary(sites):
    S = set(sites)
    return {y for x in S for y in neighbours(x) if y not in S}


def test_norm_ordering():
    rs = np.random.default_rng(1)
    for x in rs.integers(-9, 10, size=(200, 3)):
        assert linf(x) <= l2(x) + 1e-12 <= l1(x) + 1e-12


def test_box_counting_and_rejection():
    b = BoxRegion((-1, 0, 2), (1, 3, 2))
    assert b.size == 3 * 4 * 1 == len(list(b))
    with pytest.raises(GeometryError):
        BoxRegion((0, 0, 0), (1, -1, 0))


@pytest.mark.parametrize("sites,count", [
    ([(0, 0, 0)], 6),
    ([(0, 0, 0), (1, 0, 0)], 10),
])
def test_boundary_small(sites, count):
    dU = boundary(SiteSet.from_sites(sites, 3))
    assert len(dU) == count
    assert set(dU) == brute_boundary(sites)


def test_boundary_ball():
    # l1-adjacency reaches only the 6 face layers of the 5^3 shell: 6 * 9 sites
    dB = boundary(BoxRegion.ball(1, 3).to_siteset())
    assert len(dB) == 54
    assert set(dB) == brute_boundary(list(BoxRegion.ball(1, 3)))


def test_boundary_random_sets():
    rs = np.random.default_rng(2)
    for _ in range(30):
        pts = {tuple(p) for p in rs.integers(-3, 4, size=(rs.integers(1, 40), 3))}
        dU = boundary(SiteSet.from_sites(pts, 3))
        assert set(dU) == brute_boundary(pts)
        assert not (set(dU) & pts)


def test_renorm_boxes_values():
    C, D, U = renorm_boxes(RenormIndex((0, 0, 0), 10, 4))
    assert C == BoxRegion((0,) * 3, (9,) * 3)
    assert D == BoxRegion((-30,) * 3, (39,) * 3)
    assert U == BoxRegion((-39,) * 3, (48,) * 3)
    C1, _, _ = renorm_boxes(RenormIndex((0, 0, 0), 1, 4))
    assert C1.size == 1
    Ct, _, _ = renorm_boxes(RenormIndex((10, 0, 0), 10))
    assert Ct == BoxRegion((10, 0, 0), (19, 9, 9))


def test_renorm_rejects_small_K_and_off_lattice():
    with pytest.raises(GeometryError):
        renorm_boxes(RenormIndex((0, 0, 0), 4, 3))
    with pytest.raises(GeometryError):
        RenormIndex((1, 0, 0), 4)


@pytest.mark.parametrize("L", [1, 2, 3])
def test_nesting_exhaustive(L):
    z = RenormIndex((L, 0, -L), L, 4)
    C, D, U = renorm_boxes(z)
    assert all(x in D for x in C) and all(x in U for x in D)
    # neighbours' cells lie in D_z
    for x in z.neighbors():
        assert D.contains_box(renorm_boxes(x)[0])


@pytest.mark.parametrize("R,L,count", [(9, 10, 8), (0, 7, 1), (19, 10, 64)])
def test_coarse_cover_counts(R, L, count):
    assert len(coarse_cover(BoxRegion.ball(R, 3), L)) == count


def test_coarse_cover_tiles():
    B = BoxRegion((-5, -2, 0), (6, 3, 4))
    zs = coarse_cover(B, 3)
    owner = {}
    for z in zs:
        C = renorm_boxes(z)[0]
        for x in C:
            assert x not in owner
            owner[x] = z.z
    assert all(x in owner for x in B)
    assert all(cell_of(x, 3) == owner[x] for x in B)


def test_siteset_ops():
    a = SiteSet.from_sites([(0, 0, 0), (1, 0, 0)], 3)
    b = SiteSet.from_sites([(1, 0, 0), (2, 0, 0)], 3)
    assert len(a.union(b)) == 3
    assert list(a.difference(b)) == [(0, 0, 0)]
    assert a.translate((1, 0, 0)) == b
    assert a.linf_diameter() == 1
    assert (1, 0, 0) in a and (5, 5, 5) not in a
    box = a.bounding_box()
    assert SiteSet.from_mask(box, a.mask(box)) == a
