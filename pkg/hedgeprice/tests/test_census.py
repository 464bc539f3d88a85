from fractions import Fraction
from itertools import permutations, product

import numpy as np
import pytest

from hedgeprice.census import (
    REGION_BOTH,
    REGION_BOUNDARY,
    REGION_COUNTS,
    REGION_NEITHER,
    REGION_T1,
    REGION_T2,
    TYPE_3,
    TYPE_4,
    TYPE_CORNER,
    TYPE_REGULAR,
    classify_point_3d,
    containing_simplexes,
    count_containing,
    cutting_planes_3d,
    enumerate_cube_simplexes,
    lower_bound_family,
    lower_bound_family_general,
    normalize_to_half_cube,
)
from hedgeprice.errors import BadParams, NotInHalfCube
from hedgeprice.market_geometry import build_move_set, enumerate_simplexes
from hedgeprice.utils.rational import affine_rank, barycentric


def test_three_cube_census():
    census = enumerate_cube_simplexes(3)
    assert len(census) == 58
    assert census.counts_by_type() == {TYPE_CORNER: 8, TYPE_REGULAR: 2, TYPE_3: 24, TYPE_4: 24}
    dump = census.to_json()
    assert dump["count"] == 58 and len(dump["simplexes"]) == 58
    assert dump["simplexes"][0]["vertices"] == [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]


def test_small_censuses():
    assert len(enumerate_cube_simplexes(1)) == 1
    assert len(enumerate_cube_simplexes(2)) == 4
    assert enumerate_cube_simplexes(2).counts_by_type() == {}
    with pytest.raises(BadParams):
        enumerate_cube_simplexes(0)
    with pytest.raises(BadParams):
        enumerate_cube_simplexes(6)


def test_threaded_census_matches():
    serial = enumerate_cube_simplexes(3)
    x = ("3/10", "2/5", "9/20")
    assert containing_simplexes(x, serial, threads=4).tolist() == containing_simplexes(x, serial).tolist()


def test_cutting_planes():
    planes = cutting_planes_3d()
    assert len(planes) == 14
    assert ((1, 1, 1), 1) in planes
    assert ((1, -1, 0), 0) in planes


@pytest.mark.parametrize(
    "x, region",
    [
        ((0.3, 0.4, 0.45), REGION_BOTH),
        ((0.3, 0.2, 0.25), REGION_T1),
        ((0.05, 0.1, 0.2), REGION_NEITHER),
        ((0.7, 0.8, 0.6), REGION_T2),
    ],
)
def test_region_counts(x, region):
    assert classify_point_3d(x) == region
    assert count_containing(x) == REGION_COUNTS[region]


def test_cube_center():
    assert classify_point_3d((0.5, 0.5, 0.5)) == REGION_BOUNDARY
    assert count_containing(("1/2", "1/2", "1/2")) == 50
    assert count_containing((0.25, 0.25, 0.25)) >= 11


def test_sampled_points_match_regions(rng):
    seen = set()
    for _ in range(300):
        x = tuple(Fraction(int(k), 997) for k in rng.integers(1, 997, size=3))
        region = classify_point_3d(x)
        if region == REGION_BOUNDARY:
            continue
        seen.add(region)
        assert count_containing(x) == REGION_COUNTS[region]
    assert seen == set(REGION_COUNTS)


def test_point_queries_validate():
    with pytest.raises(BadParams):
        count_containing((1.5, 0.0, 0.0))
    with pytest.raises(BadParams):
        count_containing((0.1, 0.2), d=3)
    with pytest.raises(BadParams):
        classify_point_3d((0.1, 0.2))


def test_lower_bound_base_chain_in_the_plane():
    fam = lower_bound_family(("1/10", "3/10"))
    assert fam.i_star == 1 and fam.c == Fraction(1, 10)
    assert fam.base_chain == ((1, 1), (0, 1), (0, 0))
    assert fam.simplexes == (fam.base_chain,)


@pytest.mark.parametrize(
    "x, i_star",
    [
        (("1/10", "1/4", "2/5"), 1),
        (("1/5", "1/4", "9/20"), 2),
        (("1/10", "1/5", "1/4", "2/5"), 3),
        (("1/10", "1/5", "3/10", "7/20", "2/5"), 4),
    ],
)
def test_lower_bound_family_size(x, i_star):
    fam = lower_bound_family(x)
    d = len(x)
    assert fam.i_star == i_star
    assert len(fam.simplexes) == 2 ** (d - 2)
    assert fam.simplexes[0] == fam.base_chain
    assert len(set(fam.simplexes)) == len(fam.simplexes)
    point = tuple(Fraction(v) for v in x)
    for s in fam.simplexes:
        assert affine_rank(s) == d
        w = barycentric([tuple(Fraction(c) for c in v) for v in s], point)
        assert all(t >= 0 for t in w)


def test_lower_bound_needs_the_half_cube():
    with pytest.raises(NotInHalfCube):
        lower_bound_family(("3/10", "1/5"))
    with pytest.raises(NotInHalfCube):
        lower_bound_family(("1/10", "1/2"))
    with pytest.raises(BadParams):
        lower_bound_family(("1/10",))


def test_normalize_to_half_cube():
    y, t = normalize_to_half_cube(("9/10", "1/5", "3/5"))
    assert y == (Fraction(1, 10), Fraction(1, 5), Fraction(2, 5))
    assert t.reflected == (True, False, True)
    assert t.pull_back((1, 0, 0)) == (0, 0, 1)
    with pytest.raises(NotInHalfCube):
        normalize_to_half_cube(("1/2", "1/5"))


def test_general_family_stays_inside_the_census():
    x = ("9/10", "1/5", "3/5")
    family = lower_bound_family_general(x)
    assert len(family) == 2
    census = enumerate_cube_simplexes(3)
    hits = {census.vertices(k) for k in containing_simplexes(x, census)}
    for s in family:
        assert tuple(sorted(s, key=lambda v: sum(b << k for k, b in enumerate(v)))) in hits
    assert count_containing(("1/10", "1/5", "1/4", "2/5")) >= 4


def _generic_half_cube_point(rng, d):
    while True:
        x = sorted(Fraction(int(k), 1000) for k in rng.choice(np.arange(1, 500), size=d, replace=False))
        gaps = [x[0]] + [b - a for a, b in zip(x, x[1:])]
        if len(set(gaps)) == d:
            return tuple(x)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_lower_bound_family_on_random_points(rng, d):
    for _ in range(100):
        x = _generic_half_cube_point(rng, d)
        fam = lower_bound_family(x)
        assert len(fam.simplexes) == 2 ** (d - 2)
        assert len(set(fam.simplexes)) == len(fam.simplexes)
        for s in fam.simplexes:
            assert affine_rank(s) == d
            w = barycentric([tuple(Fraction(c) for c in v) for v in s], x)
            assert w is not None and all(t >= 0 for t in w)
            assert tuple(sum(t * v[k] for t, v in zip(w, s)) for k in range(d)) == x


def test_containment_counts_are_symmetric(rng):
    census = enumerate_cube_simplexes(3)
    for _ in range(20):
        x = tuple(Fraction(int(k), 997) for k in rng.integers(1, 997, size=3))
        count = len(containing_simplexes(x, census))
        for perm in permutations(range(3)):
            assert len(containing_simplexes(tuple(x[k] for k in perm), census)) == count
        assert len(containing_simplexes(tuple(1 - c for c in x), census)) == count


@pytest.mark.parametrize("x", [("3/10", "2/5", "9/20"), ("3/10", "1/5", "1/4"), ("1/20", "1/10", "1/5"), ("7/10", "4/5", "3/5")])
def test_shifted_cube_family_matches_census_count(x):
    point = tuple(Fraction(c) for c in x)
    moves = build_move_set([[Fraction(b) - c for b, c in zip(v, point)] for v in product((0, 1), repeat=3)])
    assert len(enumerate_simplexes(moves)) == count_containing(x)
