from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from hedgeprice.errors import DimensionDeficient, NotContaining, OriginNotInterior, SingularSystem, TooFewPoints
from hedgeprice.market_geometry import (
    Simplex,
    build_move_set,
    enumerate_simplexes,
    hull_vertices,
    move_set_preset,
    risk_neutral_vertex,
)


def test_presets_validate(chi1, chi2, three_asset):
    assert len(chi1) == 4 and chi1.dim == 2 and chi1.is_lattice_binomial
    assert len(chi2) == 4 and not chi2.is_product
    assert len(three_asset) == 8 and three_asset.is_lattice_binomial
    with pytest.raises(ValueError):
        move_set_preset("chi9")


@pytest.mark.parametrize(
    "points, error",
    [
        ([[1, 0], [0, 1]], TooFewPoints),
        ([[1, 0], [2, 0], [-1, 0]], DimensionDeficient),
        ([[1, 0], [0, 1], [1, 1]], OriginNotInterior),
        ([[1, 0], [-1, 0], [0, 1]], OriginNotInterior),
    ],
)
def test_invalid_move_sets(points, error):
    with pytest.raises(error):
        build_move_set(points)


def test_exact_parsing_and_scale():
    m = build_move_set([["1/2", "-1/3"], [-1, 1], [0, 1], ["-1/2", "-1"]])
    assert m.points[0] == (Fraction(1, 2), Fraction(-1, 3))
    assert m.scale == 6
    assert m.integer_points[0].tolist() == [3, -2]


def test_zero_move_is_flagged():
    m = build_move_set([[-1], [0], [2]])
    assert m.contains_origin
    family = enumerate_simplexes(m)
    assert len(family) == 3


def test_chi1_family_and_measures(chi1):
    family = enumerate_simplexes(chi1)
    assert len(family) == 4
    groups = family.distinct_measures()
    assert len(groups) == 2
    for v in family:
        assert np.isclose(v.p.sum(), 1.0)
        assert np.allclose(v.p @ chi1.array[list(v.simplex.vertex_indices)], 0.0)


def test_binomial_measure_and_covariance():
    m = build_move_set([[-1], [2]])
    v = risk_neutral_vertex(m, Simplex((0, 1)))
    assert v.p_exact == (Fraction(2, 3), Fraction(1, 3))
    assert v.sigma[0, 0] == pytest.approx(2.0)


def test_vertex_errors():
    m = build_move_set([[1, 0], [0, 1], [-1, 0], [0, -1], [2, 0]])
    with pytest.raises(SingularSystem):
        risk_neutral_vertex(m, Simplex((0, 2, 4)))
    with pytest.raises(NotContaining):
        risk_neutral_vertex(m, Simplex((0, 1, 4)))


def test_hull_vertices_drops_interior_points(chi1):
    grid = build_move_set([list(p) for p in product((-1, 0, 1), repeat=2)])
    hull = hull_vertices(grid)
    assert set(hull.points) == set(chi1.points)


def test_hull_vertices_one_dimensional():
    hull = hull_vertices(build_move_set([[-1], [0], [2]]))
    assert sorted(hull.points) == [(Fraction(-1),), (Fraction(2),)]


def test_canonical_sorts_points():
    m = build_move_set([[1, 1], [-1, -1], [1, -1], [-1, 1]])
    assert list(m.canonical().points) == sorted(m.points)


def test_hull_vertices_is_idempotent(three_asset):
    cloud = build_move_set([[1, 0], [0, 1], [-1, -1], [0, 0], ["1/3", "1/3"], [-1, 0], [2, 2]])
    for m in (cloud, three_asset):
        hull = hull_vertices(m)
        assert hull_vertices(hull).points == hull.points
    assert set(hull_vertices(cloud).points) == {(1, 0), (0, 1), (-1, -1), (-1, 0), (2, 2)}


def _measures(family):
    points = family.move_set.points
    return sorted(
        tuple(sorted((points[i], w) for i, w in zip(v.simplex.vertex_indices, v.p_exact)))
        for v in family
    )


def test_family_ignores_move_order(rng, chi2, three_asset):
    for m in (chi2, three_asset):
        base = _measures(enumerate_simplexes(m))
        for _ in range(3):
            order = rng.permutation(len(m))
            shuffled = build_move_set([m.points[k] for k in order])
            assert _measures(enumerate_simplexes(shuffled)) == base
            assert shuffled.canonical().points == m.canonical().points
            family = enumerate_simplexes(shuffled.canonical())
            assert [v.simplex.vertex_indices for v in family] == sorted(v.simplex.vertex_indices for v in family)
