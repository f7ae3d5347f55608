import itertools

import numpy as np
import pytest

from src.errors import BudgetExceededError, PreconditionError, UnknownVertexError
from src.laakso import Point, build, endpoint_involution, lift, refine
import src.metric as metric
from src.metric import (
    ScaledDistance,
    ScaledValue,
    all_pairs,
    clear_row_cache,
    diameter,
    diameter_pair,
    dist,
    distance_row,
    gh_upper_bound,
    hausdorff_gap,
    limit_gap,
    point_dist,
    refinement_isometry_check,
    unit,
)


def test_scaled_values():
    assert ScaledDistance(4, 1) == ScaledDistance(1, 0)
    assert ScaledDistance(16, 2).rescale(3) == ScaledDistance(64, 3)
    assert ScaledDistance(64, 3).rescale(3).value == 64
    assert ScaledDistance(3, 2) < ScaledDistance(1, 1)
    assert ScaledDistance(1, 1) + ScaledDistance(1, 2) == ScaledDistance(5, 2)
    assert ScaledDistance(1, 2) - ScaledDistance(1, 1) == ScaledValue(-3, 2)
    assert abs(ScaledValue(-3, 2)) == ScaledDistance(3, 2)
    assert 2 * unit(2) == ScaledDistance(2, 2)
    assert hash(ScaledDistance(4, 1)) == hash(ScaledDistance(1, 0))
    assert ScaledDistance(6, 2).to_dict() == {"value": 6, "unit_exponent": 2, "decimal": 0.375}
    assert ScaledValue.from_dict({"value": -2, "unit_exponent": 1, "decimal": 9.9}) == ScaledValue(-2, 1)
    with pytest.raises(PreconditionError):
        ScaledDistance(-1, 0)
    with pytest.raises(PreconditionError):
        ScaledDistance(4, 2).rescale(1)


def test_dist_on_x1():
    g = build(1)
    assert dist(g, "a", "d") == ScaledDistance(4, 1) == unit(0)
    assert dist(g, "m_upper", "m_lower") == ScaledDistance(2, 1)
    assert dist(g, "b", "b").value == 0
    with pytest.raises(UnknownVertexError):
        dist(g, "a", "0.b")


def test_point_dist():
    assert point_dist(Point(0, "a"), Point(0, "d")) == unit(0)
    p = Point(1, "m_upper")
    assert point_dist(p, p).value == 0

    matrix = all_pairs(build(2))
    for v in build(2).edge_cycles[0].corners:
        assert point_dist(p, Point(2, v)) == matrix["m_upper", v]


def test_point_dist_independent_of_level():
    for level in range(4):
        g = build(level)
        fine = build(level + 1)
        for u, v in itertools.combinations(g.vertices, 2):
            assert dist(g, u, v) == dist(fine, u, v)


def test_all_pairs_small():
    x0 = all_pairs(build(0))
    assert x0.values.tolist() == [[0, 1], [1, 0]]
    x1 = all_pairs(build(1))
    assert x1.row("a").tolist() == [0, 1, 2, 2, 3, 4]
    assert x1["m_upper", "m_lower"] == ScaledDistance(2, 1)


@pytest.mark.parametrize("level", [1, 2])
def test_metric_axioms_exhaustive(level):
    d = all_pairs(build(level)).values.astype(np.int64)
    assert (d == d.T).all()
    assert (np.diag(d) == 0).all()
    assert ((d > 0) | np.eye(len(d), dtype=bool)).all()
    # d[x, z] <= d[x, y] + d[y, z] for every triple
    assert (d[:, None, :] <= d[:, :, None] + d[None, :, :]).all()


def test_metric_axioms_sampled(rng):
    g = build(3)
    d = all_pairs(g).values.astype(np.int64)
    assert (d == d.T).all()
    x, y, z = rng.integers(len(g), size=(3, 100_000))
    assert (d[x, z] <= d[x, y] + d[y, z]).all()


def test_all_pairs_matches_rows_and_budget():
    g = build(2)
    matrix = all_pairs(g)
    for v in g.vertices[::5]:
        assert (matrix.row(v) == distance_row(g, v)).all()
    with pytest.raises(BudgetExceededError):
        all_pairs(build(3), budget=1000)


def test_distance_matrix_csv():
    text = all_pairs(build(1)).to_csv()
    lines = text.splitlines()
    assert lines[0] == "unit_exponent=1"
    assert lines[1] == ",a,b,m_upper,m_lower,c,d"
    assert lines[2] == "a,0,1,2,2,3,4"


@pytest.mark.parametrize("level", range(5))
def test_diameter(level):
    g = build(level)
    assert diameter(g) == unit(0)
    matrix = all_pairs(g)
    assert matrix["a", "d"] == unit(0)
    assert int(matrix.values.max()) == 4**level


def test_diameter_units():
    assert diameter(build(2)) == ScaledDistance(16, 2)
    assert diameter(build(3)).rescale(3).value == 64


@pytest.mark.parametrize("level", range(4))
def test_diameter_pair(level):
    value, pair = diameter_pair(build(level))
    assert value == unit(0)
    assert set(pair) == {"a", "d"}


@pytest.fixture
def small_row_cache(monkeypatch):
    # room for 20 rows of X_2
    monkeypatch.setattr(metric, "ROW_CACHE_BYTES", 4 * 30 * 20)
    monkeypatch.setattr(metric, "ROW_CACHE_MIN_ROWS", 1)
    clear_row_cache()
    yield
    clear_row_cache()


def test_row_cache_is_bounded_per_level(small_row_cache):
    g = build(2)
    rows = [distance_row(g, v) for v in g.vertices]
    info = metric._row_cache(2).cache_info()
    assert info.maxsize == 20
    assert info.currsize == 20
    assert all(r.dtype == np.int32 for r in rows)
    assert distance_row(g, "a").tolist() == all_pairs(g).row("a").tolist()

    distance_row(build(1), "a")
    assert metric._row_cache(1).cache_info().maxsize == 4 * 30 * 20 // (4 * 6)
    clear_row_cache()
    assert metric._row_cache.cache_info().currsize == 0


@pytest.mark.parametrize("i, j", [(i, j) for i in range(4) for j in range(i + 1, 5)])
def test_refinement_isometry(i, j):
    assert refinement_isometry_check(i, j) == []


def test_refinement_isometry_for_x1_pairs():
    coarse, fine = build(1), build(2)
    rmap = refine(1, 2)
    pairs = list(itertools.combinations(coarse.vertices, 2))
    assert len(pairs) == 15
    for u, v in pairs:
        assert dist(coarse, u, v) == dist(fine, rmap(u), rmap(v))


@pytest.mark.parametrize("level", range(4))
def test_involution_is_an_isometry(level):
    g = build(level)
    matrix = all_pairs(g)
    sigma = endpoint_involution(g)
    order = [g.vertex_index(sigma[v]) for v in g.vertices]
    assert (matrix.values[np.ix_(order, order)] == matrix.values).all()


@pytest.mark.parametrize("i", range(4))
def test_hausdorff_gap_one_step(i):
    cert = hausdorff_gap(i, i + 1)
    assert cert.max_gap <= cert.bound == ScaledDistance(1, i + 1)
    assert cert.max_gap.value > 0
    assert cert.witness not in refine(i, i + 1).image


def test_hausdorff_gap_examples():
    cert = hausdorff_gap(1, 2)
    assert cert.max_gap == ScaledDistance(1, 2)
    assert cert.to_dict()["bound"] == {"value": 1, "unit_exponent": 2, "decimal": 0.0625}
    assert hausdorff_gap(1, 3).max_gap == ScaledDistance(4, 3)
    with pytest.raises(PreconditionError):
        hausdorff_gap(2, 2)
    with pytest.raises(PreconditionError):
        hausdorff_gap(3, 1)


def test_every_vertex_is_near_the_image():
    for i in range(4):
        g = build(i + 1)
        image = refine(i, i + 1).image
        d = all_pairs(g)
        cols = [g.vertex_index(v) for v in image]
        assert d.values[:, cols].min(axis=1).max() <= 1


def test_gh_upper_bound():
    assert gh_upper_bound(1, 3) < ScaledDistance(1, 1)
    assert gh_upper_bound(2, 3) < ScaledDistance(1, 2)
    for i, j in [(0, 2), (1, 2), (2, 4)]:
        assert gh_upper_bound(i, j) == hausdorff_gap(i, j).max_gap
        assert gh_upper_bound(i, j) < unit(i)


def test_limit_gap():
    cert = limit_gap(1, cap=4)
    assert cert.to_level == 4
    assert cert.max_gap <= ScaledDistance(1, 2)
    with pytest.raises(PreconditionError):
        limit_gap(4, cap=4)


def test_lift_keeps_distances(rng):
    g = build(2)
    for _ in range(50):
        u, v = (g.vertices[k] for k in rng.integers(len(g), size=2))
        p, q = Point(2, u), Point(2, v)
        assert point_dist(lift(p, 3), lift(q, 4)) == point_dist(p, q)
