import math
import itertools

import pytest

from src.covering import (
    CoverProblem,
    assouad_fit,
    ball,
    check_doubling,
    covering_number,
    default_scale_pairs,
    doubling_report,
    greedy_cover,
    min_cover_exact,
    separated_subset,
    units_within,
)
from src.errors import ClaimViolation, InfeasibleCoverError, PreconditionError, UnknownVertexError
from src.laakso import build, refine
from src.metric import ScaledDistance, all_pairs, unit


def brute_force_cover(g, target, r):
    limit = units_within(r, g.level)
    reach = all_pairs(g).values[:, [g.vertex_index(t) for t in target]] <= limit
    for k in range(1, len(target) + 1):
        for centers in itertools.combinations(range(len(g)), k):
            if reach[list(centers)].any(axis=0).all():
                return k


def test_units_within():
    assert units_within(unit(0), 2) == 16
    assert units_within(ScaledDistance(2, 3), 2) == 0
    assert units_within(ScaledDistance(6, 3), 2) == 1


def test_ball():
    x1 = build(1)
    assert ball(x1, "a", ScaledDistance(4, 1)) == frozenset(x1.vertices)
    assert ball(x1, "b", unit(1)) == frozenset({"a", "b", "m_upper", "m_lower"})
    assert ball(x1, "b", ScaledDistance(1, 2)) == frozenset({"b"})

    x2 = build(2)
    found = ball(x2, "a", ScaledDistance(4, 2))
    row = all_pairs(x2).row("a")
    assert found == frozenset(v for v, d in zip(x2.vertices, row) if d <= 4)
    assert len(found) == 6
    with pytest.raises(UnknownVertexError):
        ball(x2, "q", unit(2))
    with pytest.raises(PreconditionError):
        ball(x2, "a", ScaledDistance(0, 2))


def test_cover_problem_validation():
    g = build(1)
    with pytest.raises(PreconditionError):
        CoverProblem(g, frozenset(), unit(1))
    with pytest.raises(PreconditionError):
        CoverProblem(g, frozenset({"a"}), ScaledDistance(0, 1))
    assert CoverProblem(g, {"a"}, unit(1)).candidate_centers == frozenset(g.vertices)


def test_greedy_cover():
    g = build(1)
    assert len(greedy_cover(CoverProblem(g, {"c"}, unit(1)))) == 1
    centers = greedy_cover(CoverProblem(g, set(g.vertices), unit(1)))
    covered = set().union(*(ball(g, c, unit(1)) for c in centers))
    assert covered >= set(g.vertices)
    with pytest.raises(InfeasibleCoverError):
        greedy_cover(CoverProblem(g, {"d"}, unit(1), candidate_centers={"a"}))


def test_greedy_doubling_on_x1():
    g = build(1)
    for x in g.vertices:
        for m in (0, 1):
            target = ball(g, x, unit(m))
            assert len(greedy_cover(CoverProblem(g, target, ScaledDistance(2, m + 1)))) <= 6


def test_min_cover_exact_examples():
    g = build(1)
    square = set(g.edge_cycles[0].corners)
    result = min_cover_exact(CoverProblem(g, square, unit(1)))
    assert result.exact and result.size == 2
    assert result.to_dict()["method"] == "exact"

    x = "m_upper"
    assert min_cover_exact(CoverProblem(g, ball(g, x, unit(1)), unit(1))).size == 1


@pytest.mark.parametrize("level", [1, 2])
def test_exact_matches_brute_force(level):
    g = build(level)
    for x in g.vertices[::3]:
        for m in range(level + 1):
            target = ball(g, x, unit(m))
            if len(target) > 12:
                continue
            rho = ScaledDistance(2, m + 1)
            problem = CoverProblem(g, target, rho)
            result = min_cover_exact(problem)
            assert result.exact
            assert result.size == brute_force_cover(g, target, rho)
            assert result.size <= len(greedy_cover(problem))


def test_covering_number_monotone():
    g = build(2)
    x = "m_upper"
    target = ball(g, x, unit(0))
    sizes = [covering_number(g, target, unit(m)).size for m in range(3)]
    assert sizes == sorted(sizes)
    small = ball(g, x, unit(1))
    assert covering_number(g, small, unit(2)).size <= covering_number(g, target, unit(2)).size


def test_packing_covering_duality():
    g = build(2)
    for x in g.vertices:
        for m in range(3):
            r = unit(m + 1)
            target = ball(g, x, unit(m))
            n = covering_number(g, target, r).size
            assert len(separated_subset(g, target, r)) >= n
            assert n >= len(separated_subset(g, target, r * 2))


@pytest.mark.parametrize("m", [1, 2])
def test_doubling_ball_self_similar_across_levels(m):
    # m_upper has degree 2 at every level; its balls are two sibling copies
    sizes = []
    for level in (3, 4):
        g = build(level)
        result = covering_number(g, ball(g, "m_upper", unit(m)), ScaledDistance(2, m + 1))
        assert result.exact
        sizes.append(result.size)
    assert sizes == [2, 2]


def test_doubling_report_x1():
    report = doubling_report(build(1))
    assert report.max_cover_size <= 6
    whole = [e for e in report.entries if e.radius == unit(0)]
    assert len(whole) == 6
    assert all(e.cover_size <= 6 for e in whole)
    assert all(e.cover_size <= e.greedy_size for e in report.entries)
    assert check_doubling(report) == report.max_cover_size


def test_doubling_report_rejects_fine_radius():
    with pytest.raises(PreconditionError):
        doubling_report(build(1), radius_exponents=[2])


def test_sub_unit_radius_gives_singletons():
    g = build(2)
    for x in g.vertices:
        target = ball(g, x, ScaledDistance(1, 3))
        assert target == frozenset({x})
        assert min_cover_exact(CoverProblem(g, target, ScaledDistance(1, 4))).size == 1


def test_doubling_report_frame():
    report = doubling_report(build(1), radius_exponents=[0])
    frame = report.to_frame()
    assert list(frame.columns) == ["level", "center", "R_units", "rho_units", "unit_exponent", "N", "method"]
    assert frame["R_units"].tolist() == [16] * 6
    assert frame["rho_units"].tolist() == [8] * 6
    data = report.to_dict()
    assert data["balls"] == "closed"
    assert data["limit_space_constant"] == 6


@pytest.mark.slow
def test_doubling_report_x3():
    report = doubling_report(build(3))
    assert report.max_cover_size <= 8
    assert all(e.method == "exact" for e in report.entries)
    check_doubling(report)


@pytest.mark.slow
def test_doubling_bounded_across_levels():
    sizes = [doubling_report(build(i)).max_cover_size for i in range(1, 5)]
    assert max(sizes) <= 8


def test_check_doubling_limits():
    report = doubling_report(build(1), radius_exponents=[1])
    assert report.max_cover_size == 4
    with pytest.raises(ClaimViolation):
        check_doubling(report, limit=3)


def test_assouad_fit_validation():
    g = build(4)
    with pytest.raises(PreconditionError):
        assouad_fit(g, default_scale_pairs(3))
    with pytest.raises(PreconditionError):
        assouad_fit(g, [(unit(0), unit(1)), (unit(1), unit(2)), (unit(2), unit(3))])
    with pytest.raises(PreconditionError):
        assouad_fit(g, [(unit(1), unit(1)), (unit(0), unit(1)), (unit(0), unit(2))])


def test_assouad_fit_on_line():
    g = build(4)
    line = refine(0, 4).image
    assert len(line) == 257
    fit = assouad_fit(g, subset=line)
    assert [s.N for s in fit.samples] == [2, 8, 29]
    assert fit.exponent_s == pytest.approx(1.0, abs=0.1)
    assert fit.constant_M >= 1


@pytest.mark.slow
def test_assouad_fit_x4():
    fit = assouad_fit(build(4))
    assert [s.N for s in fit.samples] == [2, 12, 72]
    assert fit.exponent_s == pytest.approx(math.log(6) / math.log(4), abs=0.1)
    assert fit.constant_M >= 1
    assert fit.residual == pytest.approx(0.0, abs=0.2)
    assert all(s.method == "exact" for s in fit.samples)
