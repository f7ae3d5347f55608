import itertools

import pytest
import networkx as nx

from src.errors import PreconditionError, ResourceLimitError, UnknownVertexError
from src.laakso import (
    Point,
    build,
    canonical_label,
    check_structure,
    copy_interior_contains,
    edge_midpoint,
    endpoint_involution,
    lift,
    minimal_level,
    parse_label,
    refine,
)
from src.metric import dist


@pytest.mark.parametrize("level", range(6))
def test_structure_counts(level):
    g = build(level)
    counts = check_structure(g)
    assert len(g.edges) == 6**level == counts["edges"]
    assert len(g.vertices) == (4 * 6**level + 6) // 5
    assert len(g.edge_cycles) == (6 ** (level - 1) if level else 0)


def test_small_levels():
    x0 = build(0)
    assert x0.vertices == ("a", "d")
    assert x0.edges == (("a", "d"),)
    assert x0.edge_cycles == ()

    x1 = build(1)
    assert x1.vertices == ("a", "b", "m_upper", "m_lower", "c", "d")
    assert len(x1.edge_cycles) == 1
    assert x1.edge_cycles[0].corners == ("b", "m_upper", "c", "m_lower")

    x3 = build(3)
    assert (len(x3.edges), len(x3.vertices), len(x3.edge_cycles)) == (216, 174, 36)


def test_build_is_deterministic():
    assert build(3) == build(3)
    assert build(3).to_dict() == build(3).to_dict()


def test_build_respects_cap(monkeypatch):
    with pytest.raises(ResourceLimitError):
        build(3, cap=2)
    monkeypatch.setenv("LAAKSO_CAP", "1")
    with pytest.raises(ResourceLimitError):
        build(2)
    with pytest.raises(PreconditionError):
        build(-1)


@pytest.mark.parametrize("level", range(1, 5))
def test_edge_cycles(level):
    g = build(level)
    seen = set()
    for cycle in g.edge_cycles:
        assert not seen.intersection(cycle.corners)
        seen.update(cycle.corners)
        ring = list(zip(cycle.corners, cycle.corners[1:] + cycle.corners[:1]))
        assert all(g.graph.has_edge(u, v) for u, v in ring)
        assert {frozenset(e) for e in cycle.member_edges} == {frozenset(e) for e in ring}
        assert [g.degree(v) for v in cycle.junctions] == [3, 3]
        assert [g.degree(v) for v in cycle.sides] == [2, 2]


def test_labels():
    assert canonical_label((0,), "a") == "a"
    assert canonical_label((0,), "d") == "b"
    assert canonical_label((3, 5), "d") == "c"
    assert canonical_label((2, 1), "a") == "2.b"
    assert parse_label("2.4.m_upper") == ((2, 4), "m_upper")
    assert minimal_level("a") == 0
    assert minimal_level("m_lower") == 1
    assert minimal_level("2.4.m_upper") == 3
    for bad in ["0.a", "7.b", "x", "", "1..b"]:
        with pytest.raises(UnknownVertexError):
            parse_label(bad)


def test_points():
    assert Point(1, "m_upper") == Point(3, "m_upper")
    assert len({Point(1, "b"), Point(2, "b")}) == 1
    with pytest.raises(UnknownVertexError):
        Point(1, "0.b")
    assert Point.parse("2:0.c") == Point(2, "0.c")
    assert Point.parse("0.c").level == 2


def test_lift():
    assert lift(Point(1, "a"), 3) == Point(3, "a")
    p = Point(1, "m_upper")
    assert lift(p, 1) == p
    assert lift(lift(p, 2), 4).level == lift(p, 4).level == 4
    with pytest.raises(PreconditionError):
        lift(Point(2, "0.b"), 1)

    # one level-1 unit from the junction becomes four level-2 units
    q = lift(p, 2)
    assert dist(build(2), "b", q.vertex).value == 4


def test_refine():
    with pytest.raises(PreconditionError):
        refine(2, 2)
    rmap = refine(0, 1)
    assert rmap("a") == "a" and rmap("d") == "d"
    assert rmap.image == frozenset({"a", "b", "m_upper", "c", "d"})
    for i, j in itertools.combinations(range(5), 2):
        rmap = refine(i, j)
        assert rmap.is_injective()
        assert set(rmap.vertex_map.values()) <= set(build(j).vertices)
        assert rmap("a") == "a" and rmap("d") == "d"


def test_refinement_image_is_a_geodesic_path():
    g = build(3)
    image = refine(0, 3).image
    path = g.graph.subgraph(image)
    assert nx.is_connected(path)
    assert path.number_of_edges() == 64
    assert sorted(d for _, d in path.degree)[:2] == [1, 1]


@pytest.mark.parametrize("level", range(5))
def test_endpoint_involution(level):
    g = build(level)
    sigma = endpoint_involution(g)
    assert sigma["a"] == "d" and sigma["d"] == "a"
    assert all(sigma[sigma[v]] == v for v in g.vertices)
    assert {frozenset((sigma[u], sigma[v])) for u, v in g.edges} == {frozenset(e) for e in g.edges}


def test_endpoint_involution_on_x1():
    sigma = endpoint_involution(build(1))
    assert sigma == {
        "a": "d",
        "b": "c",
        "m_upper": "m_upper",
        "m_lower": "m_lower",
        "c": "b",
        "d": "a",
    }


def test_edge_midpoint_and_copy_interior():
    g = build(2)
    cycle = g.edge_cycles[3]
    y = edge_midpoint(g, cycle.corners[3], cycle.corners[2])
    assert y == Point(3, "3.4.m_upper")
    assert copy_interior_contains(cycle, y)
    assert copy_interior_contains(cycle, Point(2, "3.b"))
    assert not copy_interior_contains(cycle, Point(2, "b"))
    assert not copy_interior_contains(cycle, Point(2, "m_upper"))
    assert not copy_interior_contains(cycle, Point(2, "4.b"))
    assert not copy_interior_contains(build(1).edge_cycles[0], Point(1, "a"))


def test_serializations():
    g = build(2)
    data = g.to_dict()
    assert data["level"] == data["unit_exponent"] == 2
    assert len(data["edges"]) == 36
    assert data["endpoints"] == ["a", "d"]
    assert len(data["edge_cycles"]) == 6

    lines = g.to_edgelist().splitlines()
    assert lines[0] == "# laakso level=2"
    assert len(lines) == 37
    assert all(len(line.split()) == 2 for line in lines[1:])

    dot = g.to_dot()
    assert dot.startswith("graph laakso_2 {")
    assert dot.count("edge_cycle=") == 24
