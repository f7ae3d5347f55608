"""Construction of the Laakso graphs X_i and their canonical refinements.

Vertices carry hierarchical labels ``"<d1>.<d2>...<dk>.<name>"``: the digits
are copy indices (the pattern edge each copy replaced, one per level of
substitution) and ``name`` is a pattern vertex. A vertex is always named at
the coarsest copy that owns it, so its label does not change when the graph
is refined and refinement is the identity on labels.
"""

import logging
import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import networkx as nx

from src.errors import ClaimViolation, PreconditionError, UnknownVertexError
from src.utils.func import check_level
from src.utils.const import (
    BRANCHING,
    CANONICAL_BRANCH,
    CANONICAL_NAMES,
    END,
    INTERIOR_VERTICES,
    MIRROR_COPY,
    MIRROR_VERTEX,
    PATTERN_EDGES,
    PATTERN_VERTICES,
    START,
)

logger = logging.getLogger(__name__)

VertexId = str


def format_label(path, name):
    if not path:
        return name
    return ".".join(str(d) for d in path) + "." + name


def parse_label(label):
    """Split a canonical label into its copy path and pattern vertex name.

    Raises:
        UnknownVertexError: the label is malformed or not in canonical form.
    """
    if not isinstance(label, str) or not label:
        raise UnknownVertexError("Malformed vertex label: {!r}".format(label))
    *digits, name = label.split(".")
    if any(len(d) != 1 or d not in "012345" for d in digits):
        raise UnknownVertexError("Malformed vertex label: {!r}".format(label))
    allowed = INTERIOR_VERTICES if digits else PATTERN_VERTICES
    if name not in allowed:
        raise UnknownVertexError(
            "Non-canonical vertex label: {!r} (copy endpoints are named at the owning copy)".format(
                label
            )
        )
    return tuple(int(d) for d in digits), name


def canonical_label(path, name):
    # copy endpoints resolve to the parent pattern vertex they were glued to
    path = tuple(path)
    while path and name in (START, END):
        edge = PATTERN_EDGES[path[-1]]
        name = edge[0] if name == START else edge[1]
        path = path[:-1]
    return format_label(path, name)


def minimal_level(label):
    path, name = parse_label(label)
    if not path and name in (START, END):
        return 0
    return len(path) + 1


def copy_number(path):
    number = 0
    for d in path:
        number = number * BRANCHING + d
    return number


@dataclass(frozen=True)
class EdgeCycle:
    copy_path: tuple
    corners: tuple  # junction, side, junction, side
    member_edges: tuple

    @property
    def junctions(self):
        return self.corners[0], self.corners[2]

    @property
    def sides(self):
        return self.corners[1], self.corners[3]

    def to_dict(self):
        return {"copy_path": list(self.copy_path), "corners": list(self.corners)}


@dataclass(frozen=True)
class LaaksoGraph:
    level: int
    vertices: tuple
    edges: tuple
    endpoints: tuple
    edge_cycles: tuple
    graph: nx.Graph = field(compare=False, repr=False)
    index: dict = field(compare=False, repr=False)
    edge_copies: dict = field(compare=False, repr=False)

    def __hash__(self):
        return hash((self.level, len(self.vertices), len(self.edges)))

    def __contains__(self, vertex):
        return vertex in self.index

    def __len__(self):
        return len(self.vertices)

    @property
    def unit_exponent(self):
        return self.level

    def vertex_index(self, vertex):
        try:
            return self.index[vertex]
        except (KeyError, TypeError):
            raise UnknownVertexError(
                "Vertex {!r} is not in X_{}".format(vertex, self.level)
            )

    def degree(self, vertex):
        self.vertex_index(vertex)
        return self.graph.degree[vertex]

    def edge_copy(self, u, v):
        """Copy path of the finest-level edge joining u and v."""
        path = self.edge_copies.get((u, v), self.edge_copies.get((v, u)))
        if path is None:
            raise UnknownVertexError(
                "No edge {!r} -- {!r} in X_{}".format(u, v, self.level)
            )
        return path

    def to_dict(self):
        return {
            "level": self.level,
            "unit_exponent": self.unit_exponent,
            "vertices": list(self.vertices),
            "edges": [list(e) for e in self.edges],
            "endpoints": list(self.endpoints),
            "edge_cycles": [list(c.corners) for c in self.edge_cycles],
        }

    def to_dot(self):
        cycle_of = {}
        for k, cycle in enumerate(self.edge_cycles):
            for edge in cycle.member_edges:
                cycle_of[edge] = k
        lines = ["graph laakso_{} {{".format(self.level)]
        lines.append('    graph [label="X_{}", unit_exponent={}];'.format(self.level, self.level))
        for v in self.vertices:
            shape = "box" if v in self.endpoints else "point"
            lines.append('    "{}" [shape={}];'.format(v, shape))
        for u, v in self.edges:
            if (u, v) in cycle_of:
                lines.append(
                    '    "{}" -- "{}" [edge_cycle={}, color=red];'.format(u, v, cycle_of[(u, v)])
                )
            else:
                lines.append('    "{}" -- "{}";'.format(u, v))
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_edgelist(self):
        lines = ["# laakso level={}".format(self.level)]
        lines.extend(nx.generate_edgelist(self.graph, data=False))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class Point:
    level: int
    vertex: VertexId

    def __post_init__(self):
        if not isinstance(self.level, int) or self.level < 0:
            raise PreconditionError("Invalid point level: {!r}".format(self.level))
        if minimal_level(self.vertex) > self.level:
            raise UnknownVertexError(
                "Vertex {!r} does not exist at level {}".format(self.vertex, self.level)
            )

    def __eq__(self, other):
        if not isinstance(other, Point):
            return NotImplemented
        return self.vertex == other.vertex

    def __hash__(self):
        return hash(self.vertex)

    def __str__(self):
        return "{}:{}".format(self.level, self.vertex)

    def to_dict(self):
        return {"level": self.level, "vertex": self.vertex}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(int(data["level"]), data["vertex"])
        except (KeyError, TypeError, ValueError) as e:
            raise PreconditionError("Malformed point: {!r} ({})".format(data, e))

    @classmethod
    def parse(cls, text):
        """Parse ``"<level>:<label>"``; a bare label is placed at its minimal level."""
        if ":" in text:
            level, vertex = text.split(":", 1)
            try:
                return cls(int(level), vertex)
            except ValueError:
                raise PreconditionError("Malformed point: {!r}".format(text))
        return cls(minimal_level(text), text)


@dataclass(frozen=True)
class RefinementMap:
    from_level: int
    to_level: int
    vertex_map: dict = field(compare=False, repr=False)
    # vertices of X_to lying on the canonical images of X_from's edges
    image: frozenset = field(compare=False, repr=False)

    def __call__(self, vertex):
        try:
            return self.vertex_map[vertex]
        except KeyError:
            raise UnknownVertexError(
                "Vertex {!r} is not in X_{}".format(vertex, self.from_level)
            )

    def is_injective(self):
        return len(set(self.vertex_map.values())) == len(self.vertex_map)


def _cycle_path(path):
    return path + (1,), path + (3,), path + (4,), path + (2,)


@lru_cache(maxsize=None)
def _construct(level):
    vertices = [START, END] if level == 0 else []
    for depth in range(level):
        names = PATTERN_VERTICES if depth == 0 else INTERIOR_VERTICES
        for path in itertools.product(range(BRANCHING), repeat=depth):
            vertices.extend(format_label(path, name) for name in names)

    edges = []
    edge_copies = {}
    for path in itertools.product(range(BRANCHING), repeat=level):
        edge = (canonical_label(path, START), canonical_label(path, END))
        edges.append(edge)
        edge_copies[edge] = path

    edge_cycles = []
    if level >= 1:
        for q in itertools.product(range(BRANCHING), repeat=level - 1):
            corners = tuple(format_label(q, n) for n in ("b", "m_upper", "c", "m_lower"))
            member_edges = tuple(edges[copy_number(p)] for p in _cycle_path(q))
            edge_cycles.append(EdgeCycle(q, corners, member_edges))

    graph = nx.Graph()
    graph.add_nodes_from(vertices)
    graph.add_edges_from(edges)
    nx.freeze(graph)

    logger.debug(
        "Constructed X_%d: %d vertices, %d edges, %d edge cycles",
        level,
        len(vertices),
        len(edges),
        len(edge_cycles),
    )
    return LaaksoGraph(
        level=level,
        vertices=tuple(vertices),
        edges=tuple(edges),
        endpoints=(START, END),
        edge_cycles=tuple(edge_cycles),
        graph=graph,
        index={v: k for k, v in enumerate(vertices)},
        edge_copies=edge_copies,
    )


def build(level, cap=None):
    check_level(level, cap)
    return _construct(level)


def check_structure(g):
    """Assert the exact counts and degree pattern of X_level."""
    i = g.level
    expected = {
        "edges": 6**i,
        "vertices": (4 * 6**i + 6) // 5,
        "degree_3": 2 * (6**i - 1) // 5,
        "edge_cycles": 6 ** (i - 1) if i >= 1 else 0,
    }
    degrees = dict(g.graph.degree)
    found = {
        "edges": g.graph.number_of_edges(),
        "vertices": g.graph.number_of_nodes(),
        "degree_3": sum(1 for d in degrees.values() if d == 3),
        "edge_cycles": len(g.edge_cycles),
    }
    if found != expected:
        raise ClaimViolation("X_{} counts {} differ from {}".format(i, found, expected))
    leaves = sorted(v for v, d in degrees.items() if d == 1)
    if leaves != sorted(g.endpoints) or any(d not in (1, 2, 3) for d in degrees.values()):
        raise ClaimViolation("X_{} has an unexpected degree pattern".format(i))
    if not nx.is_connected(g.graph):
        raise ClaimViolation("X_{} is not connected".format(i))
    seen = set()
    for cycle in g.edge_cycles:
        if seen.intersection(cycle.corners):
            raise ClaimViolation("Edge cycles of X_{} share a vertex".format(i))
        seen.update(cycle.corners)
    return expected


def lift(p, to, cap=None):
    check_level(to, cap, name="to")
    if to < p.level:
        raise PreconditionError(
            "Cannot lift a level-{} point down to level {}".format(p.level, to)
        )
    return Point(to, p.vertex)


def in_refinement_image(label, level):
    """Whether a vertex lies on the canonical image of X_level."""
    if minimal_level(label) <= level:
        return True
    path, name = parse_label(label)
    return name in CANONICAL_NAMES and all(d in CANONICAL_BRANCH for d in path[level:])


def refine(from_level, to_level, cap=None):
    check_level(from_level, cap, name="from")
    check_level(to_level, cap, name="to")
    if from_level >= to_level:
        raise PreconditionError(
            "refine requires from < to, got {} and {}".format(from_level, to_level)
        )
    source = build(from_level, cap)
    target = build(to_level, cap)
    vertex_map = {v: v for v in source.vertices}
    image = frozenset(v for v in target.vertices if in_refinement_image(v, from_level))
    return RefinementMap(from_level, to_level, vertex_map, image)


def mirror_label(label):
    path, name = parse_label(label)
    return format_label(tuple(MIRROR_COPY[d] for d in path), MIRROR_VERTEX[name])


def endpoint_involution(g):
    return {v: mirror_label(v) for v in g.vertices}


def edge_midpoint(g, u, v):
    return Point(g.level + 1, format_label(g.edge_copy(u, v), "m_upper"))


def copy_interior_contains(cycle, p):
    """Whether p lies strictly inside the X_1 copy carrying the cycle."""
    label = p.vertex if isinstance(p, Point) else p
    path, name = parse_label(label)
    q = cycle.copy_path
    if path[: len(q)] != q:
        return False
    return len(path) > len(q) or name in INTERIOR_VERTICES
