import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, total_ordering

import numpy as np
import pandas as pd
import networkx as nx
from tqdm import tqdm

from src.errors import BudgetExceededError, ClaimViolation, PreconditionError
from src.laakso import build, refine
from src.utils.const import PAIR_BUDGET, ROW_CACHE_BYTES, ROW_CACHE_MIN_ROWS, SCALE
from src.utils.func import check_level, resolve_cap

logger = logging.getLogger(__name__)


@total_ordering
@dataclass(frozen=True, eq=False)
class ScaledValue:
    """Exact signed quantity ``value * 4**(-unit_exponent)``.

    Comparisons and arithmetic first rescale both operands to the finer of
    the two unit exponents, which is always exact.
    """

    value: int
    unit_exponent: int

    def __post_init__(self):
        object.__setattr__(self, "value", int(self.value))
        object.__setattr__(self, "unit_exponent", int(self.unit_exponent))
        if self.unit_exponent < 0:
            raise PreconditionError(
                "unit_exponent must be nonnegative, got {}".format(self.unit_exponent)
            )

    def rescale(self, unit_exponent):
        if unit_exponent < self.unit_exponent:
            raise PreconditionError(
                "Rescaling {} to unit exponent {} is not exact".format(self, unit_exponent)
            )
        factor = SCALE ** (unit_exponent - self.unit_exponent)
        return type(self)(self.value * factor, unit_exponent)

    def aligned(self, other):
        k = max(self.unit_exponent, other.unit_exponent)
        return self.rescale(k).value, other.rescale(k).value, k

    def as_fraction(self):
        return Fraction(self.value, SCALE**self.unit_exponent)

    def __eq__(self, other):
        if not isinstance(other, ScaledValue):
            return NotImplemented
        a, b, _ = self.aligned(other)
        return a == b

    def __lt__(self, other):
        if not isinstance(other, ScaledValue):
            return NotImplemented
        a, b, _ = self.aligned(other)
        return a < b

    def __hash__(self):
        return hash(self.as_fraction())

    def __add__(self, other):
        a, b, k = self.aligned(other)
        both = isinstance(self, ScaledDistance) and isinstance(other, ScaledDistance)
        return (ScaledDistance if both else ScaledValue)(a + b, k)

    def __sub__(self, other):
        a, b, k = self.aligned(other)
        return ScaledValue(a - b, k)

    def __neg__(self):
        return ScaledValue(-self.value, self.unit_exponent)

    def __abs__(self):
        return ScaledDistance(abs(self.value), self.unit_exponent)

    def __mul__(self, factor):
        if not isinstance(factor, int):
            return NotImplemented
        cls = type(self) if factor >= 0 else ScaledValue
        return cls(self.value * factor, self.unit_exponent)

    __rmul__ = __mul__

    def __str__(self):
        return "{}*4^-{}".format(self.value, self.unit_exponent)

    def to_dict(self):
        return {
            "value": self.value,
            "unit_exponent": self.unit_exponent,
            "decimal": float(self.as_fraction()),
        }

    @classmethod
    def from_dict(cls, data):
        # the decimal field is display only
        try:
            return cls(int(data["value"]), int(data["unit_exponent"]))
        except (KeyError, TypeError, ValueError) as e:
            raise PreconditionError("Malformed scaled value: {!r} ({})".format(data, e))


class ScaledDistance(ScaledValue):
    def __post_init__(self):
        super().__post_init__()
        if self.value < 0:
            raise PreconditionError("Distances are nonnegative, got {}".format(self.value))


def unit(level):
    """One edge length of X_level."""
    return ScaledDistance(1, level)


@dataclass(frozen=True)
class GapCertificate:
    from_level: int
    to_level: int
    max_gap: ScaledDistance
    bound: ScaledDistance
    witness: str

    def to_dict(self):
        return {
            "from_level": self.from_level,
            "to_level": self.to_level,
            "max_gap": self.max_gap.to_dict(),
            "bound": self.bound.to_dict(),
            "witness": self.witness,
        }


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    vertices: tuple
    unit_exponent: int
    values: np.ndarray

    def __getitem__(self, pair):
        u, v = pair
        return ScaledDistance(int(self.values[self._index(u), self._index(v)]), self.unit_exponent)

    def _index(self, vertex):
        return build(self.unit_exponent, cap=self.unit_exponent).vertex_index(vertex)

    def row(self, vertex):
        return self.values[self._index(vertex)]

    def argmax(self):
        k = int(np.argmax(self.values))
        u, v = divmod(k, len(self.vertices))
        return self.vertices[u], self.vertices[v]

    def to_frame(self):
        return pd.DataFrame(self.values, index=list(self.vertices), columns=list(self.vertices))

    def to_csv(self):
        return "unit_exponent={}\n".format(self.unit_exponent) + self.to_frame().to_csv()


@lru_cache(maxsize=2)
def _row_cache(level):
    """Per-level LRU of BFS rows, sized so the rows fit in ROW_CACHE_BYTES."""
    g = build(level, cap=level)
    rows = max(ROW_CACHE_MIN_ROWS, ROW_CACHE_BYTES // (np.dtype(np.int32).itemsize * len(g)))

    @lru_cache(maxsize=rows)
    def row(source):
        lengths = nx.single_source_shortest_path_length(g.graph, source)
        found = np.fromiter((lengths[v] for v in g.vertices), dtype=np.int32, count=len(g))
        found.flags.writeable = False
        return found

    return row


def clear_row_cache():
    _row_cache.cache_clear()


def distance_row(g, source):
    """BFS distances in units of 4^-level from source, ordered as g.vertices."""
    g.vertex_index(source)
    return _row_cache(g.level)(source)


def dist(g, u, v):
    g.vertex_index(u)
    g.vertex_index(v)
    return ScaledDistance(nx.shortest_path_length(g.graph, u, v), g.level)


def point_dist(p, q, cap=None):
    level = max(p.level, q.level)
    g = build(level, cap)
    return dist(g, p.vertex, q.vertex)


def all_pairs(g, budget=PAIR_BUDGET, progress=False):
    n = len(g)
    if n * n > budget:
        raise BudgetExceededError(
            "All-pairs matrix of X_{} needs {} entries, budget is {}".format(g.level, n * n, budget)
        )
    values = np.empty((n, n), dtype=np.min_scalar_type(SCALE**g.level))
    for k, source in enumerate(
        tqdm(g.vertices, desc="all pairs X_{}".format(g.level), disable=not progress)
    ):
        lengths = nx.single_source_shortest_path_length(g.graph, source)
        values[k] = np.fromiter((lengths[v] for v in g.vertices), dtype=values.dtype, count=n)
    return DistanceMatrix(g.vertices, g.level, values)


def diameter_pair(g, budget=PAIR_BUDGET, progress=False):
    """Diameter of X_level and the first vertex pair attaining it."""
    matrix = all_pairs(g, budget=budget, progress=progress)
    u, v = matrix.argmax()
    value = matrix[u, v]
    if value != unit(0):
        raise ClaimViolation("diameter(X_{}) = {}, expected 1".format(g.level, value))
    return value, (u, v)


def diameter(g, budget=PAIR_BUDGET, progress=False):
    return diameter_pair(g, budget, progress)[0]


def refinement_isometry_check(i, j, cap=None, budget=PAIR_BUDGET):
    """List every vertex pair of X_i whose distance changes in X_j."""
    if i >= j:
        raise PreconditionError("Isometry check requires i < j, got {} and {}".format(i, j))
    rmap = refine(i, j, cap)
    coarse_g, fine_g = build(i, cap), build(j, cap)
    coarse = all_pairs(coarse_g, budget=budget)
    fine = all_pairs(fine_g, budget=budget)

    idx = [fine_g.vertex_index(rmap(v)) for v in coarse_g.vertices]
    before = coarse.values.astype(np.int64) * SCALE ** (j - i)
    after = fine.values[np.ix_(idx, idx)].astype(np.int64)
    violations = []
    for u, v in np.argwhere(np.triu(before != after, 1)):
        violations.append(
            (
                coarse_g.vertices[u],
                coarse_g.vertices[v],
                ScaledDistance(int(before[u, v]), j),
                ScaledDistance(int(after[u, v]), j),
            )
        )
    if violations:
        logger.warning("refine(%d, %d) changes %d distances", i, j, len(violations))
    return violations


def hausdorff_gap(i, j, cap=None):
    if i >= j:
        raise PreconditionError("hausdorff_gap requires i < j, got {} and {}".format(i, j))
    rmap = refine(i, j, cap)
    g = build(j, cap)
    lengths = nx.multi_source_dijkstra_path_length(g.graph, rmap.image)

    witness, gap = g.vertices[0], -1
    for v in g.vertices:
        if lengths[v] > gap:
            witness, gap = v, lengths[v]
    cert = GapCertificate(
        from_level=i,
        to_level=j,
        max_gap=ScaledDistance(gap, j),
        bound=ScaledDistance(SCALE ** (j - i - 1), j),
        witness=witness,
    )
    if cert.max_gap > cert.bound:
        raise ClaimViolation(
            "Gap of X_{} in X_{} is {} > {} at {}".format(i, j, cert.max_gap, cert.bound, witness)
        )
    logger.info("hausdorff_gap(%d, %d) = %s at %s", i, j, cert.max_gap, witness)
    return cert


def gh_upper_bound(i, j, cap=None):
    cert = hausdorff_gap(i, j, cap)
    value = max(cert.max_gap, ScaledDistance(0, j))
    if not value < unit(i):
        raise ClaimViolation("GH bound {} is not below 4^-{}".format(value, i))
    return value


def limit_gap(i, cap=None):
    """Gap of X_i inside the finest available level, standing in for the limit space."""
    cap = resolve_cap(cap)
    check_level(i, cap)
    if i >= cap:
        raise PreconditionError("limit_gap needs a finer level than {} below the cap {}".format(i, cap))
    return hausdorff_gap(i, cap, cap)
