import math
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import networkx as nx
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp
from tqdm import tqdm

from src.errors import ClaimViolation, InfeasibleCoverError, PreconditionError
from src.laakso import LaaksoGraph
from src.metric import ScaledDistance, distance_row, unit
from src.utils.const import DOUBLING_LIMIT, LIMIT_SPACE_DOUBLING, SCALE, WORK_LIMIT

logger = logging.getLogger(__name__)


def units_within(r, level):
    """Largest whole number of level units not exceeding r."""
    if r.unit_exponent <= level:
        return r.rescale(level).value
    return r.value // SCALE ** (r.unit_exponent - level)


@dataclass(frozen=True)
class CoverProblem:
    graph: LaaksoGraph = field(repr=False)
    target: frozenset
    radius: ScaledDistance
    # None means every vertex of the graph
    candidate_centers: frozenset = None

    def __post_init__(self):
        if not self.target:
            raise PreconditionError("Cover target must be nonempty")
        if self.radius.value <= 0:
            raise PreconditionError("Cover radius must be positive, got {}".format(self.radius))
        object.__setattr__(self, "target", frozenset(self.target))
        for v in self.target:
            self.graph.vertex_index(v)
        if self.candidate_centers is None:
            object.__setattr__(self, "candidate_centers", frozenset(self.graph.vertices))
        else:
            object.__setattr__(self, "candidate_centers", frozenset(self.candidate_centers))
            for v in self.candidate_centers:
                self.graph.vertex_index(v)


@dataclass(frozen=True)
class CoverResult:
    size: int
    centers: tuple
    exact: bool

    @property
    def method(self):
        return "exact" if self.exact else "greedy"

    def to_dict(self):
        return {"size": self.size, "centers": list(self.centers), "method": self.method}


def ball(g, center, r):
    g.vertex_index(center)
    if r.value <= 0:
        raise PreconditionError("Ball radius must be positive, got {}".format(r))
    limit = units_within(r, g.level)
    return frozenset(nx.single_source_shortest_path_length(g.graph, center, cutoff=limit))


def _coverage(problem):
    g = problem.graph
    targets = sorted(problem.target, key=g.index.get)
    candidates = sorted(problem.candidate_centers, key=g.index.get)
    cand_idx = np.array([g.index[c] for c in candidates])
    limit = units_within(problem.radius, g.level)

    # symmetric distances: the row of a target tells which candidates reach it
    covers = np.stack([distance_row(g, t)[cand_idx] <= limit for t in targets])
    useful = covers.any(axis=0)
    return targets, [c for c, keep in zip(candidates, useful) if keep], covers[:, useful]


def _greedy(targets, covers):
    missing = ~covers.any(axis=1)
    if missing.any():
        raise InfeasibleCoverError(
            "No candidate center reaches {}".format(targets[int(np.argmax(missing))])
        )
    uncovered = np.ones(len(targets), dtype=bool)
    chosen = []
    while uncovered.any():
        gains = covers[uncovered].sum(axis=0)
        k = int(np.argmax(gains))
        chosen.append(k)
        uncovered &= ~covers[:, k]

    # drop centers made redundant by later picks
    for k in reversed(list(chosen)):
        rest = [c for c in chosen if c != k]
        if rest and covers[:, rest].any(axis=1).all():
            chosen = rest
    return chosen


def greedy_cover(problem):
    targets, candidates, covers = _coverage(problem)
    return [candidates[k] for k in _greedy(targets, covers)]


def _solve(problem, work_limit=WORK_LIMIT, exact=True):
    targets, candidates, covers = _coverage(problem)
    greedy = _greedy(targets, covers)
    greedy_result = CoverResult(len(greedy), tuple(candidates[k] for k in greedy), False)
    if len(greedy) == 1:
        return len(greedy), CoverResult(1, greedy_result.centers, True)
    if not exact:
        return len(greedy), greedy_result
    if len(greedy) == 2 and not covers.all(axis=0).any():
        return 2, CoverResult(2, greedy_result.centers, True)

    n = len(candidates)
    constraints = [
        LinearConstraint(sparse.csr_matrix(covers.astype(np.int8)), lb=1, ub=np.inf),
        # greedy warm start caps the objective
        LinearConstraint(np.ones((1, n)), lb=1, ub=len(greedy)),
    ]
    res = milp(
        c=np.ones(n),
        constraints=constraints,
        integrality=np.ones(n),
        bounds=Bounds(0, 1),
        options={"node_limit": int(work_limit)},
    )
    if res.status == 0 and res.x is not None:
        chosen = np.flatnonzero(res.x > 0.5)
        if covers[:, chosen].any(axis=1).all():
            return len(greedy), CoverResult(
                len(chosen), tuple(candidates[k] for k in chosen), True
            )
    logger.warning(
        "Exact cover of %d targets stopped (%s); keeping greedy bound %d",
        len(targets),
        res.message,
        len(greedy),
    )
    return len(greedy), greedy_result


def min_cover_exact(problem, work_limit=WORK_LIMIT):
    """Minimum number of radius balls centered at candidates that cover the target.

    Returns:
        CoverResult; ``exact`` is False when the node limit stopped the
        branch-and-bound, in which case ``size`` is the greedy upper bound.
    """
    return _solve(problem, work_limit)[1]


def covering_number(g, target, rho, work_limit=WORK_LIMIT, exact=True):
    return _solve(CoverProblem(g, frozenset(target), rho), work_limit, exact)[1]


def separated_subset(g, target, r):
    """Greedy maximal subset of target with pairwise distances > r."""
    limit = units_within(r, g.level)
    chosen = []
    chosen_idx = []
    for v in sorted(target, key=g.vertex_index):
        row = distance_row(g, v)
        if all(row[k] > limit for k in chosen_idx):
            chosen.append(v)
            chosen_idx.append(g.index[v])
    return chosen


@dataclass(frozen=True)
class DoublingEntry:
    center: str
    radius: ScaledDistance
    cover_size: int
    method: str
    greedy_size: int


@dataclass
class DoublingReport:
    level: int
    entries: list

    @property
    def max_cover_size(self):
        return max((e.cover_size for e in self.entries), default=0)

    def argmax(self):
        return max(self.entries, key=lambda e: e.cover_size)

    def to_frame(self):
        k = self.level + 1
        return pd.DataFrame(
            {
                "level": self.level,
                "center": [e.center for e in self.entries],
                "R_units": [e.radius.rescale(k).value for e in self.entries],
                "rho_units": [e.radius.rescale(k).value // 2 for e in self.entries],
                "unit_exponent": k,
                "N": [e.cover_size for e in self.entries],
                "method": [e.method for e in self.entries],
            }
        )

    def to_dict(self):
        worst = self.argmax() if self.entries else None
        return {
            "level": self.level,
            "balls": "closed",
            "max_cover_size": self.max_cover_size,
            "argmax": None
            if worst is None
            else {"center": worst.center, "radius": worst.radius.to_dict()},
            "limit_space_constant": LIMIT_SPACE_DOUBLING,
            "discretization_finding": self.max_cover_size > LIMIT_SPACE_DOUBLING,
            "exact": all(e.method == "exact" for e in self.entries),
            "entries": [
                {
                    "center": e.center,
                    "radius": e.radius.to_dict(),
                    "cover_size": e.cover_size,
                    "method": e.method,
                    "greedy_size": e.greedy_size,
                }
                for e in self.entries
            ],
        }


def doubling_report(g, radius_exponents=None, work_limit=WORK_LIMIT, exact=True, progress=False):
    """N(B(x, 4^-m), 4^-m / 2) for every vertex x and listed m."""
    if radius_exponents is None:
        radius_exponents = range(g.level + 1)
    radius_exponents = list(radius_exponents)
    for m in radius_exponents:
        if not 0 <= m <= g.level:
            raise PreconditionError(
                "Radius exponent {} outside 0..{} for X_{}".format(m, g.level, g.level)
            )

    solved = {}
    entries = []
    for x in tqdm(g.vertices, desc="doubling X_{}".format(g.level), disable=not progress):
        for m in radius_exponents:
            r = unit(m)
            target = ball(g, x, r)
            key = (target, m)
            if key not in solved:
                problem = CoverProblem(g, target, ScaledDistance(2, m + 1))
                solved[key] = _solve(problem, work_limit, exact)
            greedy_size, result = solved[key]
            entries.append(DoublingEntry(x, r, result.size, result.method, greedy_size))

    report = DoublingReport(g.level, entries)
    logger.info(
        "doubling_report(X_%d): max cover size %d over %d balls (%d distinct)",
        g.level,
        report.max_cover_size,
        len(entries),
        len(solved),
    )
    return report


def check_doubling(report, limit=DOUBLING_LIMIT):
    value = report.max_cover_size
    if value > limit:
        raise ClaimViolation(
            "Doubling constant of X_{} reached {} > {}".format(report.level, value, limit)
        )
    if value > LIMIT_SPACE_DOUBLING:
        worst = report.argmax()
        logger.warning(
            "Discretization finding on X_%d: cover size %d at center %s radius %s",
            report.level,
            value,
            worst.center,
            worst.radius,
        )
    return value


@dataclass(frozen=True)
class HomogeneitySample:
    R: ScaledDistance
    rho: ScaledDistance
    N: int
    center: str
    method: str


@dataclass
class HomogeneityFit:
    level: int
    samples: list
    exponent_s: float
    constant_M: float
    intercept_M: float
    residual: float

    def to_frame(self):
        k = max([self.level] + [s.rho.unit_exponent for s in self.samples])
        return pd.DataFrame(
            {
                "level": self.level,
                "center": [s.center for s in self.samples],
                "R_units": [s.R.rescale(k).value for s in self.samples],
                "rho_units": [s.rho.rescale(k).value for s in self.samples],
                "unit_exponent": k,
                "N": [s.N for s in self.samples],
                "method": [s.method for s in self.samples],
            }
        )

    def to_dict(self):
        return {
            "level": self.level,
            "exponent_s": self.exponent_s,
            "constant_M": self.constant_M,
            "intercept_M": self.intercept_M,
            "residual": self.residual,
            "reference_exponent": math.log(6) / math.log(4),
            "samples": [
                {
                    "R": s.R.to_dict(),
                    "rho": s.rho.to_dict(),
                    "N": s.N,
                    "center": s.center,
                    "method": s.method,
                }
                for s in self.samples
            ],
        }


def default_scale_pairs(level):
    return [(unit(0), unit(n)) for n in range(1, level)]


def assouad_fit(g, scale_pairs=None, subset=None, work_limit=WORK_LIMIT, exact=True, progress=False):
    """Fit N(A ∩ B(x, R), rho) <= M (R / rho)^s over worst-case centers x in A."""
    if scale_pairs is None:
        scale_pairs = default_scale_pairs(g.level)
    pairs = list(dict.fromkeys(scale_pairs))
    if len(pairs) < 3:
        raise PreconditionError(
            "assouad_fit needs at least 3 distinct scale pairs, got {}".format(len(pairs))
        )
    for R, rho in pairs:
        if not (rho.value > 0 and rho < R):
            raise PreconditionError("Scale pair needs 0 < rho < R, got ({}, {})".format(R, rho))
    ratios = [R.as_fraction() / rho.as_fraction() for R, rho in pairs]
    if len(set(ratios)) < 2:
        raise PreconditionError("Degenerate regression: every scale pair has ratio {}".format(ratios[0]))

    domain = frozenset(subset) if subset is not None else frozenset(g.vertices)
    if not domain:
        raise PreconditionError("assouad_fit subset must be nonempty")
    centers = sorted(domain, key=g.vertex_index)

    samples = []
    for R, rho in tqdm(pairs, desc="homogeneity X_{}".format(g.level), disable=not progress):
        solved = {}
        best = None
        for x in centers:
            target = ball(g, x, R) & domain
            if target not in solved:
                solved[target] = _solve(CoverProblem(g, target, rho), work_limit, exact)[1]
            result = solved[target]
            if best is None or result.size > best[1].size:
                best = (x, result)
        samples.append(HomogeneitySample(R, rho, best[1].size, best[0], best[1].method))

    log_ratio = np.log([float(q) for q in ratios])
    log_n = np.log([s.N for s in samples])
    s, intercept = np.polyfit(log_ratio, log_n, 1)
    residual = float(np.sqrt(np.mean((np.polyval([s, intercept], log_ratio) - log_n) ** 2)))
    envelope = max(n / float(q) ** s for n, q in zip((x.N for x in samples), ratios))
    fit = HomogeneityFit(
        level=g.level,
        samples=samples,
        exponent_s=float(s),
        constant_M=float(max(1.0, envelope)),
        intercept_M=float(math.exp(intercept)),
        residual=residual,
    )
    logger.info("assouad_fit(X_%d): s = %.4f, M = %.4f", g.level, fit.exponent_s, fit.constant_M)
    return fit
