"""Difference functions z -> d(x, z) - d(y, z) and the sup-norm metric on them.

Functions are never tabulated up front. A function with defining points at
level m is evaluated on the vertices of X_{m+1}: along every edge of X_m the
distance to a level-m vertex is a minimum of two unit-slope pieces that
break at a half-edge position, and those positions are level-(m+1)
vertices, so the lattice maximum is the supremum over the whole space.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.covering import check_doubling, doubling_report
from src.errors import ClaimViolation, PreconditionError, ResourceLimitError, SeparationError
from src.laakso import Point, build, copy_interior_contains, edge_midpoint, lift
from src.metric import ScaledDistance, dist, distance_row, point_dist
from src.utils.const import BRANCHING, SCALE, START, WORK_LIMIT
from src.utils.func import check_level, resolve_cap

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiffFn:
    x: Point
    y: Point

    @property
    def level(self):
        return max(self.x.level, self.y.level)

    def negated(self):
        return DiffFn(self.y, self.x)

    def to_dict(self):
        return {"x": self.x.to_dict(), "y": self.y.to_dict()}

    @classmethod
    def from_dict(cls, data):
        return cls(Point.from_dict(data["x"]), Point.from_dict(data["y"]))


def zero_function():
    p = Point(0, START)
    return DiffFn(p, p)


class EvalLattice:
    """The vertices of X_level, evaluating functions defined strictly below it."""

    def __init__(self, points=(), level=None, cap=None):
        points = tuple(points)
        needed = 1 + max((p.level for p in points), default=0)
        if level is None:
            level = needed
        if level < needed:
            raise PreconditionError(
                "Lattice level {} is not above every defining point (needs {})".format(level, needed)
            )
        self.graph = build(level, cap)
        self.level = level
        self.points = tuple(lift(p, level, cap) for p in points)

    def __len__(self):
        return len(self.graph)

    @property
    def vertices(self):
        return self.graph.vertices

    def row(self, p):
        if p.level >= self.level:
            raise PreconditionError(
                "Point {} is not below the lattice level {}".format(p, self.level)
            )
        return distance_row(self.graph, p.vertex)

    def values(self, f):
        return self.row(f.x).astype(np.int64) - self.row(f.y)

    def point(self, k):
        return Point(self.level, self.graph.vertices[k])


def evaluate(f, z, cap=None):
    """f(z) = d(x, z) - d(y, z), exact."""
    level = max(f.level, z.level)
    g = build(level, cap)
    return dist(g, f.x.vertex, z.vertex) - dist(g, f.y.vertex, z.vertex)


def linf_norm(f, cap=None):
    lattice = EvalLattice([f.x, f.y], cap=cap)
    norm = ScaledDistance(int(np.abs(lattice.values(f)).max()), lattice.level)
    expected = point_dist(f.x, f.y, cap)
    if norm != expected:
        raise ClaimViolation("sup norm of f_({}, {}) is {}, distance is {}".format(f.x, f.y, norm, expected))
    return norm


def lattice_sup(f, g, level, cap=None):
    lattice = EvalLattice([f.x, f.y, g.x, g.y], level=level, cap=cap)
    return ScaledDistance(int(np.abs(lattice.values(f) - lattice.values(g)).max()), level)


def linf_dist(f, g, cap=None):
    level = 1 + max(f.level, g.level)
    return lattice_sup(f, g, level, cap)


@dataclass
class KuratowskiReport:
    level: int
    lattice_level: int
    pairs_checked: int
    violations: list

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        return {
            "level": self.level,
            "lattice_level": self.lattice_level,
            "pairs_checked": self.pairs_checked,
            "passed": self.passed,
            "violations": [
                {"x": x, "y": y, "sup": s.to_dict(), "distance": d.to_dict()}
                for x, y, s, d in self.violations
            ],
        }


def kuratowski_isometry_check(i, cap=None, max_level=3, progress=False):
    """Compare sup_z |d(x, z) - d(y, z)| with d(x, y) on every vertex pair of X_i."""
    if i > max_level:
        raise PreconditionError(
            "kuratowski_isometry_check supports levels <= {}, got {}".format(max_level, i)
        )
    g = build(i, cap)
    lattice = EvalLattice(level=i + 1, cap=cap)
    rows = np.stack([lattice.row(Point(i, v)) for v in g.vertices]).astype(np.int64)
    idx = np.array([lattice.graph.index[v] for v in g.vertices])

    n = len(g)
    pairs = 0
    violations = []
    for a in tqdm(range(n - 1), desc="kuratowski X_{}".format(i), disable=not progress):
        sup = np.abs(rows[a + 1 :] - rows[a]).max(axis=1)
        d = rows[a, idx[a + 1 :]]
        pairs += n - 1 - a
        for b in np.flatnonzero(sup != d):
            violations.append(
                (
                    g.vertices[a],
                    g.vertices[a + 1 + b],
                    ScaledDistance(int(sup[b]), i + 1),
                    ScaledDistance(int(d[b]), i + 1),
                )
            )
    if violations:
        logger.warning("Kuratowski map on X_%d fails on %d pairs", i, len(violations))
    return KuratowskiReport(i, i + 1, pairs, violations)


def cycle_witness(g, cycle):
    # side corner against the midpoint of the opposite m_lower -> c edge
    x = Point(g.level, cycle.corners[1])
    y = edge_midpoint(g, cycle.corners[3], cycle.corners[2])
    return DiffFn(x, y)


@dataclass
class SeparationFamily:
    i: int
    members: list
    min_pairwise: ScaledDistance
    max_norm: ScaledDistance
    lattice_level: int
    closest_pair: tuple = None

    @property
    def r(self):
        return ScaledDistance(1, self.i)

    def to_dict(self):
        return {
            "kind": "separation_family",
            "level": self.i,
            "lattice_level": self.lattice_level,
            "r": self.r.to_dict(),
            "size": len(self.members),
            "min_pairwise": None if self.min_pairwise is None else self.min_pairwise.to_dict(),
            "max_norm": self.max_norm.to_dict(),
            "closest_pair": None if self.closest_pair is None else list(self.closest_pair),
            "members": [f.to_dict() for f in self.members],
        }


def separated_family(i, cap=None, progress=False):
    cap = resolve_cap(cap)
    if not 1 <= i <= cap - 2:
        raise PreconditionError("separated_family needs 1 <= i <= cap - 2 = {}, got {}".format(cap - 2, i))
    g = build(i, cap)
    members = [cycle_witness(g, c) for c in g.edge_cycles]
    lattice = EvalLattice(level=i + 2, cap=cap)
    values = np.stack([lattice.values(f) for f in members])
    r_units = SCALE**2

    norms = np.abs(values).max(axis=1)
    k = int(np.argmax(norms))
    if norms[k] >= 2 * r_units:
        raise SeparationError(
            "Member {} has norm {} >= 2r".format(k, ScaledDistance(int(norms[k]), i + 2)), pair=(k, k)
        )

    closest, closest_pair = None, None
    for a in tqdm(range(len(members) - 1), desc="separation X_{}".format(i), disable=not progress):
        d = np.abs(values[a + 1 :] - values[a]).max(axis=1)
        b = int(np.argmin(d))
        if closest is None or d[b] < closest:
            closest, closest_pair = int(d[b]), (a, a + 1 + b)
    if closest is not None and closest < r_units:
        raise SeparationError(
            "Members {} and {} are only {} apart".format(*closest_pair, ScaledDistance(closest, i + 2)),
            pair=closest_pair,
        )

    family = SeparationFamily(
        i=i,
        members=members,
        min_pairwise=None if closest is None else ScaledDistance(closest, i + 2),
        max_norm=ScaledDistance(int(norms.max()), i + 2),
        lattice_level=i + 2,
        closest_pair=closest_pair,
    )
    logger.info(
        "separated_family(%d): %d members, min pairwise %s, max norm %s",
        i,
        len(members),
        family.min_pairwise,
        family.max_norm,
    )
    return family


@dataclass(frozen=True)
class CenterDefeat:
    j: int
    z: Point
    value: ScaledDistance

    def to_dict(self):
        return {"j": self.j, "z": self.z.to_dict(), "value": self.value.to_dict()}


@dataclass
class RefutationCertificate:
    i: int
    r: ScaledDistance
    centers: list
    free_cycle: object
    clearance: str
    witness: DiffFn
    per_center: list
    norm: ScaledDistance
    lattice_level: int

    @property
    def norm_check(self):
        return self.norm < 2 * self.r

    def to_dict(self):
        return {
            "kind": "refutation",
            "level": self.i,
            "r": self.r.to_dict(),
            "lattice_level": self.lattice_level,
            "centers": [[t.to_dict(), s.to_dict()] for t, s in self.centers],
            "free_cycle": self.free_cycle.to_dict(),
            "clearance": self.clearance,
            "witness": self.witness.to_dict(),
            "norm": self.norm.to_dict(),
            "norm_check": self.norm_check,
            "per_center": [d.to_dict() for d in self.per_center],
        }


def _free_cycles(g, lattice, center_points, r_units):
    """Cycles with 2r clearance first, then cycles whose copy holds no center."""
    if center_points:
        rows = np.stack([lattice.row(p) for p in center_points])
    cleared, untouched = [], []
    for cycle in g.edge_cycles:
        if center_points:
            idx = [lattice.graph.index[v] for v in cycle.corners]
            near = int(rows[:, idx].min())
        else:
            near = None
        if near is None or near > 2 * r_units:
            cleared.append((cycle, "2r"))
        elif not any(copy_interior_contains(cycle, p) for p in center_points):
            untouched.append((cycle, "copy"))
    return cleared + untouched


def refute_cover(i, centers, cap=None):
    """Search for f in B(0, 2r) at distance >= r from every g_j = f_(t_j, s_j).

    Returns:
        RefutationCertificate, or None when no free cycle yields one.
    """
    cap = resolve_cap(cap)
    check_level(i, cap)
    if i < 2:
        raise PreconditionError("refute_cover needs i >= 2, got {}".format(i))
    centers = [(t, s) for t, s in centers]
    center_points = list(dict.fromkeys(p for pair in centers for p in pair))
    for p in center_points:
        if p.level > cap - 2:
            raise ResourceLimitError("Center {} is above level cap - 2 = {}".format(p, cap - 2))

    level = 1 + max([i + 1] + [p.level for p in center_points])
    lattice = EvalLattice(center_points, level=level, cap=cap)
    g = build(i, cap)
    r = ScaledDistance(1, i)
    r_units = SCALE ** (level - i)
    center_values = [lattice.values(DiffFn(t, s)) for t, s in centers]

    for cycle, clearance in _free_cycles(g, lattice, center_points, r_units):
        witness = cycle_witness(g, cycle)
        wf = lattice.values(witness)
        per_center = []
        for j, vg in enumerate(center_values):
            gap = np.abs(wf - vg)
            k = int(np.argmax(gap))
            if gap[k] < r_units:
                break
            per_center.append(CenterDefeat(j, lattice.point(k), ScaledDistance(int(gap[k]), level)))
        else:
            cert = RefutationCertificate(
                i=i,
                r=r,
                centers=centers,
                free_cycle=cycle,
                clearance=clearance,
                witness=witness,
                per_center=per_center,
                norm=ScaledDistance(int(np.abs(wf).max()), level),
                lattice_level=level,
            )
            if not cert.norm_check:
                raise ClaimViolation("Witness norm {} is not below 2r".format(cert.norm))
            logger.debug("Refuted %d centers at level %d using cycle %s", len(centers), i, cycle.corners)
            return cert

    logger.info("%d centers at level %d not refuted", len(centers), i)
    return None


def random_centers(i, count, rng, cap=None):
    g = build(i, cap)
    picks = rng.integers(len(g), size=(count, 2))
    return [(Point(i, g.vertices[int(a)]), Point(i, g.vertices[int(b)])) for a, b in picks]


@dataclass
class TrialOutcome:
    trial: int
    centers: list
    certificate: RefutationCertificate

    @property
    def refuted(self):
        return self.certificate is not None


def default_center_count(i):
    return (BRANCHING ** (i - 1) - 1) // 2


def refutation_trials(i, trials, seed, count=None, cap=None, progress=False):
    if count is None:
        count = default_center_count(i)
    rng = np.random.default_rng([seed, i])
    outcomes = []
    for trial in tqdm(range(trials), desc="refutation X_{}".format(i), disable=not progress):
        centers = random_centers(i, count, rng, cap)
        outcomes.append(TrialOutcome(trial, centers, refute_cover(i, centers, cap)))
    refuted = sum(o.refuted for o in outcomes)
    logger.info("refutation_trials(%d): %d/%d refuted with %d centers", i, refuted, trials, count)
    return outcomes


@dataclass(frozen=True)
class GrowthRow:
    level: int
    edge_cycles: int
    packing: int
    ball_radius: ScaledDistance
    min_pairwise: ScaledDistance
    max_norm: ScaledDistance
    x_max_cover: int
    x_cover_exact: bool
    trials: int
    refuted: int


@dataclass
class GrowthTable:
    rows: list
    seed: int
    doubling: dict = field(default_factory=dict)

    def to_frame(self):
        def exact(v):
            return (None, None) if v is None else (v.value, v.unit_exponent)

        return pd.DataFrame(
            {
                "level": [r.level for r in self.rows],
                "edge_cycles": [r.edge_cycles for r in self.rows],
                "packing": [r.packing for r in self.rows],
                "ball_radius_value": [r.ball_radius.value for r in self.rows],
                "ball_radius_unit_exponent": [r.ball_radius.unit_exponent for r in self.rows],
                "min_pairwise_value": [exact(r.min_pairwise)[0] for r in self.rows],
                "min_pairwise_unit_exponent": [exact(r.min_pairwise)[1] for r in self.rows],
                "max_norm_value": [r.max_norm.value for r in self.rows],
                "max_norm_unit_exponent": [r.max_norm.unit_exponent for r in self.rows],
                "x_max_cover": [r.x_max_cover for r in self.rows],
                "x_cover_exact": [r.x_cover_exact for r in self.rows],
                "refutation_trials": [r.trials for r in self.rows],
                "refuted": [r.refuted for r in self.rows],
            }
        )

    def to_dict(self):
        return {
            "seed": self.seed,
            "rows": [
                {
                    "level": r.level,
                    "edge_cycles": r.edge_cycles,
                    "packing": r.packing,
                    "ball_radius": r.ball_radius.to_dict(),
                    "min_pairwise": None if r.min_pairwise is None else r.min_pairwise.to_dict(),
                    "max_norm": r.max_norm.to_dict(),
                    "x_max_cover": r.x_max_cover,
                    "x_cover_exact": r.x_cover_exact,
                    "refutation_trials": r.trials,
                    "refuted": r.refuted,
                }
                for r in self.rows
            ],
        }


def growth_probe(i_max, trials, seed=0, cap=None, work_limit=WORK_LIMIT, exact=True, progress=False):
    """Packing growth inside B(0, 2 * 4^-i) next to the bounded doubling data of X_i."""
    cap = resolve_cap(cap)
    if i_max < 1:
        raise PreconditionError("growth_probe needs i_max >= 1, got {}".format(i_max))
    if i_max > cap - 2:
        raise ResourceLimitError("growth_probe needs i_max <= cap - 2 = {}, got {}".format(cap - 2, i_max))

    rows = []
    reports = {}
    for i in range(1, i_max + 1):
        g = build(i, cap)
        family = separated_family(i, cap, progress=progress)
        doubling = doubling_report(g, work_limit=work_limit, exact=exact, progress=progress)
        check_doubling(doubling)
        reports[i] = doubling
        outcomes = refutation_trials(i, trials, seed, cap=cap, progress=progress) if i >= 2 else []
        rows.append(
            GrowthRow(
                level=i,
                edge_cycles=len(g.edge_cycles),
                packing=len(family.members),
                ball_radius=ScaledDistance(2, i),
                min_pairwise=family.min_pairwise,
                max_norm=family.max_norm,
                x_max_cover=doubling.max_cover_size,
                x_cover_exact=all(e.method == "exact" for e in doubling.entries),
                trials=len(outcomes),
                refuted=sum(o.refuted for o in outcomes),
            )
        )
    return GrowthTable(rows, seed, reports)

