"""Independent checker for refutation and separation certificates.

Every claimed value is recomputed from raw graph distances. Distances come
from scipy's csgraph on the adjacency of the rebuilt graph; nothing here
calls the search or distance code that produced the certificate.
"""

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from src.errors import PreconditionError
from src.laakso import Point, build
from src.utils.const import BRANCHING, SCALE

logger = logging.getLogger(__name__)


@dataclass
class VerificationResult:
    kind: str
    checked: int = 0
    mismatches: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.mismatches

    def fail(self, msg):
        logger.error("certificate mismatch: %s", msg)
        self.mismatches.append(msg)

    def to_dict(self):
        return {"kind": self.kind, "ok": self.ok, "checked": self.checked, "mismatches": self.mismatches}


@lru_cache(maxsize=8)
def _adjacency(level, cap):
    g = build(level, cap)
    rows = [g.index[u] for u, _ in g.edges]
    cols = [g.index[v] for _, v in g.edges]
    n = len(g.vertices)
    adjacency = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return g, adjacency


def _distance_rows(level, labels, cap):
    g, adjacency = _adjacency(level, cap)
    labels = list(dict.fromkeys(labels))
    found = csgraph.shortest_path(
        adjacency, directed=False, unweighted=True, indices=[g.vertex_index(v) for v in labels]
    )
    if not np.isfinite(found).all():
        raise PreconditionError("X_{} is disconnected".format(level))
    return g, {v: np.rint(row).astype(np.int64) for v, row in zip(labels, found)}


def _point(data):
    return Point.from_dict(data)


def _exact(data):
    try:
        value, exponent = int(data["value"]), int(data["unit_exponent"])
    except (KeyError, TypeError, ValueError):
        raise PreconditionError("Malformed exact value: {!r}".format(data))
    return Fraction(value, SCALE**exponent)


def verify_refutation(data, cap=None):
    result = VerificationResult("refutation")
    try:
        i = int(data["level"])
        x, y = _point(data["witness"]["x"]), _point(data["witness"]["y"])
        centers = [(_point(t), _point(s)) for t, s in data["centers"]]
        claims = [(int(c["j"]), _point(c["z"]), _exact(c["value"])) for c in data["per_center"]]
        corners = list(data["free_cycle"]["corners"])
        claimed_r, claimed_norm = _exact(data["r"]), _exact(data["norm"])
    except (KeyError, TypeError, ValueError) as e:
        raise PreconditionError("Malformed refutation certificate: {}".format(e))

    r = Fraction(1, SCALE**i)
    if claimed_r != r:
        result.fail("r is {} instead of 4^-{}".format(claimed_r, i))

    defining = [x, y] + [p for pair in centers for p in pair]
    level = max([1 + max(p.level for p in defining)] + [z.level for _, z, _ in claims])
    g, rows = _distance_rows(level, [p.vertex for p in defining], cap)
    unit = Fraction(1, SCALE**level)

    f = rows[x.vertex] - rows[y.vertex]
    norm = int(np.abs(f).max()) * unit
    result.checked += 1
    if norm != claimed_norm:
        result.fail("witness norm is {} but {} is claimed".format(norm, claimed_norm))
    if not norm < 2 * r:
        result.fail("witness norm {} is not below 2r = {}".format(norm, 2 * r))

    defeated = set()
    for j, z, claimed in claims:
        result.checked += 1
        if not 0 <= j < len(centers):
            result.fail("per-center entry refers to missing center {}".format(j))
            continue
        t, s = centers[j]
        k = g.vertex_index(z.vertex)
        value = abs(int(f[k]) - int(rows[t.vertex][k] - rows[s.vertex][k])) * unit
        if value != claimed:
            result.fail("center {}: |f - g| at {} is {} but {} is claimed".format(j, z, value, claimed))
        if value < r:
            result.fail("center {}: |f - g| at {} is {} < r".format(j, z, value))
        defeated.add(j)
    for j in sorted(set(range(len(centers))) - defeated):
        result.fail("center {} has no witness point".format(j))

    coarse, _ = _adjacency(i, cap)
    ring = list(zip(corners, corners[1:] + corners[:1]))
    if len(corners) != 4 or any(not coarse.graph.has_edge(u, v) for u, v in ring):
        result.fail("free cycle {} is not a 4-cycle of X_{}".format(corners, i))
    elif x.vertex not in corners:
        result.fail("witness x = {} is not a corner of the free cycle".format(x))
    return result


def verify_family(data, cap=None):
    result = VerificationResult("separation_family")
    try:
        i = int(data["level"])
        members = [(_point(m["x"]), _point(m["y"])) for m in data["members"]]
        claimed_norm = _exact(data["max_norm"])
        claimed_min = None if data["min_pairwise"] is None else _exact(data["min_pairwise"])
    except (KeyError, TypeError, ValueError) as e:
        raise PreconditionError("Malformed separation family: {}".format(e))

    r = Fraction(1, SCALE**i)
    expected = BRANCHING ** (i - 1) if i >= 1 else 0
    if len(members) != expected:
        result.fail("family has {} members, X_{} has {} edge cycles".format(len(members), i, expected))
    if not members:
        return result

    level = 1 + max(p.level for pair in members for p in pair)
    _, rows = _distance_rows(level, [p.vertex for pair in members for p in pair], cap)
    unit = Fraction(1, SCALE**level)
    values = np.stack([rows[x.vertex] - rows[y.vertex] for x, y in members])

    norm = int(np.abs(values).max()) * unit
    result.checked += len(members)
    if norm != claimed_norm:
        result.fail("max norm is {} but {} is claimed".format(norm, claimed_norm))
    if not norm < 2 * r:
        result.fail("max norm {} is not below 2r = {}".format(norm, 2 * r))

    closest = None
    for a in range(len(members)):
        for b in range(a + 1, len(members)):
            result.checked += 1
            d = int(np.abs(values[a] - values[b]).max()) * unit
            if d < r:
                result.fail("members {} and {} are {} < r apart".format(a, b, d))
            closest = d if closest is None else min(closest, d)
    if closest != claimed_min:
        result.fail("min pairwise distance is {} but {} is claimed".format(closest, claimed_min))
    return result


def verify_certificate(data, cap=None):
    kind = data.get("kind") if isinstance(data, dict) else None
    if kind == "refutation":
        return verify_refutation(data, cap)
    if kind == "separation_family":
        return verify_family(data, cap)
    raise PreconditionError("Unknown certificate kind: {!r}".format(kind))


def verify_file(path, cap=None):
    with open(path) as fp:
        data = json.load(fp)
    # command outputs wrap the certificate next to run metadata
    if isinstance(data, dict) and "trials" in data:
        merged = VerificationResult("refutation_trials")
        for trial in data["trials"]:
            if trial.get("certificate") is None:
                continue
            found = verify_certificate(trial["certificate"], cap)
            merged.checked += found.checked
            merged.mismatches.extend("trial {}: {}".format(trial.get("trial"), m) for m in found.mismatches)
        return merged
    if isinstance(data, dict) and "certificate" in data:
        data = data["certificate"]
    if data is None:
        raise PreconditionError("File holds no certificate (nothing was refuted)")
    return verify_certificate(data, cap)
