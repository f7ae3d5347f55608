DEFAULT_CAP = 6
CAP_ENV_VAR = "LAAKSO_CAP"

# edge length ratio between consecutive levels and copies per substitution
SCALE = 4
BRANCHING = 6

# pattern vertices and the oriented edge each copy index replaces
PATTERN_VERTICES = ("a", "b", "m_upper", "m_lower", "c", "d")
PATTERN_EDGES = (
    ("a", "b"),
    ("b", "m_upper"),
    ("b", "m_lower"),
    ("m_upper", "c"),
    ("m_lower", "c"),
    ("c", "d"),
)
START, END = "a", "d"
INTERIOR_VERTICES = ("b", "m_upper", "m_lower", "c")

# copy indices along a -> b -> m_upper -> c -> d
CANONICAL_BRANCH = (0, 1, 3, 5)
CANONICAL_NAMES = ("b", "m_upper", "c")

# mirror symmetry of the pattern
MIRROR_COPY = (5, 3, 4, 1, 2, 0)
MIRROR_VERTEX = {
    "a": "d",
    "b": "c",
    "m_upper": "m_upper",
    "m_lower": "m_lower",
    "c": "b",
    "d": "a",
}

PAIR_BUDGET = 10**8
# memory for cached BFS rows of one level
ROW_CACHE_BYTES = 64 * 2**20
ROW_CACHE_MIN_ROWS = 16
WORK_LIMIT = 10**7
DOUBLING_LIMIT = 8
LIMIT_SPACE_DOUBLING = 6

OUTPUT_FORMATS = ["json", "csv", "dot", "edgelist"]
COMMANDS = [
    "build",
    "dist",
    "diam",
    "gh-gap",
    "doubling",
    "assouad",
    "diffset-norm",
    "diffset-separate",
    "diffset-refute",
    "probe",
    "verify",
    "report",
]
