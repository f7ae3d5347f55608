import os
import sys
import json
import logging
import argparse

from hydra import compose, initialize_config_dir
from hydra.errors import HydraException
from omegaconf import OmegaConf
from omegaconf.errors import OmegaConfBaseException

from src.covering import assouad_fit, check_doubling, default_scale_pairs, doubling_report
from src.diffset import (
    DiffFn,
    kuratowski_isometry_check,
    linf_norm,
    refutation_trials,
    refute_cover,
    separated_family,
    growth_probe,
)
from src.errors import CertificateError, ClaimViolation, LaaksoError, PreconditionError, UsageError
from src.laakso import Point, build, check_structure, refine
from src.metric import (
    all_pairs,
    clear_row_cache,
    diameter_pair,
    gh_upper_bound,
    hausdorff_gap,
    point_dist,
    unit,
)
from src.report import build_report, write_report
from src.utils.const import COMMANDS, OUTPUT_FORMATS
from src.utils.func import dumps_json, print_msg, write_text
from src.verify import verify_certificate, verify_file

logger = logging.getLogger(__name__)

CONFIG_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "configs")

FORMATS = {
    "build": ["json", "dot", "edgelist"],
    "dist": ["json", "csv"],
    "doubling": ["json", "csv"],
    "assouad": ["json", "csv"],
    "probe": ["json", "csv"],
}


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    common = ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", type=str, help="Output file (directory for report).")
    common.add_argument("--format", type=str, choices=OUTPUT_FORMATS, help="Output format.")
    common.add_argument("--seed", type=int, help="Seed for randomized trials.")
    common.add_argument("--work-limit", type=int, help="Branch-and-bound node limit.")
    common.add_argument("--solver", type=str, choices=["milp", "greedy"], help="Covering solver.")
    common.add_argument("--progress", action="store_true", help="Show progress bars.")
    common.add_argument("--no-overwrite", action="store_true", help="Suffix existing output dirs.")

    parser = ArgumentParser(prog="laakso", description="Exact experiments on Laakso graphs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", parents=[common], help="Construct X_i.")
    p.add_argument("--level", type=int, required=True)

    p = sub.add_parser("dist", parents=[common], help="Point distance or all-pairs matrix.")
    p.add_argument("--level", type=int)
    p.add_argument("--u", type=str)
    p.add_argument("--v", type=str)

    p = sub.add_parser("diam", parents=[common], help="Diameter of X_i.")
    p.add_argument("--level", type=int, required=True)

    p = sub.add_parser("gh-gap", parents=[common], help="Gap certificate of X_i inside X_j.")
    p.add_argument("--from", dest="from_level", type=int, required=True)
    p.add_argument("--to", dest="to_level", type=int, required=True)

    p = sub.add_parser("doubling", parents=[common], help="Doubling report of X_i.")
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--radii", type=int, nargs="+", help="Radius exponents m (radius 4^-m).")

    p = sub.add_parser("assouad", parents=[common], help="Homogeneity exponent fit.")
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--pairs", type=str, nargs="+", help="Scale pairs R:rho as exponents, e.g. 0:2.")
    p.add_argument("--line", action="store_true", help="Restrict to the canonical a -> d branch.")

    p = sub.add_parser("diffset-norm", parents=[common], help="Sup norms of difference functions.")
    p.add_argument("--level", type=int)
    p.add_argument("--x", type=str)
    p.add_argument("--y", type=str)

    p = sub.add_parser("diffset-separate", parents=[common], help="Separated family of X - X.")
    p.add_argument("--level", type=int, required=True)

    p = sub.add_parser("diffset-refute", parents=[common], help="Refute a cover of B(0, 2r).")
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--centers", type=str, help="JSON file with [t, s] point pairs.")
    p.add_argument("--random", type=int, help="Random center pairs per trial.")
    p.add_argument("--trials", type=int)

    p = sub.add_parser("probe", parents=[common], help="Packing growth against doubling data.")
    p.add_argument("--max-level", type=int, required=True)
    p.add_argument("--trials", type=int)

    p = sub.add_parser("verify", parents=[common], help="Re-check a certificate file.")
    p.add_argument("--input", type=str, required=True)

    p = sub.add_parser("report", parents=[common], help="Report bundle up to a level.")
    p.add_argument("--max-level", type=int, required=True)
    p.add_argument("--trials", type=int)
    return parser


def _quote(value):
    return "'" + str(value).replace("\\", "\\\\").replace("'", "\\'") + "'"


def to_overrides(args):
    overrides = ["base.command={}".format(args.command)]
    if args.output is not None:
        overrides.append("base.output={}".format(_quote(args.output)))
    if args.format is not None:
        overrides.append("base.format={}".format(args.format))
    if args.seed is not None:
        overrides.append("base.random_seed={}".format(args.seed))
    if args.progress:
        overrides.append("base.progress=true")
    if args.no_overwrite:
        overrides.append("base.overwrite=false")
    if args.solver is not None:
        overrides.append("solver={}".format(args.solver))
    if args.work_limit is not None:
        overrides.append("solver.work_limit={}".format(args.work_limit))

    for key in ["level", "from_level", "to_level", "max_level", "random", "trials"]:
        value = getattr(args, key, None)
        if value is not None:
            overrides.append("run.{}={}".format(key, value))
    for key in ["u", "v", "x", "y", "centers", "input"]:
        value = getattr(args, key, None)
        if value is not None:
            overrides.append("run.{}={}".format(key, _quote(value)))
    if getattr(args, "radii", None):
        overrides.append("run.radii=[{}]".format(",".join(map(str, args.radii))))
    if getattr(args, "pairs", None):
        overrides.append("run.pairs=[{}]".format(",".join(_quote(p) for p in args.pairs)))
    if getattr(args, "line", False):
        overrides.append("run.subset=line")
    return overrides


def load_config(overrides):
    with initialize_config_dir(config_dir=CONFIG_DIR, version_base="1.1"):
        return compose(config_name="config", overrides=overrides)


def validate(cfg):
    validation_passed = True
    command = cfg.base.command
    cap = cfg.base.cap
    if command not in COMMANDS:
        print("ERROR: Unknown command: {}.".format(command), file=sys.stderr)
        validation_passed = False
    if not isinstance(cap, int) or cap < 0:
        print("ERROR: Invalid level cap: {}. Must be a nonnegative integer.".format(cap), file=sys.stderr)
        validation_passed = False

    fmt = cfg.base.format
    if fmt not in FORMATS.get(command, ["json"]):
        print(
            "ERROR: Format '{}' is not available for {}. Use one of {}.".format(
                fmt, command, FORMATS.get(command, ["json"])
            ),
            file=sys.stderr,
        )
        validation_passed = False

    for key in ["level", "from_level", "to_level", "max_level"]:
        value = cfg.run[key]
        if value is not None and (value < 0 or (isinstance(cap, int) and value > cap)):
            print("ERROR: Invalid '{}': {}. Must be in 0..{}.".format(key, value, cap), file=sys.stderr)
            validation_passed = False
    for key in ["random", "trials"]:
        value = cfg.run[key]
        if value is not None and value < 0:
            print("ERROR: Invalid '{}': {}. Must be nonnegative.".format(key, value), file=sys.stderr)
            validation_passed = False
    if command == "report" and cfg.base.output is None:
        print("ERROR: report writes a directory bundle. Pass -o/--output.", file=sys.stderr)
        validation_passed = False
    if not 0 <= cfg.base.random_seed < 2**64:
        print("ERROR: Invalid seed: {}. Must fit in 64 bits.".format(cfg.base.random_seed), file=sys.stderr)
        validation_passed = False
    return validation_passed


def _meta(cfg):
    return {"command": cfg.base.command, "seed": cfg.base.random_seed, "cap": cfg.base.cap}


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.run[k] is None]
    if missing:
        flags = " --".join(k.replace("_", "-") for k in missing)
        raise UsageError("{} needs --{}".format(cfg.base.command, flags))


def _point(text, level=None):
    p = Point.parse(text)
    if level is not None and ":" not in text:
        p = Point(level, p.vertex)
    return p


def _csv(cfg, frame):
    return "# seed={}\n".format(cfg.base.random_seed) + frame.to_csv(index=False)


def run_build(cfg):
    g = build(cfg.run.level, cfg.base.cap)
    check_structure(g)
    if cfg.base.format == "dot":
        return g.to_dot(), 0
    if cfg.base.format == "edgelist":
        return g.to_edgelist(), 0
    return {**_meta(cfg), **g.to_dict()}, 0


def run_dist(cfg):
    if cfg.run.u is not None or cfg.run.v is not None:
        _require(cfg, "u", "v")
        p, q = _point(cfg.run.u, cfg.run.level), _point(cfg.run.v, cfg.run.level)
        d = point_dist(p, q, cfg.base.cap)
        return {**_meta(cfg), "u": p.to_dict(), "v": q.to_dict(), "distance": d.to_dict()}, 0
    _require(cfg, "level")
    matrix = all_pairs(build(cfg.run.level, cfg.base.cap), cfg.metric.pair_budget, cfg.base.progress)
    if cfg.base.format == "csv":
        return matrix.to_csv(), 0
    return {
        **_meta(cfg),
        "unit_exponent": matrix.unit_exponent,
        "vertices": list(matrix.vertices),
        "values": matrix.values.tolist(),
    }, 0


def run_diam(cfg):
    g = build(cfg.run.level, cfg.base.cap)
    d, pair = diameter_pair(g, cfg.metric.pair_budget, cfg.base.progress)
    return {**_meta(cfg), "level": g.level, "diameter": d.to_dict(), "attained_by": list(pair)}, 0


def run_gh_gap(cfg):
    i, j = cfg.run.from_level, cfg.run.to_level
    cert = hausdorff_gap(i, j, cfg.base.cap)
    bound = gh_upper_bound(i, j, cfg.base.cap)
    return {
        **_meta(cfg),
        "gap_certificate": cert.to_dict(),
        "gh_upper_bound": bound.to_dict(),
        "gh_limit": unit(i).to_dict(),
    }, 0


def run_doubling(cfg):
    g = build(cfg.run.level, cfg.base.cap)
    radii = cfg.run.radii if cfg.run.radii is not None else cfg.covering.radius_exponents
    report = doubling_report(
        g,
        radius_exponents=None if radii is None else list(radii),
        work_limit=cfg.solver.work_limit,
        exact=cfg.solver.exact,
        progress=cfg.base.progress,
    )
    try:
        check_doubling(report, cfg.covering.discretization_limit)
        code = 0
    except ClaimViolation as e:
        logger.error(str(e))
        code = 2
    if cfg.base.format == "csv":
        return _csv(cfg, report.to_frame()), code
    return {**_meta(cfg), **report.to_dict()}, code


def _scale_pair(text):
    try:
        a, b = (int(x) for x in str(text).split(":"))
    except ValueError:
        raise UsageError("Scale pair must look like R:rho exponents, got {!r}".format(text))
    return unit(a), unit(b)


def run_assouad(cfg):
    g = build(cfg.run.level, cfg.base.cap)
    pairs = default_scale_pairs(g.level) if cfg.run.pairs is None else [_scale_pair(p) for p in cfg.run.pairs]
    subset = refine(0, g.level, cfg.base.cap).image if cfg.run.subset == "line" else None
    fit = assouad_fit(
        g,
        pairs,
        subset=subset,
        work_limit=cfg.solver.work_limit,
        exact=cfg.solver.exact,
        progress=cfg.base.progress,
    )
    if cfg.base.format == "csv":
        return _csv(cfg, fit.to_frame()), 0
    return {**_meta(cfg), "subset": cfg.run.subset or "all", **fit.to_dict()}, 0


def run_diffset_norm(cfg):
    if cfg.run.x is not None or cfg.run.y is not None:
        _require(cfg, "x", "y")
        f = DiffFn(_point(cfg.run.x, cfg.run.level), _point(cfg.run.y, cfg.run.level))
        norm = linf_norm(f, cfg.base.cap)
        return {**_meta(cfg), "function": f.to_dict(), "norm": norm.to_dict()}, 0
    _require(cfg, "level")
    report = kuratowski_isometry_check(
        cfg.run.level, cfg.base.cap, cfg.diffset.kuratowski_max_level, cfg.base.progress
    )
    return {**_meta(cfg), **report.to_dict()}, 0 if report.passed else 2


def run_diffset_separate(cfg):
    family = separated_family(cfg.run.level, cfg.base.cap, cfg.base.progress)
    return {**_meta(cfg), "certificate": family.to_dict()}, 0


def load_centers(path):
    with open(path) as fp:
        data = json.load(fp)
    if isinstance(data, dict):
        data = data.get("centers")
    if not isinstance(data, list):
        raise PreconditionError("Centers file {} must hold a list of [t, s] pairs".format(path))
    centers = []
    for pair in data:
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise PreconditionError("Malformed center pair: {!r}".format(pair))
        centers.append(tuple(Point.parse(p) if isinstance(p, str) else Point.from_dict(p) for p in pair))
    return centers


def _checked(cert, cfg):
    result = verify_certificate(cert.to_dict(), cfg.base.cap)
    if not result.ok:
        raise CertificateError("Emitted certificate fails verification: {}".format(result.mismatches))


def run_diffset_refute(cfg):
    i = cfg.run.level
    if cfg.run.random is None:
        _require(cfg, "centers")
        cert = refute_cover(i, load_centers(cfg.run.centers), cfg.base.cap)
        payload = {
            **_meta(cfg),
            "level": i,
            "refuted": cert is not None,
            "certificate": None if cert is None else cert.to_dict(),
        }
        if cert is not None:
            _checked(cert, cfg)
        return payload, 0

    trials = cfg.run.trials if cfg.run.trials is not None else 1
    outcomes = refutation_trials(
        i, trials, cfg.base.random_seed, count=cfg.run.random, cap=cfg.base.cap, progress=cfg.base.progress
    )
    for o in outcomes:
        if o.refuted:
            _checked(o.certificate, cfg)
    payload = {
        **_meta(cfg),
        "level": i,
        "centers_per_trial": cfg.run.random,
        "refuted": sum(o.refuted for o in outcomes),
        "trials": [
            {
                "trial": o.trial,
                "refuted": o.refuted,
                "certificate": None if o.certificate is None else o.certificate.to_dict(),
            }
            for o in outcomes
        ],
    }
    return payload, 0


def run_probe(cfg):
    trials = cfg.run.trials if cfg.run.trials is not None else cfg.diffset.trials
    table = growth_probe(
        cfg.run.max_level,
        trials,
        seed=cfg.base.random_seed,
        cap=cfg.base.cap,
        work_limit=cfg.solver.work_limit,
        exact=cfg.solver.exact,
        progress=cfg.base.progress,
    )
    if cfg.base.format == "csv":
        return _csv(cfg, table.to_frame()), 0
    return {**_meta(cfg), **table.to_dict()}, 0


def run_verify(cfg):
    result = verify_file(cfg.run.input, cfg.base.cap)
    if result.ok:
        print_msg("Certificate verified: {} checks".format(result.checked))
    else:
        print_msg("Certificate verification failed", result.mismatches, warning=True)
    return {**_meta(cfg), **result.to_dict()}, 0 if result.ok else 2


def run_report(cfg):
    trials = cfg.run.trials if cfg.run.trials is not None else cfg.diffset.trials
    summary, growth, samples = build_report(
        cfg.run.max_level,
        trials,
        seed=cfg.base.random_seed,
        cap=cfg.base.cap,
        work_limit=cfg.solver.work_limit,
        exact=cfg.solver.exact,
        progress=cfg.base.progress,
    )
    summary = {**_meta(cfg), **summary}
    save_path = write_report(cfg.base.output, summary, growth, samples, cfg.base.overwrite)
    print_msg("Report bundle saved to {}".format(save_path))
    return None, 0


DISPATCH = {
    "build": run_build,
    "dist": run_dist,
    "diam": run_diam,
    "gh-gap": run_gh_gap,
    "doubling": run_doubling,
    "assouad": run_assouad,
    "diffset-norm": run_diffset_norm,
    "diffset-separate": run_diffset_separate,
    "diffset-refute": run_diffset_refute,
    "probe": run_probe,
    "verify": run_verify,
    "report": run_report,
}


def emit(cfg, payload):
    if payload is None:
        return
    text = payload if isinstance(payload, str) else dumps_json(payload)
    write_text(text, cfg.base.output)


def run(argv=None):
    """Run one command; returns 0 on success, 2 on a failed claim, 1 otherwise."""
    logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(to_overrides(args))
        logger.debug("Composed config:\n%s", OmegaConf.to_yaml(cfg))

        if not validate(cfg):
            print_msg("Argument validation failed. Exiting.", warning=True)
            return 1

        payload, code = DISPATCH[cfg.base.command](cfg)
        emit(cfg, payload)
        return code
    except ClaimViolation as e:
        logger.error("Claim violated: %s", e)
        return 2
    except (LaaksoError, OSError, ValueError, HydraException, OmegaConfBaseException) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return 1
    finally:
        clear_row_cache()


def cli():
    sys.exit(run())


if __name__ == "__main__":
    cli()
