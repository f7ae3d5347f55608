import os
import sys
import json

import numpy as np

from src.errors import PreconditionError, ResourceLimitError
from src.utils.const import CAP_ENV_VAR, DEFAULT_CAP


def print_msg(msg, appendixs=[], warning=False):
    color = "\033[93m"
    end = "\033[0m"
    if warning:
        print_fn = lambda x: print(color + x + end, file=sys.stderr)  # noqa: E731
    else:
        print_fn = lambda x: print(x, file=sys.stderr)  # noqa: E731

    max_len = len(max([msg, *appendixs], key=len))
    max_len = min(max_len, get_terminal_col())
    print_fn("=" * max_len)
    print_fn(msg)
    for appendix in appendixs:
        print_fn(appendix)
    print_fn("=" * max_len)


def resolve_cap(cap=None):
    if cap is None:
        cap = os.environ.get(CAP_ENV_VAR, DEFAULT_CAP)
    try:
        cap = int(cap)
    except (TypeError, ValueError):
        raise PreconditionError("Invalid level cap: {}".format(cap))
    if cap < 0:
        raise PreconditionError("Level cap must be nonnegative, got {}".format(cap))
    return cap


def check_level(level, cap=None, name="level"):
    """Validate a graph level against the configured cap.

    Returns:
        the resolved cap.
    """
    cap = resolve_cap(cap)
    if not isinstance(level, (int, np.integer)) or isinstance(level, bool):
        raise PreconditionError("{} must be an integer, got {!r}".format(name, level))
    if level < 0:
        raise PreconditionError("{} must be nonnegative, got {}".format(name, level))
    if level > cap:
        raise ResourceLimitError(
            "{} {} exceeds the level cap {} (set {} to raise it)".format(
                name, level, cap, CAP_ENV_VAR
            )
        )
    return cap


def get_terminal_col():
    try:
        return os.get_terminal_size().columns
    except OSError:
        return 80


def add_path_suffix(path):
    suffix = 0
    new_path = path
    while os.path.exists(new_path):
        suffix += 1
        new_path = path + "_{}".format(suffix)
    return new_path


def dumps_json(obj):
    return json.dumps(obj, indent=4) + "\n"


def write_text(text, path=None):
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    save_dir = os.path.dirname(path)
    if save_dir:
        os.makedirs(save_dir, exist_ok=True)
    with open(path, "w") as fp:
        fp.write(text)
