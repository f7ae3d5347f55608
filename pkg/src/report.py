import os
import logging

import pandas as pd

from src.diffset import growth_probe
from src.errors import PreconditionError
from src.utils.const import LIMIT_SPACE_DOUBLING, WORK_LIMIT
from src.utils.func import add_path_suffix, dumps_json, print_msg, write_text

logger = logging.getLogger(__name__)


def build_report(max_level, trials, seed=0, cap=None, work_limit=WORK_LIMIT, exact=True, progress=False):
    """Bounded doubling column of X_i next to the 6^(i-1) packing column of X - X."""
    if max_level < 1:
        raise PreconditionError("report needs max_level >= 1, got {}".format(max_level))
    table = growth_probe(
        max_level, trials, seed=seed, cap=cap, work_limit=work_limit, exact=exact, progress=progress
    )
    summary = {
        "max_level": max_level,
        "seed": seed,
        "balls": "closed",
        "limit_space_constant": LIMIT_SPACE_DOUBLING,
        "growth": table.to_dict()["rows"],
        "doubling": {
            str(level): {
                "max_cover_size": report.max_cover_size,
                "exact": all(e.method == "exact" for e in report.entries),
                "discretization_finding": report.max_cover_size > LIMIT_SPACE_DOUBLING,
            }
            for level, report in table.doubling.items()
        },
    }
    samples = pd.concat([r.to_frame() for r in table.doubling.values()], ignore_index=True)
    return summary, table.to_frame(), samples


def write_report(save_path, summary, growth, samples, overwrite=True):
    if os.path.exists(save_path):
        if overwrite:
            print_msg("Save path {} exists and will be overwritten.".format(save_path), warning=True)
        else:
            new_save_path = add_path_suffix(save_path)
            print_msg(
                "Save path {} exists. New save path is set to {}.".format(save_path, new_save_path),
                warning=True,
            )
            save_path = new_save_path
    os.makedirs(save_path, exist_ok=True)

    header = "# seed={}\n".format(summary["seed"])
    write_text(dumps_json(summary), os.path.join(save_path, "report.json"))
    write_text(header + growth.to_csv(index=False), os.path.join(save_path, "report.csv"))
    write_text(header + samples.to_csv(index=False), os.path.join(save_path, "doubling_samples.csv"))
    with pd.ExcelWriter(os.path.join(save_path, "report.xlsx"), engine="openpyxl") as writer:
        growth.to_excel(writer, sheet_name="growth", index=False)
        samples.to_excel(writer, sheet_name="doubling", index=False)
    logger.info("Report written to %s", save_path)
    return save_path
