# Experiment Harness
#
# One train + test evaluation per grid point, every point with the same seed.
# Grids:
# - layer sweep: one row per encoder depth
# - ablations: full, w/o RS, w/o ML, w/o LS, w/o BA

from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import pandas as pd

from config import SailConfig, update_model_config
from errors import ConfigError
from logging_config import get_logger
from evaluation.metrics import EvalReport
from evaluation.report import report_frame, write_json
from runtime.data import VideoSample
from runtime.trainer import evaluate_model, train

logger = get_logger("Experiment")

ABLATIONS: Dict[str, Dict[str, bool]] = {
    "full": {},
    "w/o RS": {"no_region_self_attention": True},
    "w/o ML": {"no_multilevel_cross": True},
    "w/o LS": {"no_local_attention": True},
    "w/o BA": {"no_bidirectional": True},
}

SWEEP_FILES = ("sweep.csv", "sweep.json", "sweep.txt")


def layer_grid(cfg: SailConfig, layers: Sequence[int]) -> List[Tuple[str, SailConfig]]:
    if not layers:
        raise ConfigError("layer sweep needs at least one layer count")
    return [(f"L={n}", update_model_config(cfg, layers=int(n))) for n in layers]


def ablation_grid(cfg: SailConfig) -> List[Tuple[str, SailConfig]]:
    base = update_model_config(
        cfg,
        no_region_self_attention=False,
        no_multilevel_cross=False,
        no_local_attention=False,
        no_bidirectional=False,
    )
    return [(name, update_model_config(base, **flags)) for name, flags in ABLATIONS.items()]


def run_experiment(
    grid: Sequence[Tuple[str, SailConfig]],
    train_set: Sequence[VideoSample],
    valid_set: Sequence[VideoSample],
    test_set: Sequence[VideoSample],
) -> Tuple[pd.DataFrame, Dict[str, EvalReport]]:
    """
    Train and test every configuration of the grid.

    Returns:
        (table with one metric row per configuration, name -> test EvalReport)
    """
    if not grid:
        raise ConfigError("empty experiment grid")
    reports: Dict[str, EvalReport] = {}
    for name, point in grid:
        logger.info(f"running {name}")
        model, log = train(train_set, valid_set, point)
        reports[name] = evaluate_model(model, test_set)
        logger.info(f"{name}: test mIoU={reports[name].miou:.4f} (best epoch {log.best_epoch})")
    return report_frame(reports), reports


def write_sweep(out_dir: Union[str, Path], table: pd.DataFrame, reports: Dict[str, EvalReport]) -> List[Path]:
    """sweep.csv, sweep.json and an aligned sweep.txt in out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path, json_path, txt_path = (out_dir / name for name in SWEEP_FILES)
    table.to_csv(csv_path, float_format="%.6f")
    write_json(json_path, {name: report.model_dump(mode="json") for name, report in reports.items()})
    txt_path.write_text(table.round(2).to_string() + "\n", encoding="utf-8")
    return [csv_path, json_path, txt_path]
