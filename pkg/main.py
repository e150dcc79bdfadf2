"""
Self-Attention Interaction Localizer - Main Entry Point

Usage:
    python main.py synth --seed 7 --out runs/corpus
    python main.py train --data runs/corpus --out runs/train --epochs 30
    python main.py eval --data runs/corpus --checkpoint runs/train/model.ckpt --out runs/eval
    python main.py eval --data runs/corpus --baseline random --seed 7 --out runs/random
    python main.py gradcheck --out runs/gradcheck
    python main.py predict --data runs/corpus --checkpoint runs/train/model.ckpt --sample-id v00000-0-q0
    python main.py sweep --data runs/corpus --layers 1..7 --out runs/layers
    python main.py sweep --data runs/corpus --ablations --out runs/ablations

Progress goes to stderr; results go to files in --out, plus a short summary on stdout.
Every run writes resolved_config.json and run_spec.json next to its outputs.
"""

import argparse
import sys
import traceback
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from config import (
    DEFAULT_OUT_DIR,
    RESOLVED_CONFIG_FILE,
    RUN_SPEC_FILE,
    RunConfig,
    RunSpec,
    load_config_document,
    load_run_config,
    update_model_config,
)
from errors import (
    EXIT_MISSING_FILE,
    EXIT_OK,
    EXIT_UNEXPECTED,
    ConfigError,
    DataError,
    GradCheckFailed,
    SailError,
)
from logging_config import get_logger, setup_logging

from bench_graph import create_benchmark_graph
from databench.corpus_io import corpus_file, read_corpus, write_corpus, write_manifest
from databench.queries import random_boxes
from evaluation.baselines import flp_baseline, random_baseline
from evaluation.metrics import iou
from evaluation.report import render_table, write_json
from model.region_encoder import ImageQuery
from model.sail import create_sail_model
from numeric.gradcheck import grad_check
from numeric.rng import STREAM_GRADCHECK, RngState
from runtime.checkpoint import load_checkpoint, save_checkpoint
from runtime.data import VideoSample, fit_sample
from runtime.experiment import ablation_grid, layer_grid, run_experiment, write_sweep
from runtime.trainer import evaluate_model, train

logger = get_logger("CLI")

CHECKPOINT_FILE = "model.ckpt"

# Flag name -> SailConfig field
MODEL_FLAGS = {
    "window": "window",
    "heads": "heads",
    "lr": "lr",
    "batch": "batch",
    "epochs": "epochs",
    "max_steps": "max_steps",
    "decode": "decode",
    "threads": "threads",
    "seed": "seed",
}
ABLATION_FLAGS = {
    "no_rs": "no_region_self_attention",
    "no_ml": "no_multilevel_cross",
    "no_ls": "no_local_attention",
    "no_ba": "no_bidirectional",
}
# Arguments that pick inputs or the kind of run rather than model settings
RUN_ARGUMENTS = ("data", "checkpoint", "split", "baseline", "sample_id", "ablations", "tol", "max_entries")

# End-to-end gradient audit size: n=6 frames, m=3 regions, d=8, H=2, L=1, w=2
MICRO_FRAMES = 6
MICRO_REGIONS = 3
MICRO_DIMS = dict(d_f=8, d_r=8, d_g=8, d_model=8, heads=2, layers=1, window=2, d_ff=32)


# ----------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------

def parse_layers(text: str) -> List[int]:
    """'1..7' -> [1, ..., 7]; '1,3,5' -> [1, 3, 5]; '2' -> [2]."""
    try:
        if ".." in text:
            lo, hi = (int(part) for part in text.split("..", 1))
            values = list(range(lo, hi + 1))
        else:
            values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid layer list '{text}'") from e
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"layer counts must be positive, got '{text}'")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="JSON config file (sections: model, bench)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Dotted override, e.g. --set model.lr=0.001 (repeatable)")
    common.add_argument("--seed", type=int, default=None, help="Run seed (unsigned 64-bit)")
    common.add_argument("--out", type=str, default=None, help=f"Output directory (default: {DEFAULT_OUT_DIR})")
    common.add_argument("--threads", type=int, default=None, help="Worker threads (default 1)")
    common.add_argument("--debug", action="store_true", help="Debug logging and tracebacks")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--window", type=int, default=None, help="Local self-attention radius w")
    model.add_argument("--heads", type=int, default=None, help="Attention heads H")
    model.add_argument("--lr", type=float, default=None, help="Adam learning rate")
    model.add_argument("--batch", type=int, default=None, help="Mini-batch size")
    model.add_argument("--epochs", type=int, default=None)
    model.add_argument("--max-steps", dest="max_steps", type=int, default=None)
    model.add_argument("--no-rs", action="store_true", help="Ablation: no region self-attention")
    model.add_argument("--no-ml", action="store_true", help="Ablation: cross-attention only in the last layer")
    model.add_argument("--no-ls", action="store_true", help="Ablation: global instead of local self-attention")
    model.add_argument("--no-ba", action="store_true", help="Ablation: no bi-directional aggregation")
    model.add_argument("--decode", choices=["independent", "constrained"], default=None)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", type=str, required=True, help="Corpus directory written by synth")

    parser = argparse.ArgumentParser(
        description="Self-Attention Interaction Localizer - image-queried activity localization"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", parents=[common], help="Generate the planted-activity corpus")

    train_parser = sub.add_parser("train", parents=[common, model, data], help="Train and save a checkpoint")
    train_parser.add_argument("--layers", type=int, default=None, help="Encoder layers L")

    eval_parser = sub.add_parser("eval", parents=[common, model, data], help="Evaluate a checkpoint or a baseline")
    eval_parser.add_argument("--checkpoint", type=str, default=None)
    eval_parser.add_argument("--split", choices=["train", "valid", "test"], default="test")
    eval_parser.add_argument("--baseline", choices=["random", "flp"], default=None)
    eval_parser.add_argument("--layers", type=int, default=None)

    gradcheck_parser = sub.add_parser("gradcheck", parents=[common, model], help="Finite-difference gradient audit")
    gradcheck_parser.add_argument("--max-entries", dest="max_entries", type=int, default=None,
                           help="Check at most this many entries per parameter")
    gradcheck_parser.add_argument("--tol", type=float, default=1e-4)

    predict_parser = sub.add_parser("predict", parents=[common, model, data], help="Localize one sample")
    predict_parser.add_argument("--checkpoint", type=str, required=True)
    predict_parser.add_argument("--split", choices=["train", "valid", "test"], default="test")
    predict_parser.add_argument("--sample-id", dest="sample_id", type=str, default=None,
                         help="Sample to localize (default: first of the split)")

    sweep_parser = sub.add_parser("sweep", parents=[common, model, data], help="Layer sweep or ablation table")
    grid = sweep_parser.add_mutually_exclusive_group(required=True)
    grid.add_argument("--layers", type=parse_layers, default=None, help="e.g. 1..7 or 1,2,4")
    grid.add_argument("--ablations", action="store_true")

    return parser


# ----------------------------------------------------------------------
# Config resolution
# ----------------------------------------------------------------------

def explicit_flags(args: argparse.Namespace) -> Dict[str, Any]:
    """SailConfig changes requested by flags, in a stable order."""
    changes: Dict[str, Any] = {}
    for flag, field in MODEL_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            changes[field] = value
    layers = getattr(args, "layers", None)
    if isinstance(layers, int):
        changes["layers"] = layers
    for flag, field in ABLATION_FLAGS.items():
        if getattr(args, flag, False):
            changes[field] = True
    return changes


def run_arguments(args: argparse.Namespace) -> Dict[str, Any]:
    """Non-model arguments as given, keyed by argparse dest; off switches are left out."""
    found: Dict[str, Any] = {}
    for dest in RUN_ARGUMENTS:
        value = getattr(args, dest, None)
        if value is not None and value is not False:
            found[dest] = value
    layers = getattr(args, "layers", None)
    if isinstance(layers, list):
        found["layers"] = ",".join(str(n) for n in layers)
    return found


def checkpoint_path(args: argparse.Namespace) -> Optional[str]:
    """The checkpoint whose parameters this run evaluates, if any."""
    if getattr(args, "baseline", None) is not None:
        return None
    return getattr(args, "checkpoint", None)


def resolve(args: argparse.Namespace) -> RunConfig:
    """
    defaults -> --config -> --set -> explicit flags

    Runs over a checkpoint start from the checkpoint's model config instead of the
    defaults; model keys given in --config, --set or flags are applied on top.
    """
    cfg = load_run_config(args.config, args.overrides)
    changes = explicit_flags(args)
    checkpoint = checkpoint_path(args)
    if checkpoint is not None:
        requested = load_config_document(args.config, args.overrides).get("model", {})
        model_cfg = update_model_config(load_checkpoint(checkpoint).config, **{**requested, **changes})
        return RunConfig(model=model_cfg, bench=cfg.bench)
    if changes:
        cfg = RunConfig(model=update_model_config(cfg.model, **changes), bench=cfg.bench)
    return cfg


def write_run_files(out_dir: Path, args: argparse.Namespace, cfg: RunConfig) -> None:
    spec = RunSpec(
        subcommand=args.command,
        config_path=args.config,
        overrides=list(args.overrides),
        seed=cfg.model.seed,
        out_dir=str(out_dir),
        flags=explicit_flags(args),
        arguments=run_arguments(args),
    )
    write_json(out_dir / RESOLVED_CONFIG_FILE, cfg)
    write_json(out_dir / RUN_SPEC_FILE, spec)


def replay_argv(spec: RunSpec, config_path: Union[str, Path], out_dir: Union[str, Path]) -> List[str]:
    """
    Command line that repeats a recorded run from its resolved config.

    The resolved config already carries every model setting, so only the
    recorded arguments are passed again.
    """
    argv = [spec.subcommand, "--config", str(config_path), "--out", str(out_dir)]
    for dest, value in spec.arguments.items():
        option = "--" + dest.replace("_", "-")
        if value is True:
            argv.append(option)
        else:
            argv.extend([option, str(value)])
    return argv


def load_split(data_dir: str, split: str):
    path = corpus_file(data_dir, split)
    samples = read_corpus(path)
    logger.info(f"loaded {len(samples)} {split} samples from {path}")
    return samples


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------

def cmd_synth(args: argparse.Namespace, cfg: RunConfig, out_dir: Path) -> int:
    graph = create_benchmark_graph(cfg.bench, debug=args.debug)
    result = graph.run(cfg.model.seed)
    for split in ("train", "valid", "test"):
        write_corpus(corpus_file(out_dir, split), result[split], cfg.bench.float_decimals)
    write_manifest(out_dir, result["manifest"])

    counts = {name: stats.samples for name, stats in result["manifest"].splits.items()}
    print(f"corpus written to {out_dir}: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK


def cmd_train(args: argparse.Namespace, cfg: RunConfig, out_dir: Path) -> int:
    train_set = load_split(args.data, "train")
    valid_set = load_split(args.data, "valid")
    model, log = train(train_set, valid_set, cfg.model)

    save_checkpoint(out_dir / CHECKPOINT_FILE, model.params, cfg.model)
    write_json(out_dir / "train_log.json", log)
    log.to_frame().to_csv(out_dir / "train_log.csv", float_format="%.6f")

    best = f"{log.best_valid_miou:.4f}" if log.best_valid_miou is not None else "n/a"
    print(f"checkpoint {out_dir / CHECKPOINT_FILE} (best epoch {log.best_epoch}, valid mIoU {best})")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, cfg: RunConfig, out_dir: Path) -> int:
    samples = load_split(args.data, args.split)
    if args.baseline == "random":
        name, report = "Random", random_baseline(samples, cfg.model.seed)
    elif args.baseline == "flp":
        name, report = "FLP", flp_baseline(load_split(args.data, "train"), samples, cfg.model)
    else:
        if not args.checkpoint:
            raise ConfigError("eval needs --checkpoint or --baseline")

        model = create_sail_model(cfg.model, load_checkpoint(args.checkpoint).tensors)
        name, report = "SAIL", evaluate_model(model, samples)

    write_json(out_dir / "eval_report.json", report)
    table = render_table({name: report})
    (out_dir / "eval_report.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return EXIT_OK


def micro_sample(rng: np.random.Generator):
    d = MICRO_DIMS["d_f"]
    query = ImageQuery(
        regions=rng.standard_normal((MICRO_REGIONS, d)),
        boxes=random_boxes(MICRO_REGIONS, rng),
        global_feature=rng.standard_normal(d),
    )
    return VideoSample(sample_id="micro", frames=rng.standard_normal((MICRO_FRAMES, d)), s=2, e=4, query=query)


def cmd_gradcheck(args: argparse.Namespace, cfg: RunConfig, out_dir: Path) -> int:
    micro_cfg = update_model_config(cfg.model, **MICRO_DIMS)
    model = create_sail_model(micro_cfg)
    rng = RngState(micro_cfg.seed).stream(STREAM_GRADCHECK)
    sample = micro_sample(rng)

    report = grad_check(lambda: model.sample_loss(sample), model.params, tol=args.tol,
                        max_entries=args.max_entries, rng=rng)
    write_json(out_dir / "gradcheck.json", report)
    print(f"max relative error {report.max_error:.3e} ({report.worst_param}) over "
          f"{report.checked_entries} entries: {'PASS' if report.passed else 'FAIL'}")
    if not report.passed:
        raise GradCheckFailed(f"max relative error {report.max_error:.3e} >= {report.tol:g}")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace, cfg: RunConfig, out_dir: Path) -> int:
    samples = load_split(args.data, args.split)
    if not samples:
        raise DataError(f"split '{args.split}' is empty")
    if args.sample_id is None:
        sample = samples[0]
    else:
        matches = [s for s in samples if s.sample_id == args.sample_id]
        if not matches:
            raise DataError(f"no sample '{args.sample_id}' in split '{args.split}'")
        sample = matches[0]

    model = create_sail_model(cfg.model, load_checkpoint(args.checkpoint).tensors)
    pred = model.forward(sample)
    fitted = fit_sample(sample, cfg.model.n_max)

    write_json(out_dir / "prediction.json", {
        "id": sample.sample_id,
        "s": pred.s,
        "e": pred.e,
        "target": [fitted.s, fitted.e],
        "iou": iou((pred.s, pred.e), (fitted.s, fitted.e)),
        "p_s": pred.p_s.tolist(),
        "p_e": pred.p_e.tolist(),
        "cross_attention": None if pred.cross_attention is None else pred.cross_attention.tolist(),
    })
    print(f"{pred.s} {pred.e}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, cfg: RunConfig, out_dir: Path) -> int:
    grid = ablation_grid(cfg.model) if args.ablations else layer_grid(cfg.model, args.layers)
    table, reports = run_experiment(
        grid,
        load_split(args.data, "train"),
        load_split(args.data, "valid"),
        load_split(args.data, "test"),
    )
    write_sweep(out_dir, table, reports)
    print(table.round(2).to_string())
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "predict": cmd_predict,
    "sweep": cmd_sweep,
}


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(debug=args.debug)
    try:
        cfg = resolve(args)
        out_dir = Path(args.out or DEFAULT_OUT_DIR)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_run_files(out_dir, args, cfg)
        return COMMANDS[args.command](args, cfg, out_dir)
    except SailError as e:
        logger.error(f"{type(e).__name__}: {e}")
        if args.debug:
            traceback.print_exc()
        return e.exit_code
    except FileNotFoundError as e:
        logger.error(f"missing file: {e.filename or e}")
        return EXIT_MISSING_FILE
    except Exception as e:
        logger.error(f"unexpected error: {e}")
        if args.debug:
            traceback.print_exc()
        return EXIT_UNEXPECTED


def main() -> int:
    return dispatch(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
