"""Command-line interface: `oodmetric {eval,sweep,hist,toy,gradcheck}`.

Exit codes: 0 on success, 1 on invalid input or diverged training, 2 on an internal invariant violation.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional
from collections.abc import Sequence

from oodmetric.core.matching import MatchConfig, MatchedImage, match_dataset
from oodmetric.core.suite import Evaluator
from oodmetric.core.taxonomy import ThresholdConfig
from oodmetric.errors import InputError, InvariantError, TrainingError
from oodmetric.io import check_class_range, parse_ground_truth, parse_predictions
from oodmetric.loss.gradcheck import run_gradcheck
from oodmetric.metrics.histogram import confidence_histogram, write_histogram_csv
from oodmetric.report import emit_report
from oodmetric.sweep import sweep_thresholds
from oodmetric.toylab.experiment import ToyConfig, ToyRun, compare, median_s, run_experiment

logger = logging.getLogger(__name__)


def _load(args: argparse.Namespace) -> tuple[list[MatchedImage], int]:
    with open(args.gt) as f:
        ground_truth = parse_ground_truth(f)
    with open(args.pred) as f:
        pred_file = parse_predictions(f)
    n_classes = pred_file.n_classes
    if n_classes is None:
        n_classes = 1 + max((g.class_id for g in ground_truth if g.class_id is not None), default=0)
    check_class_range(ground_truth, n_classes)
    cfg = MatchConfig(overlap_threshold=getattr(args, "iou", 0.5), iop_for_ood=getattr(args, "iop_for_ood", False))
    images = match_dataset(pred_file.predictions, ground_truth, cfg, nproc=getattr(args, "nproc", 1))
    return images, n_classes


def _write(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_eval(args: argparse.Namespace) -> None:
    """Evaluates at a fixed operating point."""
    images, n_classes = _load(args)
    if args.hist is not None:
        with open(args.hist, "w", newline="") as f:
            write_histogram_csv(confidence_histogram(images), f)
    evaluator = Evaluator(
        thresholds=ThresholdConfig(args.t_bg, args.t_fg),
        n_classes=n_classes,
        match=MatchConfig(overlap_threshold=args.iou, iop_for_ood=args.iop_for_ood),
        beta=args.beta,
        method=args.method,
    )
    agg = evaluator.new()
    agg.update_matched(images)
    report = agg.report()
    report.histogram = args.hist
    _write(emit_report(report, args.format), args.report)


def cmd_sweep(args: argparse.Namespace) -> None:
    """Prints the best operating point of the threshold grid as JSON."""
    images, _ = _load(args)
    result = sweep_thresholds(images, beta=args.beta, step=args.step)
    best = result.best_scores
    out = {
        "grid_size": len(result),
        "best": {
            "t_id_bg": result.best.t_id_bg,
            "t_id_fg": result.best.t_id_fg,
            "s": best.s,
            "obs": best.obs,
            "ofs": best.ofs,
            "beta": best.beta,
        },
        "cells": result.best_matrix.as_dict(),
    }
    sys.stdout.write(json.dumps(out, indent=2) + "\n")


def cmd_hist(args: argparse.Namespace) -> None:
    """Writes the confidence histogram CSV."""
    images, _ = _load(args)
    with open(args.out, "w", newline="") as f:
        write_histogram_csv(confidence_histogram(images), f)


def _run_summary(runs: Sequence[ToyRun]) -> list[dict[str, float]]:
    return [
        {
            "seed": r.seed,
            "s": r.evaluation.scores.s,
            "obs": r.evaluation.scores.obs,
            "ofs": r.evaluation.scores.ofs,
            "t_id_bg": r.evaluation.thresholds.t_id_bg,
            "t_id_fg": r.evaluation.thresholds.t_id_fg,
            "entropy_gap": r.evaluation.entropy_gap,
            "final_loss": r.trace[-1],
        }
        for r in runs
    ]


def cmd_toy(args: argparse.Namespace) -> None:
    """Runs the synthetic experiment over consecutive seeds and prints per-seed and median results."""
    cfg = ToyConfig.load(args.config) if args.config else ToyConfig()
    if args.seeds < 1:
        raise InputError(f"--seeds must be at least 1, got {args.seeds}")
    seeds = [cfg.seed + k for k in range(args.seeds)]
    if args.no_me:
        baseline = run_experiment(cfg, seeds, use_me=False)
        out = {"baseline": _run_summary(baseline), "median_s_baseline": median_s(baseline)}
    else:
        comparison = compare(cfg, seeds)
        out = {
            "baseline": _run_summary(comparison.baseline),
            "me": _run_summary(comparison.me),
            "median_s_baseline": comparison.median_s_baseline,
            "median_s_me": comparison.median_s_me,
            "median_gap_baseline": comparison.median_gap_baseline,
            "median_gap_me": comparison.median_gap_me,
            "s_ratio": comparison.s_ratio,
        }
    sys.stdout.write(json.dumps(out, indent=2) + "\n")


def cmd_gradcheck(args: argparse.Namespace) -> None:
    """Finite-difference check of the ME gradient; fails with an invariant error."""
    report = run_gradcheck(trials=args.trials, seed=args.seed)
    out = {
        "trials": report.trials,
        "skipped": report.skipped,
        "max_relative_error": report.max_relative_error,
        "passed": report.passed(),
    }
    sys.stdout.write(json.dumps(out, indent=2) + "\n")
    if not report.passed():
        raise InvariantError(f"gradient check failed: max relative error {report.max_relative_error:.3g}")


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gt", required=True, help="ground-truth records")
    p.add_argument("--pred", required=True, help="prediction records")


def build_parser() -> argparse.ArgumentParser:
    """The argument parser of the `oodmetric` command."""
    parser = argparse.ArgumentParser(prog="oodmetric", description="Open-set detection evaluation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate at a fixed operating point")
    _add_data_args(p)
    p.add_argument("--t-bg", type=float, required=True)
    p.add_argument("--t-fg", type=float, required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--iop-for-ood", action="store_true")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--report", default=None, help="write the report here instead of stdout")
    p.add_argument("--hist", default=None, help="also write the confidence histogram CSV here")
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.add_argument("--method", default="", help="label of the evaluated model")
    p.add_argument("--nproc", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="search the operating point with the highest S")
    _add_data_args(p)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--beta", type=float, default=1.0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("hist", help="write the confidence histogram CSV")
    _add_data_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("toy", help="run the synthetic baseline-versus-ME experiment")
    p.add_argument("--config", default=None, help="YAML experiment config")
    p.add_argument("--no-me", action="store_true", help="only run the cross-entropy baseline")
    p.add_argument("--seeds", type=int, default=5)
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("gradcheck", help="verify the ME loss gradient by finite differences")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        format="%(asctime)s - %(levelname)s - %(name)s - %(message)s",
        level=logging.DEBUG if args.verbose else logging.INFO,
    )
    try:
        args.func(args)
    except (InputError, TrainingError) as e:
        logger.error("%s", e)
        return 1
    except InvariantError as e:
        logger.error("invariant violated: %s", e)
        return 2
    except OSError as e:
        logger.error("%s", e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
