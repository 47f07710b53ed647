"""Evaluation reports: everything measured at one operating point, as JSON or as a plain-text table."""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Optional
from collections.abc import Sequence

from oodmetric.core.matching import MatchedImage
from oodmetric.core.taxonomy import ExtendedConfusionMatrix, ThresholdConfig, accumulate_images
from oodmetric.errors import InputError, InvariantError
from oodmetric.io import check_class_range
from oodmetric.metrics.detection import mean_average_precision
from oodmetric.metrics.ood import FPR_CAVEAT, auroc, fpr_at_tpr, id_ood_scores
from oodmetric.metrics.separability import SeparabilityScores, separability

logger = logging.getLogger(__name__)

_CELLS = ("TP", "FN", "FP", "TO", "FN_O", "FO_N", "FO_P", "FP_O", "TN")


@dataclass
class DatasetCounts:
    """Sizes of the evaluated dataset, counted from the records rather than from the confusion matrix."""

    images: int = 0
    predictions: int = 0
    fg_objects: int = 0
    ood_objects: int = 0
    unmatched_non_bg: int = 0


@dataclass
class EvalReport:
    """All metrics of a dataset at one operating point.

    Attributes:
        method: Label of the evaluated model, shown in the table.
        thresholds: The operating point.
        matrix: The extended confusion matrix.
        scores: OBS, OFS and S.
        ap: AP per class, `None` for classes without ground truth.
        map50: Mean AP over classes with ground truth at IoU 0.5, or `None`.
        auroc: AUROC of matched FG against matched OOD confidences, `None` when either is empty.
        fpr95: FPR at 95% TPR on the same populations, `None` when either is empty.
        counts: Dataset sizes.
        histogram: Path the confidence histogram was written to, if any.
        config: Echo of the evaluation settings.
    """

    method: str
    thresholds: ThresholdConfig
    matrix: ExtendedConfusionMatrix
    scores: SeparabilityScores
    ap: dict[int, Optional[float]]
    map50: Optional[float]
    auroc: Optional[float]
    fpr95: Optional[float]
    counts: DatasetCounts
    histogram: Optional[str] = None
    config: dict[str, Any] = field(default_factory=dict)

    def check(self) -> None:
        """Raises `InvariantError` if S does not recompute from OBS and OFS or conservation fails."""
        s = separability(self.scores.obs, self.scores.ofs, self.scores.beta)
        if s != self.scores.s:
            raise InvariantError(f"S={self.scores.s} does not recompute from OBS/OFS (got {s})")
        self.matrix.check_conservation(self.counts.fg_objects, self.counts.ood_objects, self.counts.unmatched_non_bg)

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "thresholds": {"t_id_bg": self.thresholds.t_id_bg, "t_id_fg": self.thresholds.t_id_fg},
            "beta": self.scores.beta,
            "s": self.scores.s,
            "obs": self.scores.obs,
            "ofs": self.scores.ofs,
            "cells": self.matrix.as_dict(),
            "ap": {str(c): ap for c, ap in self.ap.items()},
            "map50": self.map50,
            "auroc": self.auroc,
            "fpr95": self.fpr95,
            "fpr_caveat": FPR_CAVEAT,
            "counts": vars(self.counts).copy(),
            "histogram": self.histogram,
            "config": self.config,
        }


def _count(images: Sequence[MatchedImage], thresholds: ThresholdConfig) -> DatasetCounts:
    counts = DatasetCounts(images=len(images))
    for image in images:
        counts.predictions += len(image.predictions)
        n_ood = sum(1 for g in image.ground_truth if g.is_ood)
        counts.ood_objects += n_ood
        counts.fg_objects += len(image.ground_truth) - n_ood
        counts.unmatched_non_bg += sum(
            1 for i in image.result.unmatched_predictions if image.predictions[i].confidence >= thresholds.t_id_bg
        )
    return counts


def build_report(
    images: Sequence[MatchedImage],
    thresholds: ThresholdConfig,
    n_classes: int,
    beta: float = 1.0,
    method: str = "",
    histogram: Optional[str] = None,
    config: Optional[dict[str, Any]] = None,
) -> EvalReport:
    """Evaluates a matched dataset at `thresholds` and checks the result.

    Raises:
        InputError: A foreground object has a class outside `[0, n_classes)`.
        InvariantError: The confusion matrix does not conserve the dataset counts.
    """
    check_class_range((g for image in images for g in image.ground_truth), n_classes)
    matrix = accumulate_images(images, thresholds)
    per_class, map50 = mean_average_precision(images, n_classes, iou_threshold=0.5)
    id_scores, ood_scores = id_ood_scores(images)
    has_both = bool(id_scores) and bool(ood_scores)
    report = EvalReport(
        method=method,
        thresholds=thresholds,
        matrix=matrix,
        scores=SeparabilityScores.from_matrix(matrix, beta),
        ap=per_class,
        map50=map50,
        auroc=auroc(id_scores, ood_scores) if has_both else None,
        fpr95=fpr_at_tpr(id_scores, ood_scores, 0.95) if has_both else None,
        counts=_count(images, thresholds),
        histogram=histogram,
        config=dict(config or {}),
    )
    report.check()
    s = report.scores
    logger.info("%s: S=%.4f OBS=%.4f OFS=%.4f", method or "report", s.s, s.obs, s.ofs)
    return report


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.3f}"


def _table(header: Sequence[str], row: Sequence[str]) -> list[str]:
    widths = [max(len(h), len(v)) for h, v in zip(header, row)]
    return [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip(),
    ]


def format_table(report: EvalReport) -> str:
    """Method, S, OBS, OFS and mAP@0.5, then the confusion-matrix cells, then the threshold-free OOD metrics."""
    s = report.scores
    lines = _table(
        ["Method", "S", "OBS", "OFS", "mAP@0.5"],
        [report.method or "-", _fmt(s.s), _fmt(s.obs), _fmt(s.ofs), _fmt(report.map50)],
    )
    cells = report.matrix.as_dict()
    lines += [""] + _table(list(_CELLS), [str(cells[c]) for c in _CELLS])
    lines += [""] + _table(["AUROC", "FPR@95TPR"], [_fmt(report.auroc), _fmt(report.fpr95)])
    return "\n".join(lines) + "\n"


def emit_report(report: EvalReport, fmt: str = "json") -> str:
    """Serializes a report as `"json"` or as a `"table"`."""
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2) + "\n"
    if fmt == "table":
        return format_table(report)
    raise InputError(f"unknown report format {fmt!r}")
