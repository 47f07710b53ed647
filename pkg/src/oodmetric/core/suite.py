"""Streaming evaluation: feed images one at a time or in batches, merge partial aggregators, compute at the end."""

import math
from dataclasses import dataclass, field
from typing import Optional, Protocol
from collections.abc import Sequence

from oodmetric.core.matching import MatchConfig, MatchedImage, match_image
from oodmetric.core.taxonomy import ThresholdConfig
from oodmetric.errors import InputError
from oodmetric.report import EvalReport, build_report
from oodmetric.structures.detection import GroundTruthObject, Prediction


class Aggregator(Protocol):
    """Accumulates a stream of images and computes metrics over everything seen so far."""

    def update_single(self, preds: Sequence[Prediction], gts: Sequence[GroundTruthObject]) -> None:
        """Update the aggregator with the predictions and ground truth of one image."""
        raise NotImplementedError()

    def update_batch(self, images: Sequence[tuple[Sequence[Prediction], Sequence[GroundTruthObject]]]) -> None:
        """Update the aggregator with several images."""
        for preds, gts in images:
            self.update_single(preds, gts)

    def reset(self) -> None:
        """Reset the aggregator to its initialization state."""
        raise NotImplementedError()

    def compute(self) -> dict[str, float]:
        """Compute the metrics from the aggregator."""
        raise NotImplementedError()


@dataclass(frozen=True)
class Evaluator:
    """Everything needed to evaluate a detection dataset at one operating point.

    Attributes:
        thresholds: The operating point.
        n_classes: Number of foreground classes, for mAP.
        match: Matching configuration.
        beta: The $\\beta$ of S.
        method: Label of the evaluated model.
    """

    thresholds: ThresholdConfig
    n_classes: int
    match: MatchConfig = field(default_factory=MatchConfig)
    beta: float = 1.0
    method: str = ""

    def __post_init__(self):
        if self.n_classes < 1:
            raise InputError(f"n_classes must be positive, got {self.n_classes}")
        if not self.beta > 0:
            raise InputError(f"beta must be positive, got {self.beta}")

    def new(self) -> "EvalAggregator":
        """Create a new, empty aggregator."""
        return EvalAggregator(self)


def _number(value: Optional[float]) -> float:
    return math.nan if value is None else float(value)


def flatten(report: EvalReport) -> dict[str, float]:
    """The numeric content of a report as a flat mapping; undefined values are NaN."""
    metrics = {name.lower(): float(v) for name, v in report.matrix.as_dict().items() if name != "TN"}
    metrics.update(
        {
            "obs": report.scores.obs,
            "ofs": report.scores.ofs,
            report.scores.name: report.scores.s,
            "map50": _number(report.map50),
            "auroc": _number(report.auroc),
            "fpr95": _number(report.fpr95),
        }
    )
    metrics.update({f"ap-{c}": _number(ap) for c, ap in report.ap.items()})
    return metrics


class EvalAggregator(Aggregator):
    """Aggregator of an `Evaluator`: matches each image on arrival and keeps the matched images."""

    def __init__(self, evaluator: Evaluator):
        self.evaluator = evaluator
        self.images: list[MatchedImage] = []

    def update_single(self, preds: Sequence[Prediction], gts: Sequence[GroundTruthObject]) -> None:
        image_ids = {p.image_id for p in preds} | {g.image_id for g in gts}
        image_id = next(iter(image_ids)) if image_ids else f"#{len(self.images)}"
        self.images.append(
            MatchedImage(image_id, list(preds), list(gts), match_image(preds, gts, self.evaluator.match))
        )

    def update_matched(self, images: Sequence[MatchedImage]) -> None:
        """Update the aggregator with images that are already matched."""
        self.images.extend(images)

    def merge(self, other: "EvalAggregator") -> "EvalAggregator":
        """A new aggregator holding the images of both, this one's first."""
        if other.evaluator != self.evaluator:
            raise InputError("cannot merge aggregators of different evaluators")
        merged = EvalAggregator(self.evaluator)
        merged.images = self.images + other.images
        return merged

    def reset(self) -> None:
        self.images = []

    def __len__(self):
        return len(self.images)

    def report(self) -> EvalReport:
        e = self.evaluator
        return build_report(
            self.images,
            e.thresholds,
            e.n_classes,
            beta=e.beta,
            method=e.method,
            config={
                "overlap_threshold": e.match.overlap_threshold,
                "iop_for_ood": e.match.iop_for_ood,
                "beta": e.beta,
                "n_classes": e.n_classes,
            },
        )

    def compute(self) -> dict[str, float]:
        return flatten(self.report())

