"""One-to-one assignment of predictions to ground-truth objects, image by image."""

import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from collections.abc import Sequence

import numpy as np

from oodmetric.core._problem import GreedyMatchingProblem
from oodmetric.core.geometry import Overlap, overlap_matrix
from oodmetric.errors import InputError
from oodmetric.structures.detection import GroundTruthObject, Prediction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MatchConfig:
    """Configuration of the matching step.

    Attributes:
        overlap_threshold: Minimum overlap for a prediction to claim a ground truth, in `(0, 1]`.
        iop_for_ood: Use intersection-over-prediction instead of IoU for OOD ground truth, so that
            fragments of a large OOD object still match it.
    """

    overlap_threshold: float = 0.5
    iop_for_ood: bool = False

    def __post_init__(self):
        if not 0.0 < self.overlap_threshold <= 1.0:
            raise InputError(f"overlap threshold must be in (0, 1], got {self.overlap_threshold}")

    def measure_for(self, gt: GroundTruthObject) -> Overlap:
        return Overlap.IOP if (self.iop_for_ood and gt.is_ood) else Overlap.IOU


@dataclass
class MatchResult:
    """The outcome of matching one image.

    Attributes:
        pairs: `(prediction index, ground-truth index, overlap)` triples, in matching order.
        unmatched_predictions: Indices of predictions that claimed no ground truth, ascending.
        unmatched_ground_truth: Indices of ground truths claimed by no prediction, ascending.
    """

    pairs: list[tuple[int, int, float]] = field(default_factory=list)
    unmatched_predictions: list[int] = field(default_factory=list)
    unmatched_ground_truth: list[int] = field(default_factory=list)


@dataclass
class MatchedImage:
    """One image's predictions and ground truth together with their matching."""

    image_id: str
    predictions: Sequence[Prediction]
    ground_truth: Sequence[GroundTruthObject]
    result: MatchResult


def _check_single_image(preds: Sequence[Prediction], gts: Sequence[GroundTruthObject]) -> None:
    image_ids = {p.image_id for p in preds} | {g.image_id for g in gts}
    if len(image_ids) > 1:
        raise InputError(f"records of one image expected, got image ids {sorted(image_ids)}")


def match_image(
    preds: Sequence[Prediction],
    gts: Sequence[GroundTruthObject],
    cfg: MatchConfig = MatchConfig(),
) -> MatchResult:
    """Greedily matches the predictions of one image to its ground-truth objects.

    Predictions are visited by descending confidence (ties: lower original index first); each one takes
    the unmatched ground truth with the highest overlap, if that overlap reaches `cfg.overlap_threshold`.
    Matching is class-agnostic. Foreground ground truth is always compared by IoU; OOD ground truth by
    IoU, or by IoP when `cfg.iop_for_ood` is set.

    Args:
        preds: Predictions of a single image.
        gts: Ground-truth objects of the same image.
        cfg: Matching configuration.

    Returns:
        The one-to-one matching.
    """
    _check_single_image(preds, gts)
    gram = overlap_matrix([p.box for p in preds], [g.box for g in gts], [cfg.measure_for(g) for g in gts])
    order = np.argsort(-np.array([p.confidence for p in preds], dtype=np.float64), kind="stable")
    pairs = list(GreedyMatchingProblem(gram, cfg.overlap_threshold, order).solve())
    matched_preds = {i for i, _, _ in pairs}
    matched_gts = {j for _, j, _ in pairs}
    return MatchResult(
        pairs=pairs,
        unmatched_predictions=[i for i in range(len(preds)) if i not in matched_preds],
        unmatched_ground_truth=[j for j in range(len(gts)) if j not in matched_gts],
    )


def group_by_image(
    predictions: Sequence[Prediction],
    ground_truth: Sequence[GroundTruthObject],
) -> list[tuple[str, list[Prediction], list[GroundTruthObject]]]:
    """Splits a dataset into images, in order of first appearance (ground truth first, then predictions)."""
    groups: dict[str, tuple[list[Prediction], list[GroundTruthObject]]] = {}
    for g in ground_truth:
        groups.setdefault(g.image_id, ([], []))[1].append(g)
    for p in predictions:
        groups.setdefault(p.image_id, ([], []))[0].append(p)
    return [(image_id, preds, gts) for image_id, (preds, gts) in groups.items()]


def _match_group(
    image_id: str, preds: list[Prediction], gts: list[GroundTruthObject], cfg: MatchConfig
) -> MatchedImage:
    return MatchedImage(image_id, preds, gts, match_image(preds, gts, cfg))


def match_dataset(
    predictions: Sequence[Prediction],
    ground_truth: Sequence[GroundTruthObject],
    cfg: MatchConfig = MatchConfig(),
    nproc: int = 1,
) -> list[MatchedImage]:
    """Matches every image of a dataset.

    Images are independent, so with `nproc > 1` they are matched in a process pool. The result is in
    image order and identical to the serial one.
    """
    groups = group_by_image(predictions, ground_truth)
    logger.info("matching %d images (%d predictions, %d objects)", len(groups), len(predictions), len(ground_truth))
    if nproc <= 1 or len(groups) < 2:
        return [_match_group(image_id, preds, gts, cfg) for image_id, preds, gts in groups]
    with Pool(processes=nproc) as pool:
        return pool.starmap(
            _match_group,
            [(image_id, preds, gts, cfg) for image_id, preds, gts in groups],
            chunksize=max(1, len(groups) // (4 * nproc)),
        )
