"""Average precision of the in-distribution detection task."""

from collections import defaultdict
from dataclasses import dataclass
from typing import Optional
from collections.abc import Sequence

import numpy as np

from oodmetric.core.geometry import Overlap, overlap_matrix
from oodmetric.core.matching import MatchedImage
from oodmetric.structures.detection import ObjectKind


@dataclass
class PrecisionRecall:
    """Precision and recall over confidence-ranked detections of one class.

    Attributes:
        precision: Precision after each ranked detection.
        recall: Recall after each ranked detection.
        ap: Area under the interpolated precision-recall curve; `None` when the class has no ground truth.
    """

    precision: np.ndarray
    recall: np.ndarray
    ap: Optional[float]


def average_precision(recall: np.ndarray, precision: np.ndarray) -> float:
    """All-points interpolated AP: the area under the monotone precision envelope."""
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    i = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[i + 1] - mrec[i]) * mpre[i + 1]))


def _voc_hits(image: MatchedImage, class_id: int, iou_threshold: float) -> dict[int, bool]:
    """Greedy per-class matching of one image, in descending confidence order.

    Each prediction of the class takes the foreground object of the class it overlaps most (lowest index on
    ties). It is a hit iff that IoU reaches `iou_threshold` and the object is not yet taken by a more confident
    prediction.
    """
    preds = [i for i, p in enumerate(image.predictions) if p.label == class_id]
    gts = [j for j, g in enumerate(image.ground_truth) if g.kind is ObjectKind.FG and g.class_id == class_id]
    if not preds:
        return {}
    if not gts:
        return {i: False for i in preds}
    overlaps = overlap_matrix(
        [image.predictions[i].box for i in preds],
        [image.ground_truth[j].box for j in gts],
        [Overlap.IOU] * len(gts),
    )
    confidences = np.array([image.predictions[i].confidence for i in preds])
    taken = np.zeros(len(gts), dtype=bool)
    hits = {}
    for k in np.argsort(-confidences, kind="stable"):
        best = int(np.argmax(overlaps[k]))
        hit = overlaps[k, best] >= iou_threshold and not taken[best]
        if hit:
            taken[best] = True
        hits[preds[k]] = bool(hit)
    return hits


def _ranked_detections(
    images: Sequence[MatchedImage], iou_threshold: float
) -> tuple[dict[int, tuple[list[float], list[bool]]], dict[int, int]]:
    """One pass over the dataset: per predicted class, the confidences and hit flags, plus gt counts."""
    detections: dict[int, tuple[list[float], list[bool]]] = defaultdict(lambda: ([], []))
    positives: dict[int, int] = defaultdict(int)
    for image in images:
        for g in image.ground_truth:
            if g.kind is ObjectKind.FG:
                positives[g.class_id] += 1
        hits = {}
        for c in {p.label for p in image.predictions}:
            hits.update(_voc_hits(image, c, iou_threshold))
        for i, p in enumerate(image.predictions):
            confidences, flags = detections[p.label]
            confidences.append(p.confidence)
            flags.append(hits[i])
    return detections, positives


def _curve(confidences: list[float], hits: list[bool], n_positives: int) -> PrecisionRecall:
    order = np.argsort(-np.array(confidences, dtype=np.float64), kind="stable")
    ranked = np.array(hits, dtype=bool)[order]
    tp = np.cumsum(ranked)
    fp = np.cumsum(~ranked)
    precision = tp / np.maximum(tp + fp, 1)
    if n_positives == 0:
        return PrecisionRecall(precision, np.zeros_like(precision, dtype=np.float64), None)
    recall = tp / n_positives
    return PrecisionRecall(precision, recall, average_precision(recall, precision))


def precision_recall_ap(
    images: Sequence[MatchedImage],
    class_id: int,
    iou_threshold: float = 0.5,
) -> PrecisionRecall:
    """Computes the precision-recall curve and AP of one class over a matched dataset.

    A prediction belongs to the class of its highest score. The predictions of the class are matched to the
    foreground objects of the class image by image, most confident first, independently of the class-agnostic
    matching behind the confusion matrix. A prediction is a true positive iff its best-overlapping object of
    the class has IoU of at least `iou_threshold` and was not already taken; every other prediction of the
    class (duplicates, misses, predictions on OOD objects) is a false positive.

    Args:
        images: The matched dataset.
        class_id: The class to evaluate.
        iou_threshold: IoU a prediction must reach with an object of its class to count as a true positive.

    Returns:
        The curve and its AP (`None` when no ground truth of the class exists).
    """
    detections, positives = _ranked_detections(images, iou_threshold)
    confidences, hits = detections.get(class_id, ([], []))
    return _curve(confidences, hits, positives.get(class_id, 0))


def mean_average_precision(
    images: Sequence[MatchedImage],
    n_classes: int,
    iou_threshold: float = 0.5,
) -> tuple[dict[int, Optional[float]], Optional[float]]:
    """Per-class AP and their mean over the classes that have ground truth (`None` if none has)."""
    detections, positives = _ranked_detections(images, iou_threshold)
    per_class = {}
    for c in range(n_classes):
        confidences, hits = detections.get(c, ([], []))
        per_class[c] = _curve(confidences, hits, positives.get(c, 0)).ap
    defined = [ap for ap in per_class.values() if ap is not None]
    return per_class, (float(np.mean(defined)) if defined else None)
