"""The confidence-threshold classifier and the extended confusion matrix it populates.

A detection whose maximum class confidence falls below `t_id_bg` is background, one in
`[t_id_bg, t_id_fg)` is an OOD object, and one at or above `t_id_fg` is in-distribution foreground.
Crossing these predicted categories with the actual kind of the matched object yields the cells below.

| actual, predicted   | ID_BG  | OOD    | ID_FG  |
|---------------------|--------|--------|--------|
| BG (no object)      | (TN)   | FO_N   | FP     |
| OOD                 | FN_O   | TO     | FP_O   |
| FG                  | FN     | FO_P   | TP     |

True negatives are not tracked: they are the countless background anchors a detector never reports.
"""

import math
from dataclasses import dataclass, field, fields
from enum import IntEnum
from collections.abc import Iterable, Sequence

import numpy as np

from oodmetric.core.matching import MatchedImage, MatchResult
from oodmetric.errors import InputError, InvariantError
from oodmetric.structures.detection import GroundTruthObject, Prediction


class PredictedCategory(IntEnum):
    """Category assigned to a detection by thresholding its confidence. Ordered `ID_BG < OOD < ID_FG`."""

    ID_BG = 0
    OOD = 1
    ID_FG = 2


@dataclass(frozen=True)
class ThresholdConfig:
    """The operating point of the threshold classifier.

    Attributes:
        t_id_bg: Lower threshold separating background from OOD.
        t_id_fg: Upper threshold separating OOD from foreground.
    """

    t_id_bg: float
    t_id_fg: float

    def __post_init__(self):
        if not 0.0 <= self.t_id_bg <= self.t_id_fg <= 1.0:
            raise InputError(
                f"thresholds must satisfy 0 <= t_id_bg <= t_id_fg <= 1, got ({self.t_id_bg}, {self.t_id_fg})"
            )


def classify(confidence: float, cfg: ThresholdConfig) -> PredictedCategory:
    """Assigns a category to a confidence; intervals are left-closed and a confidence of 1 is foreground."""
    if not (math.isfinite(confidence) and 0.0 <= confidence <= 1.0):
        raise InputError(f"confidence must lie in [0, 1], got {confidence}")
    if confidence < cfg.t_id_bg:
        return PredictedCategory.ID_BG
    if confidence < cfg.t_id_fg:
        return PredictedCategory.OOD
    return PredictedCategory.ID_FG


@dataclass
class ExtendedConfusionMatrix:
    """Counters of the extended confusion matrix. A mergeable accumulator: `a + b` sums cell-wise.

    Attributes:
        tp: FG object detected as foreground.
        fn_: FG object not detected (unmatched, or matched only by a background-level prediction).
        fp: Prediction on no object, classified foreground.
        to: OOD object detected as OOD (true OOD).
        fn_o: OOD object not detected.
        fo_n: Prediction on no object, classified OOD.
        fo_p: FG object detected as OOD.
        fp_o: OOD object detected as foreground.
    """

    tp: int = 0
    fn_: int = 0
    fp: int = 0
    to: int = 0
    fn_o: int = 0
    fo_n: int = 0
    fo_p: int = 0
    fp_o: int = 0

    def __post_init__(self):
        if any(v < 0 for v in self.cells().values()):
            raise InputError(f"confusion matrix cells must be non-negative, got {self.cells()}")

    @classmethod
    def zero(cls) -> "ExtendedConfusionMatrix":
        return cls()

    def cells(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def as_dict(self) -> dict[str, object]:
        """Cells keyed by their conventional names, with the untracked TN reported as `"n/a"`."""
        return {
            "TP": self.tp,
            "FN": self.fn_,
            "FP": self.fp,
            "TO": self.to,
            "FN_O": self.fn_o,
            "FO_N": self.fo_n,
            "FO_P": self.fo_p,
            "FP_O": self.fp_o,
            "TN": "n/a",
        }

    def __add__(self, other: "ExtendedConfusionMatrix") -> "ExtendedConfusionMatrix":
        return merge(self, other)

    @property
    def n_fg_objects(self) -> int:
        return self.tp + self.fn_ + self.fo_p

    @property
    def n_ood_objects(self) -> int:
        return self.to + self.fn_o + self.fp_o

    @property
    def n_spurious(self) -> int:
        """Unmatched predictions above background level."""
        return self.fp + self.fo_n

    def check_conservation(self, n_fg: int, n_ood: int, n_spurious: int) -> None:
        """Raises `InvariantError` unless the cells account for every object and spurious prediction."""
        if (self.n_fg_objects, self.n_ood_objects, self.n_spurious) != (n_fg, n_ood, n_spurious):
            raise InvariantError(
                f"conservation violated: cells give (fg={self.n_fg_objects}, ood={self.n_ood_objects}, "
                f"spurious={self.n_spurious}), expected (fg={n_fg}, ood={n_ood}, spurious={n_spurious})"
            )


def merge(a: ExtendedConfusionMatrix, b: ExtendedConfusionMatrix) -> ExtendedConfusionMatrix:
    """Cell-wise sum of two matrices."""
    return ExtendedConfusionMatrix(**{name: v + getattr(b, name) for name, v in a.cells().items()})


# (actual kind is OOD, predicted category) -> cell
_MATCHED_CELL = {
    (False, PredictedCategory.ID_FG): "tp",
    (False, PredictedCategory.OOD): "fo_p",
    (False, PredictedCategory.ID_BG): "fn_",
    (True, PredictedCategory.OOD): "to",
    (True, PredictedCategory.ID_FG): "fp_o",
    (True, PredictedCategory.ID_BG): "fn_o",
}


def accumulate(
    match: MatchResult,
    preds: Sequence[Prediction],
    gts: Sequence[GroundTruthObject],
    cfg: ThresholdConfig,
) -> ExtendedConfusionMatrix:
    """Populates the extended confusion matrix of one image from its matching.

    Matched pairs land in the cell given by the object's actual kind and the prediction's category.
    Unmatched objects count as undetected. Unmatched predictions count as FP or FO_N according to their
    category; background-level ones are true negatives and are not counted.
    """
    counts = ExtendedConfusionMatrix.zero().cells()
    for i, j, _ in match.pairs:
        counts[_MATCHED_CELL[gts[j].is_ood, classify(preds[i].confidence, cfg)]] += 1
    for j in match.unmatched_ground_truth:
        counts["fn_o" if gts[j].is_ood else "fn_"] += 1
    for i in match.unmatched_predictions:
        category = classify(preds[i].confidence, cfg)
        if category is PredictedCategory.ID_FG:
            counts["fp"] += 1
        elif category is PredictedCategory.OOD:
            counts["fo_n"] += 1
    return ExtendedConfusionMatrix(**counts)


def accumulate_images(images: Iterable[MatchedImage], cfg: ThresholdConfig) -> ExtendedConfusionMatrix:
    """Map-per-image, reduce-by-merge over a matched dataset."""
    total = ExtendedConfusionMatrix.zero()
    for image in images:
        total = total + accumulate(image.result, image.predictions, image.ground_truth, cfg)
    return total


def _sorted(values: Iterable[float]) -> np.ndarray:
    return np.sort(np.fromiter(values, dtype=np.float64))


@dataclass
class ScoredOutcomes:
    """The threshold-independent content of a matched dataset.

    Matching does not depend on the thresholds, so once it is done the confusion matrix at any operating
    point follows from these sorted confidence populations alone.

    Attributes:
        fg_matched: Confidences of predictions matched to FG objects, sorted.
        ood_matched: Confidences of predictions matched to OOD objects, sorted.
        unmatched: Confidences of unmatched predictions, sorted.
        fg_missed: Number of FG objects no prediction matched.
        ood_missed: Number of OOD objects no prediction matched.
    """

    fg_matched: np.ndarray = field(default_factory=lambda: np.empty(0))
    ood_matched: np.ndarray = field(default_factory=lambda: np.empty(0))
    unmatched: np.ndarray = field(default_factory=lambda: np.empty(0))
    fg_missed: int = 0
    ood_missed: int = 0

    @classmethod
    def from_images(cls, images: Iterable[MatchedImage]) -> "ScoredOutcomes":
        fg, ood, unmatched = [], [], []
        fg_missed = ood_missed = 0
        for image in images:
            preds, gts = image.predictions, image.ground_truth
            for i, j, _ in image.result.pairs:
                (ood if gts[j].is_ood else fg).append(preds[i].confidence)
            unmatched.extend(preds[i].confidence for i in image.result.unmatched_predictions)
            n_ood_missed = sum(1 for j in image.result.unmatched_ground_truth if gts[j].is_ood)
            ood_missed += n_ood_missed
            fg_missed += len(image.result.unmatched_ground_truth) - n_ood_missed
        return cls(_sorted(fg), _sorted(ood), _sorted(unmatched), fg_missed, ood_missed)

    def __add__(self, other: "ScoredOutcomes") -> "ScoredOutcomes":
        return ScoredOutcomes(
            np.sort(np.concatenate([self.fg_matched, other.fg_matched])),
            np.sort(np.concatenate([self.ood_matched, other.ood_matched])),
            np.sort(np.concatenate([self.unmatched, other.unmatched])),
            self.fg_missed + other.fg_missed,
            self.ood_missed + other.ood_missed,
        )

    @property
    def n_fg_objects(self) -> int:
        return len(self.fg_matched) + self.fg_missed

    @property
    def n_ood_objects(self) -> int:
        return len(self.ood_matched) + self.ood_missed

    def band_counts(self, t_id_bg: np.ndarray, t_id_fg: np.ndarray) -> dict[str, np.ndarray]:
        """Counts every cell for arrays of threshold pairs at once.

        Returns:
            Cell name to an integer array shaped like the (broadcast) threshold arrays.
        """
        t_bg, t_fg = np.broadcast_arrays(
            np.asarray(t_id_bg, dtype=np.float64),
            np.asarray(t_id_fg, dtype=np.float64),
        )

        def _bands(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
            below_bg = np.searchsorted(scores, t_bg, side="left")
            below_fg = np.searchsorted(scores, t_fg, side="left")
            return below_bg, below_fg - below_bg, len(scores) - below_fg

        fg_bg, fg_ood, fg_fg = _bands(self.fg_matched)
        ood_bg, ood_ood, ood_fg = _bands(self.ood_matched)
        _, un_ood, un_fg = _bands(self.unmatched)
        return {
            "tp": fg_fg,
            "fn_": fg_bg + self.fg_missed,
            "fp": un_fg,
            "to": ood_ood,
            "fn_o": ood_bg + self.ood_missed,
            "fo_n": un_ood,
            "fo_p": fg_ood,
            "fp_o": ood_fg,
        }

    def confusion(self, cfg: ThresholdConfig) -> ExtendedConfusionMatrix:
        """The extended confusion matrix at one operating point; equals accumulating image by image."""
        counts = self.band_counts(np.array(cfg.t_id_bg), np.array(cfg.t_id_fg))
        return ExtendedConfusionMatrix(**{name: int(v) for name, v in counts.items()})
