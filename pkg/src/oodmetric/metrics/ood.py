"""Threshold-integrated OOD metrics: AUROC and FPR at a fixed TPR.

Both treat in-distribution scores as the positive class. At detection level the number of true negatives
depends on how many anchors a detector evaluates, which makes these metrics setup-dependent. Here they
are computed on matched-object populations only: confidences of predictions matched to FG objects (ID)
against those matched to OOD objects.
"""

from collections.abc import Sequence

import numpy as np
from scipy.stats import rankdata

from oodmetric.core.matching import MatchedImage
from oodmetric.errors import InputError

FPR_CAVEAT = (
    "FPR@95TPR and AUROC are computed on matched-object score populations (ID = matched to FG objects, "
    "OOD = matched to OOD objects); detection-level true negatives are not tracked, so these values are "
    "setup-dependent and only comparable within one evaluation protocol."
)


def _check_scores(id_scores: Sequence[float], ood_scores: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(id_scores, dtype=np.float64)
    y = np.asarray(ood_scores, dtype=np.float64)
    if x.size == 0 or y.size == 0:
        raise InputError("ID and OOD score lists must both be non-empty")
    if not (np.all((x >= 0) & (x <= 1)) and np.all((y >= 0) & (y <= 1))):
        raise InputError("scores must lie in [0, 1]")
    return x, y


def auroc(id_scores: Sequence[float], ood_scores: Sequence[float]) -> float:
    """Probability that a random ID score exceeds a random OOD score, ties counting half.

    This is the Mann-Whitney rank statistic normalized by the number of pairs.
    """
    x, y = _check_scores(id_scores, ood_scores)
    ranks = rankdata(np.concatenate([x, y]))
    u = ranks[: x.size].sum() - x.size * (x.size + 1) / 2.0
    return float(u / (x.size * y.size))


def fpr_at_tpr(id_scores: Sequence[float], ood_scores: Sequence[float], tpr_target: float = 0.95) -> float:
    """False positive rate at the strictest threshold whose true positive rate reaches `tpr_target`.

    A score passes threshold `t` when it is at least `t`. Candidate thresholds are the distinct ID scores;
    the highest one passing at least `tpr_target` of the ID scores is chosen, and the fraction of OOD
    scores passing it is returned.
    """
    if not 0.0 < tpr_target <= 1.0:
        raise InputError(f"TPR target must be in (0, 1], got {tpr_target}")
    x, y = _check_scores(id_scores, ood_scores)
    x_sorted = np.sort(x)
    candidates = np.unique(x)[::-1]
    tpr = (x.size - np.searchsorted(x_sorted, candidates, side="left")) / x.size
    t = candidates[int(np.argmax(tpr >= tpr_target))]
    return float(np.count_nonzero(y >= t) / y.size)


def id_ood_scores(images: Sequence[MatchedImage]) -> tuple[list[float], list[float]]:
    """Confidences of predictions matched to FG objects and to OOD objects."""
    id_scores: list[float] = []
    ood_scores: list[float] = []
    for image in images:
        for i, j, _ in image.result.pairs:
            target = ood_scores if image.ground_truth[j].is_ood else id_scores
            target.append(image.predictions[i].confidence)
    return id_scores, ood_scores
