"""Finite-difference verification of the analytic ME loss gradient."""

import logging
from dataclasses import dataclass

import numpy as np

from oodmetric.loss.meloss import entropy_from_logits, me_loss_from_logits, me_loss_grad

logger = logging.getLogger(__name__)

KINK_TOLERANCE = 1e-6


@dataclass
class GradCheckReport:
    """Outcome of a gradient check run.

    Attributes:
        trials: Number of random batches compared.
        skipped: Batches excluded for lying within `KINK_TOLERANCE` of the hinge kink.
        max_relative_error: Largest relative error over the compared batches.
    """

    trials: int
    skipped: int
    max_relative_error: float

    def passed(self, tolerance: float = 1e-5) -> bool:
        return self.max_relative_error < tolerance


def numerical_gradient(
    fg_logits: np.ndarray, ood_logits: np.ndarray, margin: float, h: float = 1e-5
) -> tuple[np.ndarray, np.ndarray]:
    """Central differences of the ME loss with respect to every logit."""
    grads = []
    for target in (fg_logits, ood_logits):
        grad = np.zeros_like(target)
        for idx in np.ndindex(target.shape):
            orig = target[idx]
            target[idx] = orig + h
            plus = me_loss_from_logits(fg_logits, ood_logits, margin)
            target[idx] = orig - h
            minus = me_loss_from_logits(fg_logits, ood_logits, margin)
            target[idx] = orig
            grad[idx] = (plus - minus) / (2 * h)
        grads.append(grad)
    return grads[0], grads[1]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """`max|a - n|` scaled by the magnitude of the larger gradient."""
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-12)
    return float(np.abs(analytic - numeric).max() / scale)


def _gap(fg_logits: np.ndarray, ood_logits: np.ndarray, margin: float) -> float:
    return float(margin + entropy_from_logits(fg_logits).mean() - entropy_from_logits(ood_logits).mean())


def run_gradcheck(
    trials: int = 100,
    seed: int = 0,
    margin: float = 0.1,
    h: float = 1e-5,
    logit_scale: float = 1.5,
) -> GradCheckReport:
    """Compares analytic and central-difference gradients over random batches.

    Each batch draws the number of classes from 2..8 and each group size from 1..8.
    """
    rng = np.random.default_rng(seed)
    skipped = 0
    worst = 0.0
    for trial in range(trials):
        n_classes = int(rng.integers(2, 9))
        fg = rng.normal(scale=logit_scale, size=(int(rng.integers(1, 9)), n_classes))
        ood = rng.normal(scale=logit_scale, size=(int(rng.integers(1, 9)), n_classes))
        gap = _gap(fg, ood, margin)
        if abs(gap) < KINK_TOLERANCE:
            skipped += 1
            continue
        _, grad_fg, grad_ood = me_loss_grad(fg, ood, margin)
        num_fg, num_ood = numerical_gradient(fg, ood, margin, h)
        err = relative_error(
            np.concatenate([grad_fg.ravel(), grad_ood.ravel()]),
            np.concatenate([num_fg.ravel(), num_ood.ravel()]),
        )
        logger.debug("trial %d: classes=%d gap=%.4g relative error=%.3g", trial, n_classes, gap, err)
        worst = max(worst, err)
    return GradCheckReport(trials=trials - skipped, skipped=skipped, max_relative_error=worst)
