r"""Margin Entropy loss and its analytic gradient with respect to classifier logits.

The loss asks OOD samples to carry on average at least a margin $m$ more Shannon entropy than in-distribution
foreground samples:

\[ \mathcal{L}_{me} = \max(m + \bar{H}_{FG} - \bar{H}_{OOD}, 0) \]

Entropies are in nats. Averages pool every sample of a group in the batch.
"""

from dataclasses import dataclass, field
from collections.abc import Sequence

import numpy as np
from scipy.special import entr, log_softmax

from oodmetric.errors import InputError

NORMALIZATION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class LossWeights:
    r"""Weights of the combined loss.

    \[ \mathcal{L} = \mathcal{L}_{loc} + \beta_1 \mathcal{L}_{cls} + \beta_2 \mathcal{L}_{me} \]

    Attributes:
        beta1: Weight of the classification loss.
        beta2: Weight of the Margin Entropy loss.
        margin: Entropy gap $m$ the ME loss asks for.
    """

    beta1: float = 1.0
    beta2: float = 1.0
    margin: float = 0.1

    def __post_init__(self):
        if self.beta1 < 0 or self.beta2 < 0 or self.margin < 0:
            raise InputError(f"loss weights and margin must be non-negative, got {self}")


@dataclass
class BatchGroups:
    """Softmax outputs of a batch, grouped by supervision. Either group may be empty."""

    fg_samples: Sequence[np.ndarray] = field(default_factory=list)
    ood_samples: Sequence[np.ndarray] = field(default_factory=list)


def _check_probabilities(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise InputError(f"probability vector must be a non-empty 1-d array, got shape {p.shape}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > NORMALIZATION_TOLERANCE:
        raise InputError(f"probability vector must be non-negative and sum to 1, got sum {p.sum()}")
    return p


def entropy(p: np.ndarray) -> float:
    r"""Shannon entropy $-\sum_i p_i \ln p_i$ of a probability vector, with $0 \ln 0 = 0$."""
    return float(entr(_check_probabilities(p)).sum())


def _mean_entropy(samples: Sequence[np.ndarray]) -> float:
    return float(np.mean([entropy(p) for p in samples]))


def me_loss(groups: BatchGroups, m: float) -> float:
    """Hinge on the entropy gap between the OOD and foreground groups; 0 when either group is empty."""
    if m < 0:
        raise InputError(f"margin must be non-negative, got {m}")
    if len(groups.fg_samples) == 0 or len(groups.ood_samples) == 0:
        return 0.0
    return max(m + _mean_entropy(groups.fg_samples) - _mean_entropy(groups.ood_samples), 0.0)


def total_loss(l_loc: float, l_cls: float, l_me: float, w: LossWeights) -> float:
    """Combined detection loss: localization plus weighted classification and ME terms."""
    return l_loc + w.beta1 * l_cls + w.beta2 * l_me


def entropy_from_logits(logits: np.ndarray) -> np.ndarray:
    """Row-wise entropy of `softmax(logits)`."""
    log_p = log_softmax(logits, axis=-1)
    return -(np.exp(log_p) * log_p).sum(axis=-1)


def entropy_grad_from_logits(logits: np.ndarray) -> np.ndarray:
    r"""Row-wise $\partial H / \partial z_j = -p_j (\ln p_j + H)$ for $p = \mathrm{softmax}(z)$."""
    log_p = log_softmax(logits, axis=-1)
    p = np.exp(log_p)
    h = -(p * log_p).sum(axis=-1, keepdims=True)
    return -p * (log_p + h)


def me_loss_from_logits(fg_logits: np.ndarray, ood_logits: np.ndarray, margin: float) -> float:
    """ME loss of a batch given as logits, shaped `(n_fg, C)` and `(n_ood, C)`."""
    if len(fg_logits) == 0 or len(ood_logits) == 0:
        return 0.0
    gap = margin + entropy_from_logits(fg_logits).mean() - entropy_from_logits(ood_logits).mean()
    return float(max(gap, 0.0))


def me_loss_grad(
    fg_logits: np.ndarray,
    ood_logits: np.ndarray,
    margin: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """ME loss of a batch and its gradient with respect to every logit.

    Args:
        fg_logits: Logits of the foreground samples, `(n_fg, C)`.
        ood_logits: Logits of the OOD samples, `(n_ood, C)`.
        margin: The entropy margin.

    Returns:
        The loss, the gradient for the foreground logits and the gradient for the OOD logits. At the kink
        (gap exactly zero) the inactive side is taken and the gradients are zero.
    """
    fg_logits = np.asarray(fg_logits, dtype=np.float64)
    ood_logits = np.asarray(ood_logits, dtype=np.float64)
    grad_fg = np.zeros_like(fg_logits)
    grad_ood = np.zeros_like(ood_logits)
    if len(fg_logits) == 0 or len(ood_logits) == 0:
        return 0.0, grad_fg, grad_ood
    if not (np.all(np.isfinite(fg_logits)) and np.all(np.isfinite(ood_logits))):
        raise InputError("logits must be finite")
    gap = margin + entropy_from_logits(fg_logits).mean() - entropy_from_logits(ood_logits).mean()
    if gap <= 0.0:
        return 0.0, grad_fg, grad_ood
    grad_fg = entropy_grad_from_logits(fg_logits) / len(fg_logits)
    grad_ood = -entropy_grad_from_logits(ood_logits) / len(ood_logits)
    return float(gap), grad_fg, grad_ood


__all__ = [
    "BatchGroups",
    "LossWeights",
    "entropy",
    "entropy_from_logits",
    "entropy_grad_from_logits",
    "me_loss",
    "me_loss_from_logits",
    "me_loss_grad",
    "total_loss",
]
