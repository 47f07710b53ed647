"""A one-hidden-layer classifier trained by plain mini-batch gradient descent, optionally with the ME loss."""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import log_softmax, softmax

from oodmetric.errors import InputError, TrainingError
from oodmetric.loss.meloss import LossWeights, me_loss_grad, total_loss
from oodmetric.toylab.data import Group, PointSet, SyntheticDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of toy training.

    Attributes:
        epochs: Passes over the training partition.
        lr: Gradient descent step size.
        batch_size: Points per mini-batch.
        hidden: Width of the hidden layer.
        weights: Loss weights and ME margin.
        seed: Seed of weight initialization and batch order.
    """

    epochs: int = 200
    lr: float = 0.1
    batch_size: int = 64
    hidden: int = 16
    weights: LossWeights = field(default_factory=lambda: LossWeights(margin=0.5))
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise InputError(f"epochs must be non-negative, got {self.epochs}")
        if not self.lr > 0 or self.batch_size < 1 or self.hidden < 1:
            raise InputError("lr must be positive, batch_size and hidden at least 1")


@dataclass
class ToyModel:
    """`softmax(tanh(x W1 + b1) W2 + b2)`."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def initialize(cls, rng: np.random.Generator, dim: int, hidden: int, n_classes: int) -> "ToyModel":
        return cls(
            w1=rng.normal(scale=1.0 / math.sqrt(dim), size=(dim, hidden)),
            b1=np.zeros(hidden),
            w2=rng.normal(scale=1.0 / math.sqrt(hidden), size=(hidden, n_classes)),
            b2=np.zeros(n_classes),
        )

    @property
    def n_classes(self) -> int:
        return self.w2.shape[1]

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Hidden activations and logits of a batch of points."""
        hidden = np.tanh(x @ self.w1 + self.b1)
        return hidden, hidden @ self.w2 + self.b2

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[1]

    def probabilities(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.logits(x), axis=1)

    def copy(self) -> "ToyModel":
        return replace(self, w1=self.w1.copy(), b1=self.b1.copy(), w2=self.w2.copy(), b2=self.b2.copy())


@dataclass
class TrainResult:
    """The trained model and its loss trace.

    `trace[0]` is the loss on the whole training partition before the first update, `trace[k]` the loss
    after epoch `k`.
    """

    model: ToyModel
    trace: list[float]


def _targets(groups: np.ndarray, labels: np.ndarray, n_classes: int) -> np.ndarray:
    targets = np.zeros((len(groups), n_classes))
    fg = groups == Group.FG
    targets[np.flatnonzero(fg), labels[fg]] = 1.0
    targets[groups == Group.BG] = 1.0 / n_classes
    return targets


def loss_and_gradients(
    model: ToyModel,
    points: PointSet,
    weights: LossWeights,
    use_me: bool,
) -> tuple[float, dict[str, np.ndarray]]:
    """Combined loss of a batch and its gradient with respect to every parameter.

    The classification term is the mean cross-entropy over foreground points (class target) plus the mean
    cross-entropy over background points (uniform target), each averaged over its own group, so the ratio of
    background to foreground points in a batch does not shift the balance between the two. OOD points only
    enter through the ME term.
    """
    x = points.features
    hidden, logits = model.forward(x)
    log_p = log_softmax(logits, axis=1)
    targets = _targets(points.groups, points.labels, model.n_classes)

    dlogits = np.zeros_like(logits)
    l_cls = 0.0
    for group in (Group.FG, Group.BG):
        mask = points.groups == group
        n = int(np.count_nonzero(mask))
        if n == 0:
            continue
        l_cls += float(-(targets[mask] * log_p[mask]).sum() / n)
        dlogits[mask] = weights.beta1 * (np.exp(log_p[mask]) - targets[mask]) / n

    l_me = 0.0
    if use_me:
        fg = points.groups == Group.FG
        ood = points.groups == Group.OOD
        l_me, grad_fg, grad_ood = me_loss_grad(logits[fg], logits[ood], weights.margin)
        dlogits[fg] += weights.beta2 * grad_fg
        dlogits[ood] += weights.beta2 * grad_ood

    dhidden = (dlogits @ model.w2.T) * (1.0 - hidden**2)
    grads = {
        "w2": hidden.T @ dlogits,
        "b2": dlogits.sum(axis=0),
        "w1": x.T @ dhidden,
        "b1": dhidden.sum(axis=0),
    }
    return total_loss(0.0, l_cls, l_me, weights), grads


def _subset(points: PointSet, idx: np.ndarray) -> PointSet:
    return PointSet(features=points.features[idx], groups=points.groups[idx], labels=points.labels[idx])


def train(dataset: SyntheticDataset, cfg: TrainConfig = TrainConfig(), use_me: bool = True) -> TrainResult:
    """Trains a fresh model on the training partition of `dataset`.

    Raises:
        InputError: The training partition is empty, or `use_me` is set and it has no OOD points.
        TrainingError: The loss became non-finite.
    """
    points = dataset.train
    if len(points) == 0:
        raise InputError("training partition is empty")
    if use_me and points.count(Group.OOD) == 0:
        raise InputError("ME training needs OOD points in the training partition")

    rng = np.random.default_rng(cfg.seed)
    model = ToyModel.initialize(rng, dataset.spec.dim, cfg.hidden, dataset.spec.n_classes)
    trace = [loss_and_gradients(model, points, cfg.weights, use_me)[0]]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(points))
        for start in range(0, len(points), cfg.batch_size):
            batch = _subset(points, order[start : start + cfg.batch_size])
            _, grads = loss_and_gradients(model, batch, cfg.weights, use_me)
            model.w1 -= cfg.lr * grads["w1"]
            model.b1 -= cfg.lr * grads["b1"]
            model.w2 -= cfg.lr * grads["w2"]
            model.b2 -= cfg.lr * grads["b2"]
        loss = loss_and_gradients(model, points, cfg.weights, use_me)[0]
        if not math.isfinite(loss):
            raise TrainingError(f"loss diverged to {loss}", epoch=epoch)
        logger.debug("epoch %d: loss %.6f", epoch, loss)
        trace.append(loss)
    logger.info(
        "trained %d epochs (use_me=%s, seed=%d): loss %.4f -> %.4f", cfg.epochs, use_me, cfg.seed, trace[0], trace[-1]
    )
    return TrainResult(model=model, trace=trace)
