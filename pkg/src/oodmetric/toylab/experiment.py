"""Baseline-versus-ME experiments on synthetic points, evaluated with the detection taxonomy.

Each validation point is treated as one detection with confidence `max_i p_i`. Matching degenerates to
the identity: a foreground point is a prediction matched to a foreground object, an OOD point one matched
to an OOD object, and a background point an unmatched prediction.
"""

import logging
import statistics
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Union
from collections.abc import Sequence

import numpy as np
import yaml

from oodmetric.core.taxonomy import ExtendedConfusionMatrix, ScoredOutcomes, ThresholdConfig
from oodmetric.errors import InputError
from oodmetric.loss.meloss import LossWeights, entropy_from_logits
from oodmetric.metrics.histogram import ConfidenceHistogram, histogram_from_groups
from oodmetric.metrics.separability import SeparabilityScores
from oodmetric.sweep import SweepResult, sweep_outcomes
from oodmetric.toylab.data import Group, PointSet, SyntheticSpec, generate
from oodmetric.toylab.model import ToyModel, TrainConfig, train

logger = logging.getLogger(__name__)

_MEAN_FIELDS = ("fg_means", "ood_train_means", "ood_val_means")


@dataclass(frozen=True)
class ToyConfig:
    """A toy experiment, as read from a YAML file.

    `data` holds the `SyntheticSpec`; every other key configures training. With several seeds, run `k`
    uses `seed + k` for both data generation and training.
    """

    seed: int = 0
    epochs: int = 200
    lr: float = 0.1
    batch_size: int = 64
    hidden: int = 16
    margin: float = 0.5
    beta1: float = 1.0
    beta2: float = 1.0
    use_me: bool = True
    data: SyntheticSpec = field(default_factory=SyntheticSpec)

    def train_config(self, seed: Optional[int] = None) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            lr=self.lr,
            batch_size=self.batch_size,
            hidden=self.hidden,
            weights=LossWeights(beta1=self.beta1, beta2=self.beta2, margin=self.margin),
            seed=self.seed if seed is None else seed,
        )

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ToyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise InputError(f"unknown toy config keys {sorted(unknown)}")
        values = dict(raw)
        if "data" in values:
            data = values["data"] or {}
            if not isinstance(data, dict):
                raise InputError("toy config 'data' must be a mapping")
            spec_fields = {f.name for f in fields(SyntheticSpec)}
            unknown = set(data) - spec_fields
            if unknown:
                raise InputError(f"unknown data keys {sorted(unknown)}")
            data = {
                k: tuple(tuple(float(c) for c in mean) for mean in v) if k in _MEAN_FIELDS else v
                for k, v in data.items()
            }
            values["data"] = SyntheticSpec(**data)
        try:
            return cls(**values)
        except TypeError as e:
            raise InputError(f"invalid toy config: {e}") from e

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ToyConfig":
        with open(path) as f:
            try:
                raw = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise InputError(f"cannot parse {path}: {e}") from e
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise InputError(f"{path} must hold a mapping of config keys")
        return cls.from_dict(raw)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class ToyEvaluation:
    """Evaluation of a toy model on one partition.

    Attributes:
        scores: OBS, OFS and S at `thresholds`.
        thresholds: The operating point, given or swept.
        matrix: The extended confusion matrix at `thresholds`.
        histogram: Confidence densities per generating group.
        entropy_gap: Mean OOD entropy minus mean foreground entropy, in nats.
        sweep: The sweep behind `thresholds`, when they were not given.
    """

    scores: SeparabilityScores
    thresholds: ThresholdConfig
    matrix: ExtendedConfusionMatrix
    histogram: ConfidenceHistogram
    entropy_gap: float
    sweep: Optional[SweepResult] = None


def outcomes_from_points(confidences: np.ndarray, groups: np.ndarray) -> ScoredOutcomes:
    """Scored outcomes of point detections, each point matched to an object of its own group."""
    return ScoredOutcomes(
        fg_matched=np.sort(confidences[groups == Group.FG]),
        ood_matched=np.sort(confidences[groups == Group.OOD]),
        unmatched=np.sort(confidences[groups == Group.BG]),
    )


def _group_mean(values: np.ndarray) -> float:
    return float(values.mean()) if values.size else 0.0


def evaluate_toy(
    model: ToyModel,
    points: PointSet,
    thresholds: Optional[ThresholdConfig] = None,
    beta: float = 1.0,
    step: float = 0.01,
) -> ToyEvaluation:
    """Scores a model at a fixed operating point, or at the best point of a threshold sweep."""
    logits = model.logits(points.features)
    confidences = np.clip(model.probabilities(points.features).max(axis=1), 0.0, 1.0)
    outcomes = outcomes_from_points(confidences, points.groups)
    sweep = None
    if thresholds is None:
        sweep = sweep_outcomes(outcomes, beta=beta, step=step)
        thresholds, matrix, scores = sweep.best, sweep.best_matrix, sweep.best_scores
    else:
        matrix = outcomes.confusion(thresholds)
        scores = SeparabilityScores.from_matrix(matrix, beta)
    entropies = entropy_from_logits(logits)
    gap = _group_mean(entropies[points.mask(Group.OOD)]) - _group_mean(entropies[points.mask(Group.FG)])
    histogram = histogram_from_groups(
        outcomes.fg_matched.tolist(), outcomes.ood_matched.tolist(), outcomes.unmatched.tolist()
    )
    return ToyEvaluation(
        scores=scores, thresholds=thresholds, matrix=matrix, histogram=histogram, entropy_gap=gap, sweep=sweep
    )


@dataclass
class ToyRun:
    """One seed of a toy experiment."""

    seed: int
    use_me: bool
    trace: list[float]
    evaluation: ToyEvaluation


def run_experiment(cfg: ToyConfig, seeds: Sequence[int], use_me: Optional[bool] = None) -> list[ToyRun]:
    """Generates, trains and evaluates on the validation partition once per seed."""
    use_me = cfg.use_me if use_me is None else use_me
    runs = []
    for seed in seeds:
        dataset = generate(seed, cfg.data)
        result = train(dataset, cfg.train_config(seed), use_me=use_me)
        evaluation = evaluate_toy(result.model, dataset.validation)
        logger.info(
            "seed %d (use_me=%s): S=%.3f OBS=%.3f OFS=%.3f gap=%.3f",
            seed,
            use_me,
            evaluation.scores.s,
            evaluation.scores.obs,
            evaluation.scores.ofs,
            evaluation.entropy_gap,
        )
        runs.append(ToyRun(seed=seed, use_me=use_me, trace=result.trace, evaluation=evaluation))
    return runs


def median_s(runs: Sequence[ToyRun]) -> float:
    """Median validation S over the runs."""
    return statistics.median(r.evaluation.scores.s for r in runs)


def median_gap(runs: Sequence[ToyRun]) -> float:
    """Median validation entropy gap, mean OOD entropy minus mean FG entropy."""
    return statistics.median(r.evaluation.entropy_gap for r in runs)


@dataclass
class ToyComparison:
    """Cross-entropy baseline against ME training over the same seeds."""

    baseline: list[ToyRun]
    me: list[ToyRun]

    @property
    def median_s_baseline(self) -> float:
        return median_s(self.baseline)

    @property
    def median_s_me(self) -> float:
        return median_s(self.me)

    @property
    def median_gap_baseline(self) -> float:
        return median_gap(self.baseline)

    @property
    def median_gap_me(self) -> float:
        return median_gap(self.me)

    @property
    def s_ratio(self) -> float:
        """Median S with ME over median S without; infinite when the baseline median is 0."""
        if self.median_s_baseline == 0.0:
            return float("inf") if self.median_s_me > 0 else 1.0
        return self.median_s_me / self.median_s_baseline


def compare(cfg: ToyConfig, seeds: Sequence[int]) -> ToyComparison:
    """Trains both variants on every seed."""
    return ToyComparison(
        baseline=run_experiment(cfg, seeds, use_me=False),
        me=run_experiment(cfg, seeds, use_me=True),
    )
