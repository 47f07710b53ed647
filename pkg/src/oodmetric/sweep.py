"""Grid search for the operating point with the highest Separability.

Matching does not depend on the thresholds, so it runs once; every grid point then only counts how many
of the sorted confidences fall into each threshold band.
"""

import logging
from dataclasses import dataclass
from collections.abc import Sequence

import numpy as np

from oodmetric.core.matching import MatchedImage
from oodmetric.core.taxonomy import ExtendedConfusionMatrix, ScoredOutcomes, ThresholdConfig
from oodmetric.errors import InputError
from oodmetric.metrics.separability import SeparabilityScores

logger = logging.getLogger(__name__)


def threshold_grid(step: float) -> np.ndarray:
    """The values `0, step, 2 * step, ..., 1`; 1 is appended when `step` does not divide it."""
    if not 0.0 < step <= 0.5:
        raise InputError(f"sweep step must be in (0, 0.5], got {step}")
    n = int(np.floor(1.0 / step + 1e-9))
    grid = np.round(np.arange(n + 1) * step, 12)
    if grid[-1] < 1.0:
        grid = np.append(grid, 1.0)
    return grid


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return np.divide(num, den, out=np.zeros(num.shape, dtype=np.float64), where=den > 0)


@dataclass
class SweepResult:
    """Separability over a grid of threshold pairs.

    Attributes:
        t_id_bg: Lower threshold of each evaluated pair.
        t_id_fg: Upper threshold of each evaluated pair, never below `t_id_bg`.
        obs: OBS at each pair.
        ofs: OFS at each pair.
        s: Separability at each pair.
        beta: The $\\beta$ of `s`.
        best: The pair with the highest S; ties go to the smallest `t_id_bg`, then the smallest `t_id_fg`.
        best_scores: OBS, OFS and S at `best`.
        best_matrix: The extended confusion matrix at `best`.
    """

    t_id_bg: np.ndarray
    t_id_fg: np.ndarray
    obs: np.ndarray
    ofs: np.ndarray
    s: np.ndarray
    beta: float
    best: ThresholdConfig
    best_scores: SeparabilityScores
    best_matrix: ExtendedConfusionMatrix

    def __len__(self):
        return len(self.s)

    def triples(self) -> list[tuple[float, float, float]]:
        return [(float(b), float(f), float(s)) for b, f, s in zip(self.t_id_bg, self.t_id_fg, self.s)]


def sweep_outcomes(outcomes: ScoredOutcomes, beta: float = 1.0, step: float = 0.01) -> SweepResult:
    """Evaluates S on `{0, step, ..., 1}^2` restricted to `t_id_bg <= t_id_fg`."""
    if not beta > 0:
        raise InputError(f"beta must be positive, got {beta}")
    grid = threshold_grid(step)
    bg, fg = np.meshgrid(grid, grid, indexing="ij")
    valid = bg <= fg
    t_bg, t_fg = bg[valid], fg[valid]
    c = outcomes.band_counts(t_bg, t_fg)
    obs = _ratio(c["to"], c["to"] + c["fn_o"] + c["fo_n"])
    ofs = _ratio(c["to"], c["to"] + c["fp_o"] + c["fo_p"])
    b2 = beta**2
    den = b2 * obs + ofs
    s = _ratio((1 + b2) * obs * ofs, den)

    k = int(np.argmax(s))
    best = ThresholdConfig(t_id_bg=float(t_bg[k]), t_id_fg=float(t_fg[k]))
    matrix = outcomes.confusion(best)
    logger.info("swept %d threshold pairs, best S=%.4f at (%.3f, %.3f)", len(s), s[k], best.t_id_bg, best.t_id_fg)
    return SweepResult(
        t_id_bg=t_bg,
        t_id_fg=t_fg,
        obs=obs,
        ofs=ofs,
        s=s,
        beta=beta,
        best=best,
        best_scores=SeparabilityScores.from_matrix(matrix, beta),
        best_matrix=matrix,
    )


def sweep_thresholds(images: Sequence[MatchedImage], beta: float = 1.0, step: float = 0.01) -> SweepResult:
    """Sweeps the operating point of an already matched dataset."""
    return sweep_outcomes(ScoredOutcomes.from_images(images), beta=beta, step=step)
