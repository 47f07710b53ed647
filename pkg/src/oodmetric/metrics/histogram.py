"""Confidence distributions of foreground, OOD and background detections."""

import csv
from dataclasses import dataclass
from typing import TextIO
from collections.abc import Sequence

import numpy as np

from oodmetric.core.matching import MatchedImage

N_BINS = 40
BIN_WIDTH = 0.025
SERIES = ("id_fg", "ood", "id_bg")


def bin_edges() -> np.ndarray:
    """The 41 edges `k * 0.025`, `k = 0..40`."""
    return np.arange(N_BINS + 1) * BIN_WIDTH


def _density(confidences: Sequence[float]) -> np.ndarray:
    c = np.asarray(confidences, dtype=np.float64)
    if c.size == 0:
        return np.zeros(N_BINS)
    # bins are right-closed, (lo, hi], with 0 falling into the first one
    idx = np.clip(np.digitize(c, bin_edges(), right=True) - 1, 0, N_BINS - 1)
    counts = np.bincount(idx, minlength=N_BINS)
    return counts / c.size * 100.0


@dataclass
class ConfidenceHistogram:
    """Densities in percent over 40 uniform confidence bins, one series per actual group.

    Attributes:
        id_fg: Predictions matched to foreground objects.
        ood: Predictions matched to OOD objects.
        id_bg: Unmatched predictions.
        counts: Number of confidences behind each series.
    """

    id_fg: np.ndarray
    ood: np.ndarray
    id_bg: np.ndarray
    counts: dict[str, int]

    @property
    def edges(self) -> np.ndarray:
        return bin_edges()

    def rows(self) -> list[tuple[float, float, float, float, float]]:
        edges = self.edges
        return [
            (edges[k], edges[k + 1], self.id_fg[k], self.ood[k], self.id_bg[k])
            for k in range(N_BINS)
        ]


def histogram_from_groups(
    id_fg: Sequence[float],
    ood: Sequence[float],
    id_bg: Sequence[float],
) -> ConfidenceHistogram:
    """Builds the histogram from confidences already split by actual group."""
    return ConfidenceHistogram(
        id_fg=_density(id_fg),
        ood=_density(ood),
        id_bg=_density(id_bg),
        counts={"id_fg": len(id_fg), "ood": len(ood), "id_bg": len(id_bg)},
    )


def confidence_histogram(images: Sequence[MatchedImage]) -> ConfidenceHistogram:
    """Histogram of a matched dataset, series assigned by what each prediction actually hit."""
    groups: dict[str, list[float]] = {name: [] for name in SERIES}
    for image in images:
        preds, gts = image.predictions, image.ground_truth
        for i, j, _ in image.result.pairs:
            groups["ood" if gts[j].is_ood else "id_fg"].append(preds[i].confidence)
        groups["id_bg"].extend(preds[i].confidence for i in image.result.unmatched_predictions)
    return histogram_from_groups(groups["id_fg"], groups["ood"], groups["id_bg"])


def write_histogram_csv(hist: ConfidenceHistogram, out: TextIO) -> None:
    """Writes `bin_lo,bin_hi,id_fg,ood,id_bg`, one row per bin, densities with 6 decimals."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["bin_lo", "bin_hi", *SERIES])
    for lo, hi, fg, ood, bg in hist.rows():
        writer.writerow([f"{lo:.3f}", f"{hi:.3f}", f"{fg:.6f}", f"{ood:.6f}", f"{bg:.6f}"])
