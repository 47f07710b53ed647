"""Axis-aligned bounding boxes and the overlap measures used to match predictions to ground truth."""

import math
from dataclasses import dataclass
from enum import Enum, auto
from collections.abc import Sequence

import numpy as np

from oodmetric.errors import InputError


@dataclass(eq=True, frozen=True)
class BoundingBox:
    """An axis-aligned rectangle in continuous pixel coordinates.

    Corners follow the `(x1, y1, x2, y2)` convention with `x1 < x2` and `y1 < y2`.
    Zero-area and inverted boxes are rejected on construction.

    Attributes:
        x1: Left edge.
        y1: Top edge.
        x2: Right edge.
        y2: Bottom edge.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(c) for c in coords):
            raise InputError(f"box coordinates must be finite, got {list(coords)}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise InputError(f"box must satisfy x1 < x2 and y1 < y2, got {list(coords)}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @classmethod
    def from_sequence(cls, seq: Sequence[float]) -> "BoundingBox":
        """Builds a box from a `[x1, y1, x2, y2]` sequence."""
        if len(seq) != 4:
            raise InputError(f"box needs 4 coordinates, got {len(seq)}")
        try:
            x1, y1, x2, y2 = (float(c) for c in seq)
        except (TypeError, ValueError) as e:
            raise InputError(f"box coordinates must be numbers, got {list(seq)}") from e
        return cls(x1, y1, x2, y2)

    def to_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]


class Overlap(Enum):
    """Overlap measure used as the matching criterion."""

    IOU = auto()
    IOP = auto()


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    """Area of the overlap of two boxes; 0 when they are disjoint or only touch."""
    w = min(a.x2, b.x2) - max(a.x1, b.x1)
    h = min(a.y2, b.y2) - max(a.y1, b.y1)
    if w <= 0 or h <= 0:
        return 0.0
    return w * h


def iou(a: BoundingBox, b: BoundingBox) -> float:
    r"""Intersection-over-union, $I(a, b) / (A(a) + A(b) - I(a, b))$. Symmetric in its arguments."""
    inter = intersection_area(a, b)
    return inter / (a.area + b.area - inter)


def iop(p: BoundingBox, g: BoundingBox) -> float:
    r"""Intersection-over-prediction, $I(p, g) / A(p)$.

    This is the fraction of the predicted box covered by the ground truth. It equals 1 exactly when
    `p` lies inside `g`, so fragments of a large object all count as overlapping it.
    """
    return intersection_area(p, g) / p.area


def _as_array(boxes: Sequence[BoundingBox]) -> np.ndarray:
    return np.array([b.to_list() for b in boxes], dtype=np.float64).reshape(-1, 4)


def overlap_matrix(
    pred_boxes: Sequence[BoundingBox],
    gt_boxes: Sequence[BoundingBox],
    measures: Sequence[Overlap],
) -> np.ndarray:
    r"""Computes the Gram matrix of overlaps between predicted and ground-truth boxes.

    Args:
        pred_boxes: Predicted boxes $\{p_1, \ldots, p_n\}$.
        gt_boxes: Ground-truth boxes $\{g_1, \ldots, g_m\}$.
        measures: One overlap measure per ground-truth box, selecting IoU or IoP for that column.

    Returns:
        An $n \times m$ matrix $M$ with $M_{ij}$ the selected overlap of $p_i$ and $g_j$; the values are the
        same as those of [`iou`][oodmetric.core.geometry.iou] and [`iop`][oodmetric.core.geometry.iop].
    """
    if len(measures) != len(gt_boxes):
        raise InputError(f"expected {len(gt_boxes)} overlap measures, got {len(measures)}")
    p = _as_array(pred_boxes)
    g = _as_array(gt_boxes)
    w = np.minimum(p[:, None, 2], g[None, :, 2]) - np.maximum(p[:, None, 0], g[None, :, 0])
    h = np.minimum(p[:, None, 3], g[None, :, 3]) - np.maximum(p[:, None, 1], g[None, :, 1])
    inter = np.where((w > 0) & (h > 0), w * h, 0.0)
    p_area = ((p[:, 2] - p[:, 0]) * (p[:, 3] - p[:, 1]))[:, None]
    g_area = ((g[:, 2] - g[:, 0]) * (g[:, 3] - g[:, 1]))[None, :]
    union = p_area + g_area - inter
    use_iop = np.array([m is Overlap.IOP for m in measures], dtype=bool)[None, :]
    return np.where(use_iop, inter / p_area, inter / union)
