"""Records of a 2D detection dataset: predictions and ground-truth objects.

Ground truth only ever describes objects: either relevant in-distribution foreground (with a class id) or
out-of-distribution objects. Background is the absence of an object and has no record.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from oodmetric.core.geometry import BoundingBox
from oodmetric.errors import InputError


class ObjectKind(Enum):
    """The actual kind of a ground-truth object."""

    FG = "fg"
    OOD = "ood"


@dataclass(frozen=True)
class Prediction:
    """A detector output for one box.

    Scores are per-class confidences in `[0, 1]`. They need not sum to one: detector confidences are
    not always softmax-normalized.

    Attributes:
        image_id: Opaque identifier of the image the prediction belongs to.
        box: The predicted box.
        scores: One confidence per class.
    """

    image_id: str
    box: BoundingBox
    scores: tuple[float, ...]
    _confidence: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        scores = tuple(float(s) for s in self.scores)
        if len(scores) == 0:
            raise InputError("prediction scores must be non-empty")
        if not all(math.isfinite(s) and 0.0 <= s <= 1.0 for s in scores):
            raise InputError(f"prediction scores must lie in [0, 1], got {list(scores)}")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "_confidence", max(scores))

    @property
    def confidence(self) -> float:
        r"""The maximum class confidence $\max_i p_i(x)$, the quantity the threshold classifier acts on."""
        return self._confidence

    @property
    def label(self) -> int:
        """The predicted class: the index of the highest score (first one on ties)."""
        return int(np.argmax(self.scores))

    @property
    def n_classes(self) -> int:
        return len(self.scores)


@dataclass(frozen=True)
class GroundTruthObject:
    """An annotated object.

    Attributes:
        image_id: Opaque identifier of the image the object belongs to.
        box: The annotated box.
        kind: Whether the object is in-distribution foreground or out-of-distribution.
        class_id: The foreground class; present iff `kind` is `ObjectKind.FG`.
    """

    image_id: str
    box: BoundingBox
    kind: ObjectKind
    class_id: Optional[int] = None

    def __post_init__(self):
        if self.kind is ObjectKind.FG:
            if self.class_id is None:
                raise InputError("foreground object needs a class id")
            if self.class_id < 0:
                raise InputError(f"class id must be non-negative, got {self.class_id}")
        elif self.class_id is not None:
            raise InputError("OOD object must not carry a class id")

    @property
    def is_ood(self) -> bool:
        return self.kind is ObjectKind.OOD
