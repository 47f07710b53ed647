"""Open-set object detection evaluation: the extended confusion matrix, Separability and the Margin Entropy loss."""

import importlib.metadata


__version__ = importlib.metadata.version(__package__ or __name__)


from oodmetric.core.geometry import BoundingBox, Overlap, iop, iou  # noqa: F401
from oodmetric.core.matching import MatchConfig, MatchResult, match_dataset, match_image  # noqa: F401
from oodmetric.core.suite import Evaluator  # noqa: F401
from oodmetric.core.taxonomy import (  # noqa: F401
    ExtendedConfusionMatrix,
    PredictedCategory,
    ThresholdConfig,
    accumulate,
    classify,
    merge,
)
from oodmetric.errors import InputError, InvariantError, TrainingError  # noqa: F401
from oodmetric.loss.meloss import LossWeights, entropy, me_loss  # noqa: F401
from oodmetric.metrics.separability import SeparabilityScores, obs, ofs, separability  # noqa: F401
from oodmetric.structures.detection import GroundTruthObject, ObjectKind, Prediction  # noqa: F401
