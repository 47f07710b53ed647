"""Newline-delimited JSON records for ground truth and predictions.

Ground truth, one object per line:

    {"image": "a", "box": [x1, y1, x2, y2], "kind": "fg", "class": 0}
    {"image": "a", "box": [x1, y1, x2, y2], "kind": "ood"}

Predictions start with a header giving the number of classes, followed by one prediction per line with
either the full score vector or the `conf`/`class` shorthand:

    {"n_classes": 3}
    {"image": "a", "box": [x1, y1, x2, y2], "scores": [0.1, 0.85, 0.05]}
    {"image": "a", "box": [x1, y1, x2, y2], "conf": 0.9, "class": 1}

The shorthand puts `conf` at `class` and spreads `1 - conf` evenly over the other classes.
Blank lines are skipped. Errors carry the 1-based line number of the offending record.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Optional, TextIO
from collections.abc import Iterable, Iterator, Sequence

from oodmetric.core.geometry import BoundingBox
from oodmetric.errors import InputError
from oodmetric.structures.detection import GroundTruthObject, ObjectKind, Prediction

logger = logging.getLogger(__name__)


def _records(stream: Iterable[str]) -> Iterator[tuple[int, dict[str, Any]]]:
    for line_no, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise InputError(f"malformed record: {e.msg}", line=line_no) from e
        if not isinstance(obj, dict):
            raise InputError("record must be a JSON object", line=line_no)
        yield line_no, obj


def _require(record: dict[str, Any], key: str, line_no: int) -> Any:
    if key not in record:
        raise InputError(f"record is missing '{key}'", line=line_no)
    return record[key]


def _box(record: dict[str, Any], line_no: int) -> BoundingBox:
    raw = _require(record, "box", line_no)
    if not isinstance(raw, list) or len(raw) != 4 or not all(isinstance(v, (int, float)) for v in raw):
        raise InputError(f"box must be a list of 4 numbers, got {raw!r}", line=line_no)
    try:
        return BoundingBox.from_sequence(raw)
    except InputError as e:
        raise InputError(str(e), line=line_no) from e


def _class_id(raw: Any, line_no: int) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise InputError(f"class must be an integer, got {raw!r}", line=line_no)
    return raw


def parse_ground_truth(stream: Iterable[str]) -> list[GroundTruthObject]:
    """Parses ground-truth records in order.

    An OOD record carrying a `class` is accepted; the class is dropped with a warning.
    """
    objects = []
    for line_no, record in _records(stream):
        image_id = str(_require(record, "image", line_no))
        box = _box(record, line_no)
        try:
            kind = ObjectKind(_require(record, "kind", line_no))
        except ValueError as e:
            raise InputError(f"kind must be 'fg' or 'ood', got {record['kind']!r}", line=line_no) from e
        class_id: Optional[int] = None
        if kind is ObjectKind.FG:
            class_id = _class_id(_require(record, "class", line_no), line_no)
        elif "class" in record:
            logger.warning("line %d: OOD object carries a class (%r); ignored", line_no, record["class"])
        try:
            objects.append(GroundTruthObject(image_id=image_id, box=box, kind=kind, class_id=class_id))
        except InputError as e:
            raise InputError(str(e), line=line_no) from e
    return objects


@dataclass
class PredictionFile:
    """The header and the predictions of a prediction stream; `n_classes` is None for an empty stream."""

    n_classes: Optional[int] = None
    predictions: list[Prediction] = field(default_factory=list)


def check_class_range(objects: Iterable[GroundTruthObject], n_classes: int) -> None:
    """Raises `InputError` for a foreground object whose class is not below `n_classes`."""
    for g in objects:
        if g.class_id is not None and g.class_id >= n_classes:
            raise InputError(f"ground-truth class {g.class_id} in image {g.image_id!r} outside [0, {n_classes})")


def expand_shorthand(conf: float, class_id: int, n_classes: int) -> tuple[float, ...]:
    """The score vector with `conf` at `class_id` and `(1 - conf) / (n_classes - 1)` elsewhere."""
    if not 0 <= class_id < n_classes:
        raise InputError(f"class {class_id} outside [0, {n_classes})")
    if n_classes == 1:
        return (conf,)
    rest = (1.0 - conf) / (n_classes - 1)
    return tuple(conf if k == class_id else rest for k in range(n_classes))


def _scores(record: dict[str, Any], n_classes: int, line_no: int) -> tuple[float, ...]:
    if "scores" in record:
        raw = record["scores"]
        if not isinstance(raw, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw):
            raise InputError(f"scores must be a list of numbers, got {raw!r}", line=line_no)
        if len(raw) != n_classes:
            raise InputError(f"expected {n_classes} scores, got {len(raw)}", line=line_no)
        return tuple(float(v) for v in raw)
    conf = _require(record, "conf", line_no)
    if isinstance(conf, bool) or not isinstance(conf, (int, float)):
        raise InputError(f"conf must be a number, got {conf!r}", line=line_no)
    if not 0.0 <= conf <= 1.0:
        raise InputError(f"conf must lie in [0, 1], got {conf}", line=line_no)
    class_id = _class_id(_require(record, "class", line_no), line_no)
    try:
        return expand_shorthand(float(conf), class_id, n_classes)
    except InputError as e:
        raise InputError(str(e), line=line_no) from e


def parse_predictions(stream: Iterable[str]) -> PredictionFile:
    """Parses the `n_classes` header and the prediction records that follow it."""
    result = PredictionFile()
    for line_no, record in _records(stream):
        if result.n_classes is None:
            n = _require(record, "n_classes", line_no)
            if isinstance(n, bool) or not isinstance(n, int) or n < 1:
                raise InputError(f"n_classes must be a positive integer, got {n!r}", line=line_no)
            result.n_classes = n
            continue
        image_id = str(_require(record, "image", line_no))
        box = _box(record, line_no)
        scores = _scores(record, result.n_classes, line_no)
        try:
            result.predictions.append(Prediction(image_id=image_id, box=box, scores=scores))
        except InputError as e:
            raise InputError(str(e), line=line_no) from e
    return result


def dump_ground_truth(objects: Sequence[GroundTruthObject], out: TextIO) -> None:
    """Writes one record per object, the inverse of `parse_ground_truth`."""
    for obj in objects:
        record: dict[str, Any] = {"image": obj.image_id, "box": obj.box.to_list(), "kind": obj.kind.value}
        if obj.class_id is not None:
            record["class"] = obj.class_id
        out.write(json.dumps(record) + "\n")


def dump_predictions(predictions: Sequence[Prediction], out: TextIO, n_classes: Optional[int] = None) -> None:
    """Writes the header and one full-score record per prediction.

    `n_classes` defaults to the score length of the first prediction; nothing is written for an empty
    sequence without `n_classes`.
    """
    if n_classes is None:
        if not predictions:
            return
        n_classes = predictions[0].n_classes
    out.write(json.dumps({"n_classes": n_classes}) + "\n")
    for p in predictions:
        if p.n_classes != n_classes:
            raise InputError(f"prediction has {p.n_classes} scores, header says {n_classes}")
        out.write(json.dumps({"image": p.image_id, "box": p.box.to_list(), "scores": list(p.scores)}) + "\n")
