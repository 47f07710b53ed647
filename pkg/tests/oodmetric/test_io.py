"""Tests for the record formats."""

import io
import logging

import pytest

from oodmetric.errors import InputError
from oodmetric.io import (
    check_class_range,
    dump_ground_truth,
    dump_predictions,
    expand_shorthand,
    parse_ground_truth,
    parse_predictions,
)
from oodmetric.structures.detection import ObjectKind


def _lines(*lines):
    return io.StringIO("\n".join(lines) + "\n")


def test_foreground_record():
    (obj,) = parse_ground_truth(_lines('{"image":"a","box":[0,0,10,10],"kind":"fg","class":0}'))
    assert obj.image_id == "a"
    assert obj.kind is ObjectKind.FG and obj.class_id == 0
    assert obj.box.to_list() == [0.0, 0.0, 10.0, 10.0]


def test_empty_streams():
    assert parse_ground_truth(io.StringIO("")) == []
    empty = parse_predictions(io.StringIO("\n\n"))
    assert empty.n_classes is None and empty.predictions == []


def test_ood_class_is_dropped_with_warning(caplog):
    with caplog.at_level(logging.WARNING, logger="oodmetric.io"):
        (obj,) = parse_ground_truth(_lines('{"image":"a","box":[0,0,10,10],"kind":"ood","class":2}'))
    assert obj.kind is ObjectKind.OOD and obj.class_id is None
    assert "line 1" in caplog.text


@pytest.mark.parametrize(
    "record",
    [
        '{"image":"a","box":[0,0,10,10],"kind":"fg"}',
        '{"image":"a","box":[0,0,0,10],"kind":"fg","class":0}',
        '{"image":"a","box":[0,0,10],"kind":"fg","class":0}',
        '{"image":"a","box":[0,0,10,10],"kind":"bg"}',
        '{"image":"a","box":[0,0,10,10],"kind":"fg","class":-1}',
        '{"image":"a","kind":"ood"}',
        "[1, 2]",
        "{not json",
    ],
)
def test_invalid_ground_truth_reports_line(record):
    stream = _lines('{"image":"a","box":[0,0,10,10],"kind":"ood"}', "", record)
    with pytest.raises(InputError) as info:
        parse_ground_truth(stream)
    assert info.value.line == 3
    assert str(info.value).startswith("line 3: ")


def test_full_scores():
    pf = parse_predictions(_lines('{"n_classes": 3}', '{"image":"a","box":[0,0,1,1],"scores":[0.1,0.85,0.05]}'))
    assert pf.n_classes == 3
    assert pf.predictions[0].confidence == 0.85
    assert pf.predictions[0].label == 1


def test_shorthand_expansion():
    pf = parse_predictions(_lines('{"n_classes": 3}', '{"image":"a","box":[0,0,1,1],"conf":0.9,"class":1}'))
    assert pf.predictions[0].scores == pytest.approx((0.05, 0.9, 0.05))
    assert expand_shorthand(0.7, 0, 1) == (0.7,)


def test_unnormalized_scores_accepted():
    pf = parse_predictions(_lines('{"n_classes": 2}', '{"image":"a","box":[0,0,1,1],"scores":[0.9,0.8]}'))
    assert pf.predictions[0].confidence == 0.9


@pytest.mark.parametrize(
    "record",
    [
        '{"image":"a","box":[0,0,1,1],"scores":[0.5,0.5]}',
        '{"image":"a","box":[0,0,1,1],"scores":[0.5,1.5,0.1]}',
        '{"image":"a","box":[0,0,1,1],"scores":[true,0.5,0.1]}',
        '{"image":"a","box":[0,0,1,1],"conf":1.2,"class":0}',
        '{"image":"a","box":[0,0,1,1],"conf":0.5,"class":3}',
        '{"image":"a","box":[0,0,1,1],"conf":0.5}',
        '{"image":"a","box":[0,0,1,1]}',
    ],
)
def test_invalid_predictions_report_line(record):
    with pytest.raises(InputError) as info:
        parse_predictions(_lines('{"n_classes": 3}', record))
    assert info.value.line == 2


def test_missing_header():
    with pytest.raises(InputError) as info:
        parse_predictions(_lines('{"image":"a","box":[0,0,1,1],"scores":[0.5]}'))
    assert info.value.line == 1


def test_round_trip():
    gt_text = (
        '{"image": "a", "box": [0.0, 0.0, 10.5, 10.0], "kind": "fg", "class": 2}\n'
        '{"image": "b", "box": [1.0, 2.0, 3.0, 4.0], "kind": "ood"}\n'
    )
    objects = parse_ground_truth(io.StringIO(gt_text))
    out = io.StringIO()
    dump_ground_truth(objects, out)
    assert out.getvalue() == gt_text
    assert parse_ground_truth(io.StringIO(out.getvalue())) == objects

    pf = parse_predictions(_lines('{"n_classes": 2}', '{"image":"a","box":[0,0,1,1],"scores":[0.123456789,0.3]}'))
    out = io.StringIO()
    dump_predictions(pf.predictions, out)
    again = parse_predictions(io.StringIO(out.getvalue()))
    assert again.n_classes == 2
    assert again.predictions == pf.predictions


def test_class_range():
    objects = parse_ground_truth(_lines('{"image":"a","box":[0,0,10,10],"kind":"fg","class":2}'))
    check_class_range(objects, 3)
    with pytest.raises(InputError):
        check_class_range(objects, 2)
