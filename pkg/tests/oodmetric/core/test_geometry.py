"""Tests for boxes and overlap measures."""

import pytest
from hypothesis import given, settings, strategies as st
from pytest import approx

from oodmetric.core.geometry import BoundingBox, Overlap, intersection_area, iop, iou, overlap_matrix
from oodmetric.errors import InputError


def _pixels(box: BoundingBox) -> set[tuple[int, int]]:
    return {(x, y) for x in range(int(box.x1), int(box.x2)) for y in range(int(box.y1), int(box.y2))}


@st.composite
def int_boxes(draw, extent: int = 20):
    x1 = draw(st.integers(0, extent - 1))
    y1 = draw(st.integers(0, extent - 1))
    x2 = draw(st.integers(x1 + 1, extent))
    y2 = draw(st.integers(y1 + 1, extent))
    return BoundingBox(float(x1), float(y1), float(x2), float(y2))


def test_intersection_area_examples():
    """Identical, disjoint and half-overlapping boxes."""
    a = BoundingBox(0, 0, 10, 10)
    assert intersection_area(a, BoundingBox(0, 0, 10, 10)) == 100
    assert intersection_area(a, BoundingBox(20, 20, 30, 30)) == 0
    assert intersection_area(a, BoundingBox(5, 0, 15, 10)) == 50


def test_iou_examples():
    a = BoundingBox(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, BoundingBox(20, 20, 30, 30)) == 0.0
    assert iou(a, BoundingBox(5, 0, 15, 10)) == approx(1 / 3, abs=1e-12)


def test_iop_examples():
    assert iop(BoundingBox(2, 2, 8, 8), BoundingBox(0, 0, 20, 20)) == 1.0
    assert iop(BoundingBox(0, 0, 10, 10), BoundingBox(20, 20, 30, 30)) == 0.0
    assert iop(BoundingBox(0, 0, 10, 10), BoundingBox(5, 0, 15, 10)) == 0.5


def test_touching_boxes_do_not_intersect():
    assert intersection_area(BoundingBox(0, 0, 10, 10), BoundingBox(10, 0, 20, 10)) == 0.0


@pytest.mark.parametrize(
    "coords",
    [(0, 0, 0, 10), (0, 0, 10, 0), (10, 0, 0, 10), (0, float("nan"), 10, 10), (0, 0, float("inf"), 10)],
)
def test_invalid_boxes_rejected(coords):
    with pytest.raises(InputError):
        BoundingBox(*coords)


def test_from_sequence_requires_four_numbers():
    assert BoundingBox.from_sequence([1, 2, 3, 4]).to_list() == [1.0, 2.0, 3.0, 4.0]
    with pytest.raises(InputError):
        BoundingBox.from_sequence([1, 2, 3])
    with pytest.raises(InputError):
        BoundingBox.from_sequence([1, 2, "x", 4])


@settings(max_examples=300)
@given(int_boxes(), int_boxes())
def test_overlaps_match_rasterization(a, b):
    """On integer boxes, overlap measures agree with counting unit pixels."""
    pa, pb = _pixels(a), _pixels(b)
    inter = len(pa & pb)
    assert intersection_area(a, b) == inter
    assert iou(a, b) == approx(inter / len(pa | pb), abs=1e-12)
    assert iop(a, b) == approx(inter / len(pa), abs=1e-12)
    assert iou(a, b) == iou(b, a)


@settings(max_examples=100)
@given(st.lists(int_boxes(), min_size=1, max_size=5), st.lists(int_boxes(), min_size=1, max_size=5), st.data())
def test_overlap_matrix_matches_scalar_functions(preds, gts, data):
    measures = [data.draw(st.sampled_from(list(Overlap))) for _ in gts]
    m = overlap_matrix(preds, gts, measures)
    assert m.shape == (len(preds), len(gts))
    for i, p in enumerate(preds):
        for j, (g, measure) in enumerate(zip(gts, measures)):
            expected = iop(p, g) if measure is Overlap.IOP else iou(p, g)
            assert m[i, j] == approx(expected, abs=1e-12)


def test_overlap_matrix_empty():
    assert overlap_matrix([], [BoundingBox(0, 0, 1, 1)], [Overlap.IOU]).shape == (0, 1)
    assert overlap_matrix([BoundingBox(0, 0, 1, 1)], [], []).shape == (1, 0)


def test_overlap_matrix_rejects_wrong_measure_count():
    with pytest.raises(InputError):
        overlap_matrix([BoundingBox(0, 0, 1, 1)], [BoundingBox(0, 0, 1, 1)], [])
