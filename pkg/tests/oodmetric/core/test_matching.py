"""Tests for greedy one-to-one matching."""

import numpy as np
import pytest

from oodmetric.core.geometry import BoundingBox, iop, iou
from oodmetric.core.matching import MatchConfig, group_by_image, match_dataset, match_image
from oodmetric.errors import InputError
from oodmetric.structures.detection import GroundTruthObject, ObjectKind, Prediction
from tests.oodmetric.scenes import random_dataset, random_scene


def _fg(box, image_id="a", class_id=0):
    return GroundTruthObject(image_id, BoundingBox(*box), ObjectKind.FG, class_id)


def _pred(box, conf, image_id="a"):
    return Prediction(image_id, BoundingBox(*box), (conf, 1.0 - conf))


def _oracle(preds, gts, cfg):
    """Plain-Python greedy matching: confidence order, best unclaimed gt, ties to the lower index."""
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))
    claimed = set()
    pairs = []
    for i in order:
        best_j, best = None, -1.0
        for j, g in enumerate(gts):
            if j in claimed:
                continue
            overlap = iop(preds[i].box, g.box) if (cfg.iop_for_ood and g.is_ood) else iou(preds[i].box, g.box)
            if overlap > best:
                best_j, best = j, overlap
        if best_j is not None and best >= cfg.overlap_threshold:
            claimed.add(best_j)
            pairs.append((i, best_j))
    return pairs


def test_exact_match():
    result = match_image([_pred((0, 0, 10, 10), 0.9)], [_fg((0, 0, 10, 10))])
    assert [(i, j) for i, j, _ in result.pairs] == [(0, 0)]
    assert result.unmatched_predictions == [] and result.unmatched_ground_truth == []


def test_disjoint():
    result = match_image([_pred((0, 0, 10, 10), 0.9)], [_fg((20, 20, 30, 30))])
    assert result.pairs == []
    assert result.unmatched_predictions == [0] and result.unmatched_ground_truth == [0]


def test_higher_confidence_claims_first():
    """Two predictions with IoU 0.6 to one object: the more confident one gets it."""
    gt = _fg((0, 0, 10, 10))
    low = _pred((0, 0, 10, 6), 0.8)
    high = _pred((0, 4, 10, 10), 0.9)
    result = match_image([low, high], [gt])
    assert iou(low.box, gt.box) == pytest.approx(0.6)
    assert [(i, j) for i, j, _ in result.pairs] == [(1, 0)]
    assert result.unmatched_predictions == [0]


def test_confidence_ties_keep_input_order():
    gt = _fg((0, 0, 10, 10))
    result = match_image([_pred((0, 0, 10, 10), 0.5), _pred((0, 0, 10, 10), 0.5)], [gt])
    assert [(i, j) for i, j, _ in result.pairs] == [(0, 0)]


def test_overlap_ties_go_to_lower_gt_index():
    gts = [_fg((0, 0, 10, 10)), _fg((0, 0, 10, 10))]
    result = match_image([_pred((0, 0, 10, 10), 0.9)], gts)
    assert [(i, j) for i, j, _ in result.pairs] == [(0, 0)]


def test_iop_mode_credits_fragments_of_ood_objects():
    big = GroundTruthObject("a", BoundingBox(0, 0, 100, 100), ObjectKind.OOD)
    fragment = _pred((10, 10, 30, 30), 0.4)
    assert match_image([fragment], [big]).pairs == []
    result = match_image([fragment], [big], MatchConfig(iop_for_ood=True))
    assert [(i, j) for i, j, _ in result.pairs] == [(0, 0)]


def test_iop_mode_keeps_iou_for_foreground():
    big = _fg((0, 0, 100, 100))
    result = match_image([_pred((10, 10, 30, 30), 0.9)], [big], MatchConfig(iop_for_ood=True))
    assert result.pairs == []


def test_mixed_image_ids_rejected():
    with pytest.raises(InputError):
        match_image([_pred((0, 0, 1, 1), 0.5, image_id="a")], [_fg((0, 0, 1, 1), image_id="b")])


@pytest.mark.parametrize("threshold", [0.0, -0.1, 1.5])
def test_invalid_threshold(threshold):
    with pytest.raises(InputError):
        MatchConfig(overlap_threshold=threshold)


@pytest.mark.parametrize("cfg", [MatchConfig(), MatchConfig(overlap_threshold=0.3), MatchConfig(iop_for_ood=True)])
def test_matches_brute_force_oracle(cfg):
    rng = np.random.default_rng(7)
    for _ in range(300):
        preds, gts = random_scene(rng)
        result = match_image(preds, gts, cfg)
        assert [(i, j) for i, j, _ in result.pairs] == _oracle(preds, gts, cfg)


def test_matching_is_one_to_one_and_complete():
    rng = np.random.default_rng(11)
    for _ in range(300):
        preds, gts = random_scene(rng, max_gt=6, max_pred=8)
        result = match_image(preds, gts)
        matched_p = [i for i, _, _ in result.pairs]
        matched_g = [j for _, j, _ in result.pairs]
        assert len(set(matched_p)) == len(matched_p) and len(set(matched_g)) == len(matched_g)
        assert sorted(matched_p + result.unmatched_predictions) == list(range(len(preds)))
        assert sorted(matched_g + result.unmatched_ground_truth) == list(range(len(gts)))
        assert all(overlap >= 0.5 for _, _, overlap in result.pairs)


def test_group_by_image_order():
    gts = [_fg((0, 0, 1, 1), image_id="b"), _fg((0, 0, 1, 1), image_id="a")]
    preds = [_pred((0, 0, 1, 1), 0.5, image_id="c"), _pred((0, 0, 1, 1), 0.5, image_id="a")]
    groups = group_by_image(preds, gts)
    assert [image_id for image_id, _, _ in groups] == ["b", "a", "c"]
    assert [(len(p), len(g)) for _, p, g in groups] == [(0, 1), (1, 1), (1, 0)]


def test_match_dataset_parallel_equals_serial():
    preds, gts = random_dataset(np.random.default_rng(3), n_images=40)
    serial = match_dataset(preds, gts)
    parallel = match_dataset(preds, gts, nproc=2)
    assert [m.image_id for m in serial] == [m.image_id for m in parallel]
    assert [m.result for m in serial] == [m.result for m in parallel]


def test_raising_the_threshold_never_adds_pairs():
    rng = np.random.default_rng(13)
    thresholds = [0.1, 0.3, 0.5, 0.7, 0.9]
    for _ in range(300):
        preds, gts = random_scene(rng, max_gt=6, max_pred=8)
        iop_for_ood = bool(rng.integers(2))
        counts = [
            len(match_image(preds, gts, MatchConfig(overlap_threshold=t, iop_for_ood=iop_for_ood)).pairs)
            for t in thresholds
        ]
        assert counts == sorted(counts, reverse=True)


def test_image_order_does_not_change_any_image():
    rng = np.random.default_rng(17)
    scenes = [random_scene(rng, image_id=f"img{k}") for k in range(25)]
    shuffled = [scenes[k] for k in rng.permutation(len(scenes))]

    def by_image(scene_list):
        preds = [p for scene_preds, _ in scene_list for p in scene_preds]
        gts = [g for _, scene_gts in scene_list for g in scene_gts]
        return {m.image_id: m.result for m in match_dataset(preds, gts)}

    assert by_image(shuffled) == by_image(scenes)
