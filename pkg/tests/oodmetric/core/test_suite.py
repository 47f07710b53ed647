import math

import numpy as np
import pytest

from oodmetric.core.matching import MatchConfig, match_dataset
from oodmetric.core.suite import Evaluator
from oodmetric.core.taxonomy import ThresholdConfig
from oodmetric.errors import InputError
from tests.oodmetric.scenes import random_scene

EVALUATOR = Evaluator(thresholds=ThresholdConfig(0.3, 0.7), n_classes=3)


def _scenes(seed, n):
    rng = np.random.default_rng(seed)
    return [random_scene(rng, image_id=f"img{k}") for k in range(n)]


def _same(a, b):
    assert a.keys() == b.keys()
    for k in a:
        assert (math.isnan(a[k]) and math.isnan(b[k])) or a[k] == b[k], k


def test_compute_keys():
    agg = EVALUATOR.new()
    agg.update_batch(_scenes(0, 5))
    metrics = agg.compute()
    cells = {"tp", "fn", "fp", "to", "fn_o", "fo_n", "fo_p", "fp_o"}
    assert cells | {"obs", "ofs", "s", "map50", "auroc", "fpr95", "ap-0", "ap-1", "ap-2"} == set(metrics)
    assert len(agg) == 5


def test_beta_names_the_separability_key():
    agg = Evaluator(thresholds=ThresholdConfig(0.3, 0.7), n_classes=3, beta=2.0).new()
    agg.update_batch(_scenes(1, 3))
    metrics = agg.compute()
    assert "s2" in metrics and "s" not in metrics


def test_streaming_equals_batch_matching():
    scenes = _scenes(2, 20)
    streamed = EVALUATOR.new()
    for preds, gts in scenes:
        streamed.update_single(preds, gts)
    batched = EVALUATOR.new()
    preds = [p for ps, _ in scenes for p in ps]
    gts = [g for _, gs in scenes for g in gs]
    batched.update_matched(match_dataset(preds, gts))
    assert streamed.report().matrix == batched.report().matrix
    assert streamed.report().scores == batched.report().scores


def test_merge_equals_single_aggregator():
    scenes = _scenes(3, 30)
    whole = EVALUATOR.new()
    whole.update_batch(scenes)
    left, right = EVALUATOR.new(), EVALUATOR.new()
    left.update_batch(scenes[:12])
    right.update_batch(scenes[12:])
    _same(left.merge(right).compute(), whole.compute())


def test_merge_rejects_other_evaluators():
    other = Evaluator(thresholds=ThresholdConfig(0.3, 0.7), n_classes=3, match=MatchConfig(iop_for_ood=True))
    with pytest.raises(InputError):
        EVALUATOR.new().merge(other.new())


def test_reset():
    agg = EVALUATOR.new()
    agg.update_batch(_scenes(4, 4))
    agg.reset()
    assert len(agg) == 0
    _same(agg.compute(), EVALUATOR.new().compute())


@pytest.mark.parametrize("kwargs", [{"n_classes": 0}, {"n_classes": 2, "beta": 0.0}])
def test_invalid_evaluator(kwargs):
    with pytest.raises(InputError):
        Evaluator(thresholds=ThresholdConfig(0.3, 0.7), **kwargs)
