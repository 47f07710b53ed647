"""Tests for toy training."""

import numpy as np
import pytest
from pytest import fixture

from oodmetric.errors import InputError, TrainingError
from oodmetric.loss.meloss import LossWeights
from oodmetric.toylab.data import Group, PointSet, SyntheticDataset, SyntheticSpec, generate
from oodmetric.toylab.model import ToyModel, TrainConfig, loss_and_gradients, train


@fixture
def small_dataset():
    return generate(0, SyntheticSpec(n_fg_per_class=30, n_ood_per_cluster=10, n_bg=30))


def test_zero_beta2_equals_no_me(small_dataset):
    cfg = TrainConfig(epochs=5, weights=LossWeights(beta2=0.0, margin=0.5), seed=3)
    with_me = train(small_dataset, cfg, use_me=True)
    without = train(small_dataset, cfg, use_me=False)
    assert with_me.trace == without.trace
    np.testing.assert_array_equal(with_me.model.w1, without.model.w1)


def test_zero_epochs_returns_initial_model(small_dataset):
    cfg = TrainConfig(epochs=0, seed=9)
    result = train(small_dataset, cfg, use_me=True)
    initial = ToyModel.initialize(np.random.default_rng(9), 2, cfg.hidden, 3)
    np.testing.assert_array_equal(result.model.w1, initial.w1)
    np.testing.assert_array_equal(result.model.w2, initial.w2)
    assert len(result.trace) == 1


def test_training_is_deterministic(small_dataset):
    cfg = TrainConfig(epochs=3, seed=1)
    assert train(small_dataset, cfg).trace == train(small_dataset, cfg).trace


def test_training_lowers_the_loss():
    result = train(generate(0), TrainConfig(epochs=200, seed=0), use_me=True)
    assert len(result.trace) == 201
    assert result.trace[-1] < result.trace[0]


def test_probabilities_are_distributions(small_dataset):
    model = train(small_dataset, TrainConfig(epochs=1)).model
    p = model.probabilities(small_dataset.validation.features)
    assert p.shape == (len(small_dataset.validation), 3)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert (p >= 0).all()


def test_copy_is_independent(small_dataset):
    model = train(small_dataset, TrainConfig(epochs=0)).model
    clone = model.copy()
    clone.w1 += 1.0
    assert not np.array_equal(clone.w1, model.w1)


def test_parameter_gradients_match_finite_differences(small_dataset):
    rng = np.random.default_rng(2)
    model = ToyModel.initialize(rng, 2, 4, 3)
    points = small_dataset.train
    weights = LossWeights(margin=2.0)
    _, grads = loss_and_gradients(model, points, weights, use_me=True)
    h = 1e-6
    for name in ("w1", "b1", "w2", "b2"):
        param = getattr(model, name)
        idx = tuple(rng.integers(0, s) for s in param.shape)
        orig = param[idx]
        param[idx] = orig + h
        plus = loss_and_gradients(model, points, weights, use_me=True)[0]
        param[idx] = orig - h
        minus = loss_and_gradients(model, points, weights, use_me=True)[0]
        param[idx] = orig
        assert grads[name][idx] == pytest.approx((plus - minus) / (2 * h), rel=1e-4, abs=1e-7)


def test_me_training_needs_ood_points():
    ds = generate(0, SyntheticSpec(n_fg_per_class=10, n_ood_per_cluster=0, n_bg=10))
    with pytest.raises(InputError):
        train(ds, TrainConfig(epochs=1), use_me=True)
    train(ds, TrainConfig(epochs=1), use_me=False)


def test_divergence_reports_epoch(small_dataset):
    broken = PointSet(
        features=np.full_like(small_dataset.train.features, np.nan),
        groups=small_dataset.train.groups,
        labels=small_dataset.train.labels,
    )
    ds = SyntheticDataset(train=broken, validation=small_dataset.validation, spec=small_dataset.spec, seed=0)
    with pytest.raises(TrainingError) as info:
        train(ds, TrainConfig(epochs=3), use_me=False)
    assert info.value.epoch == 1


@pytest.mark.parametrize("kwargs", [{"epochs": -1}, {"lr": 0.0}, {"batch_size": 0}, {"hidden": 0}])
def test_train_config_validation(kwargs):
    with pytest.raises(InputError):
        TrainConfig(**kwargs)


def test_background_is_averaged_separately_from_foreground(small_dataset):
    """Repeating every background point leaves the classification loss and its gradients unchanged."""
    model = ToyModel.initialize(np.random.default_rng(4), 2, 5, 3)
    points = small_dataset.train
    bg = np.flatnonzero(points.groups == Group.BG)
    idx = np.concatenate([np.arange(len(points)), bg, bg])
    repeated = PointSet(features=points.features[idx], groups=points.groups[idx], labels=points.labels[idx])
    weights = LossWeights()
    loss, grads = loss_and_gradients(model, points, weights, use_me=False)
    loss_repeated, grads_repeated = loss_and_gradients(model, repeated, weights, use_me=False)
    assert loss_repeated == pytest.approx(loss, rel=1e-12)
    for name in grads:
        np.testing.assert_allclose(grads_repeated[name], grads[name], rtol=1e-10, atol=1e-14)


def test_classification_loss_is_sum_of_group_means(small_dataset):
    model = ToyModel.initialize(np.random.default_rng(5), 2, 5, 3)
    points = small_dataset.train
    log_p = np.log(model.probabilities(points.features))
    fg = points.groups == Group.FG
    bg = points.groups == Group.BG
    expected = -log_p[fg, points.labels[fg]].mean() - log_p[bg].mean()
    loss, _ = loss_and_gradients(model, points, LossWeights(beta1=1.0), use_me=False)
    assert loss == pytest.approx(expected, rel=1e-10)
