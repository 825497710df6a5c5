"""Unit tests for the AdamW optimizer."""

import numpy as np
import pytest

from app.core.errors import CheckpointError, DimensionError
from app.numerics.tensor import Parameter
from app.trainer.optimizer import AdamW, optimizer_step


def test_zero_gradient_without_decay_leaves_parameters_unchanged():
    p = Parameter(np.array([1.5, -2.0]))
    opt = AdamW([("p", p)], lr=0.1)
    p.grad = np.zeros(2)
    opt.step()
    np.testing.assert_array_equal(p.data, [1.5, -2.0])


def test_missing_gradient_counts_as_zero():
    p = Parameter(np.array([3.0]))
    opt = AdamW([("p", p)], lr=0.1)
    opt.step()
    np.testing.assert_array_equal(p.data, [3.0])
    assert opt.steps == 1


def test_descends_a_quadratic_bowl():
    p = Parameter(np.array([1.0]))
    opt = AdamW([("p", p)], lr=0.1)
    for _ in range(500):
        p.grad = 2.0 * p.data
        opt.step()
    assert abs(p.data[0]) < 1e-2


def test_first_step_moves_by_learning_rate():
    updated, m, v = optimizer_step(
        np.array([1.0]), np.array([4.0]), np.zeros(1), np.zeros(1), 1, 0.01, 0.0
    )
    assert updated[0] == pytest.approx(0.99, abs=1e-9)
    assert m[0] == pytest.approx(0.4)
    assert v[0] == pytest.approx(0.016)


def test_decay_alone_scales_parameters():
    p = Parameter(np.array([2.0, -4.0]))
    opt = AdamW([("p", p)], lr=1.0, weight_decay=0.1)
    p.grad = np.zeros(2)
    opt.step()
    np.testing.assert_allclose(p.data, [1.8, -3.6])


def test_shape_mismatch_raises():
    with pytest.raises(DimensionError):
        optimizer_step(np.zeros(2), np.zeros(3), np.zeros(2), np.zeros(2), 1, 0.1, 0.0)


def test_frozen_parameters_are_untouched():
    a, b = Parameter(np.array([1.0])), Parameter(np.array([1.0]))
    opt = AdamW([("a", a), ("b", b)], lr=0.1, weight_decay=0.5, frozen=lambda name: name == "a")
    a.grad, b.grad = np.array([1.0]), np.array([1.0])
    opt.step()
    assert a.data[0] == 1.0
    assert b.data[0] != 1.0
    assert not opt.m["a"].any()


def test_zero_grad_clears_gradients():
    p = Parameter(np.array([1.0]))
    p.grad = np.array([2.0])
    AdamW([("p", p)], lr=0.1).zero_grad()
    assert p.grad is None


def test_state_round_trips_through_blocks():
    p = Parameter(np.array([1.0, 2.0]))
    opt = AdamW([("p", p)], lr=0.1)
    p.grad = np.array([0.5, -0.5])
    opt.step()
    blocks = opt.state_blocks()
    fresh = AdamW([("p", Parameter(np.array([1.0, 2.0])))], lr=0.1)
    fresh.load_state({"p": blocks["adam_m/p"]}, {"p": blocks["adam_v/p"]}, opt.steps)
    np.testing.assert_array_equal(fresh.m["p"], opt.m["p"])
    assert fresh.steps == 1


@pytest.mark.parametrize(
    "m,v",
    [
        ({}, {"p": np.zeros(2)}),
        ({"p": np.zeros(3)}, {"p": np.zeros(3)}),
    ],
)
def test_mismatched_state_is_rejected(m, v):
    opt = AdamW([("p", Parameter(np.zeros(2)))], lr=0.1)
    with pytest.raises(CheckpointError):
        opt.load_state(m, v, 1)
    assert opt.steps == 0
