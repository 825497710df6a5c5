"""Unit tests for the elementary losses."""

import math

import numpy as np
import pytest

from app.core.errors import ValidationError
from app.losses.functional import HALF_LOG_2PI, focal_loss, gaussian_nll, l2_regression
from app.numerics import functional as F
from app.numerics.gradcheck import check_gradients
from app.numerics.tensor import Parameter, Tape, Tensor

T = 8


def test_focal_without_focusing_is_cross_entropy():
    loss = focal_loss(Tensor(np.zeros(2)), 0, gamma=0.0, alpha=1.0)
    assert loss.item() == pytest.approx(math.log(2.0), abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_focal_reduces_to_cross_entropy_on_random_logits(seed):
    logits = np.random.default_rng(seed).normal(size=6)
    expected = -(logits[3] - np.log(np.exp(logits).sum()))
    loss = focal_loss(Tensor(logits), 3, gamma=0.0, alpha=1.0)
    assert loss.item() == pytest.approx(expected, abs=1e-12)


def test_focal_hand_value():
    # p_t = 0.9 for two classes: logit gap log 9
    logits = Tensor(np.array([math.log(9.0), 0.0]))
    loss = focal_loss(logits, 0, gamma=2.0, alpha=1.0)
    assert loss.item() == pytest.approx(-(0.1**2) * math.log(0.9), rel=1e-9)
    assert loss.item() == pytest.approx(1.0536e-3, rel=1e-3)


def test_focal_decreases_towards_confident_target():
    values = [focal_loss(Tensor(np.array([g, 0.0])), 0).item() for g in (0.0, 1.0, 3.0, 8.0)]
    assert values == sorted(values, reverse=True)
    assert values[-1] < 1e-6


def test_focal_rejects_out_of_range_target():
    with pytest.raises(ValidationError):
        focal_loss(Tensor(np.zeros(3)), 3)


def test_gaussian_nll_hand_values():
    target = np.zeros((T, 2))
    ones = Tensor(np.ones((T, 2)))
    assert gaussian_nll(Tensor(target), ones, target).item() == pytest.approx(HALF_LOG_2PI)
    assert gaussian_nll(Tensor(target + 1.0), ones, target).item() == pytest.approx(
        0.5 * (1.0 + math.log(2.0 * math.pi))
    )
    two = Tensor(np.full((T, 2), 2.0))
    assert gaussian_nll(Tensor(target), two, target).item() == pytest.approx(1.612086, abs=1e-6)


def test_gaussian_nll_ignores_invalid_steps():
    target = np.zeros((T, 2))
    mu = np.zeros((T, 2))
    mu[4:] = 1e6
    valid = np.array([True] * 4 + [False] * 4)
    loss = gaussian_nll(Tensor(mu), Tensor(np.ones((T, 2))), target, valid)
    assert loss.item() == pytest.approx(HALF_LOG_2PI)


def test_gaussian_nll_requires_a_valid_step():
    with pytest.raises(ValidationError):
        gaussian_nll(Tensor(np.zeros((T, 2))), Tensor(np.ones((T, 2))), np.zeros((T, 2)), np.zeros(T))


def test_gaussian_nll_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    mu = Parameter(rng.normal(size=(T, 2)))
    sigma = Parameter(rng.uniform(0.3, 2.0, size=(T, 2)))
    target = rng.normal(size=(T, 2))

    report = check_gradients(
        lambda: gaussian_nll(mu, sigma, target), [("mu", mu), ("sigma", sigma)], rtol=1e-6, atol=1e-9
    )

    assert report.passed, report


def test_gaussian_nll_is_stationary_at_the_target():
    target = np.random.default_rng(1).normal(size=(T, 2))
    mu = Parameter(target.copy())
    with Tape() as tape:
        loss = gaussian_nll(mu, Tensor(np.full((T, 2), 0.7)), target)
    tape.backward(loss)
    np.testing.assert_array_equal(mu.grad, np.zeros((T, 2)))


def test_optimal_sigma_equals_residual():
    residual = 1.3
    grid = np.linspace(0.05, 5.0, 9901)
    values = [
        gaussian_nll(Tensor(np.full((1, 2), residual)), Tensor(np.full((1, 2), s)), np.zeros((1, 2))).item()
        for s in grid
    ]
    assert grid[int(np.argmin(values))] == pytest.approx(residual, abs=1e-3)


def test_l2_regression_is_mean_squared_point_error():
    target = np.zeros((T, 2))
    pred = np.zeros((T, 2))
    pred[:, 0] = 3.0
    pred[:, 1] = 4.0
    assert l2_regression(Tensor(pred), target).item() == pytest.approx(25.0)
    assert l2_regression(Tensor(target), target).item() == 0.0


def test_l2_regression_is_smooth_at_zero():
    p = Parameter(np.zeros((T, 2)))
    with Tape() as tape:
        loss = F.sum(l2_regression(p, np.zeros((T, 2))))
    tape.backward(loss)
    assert np.all(np.isfinite(p.grad))
