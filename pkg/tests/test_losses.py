"""
Tests de la perte de Taylor, du solveur fermé, de λ* et du boosting
"""
import numpy as np
import pytest

from src.dataset import LabeledDataset
from src.losses import (
    ExponentialBooster,
    LinearModel,
    TaylorLossSpec,
    boost_linear,
    exponential_loss,
    get_loss,
    margin_profile,
    pick_lambda_star,
    solve_taylor,
    taylor_loss_gradient,
    taylor_loss_value,
)
from src.utils import ConfigError, DataError, NumericalError

from conftest import calibrated_spec, make_dataset


def plain_spec(d, a=0.0, b=-1.0, c=0.5, gamma=0.1):
    return TaylorLossSpec(a, b, c, gamma, np.eye(d))


class TestLossRegistry:
    @pytest.mark.parametrize(
        "name, F0, F1, F2",
        [("square", 1.0, -2.0, 2.0), ("logistic", np.log(2.0), -0.5, 0.25), ("matsushita", 0.5, -0.5, 0.5)],
    )
    def test_derivatives_at_zero(self, name, F0, F1, F2):
        loss = get_loss(name)
        assert loss.F0 == pytest.approx(F0)
        assert loss.F1 == pytest.approx(F1)
        assert loss.F2 == pytest.approx(F2)
        h = 1e-4
        assert float(loss.fn(np.array(0.0))) == pytest.approx(F0)
        derivative = (loss.fn(np.array(h)) - loss.fn(np.array(-h))) / (2 * h)
        assert float(derivative) == pytest.approx(F1, rel=1e-6)
        second = (loss.fn(np.array(h)) - 2 * loss.fn(np.array(0.0)) + loss.fn(np.array(-h))) / h ** 2
        assert float(second) == pytest.approx(F2, rel=1e-4)

    def test_unknown_loss(self):
        with pytest.raises(ConfigError):
            get_loss("hinge")

    def test_spec_from_source(self):
        spec = TaylorLossSpec.from_source(get_loss("logistic"), 2.0, 3)
        assert spec.c == pytest.approx(0.125)
        np.testing.assert_array_equal(spec.Gamma, np.eye(3))

    def test_gamma_must_be_positive_definite(self):
        with pytest.raises(ConfigError):
            TaylorLossSpec(0.0, -1.0, 0.5, 1.0, np.diag([1.0, -1.0]))
        with pytest.raises(ConfigError):
            TaylorLossSpec(0.0, -1.0, 0.5, 0.0, np.eye(2))


class TestTaylorLossValue:
    def test_zero_classifier_gives_a(self, small_dataset):
        spec = plain_spec(small_dataset.d, a=0.7)
        assert taylor_loss_value(small_dataset, LinearModel(np.zeros(4)), spec) == pytest.approx(0.7)

    def test_single_example(self):
        ds = LabeledDataset(np.array([[1.0, 1.0]]), np.array([1.0, 1.0]))
        spec = TaylorLossSpec(0.0, -1.0, 0.5, 1e-300, np.eye(1))
        assert taylor_loss_value(ds, LinearModel([1.0]), spec) == pytest.approx(-0.5)

    def test_dimension_mismatch(self, small_dataset):
        with pytest.raises(DataError):
            taylor_loss_value(small_dataset, LinearModel(np.zeros(3)), plain_spec(4))


class TestSolveTaylor:
    def test_gradient_vanishes(self):
        rng = np.random.default_rng(0)
        for loss in ("square", "logistic", "matsushita"):
            for _ in range(10):
                ds = make_dataset(rng, d=5, m=20)
                spec = TaylorLossSpec.from_source(get_loss(loss), float(rng.uniform(0.01, 1.0)), 5)
                model = solve_taylor(ds, spec)
                grad = taylor_loss_gradient(ds, model, spec)
                assert np.linalg.norm(grad) <= 1e-8 * (1 + np.linalg.norm(ds.mean_operator()))

    def test_matches_gradient_descent(self):
        ds = make_dataset(np.random.default_rng(3), d=5, m=20)
        spec = plain_spec(5, gamma=0.2)
        theta = np.zeros(5)
        system = 2 * spec.c / ds.m * ds.features @ ds.features.T + 2 * spec.gamma * np.eye(5)
        step = 1.0 / np.linalg.eigvalsh(system)[-1]
        for _ in range(20000):
            theta = theta - step * taylor_loss_gradient(ds, LinearModel(theta), spec)
        np.testing.assert_allclose(solve_taylor(ds, spec).theta, theta, atol=1e-6)

    def test_minimum_beats_perturbations(self, small_dataset, rng):
        spec = plain_spec(4)
        model = solve_taylor(small_dataset, spec)
        best = taylor_loss_value(small_dataset, model, spec)
        for _ in range(20):
            perturbed = LinearModel(model.theta + 1e-3 * rng.standard_normal(4))
            assert taylor_loss_value(small_dataset, perturbed, spec) > best

    def test_symmetric_classes_give_degenerate_optimum(self):
        ds = LabeledDataset(np.array([[1.0, 1.0]]), np.array([1.0, -1.0]))
        model = solve_taylor(ds, plain_spec(1))
        assert model.degenerate
        np.testing.assert_array_equal(model.theta, [0.0])

    def test_norm_within_bound_for_positive_c(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            ds = make_dataset(rng, d=4, m=30)
            spec = calibrated_spec(ds)
            assert solve_taylor(ds, spec).norm <= spec.theta_star_norm(ds.x_star) * (1 + 1e-9)

    def test_norm_above_bound_raises_for_positive_c(self, small_dataset, monkeypatch):
        monkeypatch.setattr(TaylorLossSpec, "theta_star_norm", lambda self, x_star: 1e-12)
        with pytest.raises(NumericalError):
            solve_taylor(small_dataset, plain_spec(4))

    def test_norm_above_bound_only_warns_for_negative_c(self, small_dataset, monkeypatch):
        monkeypatch.setattr(TaylorLossSpec, "theta_star_norm", lambda self, x_star: 1e-12)
        model = solve_taylor(small_dataset, plain_spec(4, c=-0.01, gamma=1.0))
        assert model.norm > 1e-12

    def test_zero_c(self, small_dataset):
        with pytest.raises(NumericalError):
            solve_taylor(small_dataset, plain_spec(4, c=0.0))

    def test_indefinite_system(self, small_dataset):
        with pytest.raises(NumericalError):
            solve_taylor(small_dataset, plain_spec(4, c=-100.0, gamma=1e-6))


class TestLambdaStar:
    def test_logistic(self):
        assert pick_lambda_star(get_loss("logistic"), 1.0, 2.0) == pytest.approx(1.5)

    def test_matsushita(self):
        assert pick_lambda_star(get_loss("matsushita"), 0.5, 1.0) == pytest.approx(0.75)

    def test_zero_radius(self):
        assert pick_lambda_star(get_loss("square"), 0.3, 0.0) == 0.3

    def test_non_rspl_rejected(self):
        with pytest.raises(ConfigError):
            pick_lambda_star(get_loss("exponential"), 1.0, 1.0)


class TestBoosting:
    def test_separable_single_feature(self):
        X = np.array([[-1.0, -0.5, 0.5, 1.0]])
        ds = LabeledDataset(X, np.array([-1.0, -1.0, 1.0, 1.0]))
        booster = ExponentialBooster(1).fit(ds)
        assert booster.rounds_ == 1
        assert booster.model().error_rate(ds) == 0.0

    def test_loss_history_non_increasing(self):
        ds = make_dataset(np.random.default_rng(8), d=6, m=50)
        history = ExponentialBooster(200).fit(ds).loss_history_
        assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))

    def test_final_loss_matches_history(self):
        ds = make_dataset(np.random.default_rng(9), d=3, m=30)
        booster = ExponentialBooster(50).fit(ds)
        assert exponential_loss(booster.model(), ds) == pytest.approx(booster.loss_history_[-1])

    def test_zero_features_stop_early(self):
        X = np.zeros((2, 4))
        X[0, 0] = 1.0
        X[0, 1] = 1.0
        ds = LabeledDataset(X, np.array([1.0, -1.0, 1.0, -1.0]))
        booster = ExponentialBooster(10).fit(ds)
        assert booster.rounds_ == 0
        np.testing.assert_array_equal(booster.theta_, np.zeros(2))

    def test_xor_not_better_than_best_direction(self):
        X = np.array([[1.0, -1.0, 1.0, -1.0], [1.0, -1.0, -1.0, 1.0]])
        ds = LabeledDataset(X, np.array([1.0, 1.0, -1.0, -1.0]))
        model = boost_linear(ds, 100)
        angles = np.linspace(0.0, 2 * np.pi, 3600, endpoint=False)
        best = min(
            LinearModel([np.cos(a), np.sin(a)]).error_rate(ds) for a in angles
        )
        assert model.error_rate(ds) >= best

    def test_requires_scaled_features(self):
        ds = LabeledDataset(np.array([[2.0, -1.0]]), np.array([1.0, -1.0]))
        with pytest.raises(DataError):
            boost_linear(ds, 5)

    def test_unfitted_model(self):
        with pytest.raises(ConfigError):
            ExponentialBooster(3).model()


class TestMarginProfile:
    def test_zero_classifier(self, small_dataset):
        profile = margin_profile(LinearModel(np.zeros(4)), small_dataset)
        assert all(margin == 0.0 for margin, _, _ in profile)

    def test_matches_direct_products(self, small_dataset, rng):
        model = LinearModel(rng.standard_normal(4))
        profile = margin_profile(model, small_dataset)
        for margin, label, index in profile:
            x = small_dataset.features[:, index]
            assert margin == pytest.approx(label * model.theta @ x)
        margins = [p[0] for p in profile]
        assert margins == sorted(margins)
