"""
Tests de la chaîne de dérive exacte et des bornes de déviation, d'immunité,
d'écart de perte et de généralisation
"""
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import src.bounds as bounds_module
from src.bounds import (
    audit_bounds,
    build_drift_chain,
    certified_deviation_bound,
    deviation_bound,
    generalization_report,
    immunity_threshold,
    lipschitz_constant,
    loss_gap_bound,
    permuted_sample,
    verify_exact_drift,
)
from src.dataset import LabeledDataset, PartitionSpec
from src.losses import LinearModel, get_loss, solve_taylor, taylor_loss_value
from src.permdiag import compute_key_params, estimate_accuracy, estimate_u, factorize
from src.utils import ConfigError

from conftest import (
    calibrated_spec,
    half_partition,
    make_dataset,
    random_transpositions,
    within_class_permutation,
)


class TestDriftChain:
    def test_identity_chain(self, small_dataset):
        spec = calibrated_spec(small_dataset)
        seq = factorize(np.arange(small_dataset.m), small_dataset.labels)
        chain = build_drift_chain(small_dataset, seq, spec, half_partition(4))
        assert chain.T == 0
        assert len(chain.V) == 1
        np.testing.assert_array_equal(chain.h(0, 0), np.eye(4))
        theta0 = solve_taylor(small_dataset, spec)
        assert verify_exact_drift(chain, theta0, theta0) == 0.0

    def test_within_class_swap_has_no_affine_term(self):
        X = np.array([[0.5, -0.2, 0.3, 0.9], [0.1, 0.8, -0.6, 0.2], [-0.4, 0.7, 0.5, -0.3]])
        ds = LabeledDataset(X, np.array([1.0, 1.0, -1.0, -1.0]))
        partition = PartitionSpec((0,), (1, 2))
        spec = calibrated_spec(ds)
        pi = np.array([1, 0, 2, 3])
        seq = factorize(pi, ds.labels)
        chain = build_drift_chain(ds, seq, spec, partition)
        np.testing.assert_allclose(chain.lam[0], 0.0, atol=1e-15)
        theta0 = solve_taylor(ds, spec)
        thetaT = solve_taylor(permuted_sample(ds, pi, partition), spec)
        np.testing.assert_allclose(
            thetaT.theta - theta0.theta, (chain.h(1, 0) - np.eye(3)) @ theta0.theta, atol=1e-12
        )
        assert verify_exact_drift(chain, theta0, thetaT) <= 1e-8

    def test_within_class_permutation_keeps_mean_operator(self, rng):
        X = rng.integers(-5, 6, size=(4, 30)).astype(float)
        X[0, 0] = 3.0
        ds = LabeledDataset(X, np.where(np.arange(30) % 3 == 0, 1.0, -1.0))
        partition = half_partition(4)
        pi = within_class_permutation(ds.labels, rng, 8)
        np.testing.assert_array_equal(permuted_sample(ds, pi, partition).mean_operator(), ds.mean_operator())
        seq = factorize(pi, ds.labels)
        chain = build_drift_chain(ds, seq, calibrated_spec(ds), partition)
        for eps in chain.eps:
            np.testing.assert_array_equal(eps, 0.0)

    def test_exact_drift_and_sherman_morrison(self):
        rng = np.random.default_rng(100)
        for _ in range(100):
            m = int(rng.integers(8, 41))
            d = int(rng.integers(2, 11))
            ds = make_dataset(rng, d=d, m=m)
            partition = half_partition(d)
            spec = calibrated_spec(ds)
            pi = random_transpositions(m, rng, int(rng.integers(1, 11)))
            seq = factorize(pi, ds.labels)
            chain = build_drift_chain(ds, seq, spec, partition)
            S_hat = permuted_sample(ds, pi, partition)
            np.testing.assert_array_equal(chain.final_features, S_hat.features)
            theta0 = solve_taylor(ds, spec)
            thetaT = solve_taylor(S_hat, spec)
            assert verify_exact_drift(chain, theta0, thetaT) <= 1e-8
            assert chain.sm_agreement <= 1e-8

    def test_h_product_order(self, rng):
        ds = make_dataset(rng, d=4, m=20)
        spec = calibrated_spec(ds)
        seq = factorize(random_transpositions(20, rng, 4), ds.labels)
        chain = build_drift_chain(ds, seq, spec, half_partition(4))
        expected = np.eye(4)
        for t in range(chain.T):
            expected = (np.eye(4) + chain.Lambda[t]) @ expected
        np.testing.assert_allclose(chain.h(chain.T, 0), expected, atol=1e-14)
        np.testing.assert_allclose(chain.H_T[0], expected, atol=1e-12)

    def test_negative_c_chain(self, rng):
        ds = make_dataset(rng, d=3, m=25)
        spec = calibrated_spec(ds)
        concave = replace(spec, c=-spec.c, gamma=50.0 * spec.gamma)
        pi = random_transpositions(25, rng, 3)
        seq = factorize(pi, ds.labels)
        partition = half_partition(3)
        chain = build_drift_chain(ds, seq, concave, partition)
        theta0 = solve_taylor(ds, concave)
        thetaT = solve_taylor(permuted_sample(ds, pi, partition), concave)
        assert verify_exact_drift(chain, theta0, thetaT) <= 1e-8

    def test_sandwich_uses_u_estimate(self, rng):
        ds = make_dataset(rng, d=4, m=30)
        spec = calibrated_spec(ds)
        partition = half_partition(4)
        seq = factorize(random_transpositions(30, rng, 3), ds.labels)
        profile = estimate_accuracy(ds, seq, partition)
        diagnostics = build_drift_chain(ds, seq, spec, partition, profile).diagnostics
        u_value = estimate_u(ds, spec, profile)
        expected = abs(spec.c) / (ds.m * (u_value + spec.gamma * spec.gamma_eig_min))
        assert diagnostics["sandwich_bound"] == pytest.approx(expected, rel=1e-12)
        assert diagnostics["v_max"] <= abs(spec.c) / (ds.m * spec.gamma * spec.gamma_eig_min) * (1 + 1e-9)
        assert build_drift_chain(ds, seq, spec, partition).diagnostics["sandwich_ok"] is None

    def test_caps(self, small_dataset):
        seq = factorize(random_transpositions(small_dataset.m, np.random.default_rng(0), 6))
        with pytest.raises(ConfigError):
            build_drift_chain(
                small_dataset, seq, calibrated_spec(small_dataset), half_partition(4), max_steps=1
            )


class TestBounds:
    def _within_class_case(self, rng):
        m = int(rng.integers(20, 41))
        d = int(rng.integers(3, 7))
        ds = make_dataset(rng, d=d, m=m)
        partition = half_partition(d)
        spec = calibrated_spec(ds)
        pi = within_class_permutation(ds.labels, rng, int(rng.integers(1, 5)))
        return ds, partition, spec, pi

    def test_deviation_immunity_and_loss_gap_hold(self):
        rng = np.random.default_rng(200)
        loss = get_loss("logistic")
        checked = 0
        for _ in range(200):
            ds, partition, spec, pi = self._within_class_case(rng)
            seq = factorize(pi, ds.labels)
            if seq.T == 0:
                continue
            profile = estimate_accuracy(ds, seq, partition)
            theta0 = solve_taylor(ds, spec)
            thetaT = solve_taylor(permuted_sample(ds, pi, partition), spec)
            kp = compute_key_params(theta0, ds, profile, seq)
            assert seq.rho == 0.0 and kp.delta_perm == 0.0

            drift = np.linalg.norm(thetaT.theta - theta0.theta) / theta0.norm
            bound = deviation_bound(kp, profile, seq.T, ds.m)
            assert drift <= bound * (1 + 1e-9) + 1e-12

            kappa = immunity_threshold(kp, profile, ds.m)
            if kappa is not None:
                immune = theta0.margins(ds) > kappa
                assert np.all(thetaT.margins(ds)[immune] > 0)
                rhs, _ = loss_gap_bound(kp, spec, loss, ds.d, ds.m, ds.x_star)
                gap = taylor_loss_value(ds, thetaT, spec) - taylor_loss_value(ds, theta0, spec)
                assert gap <= rhs * (1 + 1e-9) + 1e-12
            checked += 1
        assert checked > 150

    def _cross_class_case(self, rng):
        m = int(rng.integers(20, 41))
        d = int(rng.integers(3, 7))
        ds = make_dataset(rng, d=d, m=m)
        partition = half_partition(d)
        pi = random_transpositions(m, rng, int(rng.integers(1, 6)))
        # π qui préserve les classes : (0 1) la rend inter-classes (y_0 = 1, y_1 = −1)
        if np.array_equal(ds.labels[pi], ds.labels):
            pi[[0, 1]] = pi[[1, 0]]
        return ds, partition, calibrated_spec(ds), pi

    def test_certified_bound_holds_across_classes(self):
        rng = np.random.default_rng(201)
        crossed = 0
        for _ in range(200):
            ds, partition, spec, pi = self._cross_class_case(rng)
            seq = factorize(pi, ds.labels)
            if seq.T == 0:
                continue
            crossed += seq.T_plus > 0
            profile = estimate_accuracy(ds, seq, partition)
            theta0 = solve_taylor(ds, spec)
            thetaT = solve_taylor(permuted_sample(ds, pi, partition), spec)
            kp = compute_key_params(theta0, ds, profile, seq)
            drift = np.linalg.norm(thetaT.theta - theta0.theta) / theta0.norm
            bound = certified_deviation_bound(kp, profile, seq, spec)
            assert bound is not None
            assert drift <= bound * (1 + 1e-9) + 1e-12
        assert crossed == 200

    def test_certified_bound_for_negative_c(self, rng):
        ds = make_dataset(rng, d=4, m=30)
        spec = calibrated_spec(ds)
        concave = replace(spec, c=-spec.c, gamma=50.0 * spec.gamma)
        partition = half_partition(4)
        pi = random_transpositions(30, rng, 4)
        seq = factorize(pi, ds.labels)
        profile = estimate_accuracy(ds, seq, partition)
        theta0 = solve_taylor(ds, concave)
        thetaT = solve_taylor(permuted_sample(ds, pi, partition), concave)
        kp = compute_key_params(theta0, ds, profile, seq)
        drift = np.linalg.norm(thetaT.theta - theta0.theta) / theta0.norm
        assert drift <= certified_deviation_bound(kp, profile, seq, concave) * (1 + 1e-9) + 1e-12

        # γλ↑(Γ)/|c| ≤ 2X_*² : V_t non garantie définie positive
        weak = replace(spec, c=-spec.c, gamma=abs(spec.c) * ds.x_star ** 2)
        assert certified_deviation_bound(kp, profile, seq, weak) is None

    def test_certified_bound_reduces_to_growth_term_within_class(self, rng):
        ds = make_dataset(rng, d=4, m=30)
        spec = calibrated_spec(ds)
        seq = factorize(within_class_permutation(ds.labels, rng, 3), ds.labels)
        profile = estimate_accuracy(ds, seq, half_partition(4))
        kp = compute_key_params(solve_taylor(ds, spec), ds, profile, seq)
        if seq.T:
            q = abs(spec.c) / (ds.m * spec.gamma * spec.gamma_eig_min) * profile.tau ** 2
            ell = q * (2 + 4 * q) / (1 - 2 * q)
            assert certified_deviation_bound(kp, profile, seq, spec) == pytest.approx((1 + ell) ** seq.T - 1)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_audit_flags_match_observed_drift(self, instance_seed):
        ds, partition, spec, pi = self._cross_class_case(np.random.default_rng(instance_seed))
        report = audit_bounds(ds, pi, spec, get_loss("logistic"), partition, with_chain=False)
        theta0 = solve_taylor(ds, spec)
        thetaT = solve_taylor(permuted_sample(ds, pi, partition), spec)
        drift = np.linalg.norm(thetaT.theta - theta0.theta) / theta0.norm

        def exceeds(bound):
            return bound is not None and drift > bound * (1 + 1e-9) + 1e-12

        assert report.preconditions["accuracy"]
        assert ("deviation" in report.violations) == exceeds(report.deviation_rhs)
        assert "deviation_certified" not in report.violations
        if report.seq_T:
            assert report.rho > 0
            assert not exceeds(report.deviation_certified_rhs)

    def test_zero_rho_bound_is_c_of_m(self, rng):
        ds = make_dataset(rng, d=4, m=40)
        pi = within_class_permutation(ds.labels, rng, 3)
        seq = factorize(pi, ds.labels)
        profile = estimate_accuracy(ds, seq, half_partition(4))
        kp = compute_key_params(solve_taylor(ds, calibrated_spec(ds)), ds, profile, seq)
        if seq.T and profile.alpha_bounded:
            assert deviation_bound(kp, profile, seq.T, ds.m) == pytest.approx(
                min(kp.c_of_m, profile.xi / ds.m * seq.T ** 2)
            )
            assert immunity_threshold(kp, profile, ds.m) == pytest.approx(kp.delta_theta * kp.c_of_m)

    def test_no_transposition_means_no_bound(self, small_dataset):
        spec = calibrated_spec(small_dataset)
        seq = factorize(np.arange(small_dataset.m), small_dataset.labels)
        profile = estimate_accuracy(small_dataset, seq, half_partition(4))
        theta0 = solve_taylor(small_dataset, spec)
        kp = compute_key_params(theta0, small_dataset, profile, seq)
        assert deviation_bound(kp, profile, 0, small_dataset.m) == 0.0
        rhs, _ = loss_gap_bound(kp, spec, get_loss("logistic"), 4, small_dataset.m, small_dataset.x_star)
        assert rhs == 0.0
        report = generalization_report(kp, spec, get_loss("logistic"), small_dataset, theta0)
        assert report["penalty"] == 0.0
        assert report["total"] == pytest.approx(report["Q"])

    def test_degenerate_optimum(self, small_dataset):
        spec = calibrated_spec(small_dataset)
        seq = factorize(random_transpositions(small_dataset.m, np.random.default_rng(1), 2))
        profile = estimate_accuracy(small_dataset, seq, half_partition(4))
        kp = compute_key_params(LinearModel(np.zeros(4)), small_dataset, profile, seq)
        if seq.T:
            assert deviation_bound(kp, profile, seq.T, small_dataset.m) is None

    def test_mirrored_classes_drop_first_term(self, rng):
        half = rng.uniform(-1, 1, (3, 6))
        ds = LabeledDataset(np.hstack([half, half]), np.array([1.0] * 6 + [-1.0] * 6))
        spec = calibrated_spec(ds)
        seq = factorize(random_transpositions(12, rng, 2), ds.labels)
        profile = estimate_accuracy(ds, seq, half_partition(3))
        kp = compute_key_params(LinearModel(np.ones(3)), ds, profile, seq)
        _, A = loss_gap_bound(kp, spec, get_loss("logistic"), 3, 12, ds.x_star)
        expected = (3 * kp.delta_theta + 2 * kp.delta_perm) * (
            abs(spec.c) + 3 * spec.gamma * spec.gamma_eig_max / ds.x_star ** 2
        )
        assert A == pytest.approx(expected, rel=1e-12, abs=1e-15)


class TestGeneralization:
    def test_rademacher_halves_when_m_quadruples(self, rng):
        small = make_dataset(rng, d=3, m=25)
        X = np.hstack([small.features] * 4)
        large = LabeledDataset(X, np.tile(small.labels, 4))
        spec = calibrated_spec(small)
        seq_small = factorize(np.arange(25))
        seq_large = factorize(np.arange(100))
        kp_small = compute_key_params(
            solve_taylor(small, spec), small, estimate_accuracy(small, seq_small, half_partition(3)), seq_small
        )
        kp_large = compute_key_params(
            solve_taylor(large, spec), large, estimate_accuracy(large, seq_large, half_partition(3)), seq_large
        )
        r_small = generalization_report(kp_small, spec, get_loss("logistic"), small, solve_taylor(small, spec))
        r_large = generalization_report(kp_large, spec, get_loss("logistic"), large, solve_taylor(large, spec))
        assert r_large["rademacher"] == pytest.approx(r_small["rademacher"] / 2.0)

    def test_lipschitz_constant_dominates_gradient(self, rng):
        ds = make_dataset(rng, d=3, m=30)
        spec = calibrated_spec(ds)
        x_star = ds.x_star
        L = lipschitz_constant(spec, x_star)
        theta_star = spec.theta_star_norm(x_star)
        worst = 0.0
        for _ in range(2000):
            theta = rng.standard_normal(3)
            theta *= theta_star * rng.uniform() / np.linalg.norm(theta)
            x = rng.standard_normal(3)
            x *= x_star * rng.uniform() / np.linalg.norm(x)
            z = theta @ x
            # dérivée en θ du terme b z + c z² : (b + 2cz) x
            worst = max(worst, abs(spec.b + 2 * spec.c * z) * np.linalg.norm(x))
        assert worst <= L + 1e-12
        assert L == pytest.approx(abs(spec.b) * x_star + 2 * abs(spec.c) * x_star ** 2 * theta_star)

    def test_invalid_delta(self, small_dataset):
        spec = calibrated_spec(small_dataset)
        seq = factorize(np.arange(small_dataset.m))
        theta0 = solve_taylor(small_dataset, spec)
        kp = compute_key_params(
            theta0, small_dataset, estimate_accuracy(small_dataset, seq, half_partition(4)), seq
        )
        with pytest.raises(ConfigError):
            generalization_report(kp, spec, get_loss("logistic"), small_dataset, theta0, delta=1.5)

    def test_q_formula(self, small_dataset):
        spec = calibrated_spec(small_dataset)
        seq = factorize(np.arange(small_dataset.m))
        theta0 = solve_taylor(small_dataset, spec)
        kp = compute_key_params(
            theta0, small_dataset, estimate_accuracy(small_dataset, seq, half_partition(4)), seq
        )
        report = generalization_report(kp, spec, get_loss("logistic"), small_dataset, theta0, delta=0.1, lipschitz_L=2.0)
        m = small_dataset.m
        expected = (
            taylor_loss_value(small_dataset, theta0, spec)
            + 2 * 2.0 * report["rademacher"]
            + math.sqrt(math.log(2 / 0.1) / (2 * m))
        )
        assert report["Q"] == pytest.approx(expected)


class TestAudit:
    def test_within_class_audit_has_no_violation(self):
        rng = np.random.default_rng(31)
        ds = make_dataset(rng, d=5, m=40)
        partition = half_partition(5)
        spec = calibrated_spec(ds)
        pi = within_class_permutation(ds.labels, rng, 3)
        report = audit_bounds(ds, pi, spec, get_loss("logistic"), partition)
        assert report.violations == []
        assert report.rho == 0.0
        assert report.preconditions["accuracy"] is True
        assert report.chain["residual"] <= 1e-8
        payload = report.to_dict()
        for key in ("epsilon", "tau", "xi", "alpha", "rho", "delta_theta", "delta_perm", "delta_set", "c_of_m"):
            assert key in payload

    def test_accuracy_precondition_follows_profile(self, monkeypatch):
        rng = np.random.default_rng(31)
        ds = make_dataset(rng, d=5, m=40)
        pi = within_class_permutation(ds.labels, rng, 3)
        exact = bounds_module.estimate_accuracy
        monkeypatch.setattr(
            bounds_module, "estimate_accuracy", lambda *a, **kw: replace(exact(*a, **kw), accurate=False)
        )
        report = audit_bounds(ds, pi, calibrated_spec(ds), get_loss("logistic"), half_partition(5))
        assert report.preconditions["accuracy"] is False
        assert not report.preconditions_pass
        assert "deviation_certified_rhs" in report.to_dict()

    def test_identity_audit(self, small_dataset):
        spec = calibrated_spec(small_dataset)
        report = audit_bounds(
            small_dataset, np.arange(small_dataset.m), spec, get_loss("logistic"), half_partition(4)
        )
        assert report.seq_T == 0
        assert report.key.delta_perm == 0.0
        assert report.deviation_rhs == 0.0
        assert report.empirical["relative_drift"] == 0.0

    def test_unbounded_alpha_suppresses_bounds(self):
        rng = np.random.default_rng(2)
        ds = make_dataset(rng, d=4, m=12)
        spec = calibrated_spec(ds)
        pi = np.roll(np.arange(12), 1)
        report = audit_bounds(ds, pi, spec, get_loss("logistic"), half_partition(4))
        if not report.profile.alpha_bounded:
            assert report.suppressed == "alpha-unbounded"
            assert report.immunity_kappa_min is None
            assert report.loss_gap_rhs is None
