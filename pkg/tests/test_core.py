"""Tests for the deterministic primitives in coevnet.core."""

import numpy as np
import pytest

from coevnet.core import (
    DynamicNetwork,
    EmptyNeighborhoodError,
    MembershipState,
    ModelParams,
    RoleIndicators,
    influence_mean,
    marginal_link_prob,
    neighborhood_mean,
    normalized_weights,
    softmax_from_natural,
    transition_log_density,
)

import oracles


class TestSoftmax:
    def test_two_zeros_split_evenly(self):
        np.testing.assert_allclose(softmax_from_natural([0.0, 0.0]), [0.5, 0.5])

    @pytest.mark.parametrize("c", [-3.0, 0.0, 17.5])
    def test_constant_vector_is_uniform(self, c):
        out = softmax_from_natural(np.full(3, c))
        np.testing.assert_allclose(out, np.full(3, 1.0 / 3.0), atol=1e-15)

    def test_log_ratio_vector(self):
        """Logits log(1), log(2), log(7) put exactly 10/20/70 percent."""
        out = softmax_from_natural(np.log([1.0, 2.0, 7.0]))
        np.testing.assert_allclose(out, [0.1, 0.2, 0.7], atol=1e-15)

    def test_shift_invariance(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            mu = rng.normal(0, 5, size=rng.integers(2, 6))
            c = rng.normal(0, 100)
            np.testing.assert_allclose(
                softmax_from_natural(mu + c), softmax_from_natural(mu), atol=1e-12
            )

    def test_rows_are_simplex_vectors(self):
        rng = np.random.default_rng(3)
        mu = rng.normal(0, 50, (4, 6, 3))
        pi = softmax_from_natural(mu)
        assert np.all(pi >= 0.0) and np.all(pi <= 1.0)
        np.testing.assert_allclose(pi.sum(axis=-1), 1.0, atol=1e-12)

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(8)
        mu = rng.normal(0, 2, 5)
        c = np.log(np.exp(mu).sum())
        np.testing.assert_allclose(softmax_from_natural(mu), np.exp(mu - c), atol=1e-12)

    def test_overflow_safe_for_large_entries(self):
        out = softmax_from_natural([1000.0, 0.0])
        np.testing.assert_allclose(out, [1.0, 0.0], atol=1e-300)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            softmax_from_natural([np.nan, 0.0])
        with pytest.raises(ValueError, match="finite"):
            softmax_from_natural([np.inf, 0.0])


class TestNeighborhoodMean:
    def test_single_neighbor_returns_its_mu(self):
        mu = np.array([[1.0, 2.0], [5.0, -3.0]])
        Y = np.array([[0, 1], [0, 0]])
        w = np.full((2, 2), 0.7)
        np.testing.assert_allclose(neighborhood_mean(mu, Y, w, 0), mu[1])

    def test_two_equal_neighbors_average(self):
        mu = np.array([[9.0, 9.0], [1.0, 0.0], [0.0, 1.0]])
        Y = np.array([[0, 1, 1], [0, 0, 0], [0, 0, 0]])
        w = np.ones((3, 3))
        np.testing.assert_allclose(neighborhood_mean(mu, Y, w, 0), [0.5, 0.5])

    def test_weighted_three_neighbor_blend(self):
        """Raw weights (1, 2, 1) renormalize to (0.25, 0.5, 0.25)."""
        mu = np.array([[0.0, 0.0, 0.0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
        Y = np.zeros((4, 4), dtype=int)
        Y[0, 1:] = 1
        w = np.zeros((4, 4))
        w[0, 1:] = [1.0, 2.0, 1.0]
        np.testing.assert_allclose(
            neighborhood_mean(mu, Y, w, 0), [0.25, 0.5, 0.25], atol=1e-15
        )

    def test_result_in_convex_hull(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            N, K = 5, 3
            mu = rng.normal(0, 3, (N, K))
            Y = (rng.random((N, N)) < 0.6).astype(int)
            np.fill_diagonal(Y, 0)
            Y[0, 1] = 1
            w = rng.uniform(0.1, 2.0, (N, N))
            out = neighborhood_mean(mu, Y, w, 0)
            nbrs = mu[Y[0] > 0]
            assert np.all(out <= nbrs.max(axis=0) + 1e-12)
            assert np.all(out >= nbrs.min(axis=0) - 1e-12)

    def test_empty_neighborhood_raises(self):
        mu = np.zeros((2, 2))
        Y = np.zeros((2, 2), dtype=int)
        with pytest.raises(EmptyNeighborhoodError):
            neighborhood_mean(mu, Y, np.ones((2, 2)), 0)

    def test_zero_weights_count_as_empty(self):
        mu = np.zeros((2, 2))
        Y = np.array([[0, 1], [0, 0]])
        with pytest.raises(EmptyNeighborhoodError):
            neighborhood_mean(mu, Y, np.zeros((2, 2)), 0)


class TestNormalizedWeights:
    def test_rows_sum_to_one_or_zero(self):
        rng = np.random.default_rng(5)
        Y = (rng.random((6, 6)) < 0.4).astype(int)
        np.fill_diagonal(Y, 0)
        w = rng.uniform(0.0, 2.0, (6, 6))
        beta = rng.uniform(0, 1, 6)
        wt, b_eff = normalized_weights(Y, w, beta)
        sums = wt.sum(axis=1)
        active = (Y * w).sum(axis=1) > 0
        np.testing.assert_allclose(sums[active], 1.0, atol=1e-12)
        np.testing.assert_allclose(sums[~active], 0.0)
        np.testing.assert_allclose(b_eff[active], beta[active])
        np.testing.assert_allclose(b_eff[~active], 0.0)


class TestInfluenceMean:
    def test_beta_zero_keeps_own(self):
        np.testing.assert_allclose(
            influence_mean([1.0, 2.0], [9.0, 9.0], 0.0), [1.0, 2.0]
        )

    def test_beta_one_copies_neighborhood(self):
        np.testing.assert_allclose(
            influence_mean([1.0, 2.0], [9.0, 9.0], 1.0), [9.0, 9.0]
        )

    def test_quarter_blend(self):
        np.testing.assert_allclose(
            influence_mean([4.0, 0.0], [0.0, 4.0], 0.25), [3.0, 1.0]
        )

    def test_affine_in_beta(self):
        """The midpoint value is the average of the endpoint values."""
        rng = np.random.default_rng(2)
        mu_p, mu_S = rng.normal(0, 3, 4), rng.normal(0, 3, 4)
        lo = influence_mean(mu_p, mu_S, 0.0)
        mid = influence_mean(mu_p, mu_S, 0.5)
        hi = influence_mean(mu_p, mu_S, 1.0)
        np.testing.assert_allclose(mid, 0.5 * (lo + hi), atol=1e-12)

    @pytest.mark.parametrize("bad", [-0.1, 1.1])
    def test_beta_outside_unit_interval_rejected(self, bad):
        with pytest.raises(ValueError, match="beta"):
            influence_mean([0.0], [0.0], bad)


class TestMarginalLinkProb:
    def test_degenerate_memberships_select_single_cell(self):
        B = np.array([[0.37, 0.9], [0.5, 0.6]])
        assert marginal_link_prob([1, 0], [1, 0], B) == pytest.approx(0.37)

    def test_all_ones_compatibility_gives_certainty(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            pi = rng.dirichlet(np.ones(3))
            qi = rng.dirichlet(np.ones(3))
            assert marginal_link_prob(pi, qi, np.ones((3, 3))) == pytest.approx(1.0)

    def test_hand_instance_with_sparsity(self):
        pi_p, pi_q = [0.6, 0.4], [0.3, 0.7]
        B = np.array([[0.9, 0.1], [0.1, 0.8]])
        expected = oracles.brute_link_prob(pi_p, pi_q, B, rho=0.1)
        assert marginal_link_prob(pi_p, pi_q, B, rho=0.1) == pytest.approx(
            expected, abs=1e-15
        )

    def test_matches_brute_force_enumeration(self):
        rng = np.random.default_rng(77)
        for _ in range(200):
            K = rng.integers(2, 5)
            pi_p = rng.dirichlet(np.ones(K))
            pi_q = rng.dirichlet(np.ones(K))
            B = rng.uniform(0, 1, (K, K))
            rho = rng.uniform(0, 0.5)
            got = marginal_link_prob(pi_p, pi_q, B, rho)
            want = oracles.brute_link_prob(pi_p, pi_q, B, rho)
            assert abs(got - want) <= 1e-12
            assert 0.0 <= got <= 1.0


class TestTransitionLogDensity:
    def test_mode_value_standard_normal(self):
        mu_p, mu_S = np.array([0.7]), np.array([-0.2])
        mode = influence_mean(mu_p, mu_S, 0.3)
        got = transition_log_density(mode, mu_p, mu_S, 0.3, [1.0])
        assert got == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-12)

    def test_unit_variance_residual(self):
        r = 1.7
        got = transition_log_density([r], [0.0], [0.0], 0.5, [1.0])
        assert got == pytest.approx(-0.5 * np.log(2 * np.pi) - r**2 / 2, abs=1e-12)

    def test_matches_diagonal_gaussian_formula(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            K = 3
            mu_p, mu_S = rng.normal(0, 2, K), rng.normal(0, 2, K)
            beta = rng.uniform(0, 1)
            var = rng.uniform(0.1, 3.0, K)
            x = rng.normal(0, 2, K)
            r = x - ((1 - beta) * mu_p + beta * mu_S)
            want = float(
                np.sum(-0.5 * np.log(2 * np.pi * var) - 0.5 * r**2 / var)
            )
            got = transition_log_density(x, mu_p, mu_S, beta, var)
            assert got == pytest.approx(want, abs=1e-12)

    @pytest.mark.parametrize("K", [1, 2])
    def test_integrates_to_one(self, K):
        """Monte Carlo integral of the density over a wide uniform box."""
        rng = np.random.default_rng(123 + K)
        mu_p, mu_S = rng.normal(0, 1, K), rng.normal(0, 1, K)
        beta = 0.4
        var = rng.uniform(0.3, 1.0, K)
        mode = influence_mean(mu_p, mu_S, beta)
        half = 8.0 * np.sqrt(var)
        n = 100_000
        x = mode + (rng.random((n, K)) * 2 - 1) * half
        dens = np.exp(
            [transition_log_density(xi, mu_p, mu_S, beta, var) for xi in x[:n]]
        )
        volume = float(np.prod(2 * half))
        est = volume * dens.mean()
        se = volume * dens.std() / np.sqrt(n)
        assert abs(est - 1.0) <= 3 * se

    def test_nonpositive_variance_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            transition_log_density([0.0], [0.0], [0.0], 0.5, [0.0])


class TestModelParams:
    def _valid(self):
        return ModelParams(
            B=np.array([[0.8, 0.2], [0.2, 0.7]]),
            beta=np.array([0.1, 0.5, 0.9]),
            w=np.ones((3, 3)),
            sigma_mu=np.array([0.5, 0.5]),
            alpha0=np.zeros(2),
            A=np.ones(2),
        )

    def test_valid_instance_passes(self):
        self._valid().validate()

    def test_b_entries_bounded(self):
        p = self._valid()
        p.B = np.array([[1.2, 0.2], [0.2, 0.7]])
        with pytest.raises(ValueError, match="B"):
            p.validate()

    def test_beta_bounded(self):
        p = self._valid()
        p.beta = np.array([0.1, 1.5, 0.9])
        with pytest.raises(ValueError, match="beta"):
            p.validate()

    def test_negative_weights_rejected(self):
        p = self._valid()
        p.w = -np.ones((3, 3))
        with pytest.raises(ValueError, match="nonnegative"):
            p.validate()

    def test_nonpositive_variance_rejected(self):
        p = self._valid()
        p.A = np.array([1.0, 0.0])
        with pytest.raises(ValueError, match="positive"):
            p.validate()

    def test_rho_bounded(self):
        p = self._valid()
        p.rho = 1.0
        with pytest.raises(ValueError, match="rho"):
            p.validate()

    def test_effective_b_scales_and_clamps(self):
        p = self._valid()
        p.rho = 0.5
        p.B = np.array([[1.0, 0.0], [0.5, 1.0]])
        eff = p.effective_B()
        assert eff.max() <= 1.0 - 1e-10
        assert eff.min() >= 1e-10
        assert eff[1, 0] == pytest.approx(0.25)

    def test_copy_is_deep(self):
        p = self._valid()
        q = p.copy()
        q.B[0, 0] = 0.0
        assert p.B[0, 0] == 0.8


class TestContainers:
    def test_membership_pi_rows_sum_to_one(self):
        ms = MembershipState(np.random.default_rng(1).normal(0, 2, (3, 4, 2)))
        np.testing.assert_allclose(ms.pi.sum(axis=-1), 1.0, atol=1e-12)
        assert ms.n_steps == 2

    def test_network_rejects_self_loops(self):
        Y = np.zeros((1, 3, 3), dtype=int)
        Y[0, 1, 1] = 1
        with pytest.raises(ValueError, match="self-links"):
            DynamicNetwork(Y).validate()

    def test_network_rejects_non_binary(self):
        Y = np.zeros((1, 3, 3), dtype=int)
        Y[0, 0, 1] = 2
        with pytest.raises(ValueError, match="binary"):
            DynamicNetwork(Y).validate()

    def test_network_rejects_label_mismatch(self):
        net = DynamicNetwork(np.zeros((1, 3, 3), dtype=int), node_labels=["a", "b"])
        with pytest.raises(ValueError, match="label"):
            net.validate()

    def test_network_default_labels_and_degrees(self):
        Y = np.zeros((2, 3, 3), dtype=int)
        Y[0, 0, 1] = Y[0, 0, 2] = 1
        net = DynamicNetwork(Y)
        assert net.node_labels == ["0", "1", "2"]
        assert net.N == 3 and net.T == 1
        np.testing.assert_array_equal(net.out_degrees(0), [2, 0, 0])

    def test_indicators_must_be_one_hot(self):
        z = np.zeros((1, 2, 2, 2))
        with pytest.raises(ValueError, match="one-hot"):
            RoleIndicators(z, z).validate()
