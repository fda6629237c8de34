"""Estimators: facility cell means and the two ridge reductions."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from congame.data import ExplorationPolicy, FeedbackLevel, collect, project
from congame.errors import InputError
from congame.estimators import (
    FacilityEstimate,
    FeatureMap,
    LinearModel,
    agent_reward_and_bonus,
    default_iota,
    facility_reward_and_bonus,
    fit,
    fit_agent_ridge,
    fit_facility,
    fit_game_ridge,
    game_reward_and_bonus,
)
from congame.game import iter_joint_actions, noisy_variant, player_mean_reward
from congame.instances import build

from conftest import dyadic_random_game


GAME3 = build("game3").game  # f0 pays (1, 1/2), f1 pays (1, -1)
RHO_VARIED = ExplorationPolicy.uniform(
    [((0,), (0,)), ((0,), (1,)), ((), ()), ((1,), (1,))]
)


def test_default_iota_frozen_value():
    assert default_iota(2, 2, 0.1) == pytest.approx(10.961277846683982, abs=0)
    with pytest.raises(InputError):
        default_iota(2, 2, 1.5)


class TestFeatureMap:
    def test_dimension_and_index_convention(self):
        fmap = FeatureMap(3, 2)
        assert fmap.dimension == 6
        assert fmap.index(0, 1) == 0
        assert fmap.index(1, 2) == 4  # m*f + (count-1)

    def test_index_cell_bijection(self):
        fmap = FeatureMap(4, 3)
        seen = set()
        for f in range(3):
            for n in range(1, 5):
                k = fmap.index(f, n)
                assert fmap.cell(k) == (f, n)
                seen.add(k)
        assert seen == set(range(fmap.dimension))

    def test_out_of_range_cells_are_rejected(self):
        fmap = FeatureMap(2, 2)
        with pytest.raises(InputError):
            fmap.index(0, 0)
        with pytest.raises(InputError):
            fmap.index(2, 1)
        with pytest.raises(InputError):
            fmap.cell(4)

    def test_feature_vector_marks_selected_cells(self):
        fmap = FeatureMap(2, 2)
        a = ((0, 1), (1,))  # loads: f0 -> 1, f1 -> 2
        assert fmap.feature_indices(a, 0) == (fmap.index(0, 1), fmap.index(1, 2))
        x = fmap.feature_vector(a, 0)
        assert x.tolist() == [1.0, 0.0, 0.0, 1.0]
        assert fmap.feature_vector(a, 1).tolist() == [0.0, 0.0, 0.0, 1.0]

    def test_aggregate_entry_equals_the_selector_count(self):
        fmap = FeatureMap(2, 2)
        a = ((0, 1), (1,))
        agg = fmap.aggregate_vector(a)
        assert agg.tolist() == [1.0, 0.0, 0.0, 2.0]
        assert np.array_equal(
            agg, fmap.feature_vector(a, 0) + fmap.feature_vector(a, 1)
        )


class TestFacilityEstimate:
    def test_counts_include_the_idle_column_and_sum_to_records(self):
        data = collect(GAME3, RHO_VARIED, 40, FeedbackLevel.FACILITY, seed=5)
        est = fit_facility(data, delta=0.1)
        assert est.counts.shape == (2, 3)
        assert est.counts.sum(axis=1).tolist() == [40, 40]
        assert est.counts[0].tolist() == [19, 10, 11]

    def test_deterministic_means_are_exact(self):
        data = collect(GAME3, RHO_VARIED, 40, FeedbackLevel.FACILITY, seed=5)
        est = fit_facility(data, delta=0.1)
        # dyadic rewards, so empirical means equal the true table exactly
        assert est.means.tolist() == [[0.0, 1.0, 0.5], [0.0, 1.0, -1.0]]

    def test_bonus_sums_hoeffding_widths_per_selected_facility(self):
        data = collect(GAME3, RHO_VARIED, 40, FeedbackLevel.FACILITY, seed=5)
        est = fit_facility(data, delta=0.1)
        estimate, bonus = facility_reward_and_bonus(est, ((0,), (0,)), 0)
        assert estimate == 0.5
        assert bonus == math.sqrt(est.iota / est.counts[0, 2])

    def test_unobserved_cell_gets_the_full_width(self):
        rho = ExplorationPolicy.uniform([((0,), ())])
        data = collect(GAME3, rho, 10, FeedbackLevel.FACILITY, seed=0)
        est = fit_facility(data, delta=0.1)
        _, bonus = est.reward_and_bonus(((1,), ()), 0)  # f1 never observed
        assert bonus == math.sqrt(est.iota)

    def test_wrong_level_is_rejected(self):
        data = collect(GAME3, RHO_VARIED, 5, FeedbackLevel.AGENT, seed=0)
        with pytest.raises(InputError, match="facility-level"):
            fit_facility(data, delta=0.1)


class TestAgentRidge:
    def test_design_matrix_matches_explicit_outer_products(self):
        data = collect(GAME3, RHO_VARIED, 12, FeedbackLevel.AGENT, seed=2)
        model = fit_agent_ridge(data, delta=0.1)
        fmap = model.feature_map
        V = np.eye(fmap.dimension)
        y = np.zeros(fmap.dimension)
        for a, fb in data.records:
            for i in range(2):
                x = fmap.feature_vector(a, i)
                V += np.outer(x, x)
                y += fb[i] * x
        assert np.array_equal(model.cov, V)
        assert np.allclose(model.theta, np.linalg.solve(V, y))

    def test_predictions_approach_true_rewards(self):
        data = collect(GAME3, RHO_VARIED, 3000, FeedbackLevel.AGENT, seed=3)
        model = fit_agent_ridge(data, delta=0.1)
        for a, _ in RHO_VARIED.support:
            for i in range(2):
                assert model.predict(a, i) == pytest.approx(
                    player_mean_reward(GAME3, a, i), abs=0.02
                )

    def test_elliptical_norm_shrinks_as_records_accumulate(self):
        long = collect(GAME3, RHO_VARIED, 400, FeedbackLevel.AGENT, seed=4)
        fmap = FeatureMap(2, 2)
        x = fmap.feature_vector(((0,), (0,)), 0)
        quads = [
            fit_agent_ridge(long.prefix(n), fmap, delta=0.1)._quad(x)
            for n in (25, 100, 400)
        ]
        assert quads[0] >= quads[1] >= quads[2]

    def test_covariance_dominates_the_identity(self):
        data = collect(GAME3, RHO_VARIED, 30, FeedbackLevel.AGENT, seed=5)
        model = fit_agent_ridge(data, delta=0.1)
        eigenvalues = np.linalg.eigvalsh(model.cov)
        assert eigenvalues.min() >= 1.0 - 1e-9

    def test_radius_uses_the_agent_level_formula(self):
        data = collect(GAME3, RHO_VARIED, 30, FeedbackLevel.AGENT, seed=6)
        model = fit_agent_ridge(data, delta=0.1)
        d = 4
        expected = 2.0 * math.sqrt(d) + math.sqrt(
            d * math.log(1.0 + 2 * 30 * 2 / d) + model.iota
        )
        assert math.sqrt(model.beta) == pytest.approx(expected, abs=0)


class TestGameRidge:
    def test_width_is_uniform_across_players(self):
        data = collect(GAME3, RHO_VARIED, 50, FeedbackLevel.GAME, seed=7)
        model = fit_game_ridge(data, delta=0.1)
        for _, a in iter_joint_actions(GAME3):
            widths = {
                game_reward_and_bonus(model, a, i)[1] for i in range(2)
            }
            assert len(widths) == 1

    def test_game_width_dominates_each_player_norm(self):
        data = collect(GAME3, RHO_VARIED, 50, FeedbackLevel.GAME, seed=7)
        model = fit_game_ridge(data, delta=0.1)
        sqrt_beta = math.sqrt(model.beta)
        a = ((0,), (1,))
        _, width = model.reward_and_bonus(a, 0)
        for i in range(2):
            x = model.feature_map.feature_vector(a, i)
            assert width >= math.sqrt(model._quad(x)) * sqrt_beta - 1e-12

    def test_radius_uses_the_game_level_formula(self):
        data = collect(GAME3, RHO_VARIED, 50, FeedbackLevel.GAME, seed=8)
        model = fit_game_ridge(data, delta=0.1)
        expected = 2.0 * math.sqrt(4) + math.sqrt(
            4 * math.log(1.0 + 50 * 2) + model.iota
        )
        assert math.sqrt(model.beta) == pytest.approx(expected, abs=0)

    def test_aggregate_design_uses_summed_features(self):
        data = collect(GAME3, RHO_VARIED, 12, FeedbackLevel.GAME, seed=9)
        model = fit_game_ridge(data, delta=0.1)
        fmap = model.feature_map
        V = np.eye(fmap.dimension)
        for a, _ in data.records:
            agg = fmap.aggregate_vector(a)
            V += np.outer(agg, agg)
        assert np.allclose(model.cov, V)


class TestDispatchAndValidity:
    def test_fit_dispatches_on_the_dataset_level(self):
        for level, kind in [
            (FeedbackLevel.FACILITY, FacilityEstimate),
            (FeedbackLevel.AGENT, LinearModel),
            (FeedbackLevel.GAME, LinearModel),
        ]:
            data = collect(GAME3, RHO_VARIED, 10, level, seed=10)
            assert isinstance(fit(data, delta=0.1), kind)

    def test_wrappers_reject_mismatched_levels(self):
        agent = fit(collect(GAME3, RHO_VARIED, 10, FeedbackLevel.AGENT, seed=0), delta=0.1)
        game = fit(collect(GAME3, RHO_VARIED, 10, FeedbackLevel.GAME, seed=0), delta=0.1)
        with pytest.raises(InputError):
            game_reward_and_bonus(agent, ((0,), ()), 0)
        with pytest.raises(InputError):
            agent_reward_and_bonus(game, ((0,), ()), 0)

    @pytest.mark.parametrize("level", list(FeedbackLevel))
    def test_bonus_covers_the_truth_on_a_noisy_sample(self, level):
        noisy = noisy_variant(GAME3, 0.2)
        data = collect(noisy, RHO_VARIED, 400, level, seed=11)
        estimator = fit(data, delta=0.1)
        for _, a in iter_joint_actions(GAME3):
            for i in range(2):
                estimate, bonus = estimator.reward_and_bonus(a, i)
                assert abs(estimate - player_mean_reward(GAME3, a, i)) <= bonus

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=15, deadline=None)
    def test_facility_fit_recovers_dyadic_tables_exactly(self, seed):
        rng = np.random.default_rng(seed)
        game = dyadic_random_game(rng, 2, 2)
        rho = ExplorationPolicy.uniform(
            [((0,), (0,)), ((1,), (1,)), ((0, 1), (0, 1)), ((0,), (1,))]
        )
        data = collect(game, rho, 60, FeedbackLevel.FACILITY, seed=seed)
        est = fit_facility(data, delta=0.1)
        for f in range(2):
            for n in (1, 2):
                if est.counts[f, n] > 0:
                    assert est.means[f, n] == game.mean_rewards[f][n - 1]
