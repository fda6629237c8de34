"""Built-in instances: equilibrium sets, separations, and remark families."""

from __future__ import annotations

from fractions import Fraction

import pytest

from congame.data import FeedbackLevel
from congame.errors import InputError
from congame.game import enumerate_pure_ne, pure_gap
from congame.instances import (
    CLAIMED_GAP_BOUNDS,
    INSTANCE_NAMES,
    SEPARATION_PAIRS,
    build,
    lexicographic_first_ne,
    minimax_gap,
    separation_check,
    sufficient_statistics,
)


ORACLE_NE_COUNTS = {
    "game1": 6,
    "game2": 5,
    "game3": 2,
    "game4": 4,
    "game5": 1,
    "game6": 4,
}


class TestEquilibriumSets:
    @pytest.mark.parametrize("name", sorted(ORACLE_NE_COUNTS))
    def test_oracle_counts_are_stable(self, name):
        inst = build(name)
        assert len(enumerate_pure_ne(inst.game)) == ORACLE_NE_COUNTS[name]

    @pytest.mark.parametrize("name", sorted(ORACLE_NE_COUNTS))
    def test_published_equilibria_are_genuine(self, name):
        inst = build(name)
        for a in inst.known_ne:
            assert pure_gap(inst.game, a) <= 1e-12

    @pytest.mark.parametrize("name", ["game4", "game6"])
    def test_games_4_and_6_have_two_unpublished_equilibria(self, name):
        # one player taking both facilities while the other idles is stable
        # in both games, on top of the two published split profiles
        inst = build(name)
        extra = set(enumerate_pure_ne(inst.game)) - set(inst.known_ne)
        assert extra == {((), (0, 1)), ((0, 1), ())}

    def test_lexicographic_first_picks_the_smallest_index_tuple(self):
        assert lexicographic_first_ne(build("game1").game) == ((), (), (), (), (0,))
        assert lexicographic_first_ne(build("game2").game) == (
            (),
            (0,),
            (0,),
            (0,),
            (0,),
        )


class TestSeparations:
    @pytest.mark.parametrize("level", list(FeedbackLevel))
    def test_each_pair_separates_at_its_level(self, level):
        assert separation_check(level.value, level)

    @pytest.mark.parametrize("level", list(FeedbackLevel))
    def test_pair_games_share_statistics_at_the_blind_level(self, level):
        first, second = (build(n) for n in SEPARATION_PAIRS[level.value])
        assert first.rho == second.rho
        assert sufficient_statistics(first, level) == sufficient_statistics(second, level)

    @pytest.mark.parametrize("level", list(FeedbackLevel))
    def test_pair_equilibrium_sets_are_disjoint(self, level):
        first, second = (build(n) for n in SEPARATION_PAIRS[level.value])
        assert not set(enumerate_pure_ne(first.game)) & set(
            enumerate_pure_ne(second.game)
        )

    def test_agent_pair_is_distinguished_by_facility_feedback(self):
        first, second = (build(n) for n in SEPARATION_PAIRS["agent"])
        fine = FeedbackLevel.FACILITY
        assert sufficient_statistics(first, fine) != sufficient_statistics(second, fine)

    def test_game_pair_is_distinguished_by_agent_feedback(self):
        first, second = (build(n) for n in SEPARATION_PAIRS["game"])
        fine = FeedbackLevel.AGENT
        assert sufficient_statistics(first, fine) != sufficient_statistics(second, fine)

    def test_unknown_pair_is_rejected(self):
        with pytest.raises(InputError):
            separation_check(("game1", "game3"), FeedbackLevel.FACILITY)
        with pytest.raises(InputError):
            separation_check("nope", FeedbackLevel.FACILITY)


class TestMinimaxGaps:
    def test_frozen_values(self):
        assert minimax_gap("facility") == 1.0
        assert minimax_gap("agent") == 0.25
        assert minimax_gap("game") == 1.0

    @pytest.mark.parametrize("level", list(FeedbackLevel))
    def test_minimax_gap_meets_the_claimed_bound(self, level):
        assert minimax_gap(level.value) >= CLAIMED_GAP_BOUNDS[level.value]


class TestRemarkFamilies:
    def test_profit_game_reward_table(self):
        game = build("remark44", 3, 3).game
        assert game.mean_rewards[0] == (1.0, -1.0, -1.0)
        assert game.mean_rewards[1] == (1.0, -1.0, -1.0)
        assert game.mean_rewards[2] == (-1.0, -1.0, -1.0)

    def test_remark44_support_size_is_toggle_count_plus_one(self):
        inst = build("remark44", 3, 2)
        assert len(inst.rho.support) == 3 * 2 + 1
        assert inst.known_ne[0] in {a for a, _ in inst.rho.support}

    def test_remark54_pins_two_players(self):
        inst = build("remark54", 9, 3)
        assert inst.game.num_players == 2
        assert len(inst.rho.support) <= 3 * 3 + 1

    def test_remark_equilibria_are_equilibria(self):
        for name in ("remark44", "remark54"):
            for sizes in ((2, 2), (3, 2), (2, 3)):
                inst = build(name, *sizes)
                assert pure_gap(inst.game, inst.known_ne[0]) <= 1e-12

    def test_profit_game_needs_two_of_each(self):
        with pytest.raises(InputError, match="at least two"):
            build("remark44", 1, 2)


class TestBuild:
    def test_all_published_names_construct(self):
        for name in INSTANCE_NAMES:
            inst = build(name)
            assert inst.name == name
            inst.rho.validate_for(inst.game)

    def test_unknown_name_is_rejected(self):
        with pytest.raises(InputError, match="unknown instance"):
            build("game7")

    def test_separation_instances_carry_their_claimed_bounds(self):
        for level, (first, _) in SEPARATION_PAIRS.items():
            inst = build(first)
            assert inst.claimed_gap_bound == CLAIMED_GAP_BOUNDS[level]
            assert inst.separation_level is FeedbackLevel(level)
