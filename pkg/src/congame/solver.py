"""Equilibrium search by pessimistic-optimistic surrogate minimization.

Given any estimator with valid confidence widths, each player's value under a
policy is bracketed by the pessimistic value (estimate minus bonus) and the
optimistic one (estimate plus bonus). The surrogate gap of a profile is the
worst player's optimistic best response minus their pessimistic value; it
upper-bounds the true Nash gap whenever the widths are valid. The solver
returns the pure product profile minimizing the surrogate, which is enough:
congestion games always admit a pure equilibrium, and at one the surrogate
collapses to bonus terms only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable

from .errors import InputError
from .game import (
    ENUMERATION_CAP,
    ActionSet,
    CongestionGame,
    JointAction,
    ProductPolicy,
    _others_support,
    check_enumeration_cap,
    compose_deviation,
)
from .estimators import RewardEstimator


@dataclass(frozen=True)
class SurrogateCertificate:
    """Output of the surrogate minimization.

    ``per_player[i]`` pairs the optimistic best-response value against the
    chosen profile with the player's pessimistic value at it; the surrogate
    gap is the largest difference.
    """

    action: JointAction
    surrogate_gap: float
    per_player: tuple[tuple[float, float], ...]

    def policy(self, game: CongestionGame) -> ProductPolicy:
        """The chosen profile as a (pure) product policy."""
        return ProductPolicy.pure(game, self.action)


def optimistic_pessimistic_values(
    estimator: RewardEstimator,
    game: CongestionGame,
    policy: ProductPolicy,
    cap: int = ENUMERATION_CAP,
) -> tuple[tuple[float, float], ...]:
    """Per-player ``(upper, lower)`` value brackets under ``policy``.

    For a pure policy the bracket is the point estimate plus/minus the bonus,
    so its width is exactly twice the bonus.
    """
    upper = [0.0] * game.num_players
    lower = [0.0] * game.num_players
    for a, w in policy.support_items(game, cap):
        fw = float(w)
        for i in range(game.num_players):
            estimate, bonus = estimator.reward_and_bonus(a, i)
            upper[i] += fw * (estimate + bonus)
            lower[i] += fw * (estimate - bonus)
    return tuple(zip(upper, lower))


def optimistic_best_response(
    estimator: RewardEstimator,
    game: CongestionGame,
    policy: ProductPolicy,
    player: int,
    cap: int = ENUMERATION_CAP,
) -> tuple[float, ActionSet]:
    """Deviation maximizing the optimistic value against ``policy``'s others.

    Ties break toward the lowest action index.
    """
    combos = _others_support(game, policy, player, cap)
    best_value = -math.inf
    best_action = game.action_spaces[player][0]
    for alt in game.action_spaces[player]:
        value = 0.0
        for others, w, _ in combos:
            a = compose_deviation(game, others, player, alt)
            estimate, bonus = estimator.reward_and_bonus(a, player)
            value += float(w) * (estimate + bonus)
        if value > best_value:
            best_value = value
            best_action = alt
    return best_value, best_action


def surrogate_gap(
    estimator: RewardEstimator,
    game: CongestionGame,
    policy: ProductPolicy,
    cap: int = ENUMERATION_CAP,
) -> float:
    """Worst-player optimistic best response minus pessimistic value."""
    brackets = optimistic_pessimistic_values(estimator, game, policy, cap)
    worst = -math.inf
    for i in range(game.num_players):
        best, _ = optimistic_best_response(estimator, game, policy, i, cap)
        worst = max(worst, best - brackets[i][1])
    return worst


def surrogate_minimize(
    estimator: RewardEstimator,
    game: CongestionGame,
    cap: int = ENUMERATION_CAP,
    candidate_order: Iterable[tuple[int, ...]] | None = None,
) -> SurrogateCertificate:
    """Pure profile minimizing the surrogate gap.

    Candidates are all pure joint actions; the minimum is taken over the key
    ``(surrogate, index_tuple)``, so the result is independent of evaluation
    order and ties resolve to the lexicographically first profile.
    ``candidate_order`` allows a partitioned or shuffled enumeration; it must
    cover every joint index tuple exactly once.
    """
    spaces = game.action_spaces
    check_enumeration_cap(game.joint_action_count(), cap)
    if candidate_order is None:
        candidate_order = itertools.product(*(range(len(s)) for s in spaces))
    cache: dict[tuple[int, JointAction], tuple[float, float]] = {}

    def evaluate(player: int, a: JointAction) -> tuple[float, float]:
        key = (player, a)
        hit = cache.get(key)
        if hit is None:
            hit = estimator.reward_and_bonus(a, player)
            cache[key] = hit
        return hit

    best_key: tuple[float, tuple[int, ...]] | None = None
    best_cert: SurrogateCertificate | None = None
    seen = 0
    for idx in candidate_order:
        seen += 1
        a = tuple(spaces[i][k] for i, k in enumerate(idx))
        per_player = []
        worst = -math.inf
        for i in range(game.num_players):
            estimate, bonus = evaluate(i, a)
            pessimistic = estimate - bonus
            best_dev = -math.inf
            for alt in spaces[i]:
                dev = a[:i] + (alt,) + a[i + 1:]
                est_dev, bonus_dev = evaluate(i, dev)
                best_dev = max(best_dev, est_dev + bonus_dev)
            per_player.append((best_dev, pessimistic))
            worst = max(worst, best_dev - pessimistic)
        key = (worst, tuple(idx))
        if best_key is None or key < best_key:
            best_key = key
            best_cert = SurrogateCertificate(
                action=a, surrogate_gap=worst, per_player=tuple(per_player)
            )
    if best_cert is None or seen != game.joint_action_count():
        raise InputError("candidate_order must enumerate every joint action exactly once")
    return best_cert
