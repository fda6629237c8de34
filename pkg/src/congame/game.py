"""Congestion game core: types, reward accounting, potential, and NE oracle.

A congestion game has ``m`` players and ``F`` facilities. Each player picks a
subset of facilities from their own action space. A facility pays every
selector the same amount ``r^f(n)``, a function of the number ``n`` of players
that selected it, and a player's reward is the sum over their selected
facilities. All per-facility rewards live in ``[-1, 1]``.

Conventions used throughout the package:

- facilities are integers ``0..F-1``;
- an action is a strictly increasing tuple of facility indices (``()`` is the
  empty action);
- a joint action is a tuple with one action per player;
- action spaces are ordered, and every "lowest index" tie-break refers to a
  position in that order;
- joint actions are ordered lexicographically by their index tuples.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InputError, ResourceLimitError

FacilityId = int
ActionSet = tuple[int, ...]
JointAction = tuple[ActionSet, ...]

ENUMERATION_CAP = 10_000_000
"""Default ceiling on the number of joint actions any enumeration may touch."""

NE_TOLERANCE = 1e-12
"""A pure profile is accepted as an equilibrium when no deviation gains more."""


def full_action_space(num_facilities: int) -> tuple[ActionSet, ...]:
    """All subsets of ``0..num_facilities-1`` in bitmask order.

    Bitmask order puts ``()`` first, then ``(0,)``, ``(1,)``, ``(0, 1)``,
    ``(2,)`` and so on; it is the canonical order for built-in instances.
    """
    if num_facilities < 0:
        raise InputError("num_facilities must be nonnegative")
    return tuple(
        tuple(f for f in range(num_facilities) if mask >> f & 1)
        for mask in range(1 << num_facilities)
    )


def _validate_action(action: ActionSet, num_facilities: int) -> None:
    if any(not isinstance(f, int) or isinstance(f, bool) for f in action):
        raise InputError(f"action {action!r} must contain integer facility indices")
    if any(f < 0 or f >= num_facilities for f in action):
        raise InputError(f"action {action!r} references a facility outside 0..{num_facilities - 1}")
    if any(a >= b for a, b in zip(action, action[1:])):
        raise InputError(f"action {action!r} must be strictly increasing")


@dataclass(frozen=True)
class CongestionGame:
    """Immutable description of a congestion game.

    ``mean_rewards[f][n-1]`` is the per-selector mean reward of facility ``f``
    when exactly ``n`` players select it, ``n`` in ``1..num_players``.
    ``noise_amplitudes[f]`` is the half-width of the zero-mean uniform noise
    added to draws from facility ``f``; amplitude 0 means deterministic.
    Sampled rewards are clipped to ``[-1, 1]`` after the noise is added.
    """

    num_players: int
    num_facilities: int
    action_spaces: tuple[tuple[ActionSet, ...], ...]
    mean_rewards: tuple[tuple[float, ...], ...]
    noise_amplitudes: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.num_players < 1:
            raise InputError("a game needs at least one player")
        if self.num_facilities < 1:
            raise InputError("a game needs at least one facility")
        if len(self.action_spaces) != self.num_players:
            raise InputError("one action space per player is required")
        for i, space in enumerate(self.action_spaces):
            if not space:
                raise InputError(f"player {i} has an empty action space")
            for action in space:
                _validate_action(action, self.num_facilities)
            if len(set(space)) != len(space):
                raise InputError(f"player {i} has duplicate actions")
        if len(self.mean_rewards) != self.num_facilities:
            raise InputError("one reward row per facility is required")
        for f, row in enumerate(self.mean_rewards):
            if len(row) != self.num_players:
                raise InputError(
                    f"facility {f} needs rewards for counts 1..{self.num_players}"
                )
            if any(not (-1.0 <= float(v) <= 1.0) for v in row):
                raise InputError(f"facility {f} has a mean reward outside [-1, 1]")
        if self.noise_amplitudes == ():
            object.__setattr__(self, "noise_amplitudes", (0.0,) * self.num_facilities)
        if len(self.noise_amplitudes) != self.num_facilities:
            raise InputError("one noise amplitude per facility is required")
        if any(a < 0.0 for a in self.noise_amplitudes):
            raise InputError("noise amplitudes must be nonnegative")

    @cached_property
    def _action_indices(self) -> tuple[dict[ActionSet, int], ...]:
        return tuple({a: k for k, a in enumerate(space)} for space in self.action_spaces)

    @property
    def deterministic(self) -> bool:
        """True when every facility has zero noise amplitude."""
        return all(a == 0.0 for a in self.noise_amplitudes)

    def mean_reward(self, facility: int, count: int) -> float:
        """Per-selector mean reward of ``facility`` under ``count`` selectors."""
        if not 0 <= facility < self.num_facilities:
            raise InputError(f"facility {facility} out of range")
        if not 1 <= count <= self.num_players:
            raise InputError(f"selector count {count} out of range 1..{self.num_players}")
        return self.mean_rewards[facility][count - 1]

    def action_index(self, player: int, action: ActionSet) -> int:
        """Position of ``action`` in ``player``'s action space."""
        try:
            return self._action_indices[player][action]
        except KeyError:
            raise InputError(f"action {action!r} not in player {player}'s action space") from None

    def joint_action_count(self) -> int:
        """Size of the joint action space."""
        return math.prod(len(space) for space in self.action_spaces)

    def validate_joint_action(self, a: JointAction) -> None:
        """Raise InputError unless ``a`` is a joint action of this game."""
        if len(a) != self.num_players:
            raise InputError(f"joint action {a!r} needs one action per player")
        for i, action in enumerate(a):
            self.action_index(i, action)


def check_enumeration_cap(size: int, cap: int = ENUMERATION_CAP) -> None:
    """Refuse enumerations larger than ``cap`` with a resource error."""
    if size > cap:
        raise ResourceLimitError(f"enumeration of {size} items exceeds the cap of {cap}")


def iter_joint_actions(
    game: CongestionGame, cap: int = ENUMERATION_CAP
) -> Iterator[tuple[tuple[int, ...], JointAction]]:
    """Yield ``(index_tuple, joint_action)`` pairs in lexicographic order."""
    check_enumeration_cap(game.joint_action_count(), cap)
    spaces = game.action_spaces
    for idx in itertools.product(*(range(len(s)) for s in spaces)):
        yield idx, tuple(spaces[i][k] for i, k in enumerate(idx))


def selected_facilities(a: JointAction) -> tuple[int, ...]:
    """Sorted union of the facilities selected by any player."""
    seen: set[int] = set()
    for action in a:
        seen.update(action)
    return tuple(sorted(seen))


def facility_loads(game: CongestionGame, a: JointAction) -> tuple[int, ...]:
    """Selector counts ``n^f(a)`` for every facility."""
    loads = [0] * game.num_facilities
    for action in a:
        for f in action:
            loads[f] += 1
    return tuple(loads)


def facility_load(game: CongestionGame, a: JointAction, facility: int) -> int:
    """Number of players selecting ``facility`` under ``a``."""
    if not 0 <= facility < game.num_facilities:
        raise InputError(f"facility {facility} out of range")
    return sum(1 for action in a if facility in action)


def player_mean_reward(game: CongestionGame, a: JointAction, player: int) -> float:
    """Expected reward of ``player`` under the pure profile ``a``."""
    loads = facility_loads(game, a)
    return sum(game.mean_rewards[f][loads[f] - 1] for f in a[player])


def _deviation_reward(
    game: CongestionGame, loads: Sequence[int], a: JointAction, player: int, alt: ActionSet
) -> float:
    """Reward of ``player`` deviating to ``alt`` while others keep ``a``."""
    own = set(a[player])
    total = 0.0
    for f in alt:
        n = loads[f] + (0 if f in own else 1)
        total += game.mean_rewards[f][n - 1]
    return total


def potential(game: CongestionGame, a: JointAction) -> float:
    """Rosenthal potential ``sum_f sum_{k<=n^f(a)} r^f(k)``.

    Any unilateral deviation changes the potential by exactly the deviating
    player's reward change, so local maxima are pure equilibria.
    """
    loads = facility_loads(game, a)
    total = 0.0
    for f in range(game.num_facilities):
        row = game.mean_rewards[f]
        for k in range(loads[f]):
            total += row[k]
    return total


def pure_gap(game: CongestionGame, a: JointAction) -> float:
    """Best unilateral improvement available at the pure profile ``a``."""
    game.validate_joint_action(a)
    loads = facility_loads(game, a)
    worst = 0.0
    for i in range(game.num_players):
        current = sum(game.mean_rewards[f][loads[f] - 1] for f in a[i])
        best = max(_deviation_reward(game, loads, a, i, alt) for alt in game.action_spaces[i])
        worst = max(worst, best - current)
    return worst


@dataclass(frozen=True)
class ProductPolicy:
    """Independent mixed strategies, one distribution per player.

    ``weights[i][k]`` is the probability player ``i`` plays action ``k`` of
    their action space. Probabilities are exact rationals so density ratios
    computed from policies stay exact.
    """

    weights: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        for i, row in enumerate(self.weights):
            if not row:
                raise InputError(f"player {i} has an empty distribution")
            if any(w < 0 for w in row):
                raise InputError(f"player {i} has a negative probability")
            if sum(row) != 1:
                raise InputError(f"player {i}'s probabilities sum to {sum(row)}, not 1")

    @staticmethod
    def from_rows(rows: Iterable[Iterable[Fraction | int | float | str]]) -> "ProductPolicy":
        """Build a policy from any per-player probability rows.

        Entries may be ints, Fractions, strings like ``"1/3"``, or floats
        (converted exactly via ``Fraction(float)``).
        """
        return ProductPolicy(tuple(tuple(_as_fraction(w) for w in row) for row in rows))

    @staticmethod
    def pure(game: CongestionGame, a: JointAction) -> "ProductPolicy":
        """Point mass on the joint action ``a``."""
        game.validate_joint_action(a)
        rows = []
        for i, action in enumerate(a):
            k = game.action_index(i, action)
            row = [Fraction(0)] * len(game.action_spaces[i])
            row[k] = Fraction(1)
            rows.append(tuple(row))
        return ProductPolicy(tuple(rows))

    @staticmethod
    def uniform(game: CongestionGame) -> "ProductPolicy":
        """Uniform independent mixing over every player's action space."""
        return ProductPolicy(
            tuple(
                tuple(Fraction(1, len(space)) for _ in space)
                for space in game.action_spaces
            )
        )

    def validate_for(self, game: CongestionGame) -> None:
        """Raise InputError unless shapes match ``game``'s action spaces."""
        if len(self.weights) != game.num_players:
            raise InputError("policy has the wrong number of players")
        for i, row in enumerate(self.weights):
            if len(row) != len(game.action_spaces[i]):
                raise InputError(f"player {i}'s distribution has the wrong length")

    def support(self, player: int) -> tuple[int, ...]:
        """Action indices with positive probability for ``player``."""
        return tuple(k for k, w in enumerate(self.weights[player]) if w > 0)

    def support_items(
        self, game: CongestionGame, cap: int = ENUMERATION_CAP
    ) -> Iterator[tuple[JointAction, Fraction]]:
        """Yield ``(joint_action, probability)`` over the support product."""
        self.validate_for(game)
        supports = [self.support(i) for i in range(game.num_players)]
        check_enumeration_cap(math.prod(len(s) for s in supports), cap)
        for idx in itertools.product(*supports):
            w = Fraction(1)
            for i, k in enumerate(idx):
                w *= self.weights[i][k]
            yield tuple(game.action_spaces[i][k] for i, k in enumerate(idx)), w

    def is_pure(self) -> bool:
        """True when every player plays a single action."""
        return all(len(self.support(i)) == 1 for i in range(len(self.weights)))

    def pure_action(self, game: CongestionGame) -> JointAction:
        """The support point of a pure policy."""
        if not self.is_pure():
            raise InputError("policy is not pure")
        return tuple(
            game.action_spaces[i][self.support(i)[0]] for i in range(game.num_players)
        )


def _as_fraction(value: Fraction | int | float | str) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, str)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    raise InputError(f"cannot interpret {value!r} as a probability")


def _others_support(
    game: CongestionGame, policy: ProductPolicy, player: int, cap: int
) -> list[tuple[tuple[ActionSet, ...], Fraction, tuple[int, ...]]]:
    """Support of the joint play of everyone but ``player``.

    Returns triples of (others' actions in player order with ``player``
    omitted, probability, the player order used).
    """
    policy.validate_for(game)
    others = [i for i in range(game.num_players) if i != player]
    supports = [policy.support(i) for i in others]
    check_enumeration_cap(math.prod(len(s) for s in supports), cap)
    combos = []
    for idx in itertools.product(*supports):
        w = Fraction(1)
        actions = []
        for i, k in zip(others, idx):
            w *= policy.weights[i][k]
            actions.append(game.action_spaces[i][k])
        combos.append((tuple(actions), w, tuple(others)))
    return combos


def compose_deviation(
    game: CongestionGame, others: tuple[ActionSet, ...], player: int, action: ActionSet
) -> JointAction:
    """Insert ``player``'s ``action`` into an others-profile."""
    joint = list(others[:player]) + [action] + list(others[player:])
    return tuple(joint)


def policy_value(
    game: CongestionGame, policy: ProductPolicy, cap: int = ENUMERATION_CAP
) -> tuple[float, ...]:
    """Expected reward of every player under a product policy."""
    values = [0.0] * game.num_players
    for a, w in policy.support_items(game, cap):
        fw = float(w)
        loads = facility_loads(game, a)
        for i in range(game.num_players):
            values[i] += fw * sum(game.mean_rewards[f][loads[f] - 1] for f in a[i])
    return tuple(values)


def best_response_value(
    game: CongestionGame, policy: ProductPolicy, player: int, cap: int = ENUMERATION_CAP
) -> tuple[float, ActionSet]:
    """Best deviation value for ``player`` against ``policy``'s other rows.

    ``policy``'s own row for ``player`` is ignored. Ties break toward the
    lowest action index.
    """
    combos = _others_support(game, policy, player, cap)
    best_value = -math.inf
    best_action = game.action_spaces[player][0]
    for alt in game.action_spaces[player]:
        value = 0.0
        for others, w, _ in combos:
            a = compose_deviation(game, others, player, alt)
            loads = facility_loads(game, a)
            value += float(w) * sum(game.mean_rewards[f][loads[f] - 1] for f in alt)
        if value > best_value:
            best_value = value
            best_action = alt
    return best_value, best_action


def gap(game: CongestionGame, policy: ProductPolicy, cap: int = ENUMERATION_CAP) -> float:
    """Nash gap: the largest unilateral improvement any player can make."""
    values = policy_value(game, policy, cap)
    worst = -math.inf
    for i in range(game.num_players):
        best, _ = best_response_value(game, policy, i, cap)
        worst = max(worst, best - values[i])
    return worst


def enumerate_pure_ne(
    game: CongestionGame, cap: int = ENUMERATION_CAP, tol: float = NE_TOLERANCE
) -> list[JointAction]:
    """All pure Nash equilibria in lexicographic order.

    Every finite congestion game has at least one (the potential argmax), so
    the returned list is never empty.
    """
    result = []
    for _, a in iter_joint_actions(game, cap):
        loads = facility_loads(game, a)
        is_ne = True
        for i in range(game.num_players):
            current = sum(game.mean_rewards[f][loads[f] - 1] for f in a[i])
            for alt in game.action_spaces[i]:
                if _deviation_reward(game, loads, a, i, alt) > current + tol:
                    is_ne = False
                    break
            if not is_ne:
                break
        if is_ne:
            result.append(a)
    return result


def sample_rewards(
    game: CongestionGame, a: JointAction, rng: np.random.Generator
) -> dict[int, float]:
    """Draw one reward per selected facility.

    Draw order is fixed: facilities in increasing index, one uniform noise
    draw per facility with positive amplitude. Draws are clipped to
    ``[-1, 1]``, so with |mean| <= 1 - amplitude the noise is exactly
    zero-mean.
    """
    game.validate_joint_action(a)
    loads = facility_loads(game, a)
    out: dict[int, float] = {}
    for f in selected_facilities(a):
        value = game.mean_rewards[f][loads[f] - 1]
        amp = game.noise_amplitudes[f]
        if amp > 0.0:
            value += rng.uniform(-amp, amp)
        out[f] = min(1.0, max(-1.0, value))
    return out


def noisy_variant(game: CongestionGame, amplitude: float) -> CongestionGame:
    """Shrink means by ``1 - amplitude`` and add that much uniform noise.

    Scaling by a positive constant preserves the equilibrium set; shrinking
    keeps every draw inside ``[-1, 1]`` before clipping, so the added noise
    stays exactly zero-mean.
    """
    if not 0.0 <= amplitude < 1.0:
        raise InputError("amplitude must be in [0, 1)")
    scale = 1.0 - amplitude
    return CongestionGame(
        num_players=game.num_players,
        num_facilities=game.num_facilities,
        action_spaces=game.action_spaces,
        mean_rewards=tuple(tuple(v * scale for v in row) for row in game.mean_rewards),
        noise_amplitudes=(amplitude,) * game.num_facilities,
    )
