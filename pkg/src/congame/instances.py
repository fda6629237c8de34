"""Built-in hard instances and the feedback-separation checks they witness.

The six numbered games come in pairs that are indistinguishable at one
feedback level yet have disjoint equilibrium sets:

- games 1 and 2 (five players, one facility) look identical through facility
  feedback on the published exploration support;
- games 3 and 4 (two players, two facilities) look identical through agent
  feedback;
- games 5 and 6 (two players, two facilities) look identical through game
  feedback.

Each pair ships with the exploration policy realizing the indistinguishability
and a claimed lower bound on the Nash gap any algorithm must suffer on one of
the two. ``known_ne`` records the equilibrium lists published with the games;
``enumerate_pure_ne`` is the ground truth and disagrees for games 4 and 6,
which admit two additional equilibria where one player takes both facilities.

The ``remark44``/``remark54`` families are constructive coverage examples:
profit games whose small exploration supports provably yield positive
covariance-domination coefficients at the agent and game levels.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .coverage import one_unit_deviation_policy
from .data import ExplorationPolicy, Feedback, FeedbackLevel, expected_records
from .errors import InputError
from .game import (
    ActionSet,
    CongestionGame,
    JointAction,
    enumerate_pure_ne,
    full_action_space,
    iter_joint_actions,
    pure_gap,
)

SEPARATION_PAIRS: dict[str, tuple[str, str]] = {
    "facility": ("game1", "game2"),
    "agent": ("game3", "game4"),
    "game": ("game5", "game6"),
}

CLAIMED_GAP_BOUNDS: dict[str, Fraction] = {
    "facility": Fraction(1, 2),
    "agent": Fraction(1, 8),
    "game": Fraction(1, 4),
}


@dataclass(frozen=True)
class NamedInstance:
    """A built-in game with its exploration policy and published metadata."""

    name: str
    game: CongestionGame
    rho: ExplorationPolicy
    known_ne: tuple[JointAction, ...]
    separation_level: FeedbackLevel | None = None
    claimed_gap_bound: Fraction | None = None


def _single_facility_game(rewards: tuple[float, ...]) -> CongestionGame:
    m = len(rewards)
    return CongestionGame(
        num_players=m,
        num_facilities=1,
        action_spaces=tuple(((), (0,)) for _ in range(m)),
        mean_rewards=(rewards,),
    )


def _two_facility_game(f0: tuple[float, float], f1: tuple[float, float]) -> CongestionGame:
    return CongestionGame(
        num_players=2,
        num_facilities=2,
        action_spaces=(full_action_space(2), full_action_space(2)),
        mean_rewards=(f0, f1),
    )


def _selector_profiles(m: int, k: int) -> list[JointAction]:
    """All joint actions of the single-facility game with exactly k selectors."""
    profiles = []
    for selectors in itertools.combinations(range(m), k):
        chosen = set(selectors)
        profiles.append(tuple(((0,) if i in chosen else ()) for i in range(m)))
    return profiles


def _rho_single_facility() -> ExplorationPolicy:
    """Uniform over every 1-, 3-, and 4-selector profile (20 in total)."""
    actions = _selector_profiles(5, 1) + _selector_profiles(5, 3) + _selector_profiles(5, 4)
    return ExplorationPolicy.uniform(actions)


_B: ActionSet = (0, 1)  # both facilities
_F0: ActionSet = (0,)
_F1: ActionSet = (1,)
_E: ActionSet = ()

_RHO_AGENT = ExplorationPolicy.uniform([(_B, _B), (_B, _E), (_E, _B)])
_RHO_GAME = ExplorationPolicy.uniform(
    [(_F1, _F1), (_F0, _E), (_E, _F0), (_B, _F0), (_F0, _B)]
)


def _profit_game(num_players: int, num_facilities: int) -> CongestionGame:
    """Facilities 0 and 1 pay 1 when alone and -1 otherwise; extras always -1."""
    if num_players < 2 or num_facilities < 2:
        raise InputError("profit games need at least two players and two facilities")
    rows = []
    for f in range(num_facilities):
        rows.append(
            tuple(
                1.0 if (f < 2 and n == 1) else -1.0
                for n in range(1, num_players + 1)
            )
        )
    return CongestionGame(
        num_players=num_players,
        num_facilities=num_facilities,
        action_spaces=tuple(full_action_space(num_facilities) for _ in range(num_players)),
        mean_rewards=tuple(rows),
    )


def lexicographic_first_ne(game: CongestionGame) -> JointAction:
    """First pure equilibrium in joint-index order."""
    return enumerate_pure_ne(game)[0]


def _remark44_policy(game: CongestionGame, ne_action: JointAction) -> ExplorationPolicy:
    """Uniform over the equilibrium and its mF one-facility toggles."""
    actions: list[JointAction] = [ne_action]
    for i in range(game.num_players):
        own = set(ne_action[i])
        for f in range(game.num_facilities):
            toggled = tuple(sorted(own ^ {f}))
            actions.append(ne_action[:i] + (toggled,) + ne_action[i + 1:])
    return ExplorationPolicy.uniform(actions)


def _remark54_policy(game: CongestionGame, ne_action: JointAction) -> ExplorationPolicy:
    """Per facility, profiles hitting selector counts 0, n*-1, and n*+1.

    Each profile changes one facility's count by adding it to the lowest
    non-selector or removing it from the lowest selectors, leaving the other
    facilities at their equilibrium counts; at most ``3F + 1`` profiles.
    """
    actions: list[JointAction] = [ne_action]
    for f in range(game.num_facilities):
        holders = [i for i in range(game.num_players) if f in ne_action[i]]
        outsiders = [i for i in range(game.num_players) if f not in ne_action[i]]
        variants: list[list[int]] = [[]]  # count 0: nobody holds f
        if len(holders) > 1:
            variants.append(holders[:-1])  # count n*-1
        if outsiders:
            variants.append(holders + outsiders[:1])  # count n*+1
        for keep in variants:
            keep_set = set(keep)
            profile = tuple(
                tuple(sorted((set(ne_action[i]) - {f}) | ({f} if i in keep_set else set())))
                for i in range(game.num_players)
            )
            actions.append(profile)
    return ExplorationPolicy.uniform(actions)


def build(name: str, num_players: int = 2, num_facilities: int = 2) -> NamedInstance:
    """Construct a built-in instance by name.

    Names: ``game1`` .. ``game6`` (the separation pairs; player/facility
    arguments are ignored), ``remark44`` and ``remark54`` (profit games whose
    exploration supports realize the linear-level coverage bounds;
    ``remark54`` fixes two players).
    """
    if name == "game1":
        game = _single_facility_game((1.0, -1.0, 1.0, 1.0, 1.0))
        known = tuple(sorted(_selector_profiles(5, 1))) + (tuple(((0,),) * 5),)
        return NamedInstance(
            name,
            game,
            _rho_single_facility(),
            known,
            FeedbackLevel.FACILITY,
            CLAIMED_GAP_BOUNDS["facility"],
        )
    if name == "game2":
        game = _single_facility_game((1.0, 1.0, 1.0, 1.0, -1.0))
        known = tuple(sorted(_selector_profiles(5, 4)))
        return NamedInstance(
            name,
            game,
            _rho_single_facility(),
            known,
            FeedbackLevel.FACILITY,
            CLAIMED_GAP_BOUNDS["facility"],
        )
    if name == "game3":
        game = _two_facility_game((1.0, 0.5), (1.0, -1.0))
        known = ((_B, _F0), (_F0, _B))
        return NamedInstance(
            name, game, _RHO_AGENT, known, FeedbackLevel.AGENT, CLAIMED_GAP_BOUNDS["agent"]
        )
    if name == "game4":
        game = _two_facility_game((1.0, -0.25), (1.0, -0.25))
        known = ((_F0, _F1), (_F1, _F0))
        return NamedInstance(
            name, game, _RHO_AGENT, known, FeedbackLevel.AGENT, CLAIMED_GAP_BOUNDS["agent"]
        )
    if name == "game5":
        game = _two_facility_game((1.0, 0.5), (-1.0, -1.0))
        known = ((_F0, _F0),)
        return NamedInstance(
            name, game, _RHO_GAME, known, FeedbackLevel.GAME, CLAIMED_GAP_BOUNDS["game"]
        )
    if name == "game6":
        game = _two_facility_game((1.0, -0.5), (1.0, -1.0))
        known = ((_F0, _F1), (_F1, _F0))
        return NamedInstance(
            name, game, _RHO_GAME, known, FeedbackLevel.GAME, CLAIMED_GAP_BOUNDS["game"]
        )
    if name == "remark44":
        game = _profit_game(num_players, num_facilities)
        ne = lexicographic_first_ne(game)
        return NamedInstance(name, game, _remark44_policy(game, ne), (ne,))
    if name == "remark54":
        game = _profit_game(2, num_facilities)
        ne = lexicographic_first_ne(game)
        return NamedInstance(name, game, _remark54_policy(game, ne), (ne,))
    raise InputError(f"unknown instance {name!r}")


INSTANCE_NAMES = ("game1", "game2", "game3", "game4", "game5", "game6", "remark44", "remark54")


def sufficient_statistics(
    instance: NamedInstance, level: FeedbackLevel
) -> dict[JointAction, Feedback]:
    """Feedback each exploration action reveals (deterministic games)."""
    return expected_records(instance.game, instance.rho, level)


def _pair_for(level: FeedbackLevel) -> tuple[NamedInstance, NamedInstance]:
    first, second = SEPARATION_PAIRS[level.value]
    return build(first), build(second)


def separation_check(pair: tuple[str, str] | str, level: FeedbackLevel) -> bool:
    """Verify a pair is a separation witness at ``level``.

    True when (i) both games produce identical sufficient statistics at
    ``level`` on their shared exploration support, (ii) their pure equilibrium
    sets are disjoint, and (iii) the next finer feedback level (facility
    statistics beyond facility level) tells the games apart.
    """
    if isinstance(pair, str):
        names = SEPARATION_PAIRS.get(pair)
        if names is None:
            raise InputError(f"unknown separation pair {pair!r}")
    else:
        names = pair
        if not any(names == p for p in SEPARATION_PAIRS.values()):
            raise InputError(f"{pair!r} is not a published separation pair")
    left, right = build(names[0]), build(names[1])
    if left.rho != right.rho:
        raise InputError("separation pairs must share an exploration policy")

    same_here = sufficient_statistics(left, level) == sufficient_statistics(right, level)
    ne_left = set(enumerate_pure_ne(left.game))
    ne_right = set(enumerate_pure_ne(right.game))
    disjoint = not (ne_left & ne_right)

    if level is FeedbackLevel.FACILITY:
        finer_differs = left.game.mean_rewards != right.game.mean_rewards
    else:
        finer = FeedbackLevel.AGENT if level is FeedbackLevel.GAME else FeedbackLevel.FACILITY
        finer_differs = sufficient_statistics(left, finer) != sufficient_statistics(right, finer)
    return same_here and disjoint and finer_differs


def minimax_gap(pair: tuple[str, str] | str) -> float:
    """Smallest worst-case Nash gap a pure profile suffers across a pair.

    Any algorithm that cannot tell the games apart outputs one profile for
    both, so this minimax value lower-bounds its error on one of them.
    """
    if isinstance(pair, str):
        pair = SEPARATION_PAIRS[pair]
    left, right = build(pair[0]), build(pair[1])
    if left.game.action_spaces != right.game.action_spaces:
        raise InputError("minimax comparison needs identical action spaces")
    best = None
    for _, a in iter_joint_actions(left.game):
        worst = max(pure_gap(left.game, a), pure_gap(right.game, a))
        if best is None or worst < best:
            best = worst
    assert best is not None
    return best
