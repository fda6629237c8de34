"""Offline datasets: collection under an exploration policy and projection.

A dataset is a sequence of records, each holding the joint action that was
played plus feedback whose granularity depends on the level:

- ``facility``: one reward per facility someone selected;
- ``agent``: each player's total reward;
- ``game``: the grand total across players.

Facility feedback determines agent feedback which determines game feedback,
so projection only goes toward coarser levels. Collection always samples at
facility granularity internally and projects, which makes projection commute
with collection record by record for any noise setting.
"""

from __future__ import annotations

import bisect
import enum
import hashlib
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Iterator, Union

import numpy as np

from .errors import FormatError, InputError
from .game import (
    ActionSet,
    CongestionGame,
    ENUMERATION_CAP,
    JointAction,
    check_enumeration_cap,
    player_mean_reward,
    sample_rewards,
    selected_facilities,
)


class FeedbackLevel(enum.Enum):
    """Feedback granularity, ordered from coarsest to finest."""

    GAME = "game"
    AGENT = "agent"
    FACILITY = "facility"

    @property
    def rank(self) -> int:
        """Information order: game < agent < facility."""
        return {"game": 0, "agent": 1, "facility": 2}[self.value]

    def __str__(self) -> str:  # used by CLI output and file headers
        return self.value


FacilityFeedback = tuple[tuple[int, float], ...]
AgentFeedback = tuple[float, ...]
GameFeedback = float
Feedback = Union[FacilityFeedback, AgentFeedback, GameFeedback]


@dataclass(frozen=True)
class ExplorationPolicy:
    """A distribution over joint actions, possibly correlated across players.

    Probabilities are exact rationals; they must be positive and sum to 1.
    """

    support: tuple[tuple[JointAction, Fraction], ...]

    def __post_init__(self) -> None:
        if not self.support:
            raise InputError("exploration policy needs a nonempty support")
        actions = [a for a, _ in self.support]
        if len(set(actions)) != len(actions):
            raise InputError("exploration policy has duplicate support actions")
        if any(p <= 0 for _, p in self.support):
            raise InputError("support probabilities must be positive")
        total = sum(p for _, p in self.support)
        if total != 1:
            raise InputError(f"support probabilities sum to {total}, not 1")

    @staticmethod
    def uniform(actions: Iterable[JointAction]) -> "ExplorationPolicy":
        """Uniform distribution over distinct joint actions."""
        distinct = list(dict.fromkeys(actions))
        if not distinct:
            raise InputError("uniform exploration needs at least one action")
        p = Fraction(1, len(distinct))
        return ExplorationPolicy(tuple((a, p) for a in distinct))

    def validate_for(self, game: CongestionGame) -> None:
        """Raise InputError unless every support action belongs to ``game``."""
        for a, _ in self.support:
            game.validate_joint_action(a)

    def probability(self, a: JointAction) -> Fraction:
        """Probability of ``a`` (zero off support)."""
        return self._lookup.get(a, Fraction(0))

    @property
    def _lookup(self) -> dict[JointAction, Fraction]:
        cache = self.__dict__.get("_lookup_cache")
        if cache is None:
            cache = {a: p for a, p in self.support}
            self.__dict__["_lookup_cache"] = cache
        return cache

    def support_items(
        self, game: CongestionGame, cap: int = ENUMERATION_CAP
    ) -> Iterator[tuple[JointAction, Fraction]]:
        """Yield ``(joint_action, probability)``; mirrors ProductPolicy."""
        self.validate_for(game)
        check_enumeration_cap(len(self.support), cap)
        yield from self.support


@dataclass(frozen=True)
class Dataset:
    """A batch of feedback records collected at one level.

    ``game_hash`` digests the generating game's canonical text so a dataset
    can be matched against a game file later. ``hash_mismatch`` is set by
    ``load`` when the caller supplies a game whose hash disagrees; it does
    not participate in equality.
    """

    level: FeedbackLevel
    records: tuple[tuple[JointAction, Feedback], ...]
    seed: int
    game_hash: str
    num_players: int
    num_facilities: int
    hash_mismatch: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if self.num_players < 1 or self.num_facilities < 1:
            raise InputError("dataset needs positive player and facility counts")
        for a, fb in self.records:
            if len(a) != self.num_players:
                raise InputError(f"record action {a!r} has the wrong player count")
            _validate_feedback(self.level, a, fb, self.num_players)

    def __len__(self) -> int:
        return len(self.records)

    def prefix(self, n: int) -> "Dataset":
        """First ``n`` records; the collector draws per record, so this is
        exactly the dataset the same seed would have produced at size ``n``."""
        if not 0 < n <= len(self.records):
            raise InputError(f"prefix length {n} out of range 1..{len(self.records)}")
        return replace(self, records=self.records[:n])


def _validate_feedback(
    level: FeedbackLevel, a: JointAction, fb: Feedback, num_players: int
) -> None:
    if level is FeedbackLevel.FACILITY:
        if not isinstance(fb, tuple) or any(
            not (isinstance(item, tuple) and len(item) == 2) for item in fb
        ):
            raise InputError(f"facility feedback must be (facility, reward) pairs, got {fb!r}")
        keys = tuple(f for f, _ in fb)
        if keys != selected_facilities(a):
            raise InputError(
                f"facility feedback keys {keys!r} must equal the selected set "
                f"{selected_facilities(a)!r}"
            )
    elif level is FeedbackLevel.AGENT:
        if not isinstance(fb, tuple) or len(fb) != num_players:
            raise InputError(f"agent feedback must hold {num_players} totals, got {fb!r}")
        if any(isinstance(v, tuple) for v in fb):
            raise InputError("agent feedback must be plain totals")
    else:
        if not isinstance(fb, float):
            raise InputError(f"game feedback must be a single float, got {fb!r}")


def game_digest(canonical_text: str) -> str:
    """Stable 16-hex-digit digest of a game's canonical text."""
    return hashlib.sha256(canonical_text.encode("utf-8")).hexdigest()[:16]


def _project_facility_record(
    level: FeedbackLevel, a: JointAction, rewards: dict[int, float], num_players: int
) -> Feedback:
    if level is FeedbackLevel.FACILITY:
        return tuple(sorted(rewards.items()))
    totals = tuple(sum(rewards[f] for f in a[i]) for i in range(num_players))
    if level is FeedbackLevel.AGENT:
        return totals
    return float(sum(totals))


def collect(
    game: CongestionGame,
    rho: ExplorationPolicy,
    n: int,
    level: FeedbackLevel,
    seed: int,
) -> Dataset:
    """Sample ``n`` records from ``rho`` at the given feedback level.

    Generator contract (PCG64 seeded with ``seed``): for each record, one
    uniform draw selects the action by inverse CDF over the support in its
    stored order, then ``sample_rewards`` draws facility noise in increasing
    facility order. The same seed therefore yields the same dataset at every
    level, and shorter collections are prefixes of longer ones.
    """
    if n < 1:
        raise InputError("dataset size must be at least 1")
    rho.validate_for(game)
    rng = np.random.default_rng(seed)
    actions = [a for a, _ in rho.support]
    cumulative = []
    acc = 0.0
    for _, p in rho.support:
        acc += float(p)
        cumulative.append(acc)
    records = []
    last = len(actions) - 1
    for _ in range(n):
        u = rng.random()
        k = min(bisect.bisect_right(cumulative, u), last)
        a = actions[k]
        rewards = sample_rewards(game, a, rng)
        records.append((a, _project_facility_record(level, a, rewards, game.num_players)))
    from .formats import game_to_text  # local import to avoid a cycle

    return Dataset(
        level=level,
        records=tuple(records),
        seed=seed,
        game_hash=game_digest(game_to_text(game)),
        num_players=game.num_players,
        num_facilities=game.num_facilities,
    )


def project(dataset: Dataset, target: FeedbackLevel) -> Dataset:
    """Coarsen a dataset to ``target``; finer targets are refused."""
    if target.rank > dataset.level.rank:
        raise InputError(
            f"cannot project {dataset.level} feedback up to {target} feedback"
        )
    if target is dataset.level:
        return dataset
    records = []
    for a, fb in dataset.records:
        if dataset.level is FeedbackLevel.FACILITY:
            rewards = dict(fb)  # type: ignore[arg-type]
            records.append((a, _project_facility_record(target, a, rewards, dataset.num_players)))
        else:  # agent -> game
            records.append((a, float(sum(fb))))  # type: ignore[arg-type]
    return replace(dataset, level=target, records=tuple(records))


def expected_records(
    game: CongestionGame, rho: ExplorationPolicy, level: FeedbackLevel
) -> dict[JointAction, Feedback]:
    """Noise-free feedback each support action would produce.

    This is the sufficient statistic a dataset from a deterministic game
    reveals at the given level.
    """
    out: dict[JointAction, Feedback] = {}
    for a, _ in rho.support:
        rewards = {
            f: game.mean_rewards[f][n - 1]
            for f, n in _load_pairs(game, a)
        }
        out[a] = _project_facility_record(level, a, rewards, game.num_players)
    return out


def _load_pairs(game: CongestionGame, a: JointAction) -> list[tuple[int, int]]:
    loads = [0] * game.num_facilities
    for action in a:
        for f in action:
            loads[f] += 1
    return [(f, loads[f]) for f in selected_facilities(a)]


# --- text serialization ----------------------------------------------------

_DATASET_MAGIC = "congame-dataset v1"


def action_to_token(a: JointAction) -> str:
    """Render a joint action as ``{0,1}|{}|{2}`` (one set per player)."""
    return "|".join("{" + ",".join(str(f) for f in s) + "}" for s in a)


def token_to_action(token: str, *, path: str | None = None, line: int | None = None) -> JointAction:
    """Parse the ``action_to_token`` syntax."""
    parts = token.split("|")
    actions: list[ActionSet] = []
    for part in parts:
        if not (part.startswith("{") and part.endswith("}")):
            raise FormatError(f"malformed action set {part!r}", path=path, line=line)
        body = part[1:-1]
        if body == "":
            actions.append(())
            continue
        try:
            facilities = tuple(int(x) for x in body.split(","))
        except ValueError:
            raise FormatError(f"malformed action set {part!r}", path=path, line=line) from None
        actions.append(facilities)
    return tuple(actions)


def save(dataset: Dataset, path: str) -> None:
    """Write a dataset as line-oriented text; floats round-trip via repr."""
    lines = [
        _DATASET_MAGIC,
        f"level {dataset.level}",
        f"records {len(dataset.records)}",
        f"seed {dataset.seed}",
        f"players {dataset.num_players}",
        f"facilities {dataset.num_facilities}",
        f"game_hash {dataset.game_hash}",
    ]
    for a, fb in dataset.records:
        token = action_to_token(a)
        if dataset.level is FeedbackLevel.FACILITY:
            body = " ".join(f"{f}={repr(r)}" for f, r in fb)  # type: ignore[union-attr]
            lines.append(f"record {token} {body}".rstrip())
        elif dataset.level is FeedbackLevel.AGENT:
            body = " ".join(repr(v) for v in fb)  # type: ignore[union-attr]
            lines.append(f"record {token} {body}")
        else:
            lines.append(f"record {token} {repr(fb)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _header_value(line: str, key: str, path: str, lineno: int) -> str:
    prefix = key + " "
    if not line.startswith(prefix):
        raise FormatError(f"expected '{key} ...', got {line!r}", path=path, line=lineno)
    return line[len(prefix):]


def load(path: str, game: CongestionGame | None = None) -> Dataset:
    """Read a dataset written by ``save``.

    When ``game`` is supplied its canonical digest is compared against the
    stored one; a disagreement sets ``hash_mismatch`` instead of failing, so
    callers can warn and continue.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _DATASET_MAGIC:
        raise FormatError(f"missing '{_DATASET_MAGIC}' header", path=path, line=1)
    if len(lines) < 7:
        raise FormatError("truncated dataset header", path=path, line=len(lines))
    level_text = _header_value(lines[1], "level", path, 2)
    try:
        level = FeedbackLevel(level_text)
    except ValueError:
        raise FormatError(f"unknown level {level_text!r}", path=path, line=2) from None
    try:
        count = int(_header_value(lines[2], "records", path, 3))
        seed = int(_header_value(lines[3], "seed", path, 4))
        players = int(_header_value(lines[4], "players", path, 5))
        facilities = int(_header_value(lines[5], "facilities", path, 6))
    except ValueError as exc:
        raise FormatError(f"bad header number: {exc}", path=path) from None
    digest = _header_value(lines[6], "game_hash", path, 7)
    records: list[tuple[JointAction, Feedback]] = []
    for offset, line in enumerate(lines[7:], start=8):
        if not line.strip():
            continue
        if not line.startswith("record "):
            raise FormatError(f"expected a record line, got {line!r}", path=path, line=offset)
        fields = line.split()
        if len(fields) < 2:
            raise FormatError("record line is missing its action", path=path, line=offset)
        a = token_to_action(fields[1], path=path, line=offset)
        fb = _parse_feedback(level, a, fields[2:], players, path, offset)
        records.append((a, fb))
    if len(records) != count:
        raise FormatError(
            f"header promises {count} records but {len(records)} were found",
            path=path,
            line=len(lines),
        )
    dataset = Dataset(
        level=level,
        records=tuple(records),
        seed=seed,
        game_hash=digest,
        num_players=players,
        num_facilities=facilities,
    )
    if game is not None:
        from .formats import game_to_text

        if game_digest(game_to_text(game)) != digest:
            dataset = replace(dataset, hash_mismatch=True)
    return dataset


def _parse_feedback(
    level: FeedbackLevel,
    a: JointAction,
    fields: list[str],
    players: int,
    path: str,
    lineno: int,
) -> Feedback:
    try:
        if level is FeedbackLevel.FACILITY:
            pairs = []
            for item in fields:
                f_text, _, r_text = item.partition("=")
                pairs.append((int(f_text), float(r_text)))
            return tuple(pairs)
        if level is FeedbackLevel.AGENT:
            if len(fields) != players:
                raise FormatError(
                    f"agent record needs {players} totals, got {len(fields)}",
                    path=path,
                    line=lineno,
                )
            return tuple(float(v) for v in fields)
        if len(fields) != 1:
            raise FormatError("game record needs exactly one total", path=path, line=lineno)
        return float(fields[0])
    except ValueError as exc:
        raise FormatError(f"bad feedback value: {exc}", path=path, line=lineno) from None
