"""Line-oriented text formats for games, exploration policies, and reports.

Every format opens with a ``congame-<kind> v1`` magic line. Floats are
serialized with ``repr`` so round-trips are bit-exact; probabilities and
reward values may be written as fractions (``1/3``) or decimals. Parsers
report the 1-based line number of the first offending line.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .coverage import CoverageReport
from .data import (
    ExplorationPolicy,
    action_to_token,
    game_digest,
    token_to_action,
)
from .errors import FormatError
from .estimators import FacilityEstimate, LinearModel
from .game import ActionSet, CongestionGame, JointAction
from .solver import SurrogateCertificate

GAME_MAGIC = "congame-game v1"
RHO_MAGIC = "congame-rho v1"
CERTIFICATE_MAGIC = "congame-certificate v1"
MODEL_MAGIC = "congame-model v1"
COVERAGE_MAGIC = "congame-coverage v1"


def _set_token(action: ActionSet) -> str:
    return "{" + ",".join(str(f) for f in action) + "}"


def game_to_text(game: CongestionGame) -> str:
    """Canonical text form of a game; its digest identifies the game."""
    lines = [
        GAME_MAGIC,
        f"players {game.num_players}",
        f"facilities {game.num_facilities}",
    ]
    for i, space in enumerate(game.action_spaces):
        lines.append(f"actions {i} " + " ".join(_set_token(a) for a in space))
    for f in range(game.num_facilities):
        for n in range(1, game.num_players + 1):
            lines.append(f"reward {f} {n} {repr(game.mean_rewards[f][n - 1])}")
    if game.deterministic:
        lines.append("noise none")
    else:
        lines.append("noise uniform " + " ".join(repr(a) for a in game.noise_amplitudes))
    return "\n".join(lines) + "\n"


def _parse_value(text: str, path: str, line: int) -> float:
    """A reward or amplitude: decimal or ``p/q`` fraction."""
    try:
        if "/" in text:
            return float(Fraction(text))
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise FormatError(f"bad numeric value {text!r}", path=path, line=line) from None


def parse_game(text: str, path: str = "<game>") -> CongestionGame:
    """Parse ``game_to_text`` output (field order is not enforced)."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != GAME_MAGIC:
        raise FormatError(f"missing '{GAME_MAGIC}' header", path=path, line=1)
    players: int | None = None
    facilities: int | None = None
    spaces: dict[int, tuple[ActionSet, ...]] = {}
    rewards: dict[tuple[int, int], float] = {}
    noise: tuple[float, ...] | None = None
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        key = fields[0]
        try:
            if key == "players":
                players = int(fields[1])
            elif key == "facilities":
                facilities = int(fields[1])
            elif key == "actions":
                player = int(fields[1])
                space = tuple(
                    token_to_action(tok, path=path, line=lineno)[0] for tok in fields[2:]
                )
                if player in spaces:
                    raise FormatError(f"duplicate actions line for player {player}", path=path, line=lineno)
                spaces[player] = space
            elif key == "reward":
                f, n = int(fields[1]), int(fields[2])
                rewards[(f, n)] = _parse_value(fields[3], path, lineno)
            elif key == "noise":
                if fields[1] == "none":
                    noise = ()
                elif fields[1] == "uniform":
                    amps = tuple(_parse_value(v, path, lineno) for v in fields[2:])
                    if not amps:
                        raise FormatError("uniform noise needs amplitudes", path=path, line=lineno)
                    noise = amps
                else:
                    raise FormatError(f"unknown noise kind {fields[1]!r}", path=path, line=lineno)
            else:
                raise FormatError(f"unknown directive {key!r}", path=path, line=lineno)
        except FormatError:
            raise
        except (IndexError, ValueError):
            raise FormatError(f"malformed '{key}' line", path=path, line=lineno) from None
    if players is None or facilities is None:
        raise FormatError("missing players/facilities header", path=path, line=len(lines))
    missing_players = [i for i in range(players) if i not in spaces]
    if missing_players:
        raise FormatError(
            f"missing actions for players {missing_players}", path=path, line=len(lines)
        )
    table = tuple(
        tuple(rewards.get((f, n), 0.0) for n in range(1, players + 1))
        for f in range(facilities)
    )
    if noise is not None and len(noise) == 1:
        noise = noise * facilities
    return CongestionGame(
        num_players=players,
        num_facilities=facilities,
        action_spaces=tuple(spaces[i] for i in range(players)),
        mean_rewards=table,
        noise_amplitudes=noise if noise else (),
    )


def load_game(path: str) -> CongestionGame:
    """Read and validate a game file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_game(fh.read(), path=path)


def save_game(game: CongestionGame, path: str) -> None:
    """Write a game in canonical form."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(game_to_text(game))


def hash_game(game: CongestionGame) -> str:
    """Digest of the canonical text."""
    return game_digest(game_to_text(game))


def rho_to_text(rho: ExplorationPolicy) -> str:
    """Text form of an exploration policy (probabilities as fractions)."""
    lines = [RHO_MAGIC]
    for a, p in rho.support:
        lines.append(f"entry {p} {action_to_token(a)}")
    return "\n".join(lines) + "\n"


def parse_rho(text: str, path: str = "<rho>") -> ExplorationPolicy:
    """Parse ``rho_to_text`` output."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != RHO_MAGIC:
        raise FormatError(f"missing '{RHO_MAGIC}' header", path=path, line=1)
    support: list[tuple[JointAction, Fraction]] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if fields[0] != "entry" or len(fields) != 3:
            raise FormatError(f"expected 'entry PROB ACTION', got {line!r}", path=path, line=lineno)
        try:
            p = Fraction(fields[1])
        except (ValueError, ZeroDivisionError):
            raise FormatError(f"bad probability {fields[1]!r}", path=path, line=lineno) from None
        support.append((token_to_action(fields[2], path=path, line=lineno), p))
    if not support:
        raise FormatError("exploration policy has no entries", path=path, line=len(lines))
    return ExplorationPolicy(tuple(support))


def load_rho(path: str) -> ExplorationPolicy:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_rho(fh.read(), path=path)


def save_rho(rho: ExplorationPolicy, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(rho_to_text(rho))


def certificate_to_text(cert: SurrogateCertificate, true_gap: float | None = None) -> str:
    """Text form of a solver certificate; ``true_gap`` is the oracle check."""
    lines = [
        CERTIFICATE_MAGIC,
        f"action {action_to_token(cert.action)}",
        f"surrogate_gap {repr(cert.surrogate_gap)}",
    ]
    for i, (upper, lower) in enumerate(cert.per_player):
        lines.append(f"player {i} optimistic_best {repr(upper)} pessimistic_value {repr(lower)}")
    if true_gap is not None:
        lines.append(f"true_gap {repr(true_gap)}")
    return "\n".join(lines) + "\n"


def parse_certificate(text: str, path: str = "<certificate>") -> tuple[SurrogateCertificate, float | None]:
    """Parse ``certificate_to_text`` output."""
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines or lines[0].strip() != CERTIFICATE_MAGIC:
        raise FormatError(f"missing '{CERTIFICATE_MAGIC}' header", path=path, line=1)
    action: JointAction | None = None
    surrogate: float | None = None
    per_player: list[tuple[float, float]] = []
    true_gap: float | None = None
    for lineno, raw in enumerate(lines[1:], start=2):
        fields = raw.split()
        try:
            if fields[0] == "action":
                action = token_to_action(fields[1], path=path, line=lineno)
            elif fields[0] == "surrogate_gap":
                surrogate = float(fields[1])
            elif fields[0] == "player":
                per_player.append((float(fields[3]), float(fields[5])))
            elif fields[0] == "true_gap":
                true_gap = float(fields[1])
            else:
                raise FormatError(f"unknown directive {fields[0]!r}", path=path, line=lineno)
        except FormatError:
            raise
        except (IndexError, ValueError):
            raise FormatError(f"malformed '{fields[0]}' line", path=path, line=lineno) from None
    if action is None or surrogate is None:
        raise FormatError("certificate is missing its action or gap", path=path, line=len(lines))
    cert = SurrogateCertificate(action=action, surrogate_gap=surrogate, per_player=tuple(per_player))
    return cert, true_gap


def model_to_text(model: FacilityEstimate | LinearModel) -> str:
    """Model summary: counts/means table, or theta with beta and V's diagonal."""
    if isinstance(model, FacilityEstimate):
        lines = [
            MODEL_MAGIC,
            "kind facility",
            f"delta {repr(model.delta)}",
            f"iota {repr(model.iota)}",
            f"players {model.num_players}",
            f"facilities {model.num_facilities}",
            f"records {model.num_records}",
        ]
        for f in range(model.num_facilities):
            for n in range(model.num_players + 1):
                lines.append(
                    f"cell {f} {n} count {int(model.counts[f, n])} mean {repr(float(model.means[f, n]))}"
                )
        return "\n".join(lines) + "\n"
    lines = [
        MODEL_MAGIC,
        f"kind {model.level}",
        f"delta {repr(model.delta)}",
        f"iota {repr(model.iota)}",
        f"players {model.feature_map.num_players}",
        f"facilities {model.feature_map.num_facilities}",
        f"records {model.num_records}",
        f"beta {repr(model.beta)}",
        "theta " + " ".join(repr(float(v)) for v in model.theta),
        "cov_diagonal " + " ".join(repr(float(v)) for v in np.diag(model.cov)),
    ]
    return "\n".join(lines) + "\n"


def coverage_report_to_text(report: CoverageReport) -> str:
    """Key=value lines, one fact per line."""
    if isinstance(report.coefficient, Fraction):
        coefficient = str(report.coefficient)
        coefficient_float = repr(float(report.coefficient))
    elif math.isinf(report.coefficient):
        coefficient = "inf"
        coefficient_float = "inf"
    else:
        coefficient = repr(report.coefficient)
        coefficient_float = repr(report.coefficient)
    lines = [
        COVERAGE_MAGIC,
        f"kind={report.kind}",
        f"feasible={'true' if report.feasible else 'false'}",
        f"coefficient={coefficient}",
        f"coefficient_float={coefficient_float}",
    ]
    if report.witness is not None:
        lines.append(f"witness={_witness_token(report.witness)}")
    if report.uncovered:
        lines.append("uncovered=" + ";".join(_uncovered_token(u) for u in report.uncovered))
    return "\n".join(lines) + "\n"


def _witness_token(witness: tuple) -> str:
    parts = []
    for item in witness:
        if isinstance(item, tuple) and all(isinstance(x, int) for x in item):
            parts.append(_set_token(item))
        elif isinstance(item, tuple):
            parts.append(action_to_token(item))
        else:
            parts.append(str(item))
    return ",".join(parts)


def _uncovered_token(item: tuple) -> str:
    if len(item) == 2 and all(isinstance(x, int) for x in item):
        return f"cell({item[0]},{item[1]})"
    return _witness_token(item)
