"""Shared test helpers: random games with exactly representable rewards."""

from __future__ import annotations

import numpy as np

from congame.game import CongestionGame, full_action_space

# Verdict lines recorded by the acceptance tests. Printing inside a test is
# swallowed by capture when the test passes, so the lines are replayed in a
# terminal-summary section to keep one visible pass/fail line per criterion.
ACCEPTANCE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_VERDICTS:
        terminalreporter.write_line(line)


def dyadic_random_game(
    rng: np.random.Generator, num_players: int, num_facilities: int
) -> CongestionGame:
    """Random game whose rewards are multiples of 1/64.

    Sums of a few such values are exact in binary floating point, so identity
    checks (potential differences, relabeling) can assert exact equality.
    """
    table = rng.integers(-64, 65, size=(num_facilities, num_players)) / 64.0
    return CongestionGame(
        num_players=num_players,
        num_facilities=num_facilities,
        action_spaces=tuple(full_action_space(num_facilities) for _ in range(num_players)),
        mean_rewards=tuple(tuple(float(v) for v in row) for row in table),
    )


def uniform_random_game(
    rng: np.random.Generator, num_players: int, num_facilities: int
) -> CongestionGame:
    """Random game with continuous rewards in [-1, 1]."""
    table = rng.uniform(-1.0, 1.0, size=(num_facilities, num_players))
    return CongestionGame(
        num_players=num_players,
        num_facilities=num_facilities,
        action_spaces=tuple(full_action_space(num_facilities) for _ in range(num_players)),
        mean_rewards=tuple(tuple(float(v) for v in row) for row in table),
    )
