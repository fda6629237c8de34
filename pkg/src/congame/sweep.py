"""Gap-versus-data-size experiments with theory-bound overlays.

A sweep fixes a game, an exploration policy, and a feedback level, then for
each dataset size on a grid runs independent trials: collect, fit, solve,
and score the output profile's true Nash gap against the level's theoretical
guarantee. Results land in a delimited table and an SVG log-log plot of the
per-size medians.

Determinism: trial ``(size index, trial index)`` always collects with the
seed spawned from the root seed at that coordinate, whether trials run
sequentially or across worker processes (``CONGAME_WORKERS``), and rows are
emitted in grid order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .coverage import (
    CoverageReport,
    covariance_domination_coefficient,
    facility_unilateral_coefficient,
    one_unit_deviation_check,
    one_unit_deviation_policy,
    population_covariance_coefficient,
)
from .data import ExplorationPolicy, FeedbackLevel, collect
from .errors import CoverageInfeasibleError, FormatError, InputError
from .estimators import FacilityEstimate, LinearModel, default_iota, fit
from .game import CongestionGame, JointAction, enumerate_pure_ne, iter_joint_actions, pure_gap
from .instances import INSTANCE_NAMES, build

SWEEP_MAGIC = "congame-sweep v1"

CSV_COLUMNS = ("n", "trial", "true_gap", "surrogate_gap", "theory_bound", "bonus_valid")


@dataclass(frozen=True)
class SweepSpec:
    """Declarative description of one sweep.

    ``instance`` is a built-in name, or None when an explicit game is given.
    ``rho_mode`` selects the exploration source: ``instance`` (the built-in's
    own policy), ``one-unit`` (uniform over single deviations of the
    lexicographically first equilibrium), or ``file`` with ``rho`` supplied.
    """

    level: FeedbackLevel
    n_grid: tuple[int, ...]
    trials: int
    delta: float
    seed: int
    instance: str | None = None
    game: CongestionGame | None = None
    rho_mode: str = "instance"
    rho: ExplorationPolicy | None = None
    instance_players: int = 2
    instance_facilities: int = 2

    def __post_init__(self) -> None:
        if not self.n_grid:
            raise InputError("sweep needs a nonempty size grid")
        if any(n < 1 for n in self.n_grid):
            raise InputError("sweep sizes must be at least 1")
        if self.trials < 1:
            raise InputError("sweep needs at least one trial")
        if not 0.0 < self.delta < 1.0:
            raise InputError("delta must be in (0, 1)")
        if (self.instance is None) == (self.game is None):
            raise InputError("exactly one of instance or game must be given")
        if self.rho_mode not in ("instance", "one-unit", "file"):
            raise InputError(f"unknown rho mode {self.rho_mode!r}")
        if self.rho_mode == "file" and self.rho is None:
            raise InputError("rho mode 'file' needs an explicit policy")
        if self.rho_mode == "instance" and self.instance is None:
            raise InputError("rho mode 'instance' needs a built-in instance")


@dataclass(frozen=True)
class SweepRow:
    """One trial's outcome."""

    n: int
    trial: int
    true_gap: float
    surrogate_gap: float
    theory_bound: float
    bonus_valid: bool


def facility_gap_bound(
    num_players: int, num_facilities: int, coefficient: float, iota: float, n: int
) -> float:
    """Facility-level guarantee ``8 sqrt(m+1) C iota F / sqrt(n)``."""
    return (
        8.0
        * math.sqrt(num_players + 1)
        * coefficient
        * iota
        * num_facilities
        / math.sqrt(n)
    )


def linear_gap_bound(
    num_players: int, num_facilities: int, beta: float, coefficient: float, n: int
) -> float:
    """Linear-level guarantee ``4 sqrt(m F beta / (C n))``."""
    if coefficient <= 0.0:
        return math.inf
    return 4.0 * math.sqrt(num_players * num_facilities * beta / (coefficient * n))


def trial_seed(root: int, n_index: int, trial: int) -> int:
    """Collection seed for one grid coordinate, stable across schedulers."""
    seq = np.random.SeedSequence(root, spawn_key=(n_index, trial))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _resolve(spec: SweepSpec) -> tuple[CongestionGame, ExplorationPolicy]:
    if spec.instance is not None:
        inst = build(spec.instance, spec.instance_players, spec.instance_facilities)
        game = inst.game
        rho = inst.rho if spec.rho_mode == "instance" else spec.rho
    else:
        game = spec.game
        rho = spec.rho
    if spec.rho_mode == "one-unit":
        rho = one_unit_deviation_policy(game, enumerate_pure_ne(game)[0])
    if rho is None:
        raise InputError("sweep could not resolve an exploration policy")
    rho.validate_for(game)
    return game, rho


def _max_reward_magnitude(game: CongestionGame) -> float:
    return max(abs(v) for row in game.mean_rewards for v in row)


def _bonus_validity(
    game: CongestionGame, estimator: FacilityEstimate | LinearModel
) -> bool:
    """Did every ``(player, profile)`` estimate land within its bonus?

    Checked against the game's true means; only meaningful when the game is
    known, which a sweep always is.
    """
    for _, a in iter_joint_actions(game):
        loads_reward = [
            sum(game.mean_rewards[f][_load(a, f) - 1] for f in a[i])
            for i in range(game.num_players)
        ]
        for i in range(game.num_players):
            estimate, bonus = estimator.reward_and_bonus(a, i)
            if abs(loads_reward[i] - estimate) > bonus:
                return False
    return True


def _load(a: JointAction, facility: int) -> int:
    return sum(1 for action in a if facility in action)


def _coverage_gate(
    game: CongestionGame, rho: ExplorationPolicy, level: FeedbackLevel
) -> tuple[JointAction, CoverageReport]:
    """Pick the oracle equilibrium with the most favorable coverage.

    Facility level: the smallest feasible density-ratio coefficient; linear
    levels: the largest population covariance coefficient. Raises when no
    equilibrium is covered.
    """
    equilibria = enumerate_pure_ne(game)
    best: tuple[JointAction, CoverageReport] | None = None
    for ne in equilibria:
        if level is FeedbackLevel.FACILITY:
            ok, _ = one_unit_deviation_check(game, rho, ne)
            if not ok:
                continue
            report = facility_unilateral_coefficient(game, rho, ne)
            if not report.feasible:
                continue
            if best is None or report.coefficient < best[1].coefficient:
                best = (ne, report)
        else:
            report = population_covariance_coefficient(game, rho, ne, level)
            if not report.feasible:
                continue
            if best is None or report.coefficient > best[1].coefficient:
                best = (ne, report)
    if best is None:
        detail = "no pure equilibrium is covered by the exploration policy"
        raise CoverageInfeasibleError(f"{level} sweep refused: {detail}")
    return best


def _run_trial(args: tuple) -> SweepRow:
    (game, rho, level, delta, n, n_index, trial, root, ne, base_coefficient) = args
    from .solver import surrogate_minimize

    seed = trial_seed(root, n_index, trial)
    dataset = collect(game, rho, n, level, seed)
    estimator = fit(dataset, delta=delta)
    cert = surrogate_minimize(estimator, game)
    true_gap = pure_gap(game, cert.action)
    if level is FeedbackLevel.FACILITY:
        bound = facility_gap_bound(
            game.num_players, game.num_facilities, base_coefficient, estimator.iota, n
        )
    else:
        report = covariance_domination_coefficient(game, estimator, ne)
        coefficient = report.coefficient if report.feasible else 0.0
        bound = linear_gap_bound(
            game.num_players, game.num_facilities, estimator.beta, coefficient, n
        )
    return SweepRow(
        n=n,
        trial=trial,
        true_gap=true_gap,
        surrogate_gap=cert.surrogate_gap,
        theory_bound=bound,
        bonus_valid=_bonus_validity(game, estimator),
    )


def run_sweep(spec: SweepSpec) -> list[SweepRow]:
    """Execute the sweep; rows come back sorted by (size index, trial)."""
    game, rho = _resolve(spec)
    ne, gate_report = _coverage_gate(game, rho, spec.level)
    base_coefficient = float(gate_report.coefficient)
    tasks = [
        (game, rho, spec.level, spec.delta, n, n_index, trial, spec.seed, ne, base_coefficient)
        for n_index, n in enumerate(spec.n_grid)
        for trial in range(spec.trials)
    ]
    workers = int(os.environ.get("CONGAME_WORKERS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_trial, tasks))
    else:
        rows = [_run_trial(t) for t in tasks]
    return rows


def emit_csv(rows: list[SweepRow], path: str) -> None:
    """Comma-delimited table, floats via repr, rows in grid order."""
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.n,
                    row.trial,
                    repr(row.true_gap),
                    repr(row.surrogate_gap),
                    repr(row.theory_bound),
                    int(row.bonus_valid),
                ]
            )


def read_csv(path: str) -> list[SweepRow]:
    """Inverse of ``emit_csv``."""
    import csv

    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(CSV_COLUMNS):
            raise FormatError(f"unexpected columns {header!r}", path=path, line=1)
        for lineno, record in enumerate(reader, start=2):
            try:
                rows.append(
                    SweepRow(
                        n=int(record[0]),
                        trial=int(record[1]),
                        true_gap=float(record[2]),
                        surrogate_gap=float(record[3]),
                        theory_bound=float(record[4]),
                        bonus_valid=bool(int(record[5])),
                    )
                )
            except (IndexError, ValueError):
                raise FormatError("malformed row", path=path, line=lineno) from None
    return rows


PLOT_FLOOR = 1e-16
"""Zero gaps are drawn at this floor so the log axis stays usable."""


def emit_plot(rows: list[SweepRow], path: str) -> None:
    """Log-log SVG of median gap and median bound versus dataset size.

    Exactly two series are drawn regardless of the trial count; their SVG
    group ids are ``median-gap`` and ``theory-bound``. Output is byte-stable:
    fixed hash salt, no date metadata.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    sizes = sorted({row.n for row in rows})
    gap_medians = []
    bound_medians = []
    for n in sizes:
        gaps = [row.true_gap for row in rows if row.n == n]
        bounds = [row.theory_bound for row in rows if row.n == n]
        gap_medians.append(max(float(np.median(gaps)), PLOT_FLOOR))
        bound_medians.append(max(float(np.median(bounds)), PLOT_FLOOR))
    with plt.rc_context({"svg.hashsalt": "congame"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        ax.loglog(sizes, gap_medians, marker="o", label="median true gap", gid="median-gap")
        ax.loglog(sizes, bound_medians, marker="s", label="median theory bound", gid="theory-bound")
        ax.set_xlabel("dataset size")
        ax.set_ylabel("Nash gap")
        ax.legend()
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def spec_to_text(spec: SweepSpec, game_path: str | None = None, rho_path: str | None = None) -> str:
    """Text form of a sweep spec (explicit games reference their files)."""
    lines = [SWEEP_MAGIC]
    if spec.instance is not None:
        lines.append(f"instance {spec.instance}")
        if (spec.instance_players, spec.instance_facilities) != (2, 2):
            lines.append(f"players {spec.instance_players}")
            lines.append(f"facilities {spec.instance_facilities}")
    else:
        lines.append(f"game {game_path}")
    if spec.rho_mode == "file":
        lines.append(f"rho {rho_path}")
    else:
        lines.append(f"rho {spec.rho_mode}")
    lines.append(f"level {spec.level}")
    lines.append("n_grid " + " ".join(str(n) for n in spec.n_grid))
    lines.append(f"trials {spec.trials}")
    lines.append(f"delta {repr(spec.delta)}")
    lines.append(f"seed {spec.seed}")
    return "\n".join(lines) + "\n"


def parse_spec(text: str, path: str = "<sweep>") -> SweepSpec:
    """Parse a sweep spec file; game/rho paths are loaded eagerly."""
    from .formats import load_game, load_rho

    lines = text.splitlines()
    if not lines or lines[0].strip() != SWEEP_MAGIC:
        raise FormatError(f"missing '{SWEEP_MAGIC}' header", path=path, line=1)
    fields: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" ")
        if key in fields:
            raise FormatError(f"duplicate '{key}' line", path=path, line=lineno)
        fields[key] = (value.strip(), lineno)
    for required in ("level", "n_grid", "trials", "delta", "seed"):
        if required not in fields:
            raise FormatError(f"missing '{required}' line", path=path, line=len(lines))

    def take(key: str) -> tuple[str, int]:
        return fields[key]

    instance = None
    game = None
    if "instance" in fields:
        value, lineno = take("instance")
        if value not in INSTANCE_NAMES:
            raise FormatError(f"unknown instance {value!r}", path=path, line=lineno)
        instance = value
    elif "game" in fields:
        value, _ = take("game")
        game = load_game(value)
    else:
        raise FormatError("spec needs an 'instance' or 'game' line", path=path, line=len(lines))

    rho_mode = "instance" if instance is not None else "file"
    rho = None
    if "rho" in fields:
        value, lineno = take("rho")
        if value in ("instance", "one-unit"):
            rho_mode = value
        else:
            rho_mode = "file"
            rho = load_rho(value)
    elif game is not None:
        raise FormatError("explicit games need a 'rho' line", path=path, line=len(lines))

    level_text, level_line = take("level")
    try:
        level = FeedbackLevel(level_text)
    except ValueError:
        raise FormatError(f"unknown level {level_text!r}", path=path, line=level_line) from None
    try:
        grid_text, _ = take("n_grid")
        n_grid = tuple(int(v) for v in grid_text.split())
        trials = int(take("trials")[0])
        delta = float(take("delta")[0])
        seed = int(take("seed")[0])
        players = int(fields["players"][0]) if "players" in fields else 2
        facilities = int(fields["facilities"][0]) if "facilities" in fields else 2
    except ValueError as exc:
        raise FormatError(f"bad numeric field: {exc}", path=path) from None
    return SweepSpec(
        level=level,
        n_grid=n_grid,
        trials=trials,
        delta=delta,
        seed=seed,
        instance=instance,
        game=game,
        rho_mode=rho_mode,
        rho=rho,
        instance_players=players,
        instance_facilities=facilities,
    )
