"""Command-line interface.

Subcommands: ``validate`` (echo a game file in canonical form), ``collect``
(sample a dataset), ``fit`` (estimate from a dataset), ``solve`` (surrogate
minimization with an optional oracle check), ``coverage`` (coefficient
reports), ``reproduce`` (separation and coverage-bound reproductions), and
``sweep`` (gap-versus-size experiments with CSV and SVG outputs).

Exit codes: 0 success, 1 usage or input error, 2 infeasible coverage for the
requested run, 3 enumeration cap exceeded. All output is deterministic for a
fixed seed: floats print via ``repr`` and no timestamps are emitted.
"""

from __future__ import annotations

import argparse
import math
import sys
from fractions import Fraction

from . import formats, sweep as sweep_mod
from .coverage import (
    covariance_domination_coefficient,
    facility_unilateral_coefficient,
    one_unit_deviation_check,
    unilateral_coefficient,
)
from .data import FeedbackLevel, collect, load as load_dataset, save as save_dataset, token_to_action
from .errors import (
    CongameError,
    CoverageInfeasibleError,
    FormatError,
    InputError,
    ResourceLimitError,
)
from .estimators import fit
from .game import ENUMERATION_CAP, CongestionGame, JointAction, enumerate_pure_ne, pure_gap
from .instances import SEPARATION_PAIRS, build, minimax_gap, separation_check, sufficient_statistics
from .solver import surrogate_minimize

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_RESOURCE = 3


class _UsageError(CongameError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse maps its own errors to exit code 2; we reserve 2 for
    infeasible coverage, so route them through the usage path instead."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="congame", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a game file and echo its canonical form")
    p.add_argument("--game", required=True)
    p.add_argument("--rho", help="also validate an exploration policy against the game")

    p = sub.add_parser("collect", help="sample an offline dataset")
    p.add_argument("--game", required=True)
    p.add_argument("--rho", required=True)
    p.add_argument("--level", required=True, choices=[l.value for l in FeedbackLevel])
    p.add_argument("-n", "--records", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="fit the level-appropriate estimator to a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--iota", type=float, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("solve", help="surrogate-minimizing profile with a certificate")
    p.add_argument("--data", required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--iota", type=float, default=None)
    p.add_argument("--game", help="game file; required with --oracle, checked against the dataset")
    p.add_argument("--oracle", action="store_true", help="also report the true Nash gap")
    p.add_argument("--cap", type=int, default=ENUMERATION_CAP)
    p.add_argument("--out", help="certificate file")

    p = sub.add_parser("coverage", help="coverage coefficient reports")
    p.add_argument("--game", required=True)
    p.add_argument(
        "--kind",
        required=True,
        choices=["unilateral", "facility", "one-unit", "covariance"],
    )
    p.add_argument("--rho", help="exploration policy (ratio kinds)")
    p.add_argument("--data", help="dataset (covariance kind)")
    p.add_argument("--level", choices=["agent", "game"], help="covariance kind level override")
    p.add_argument(
        "--ne",
        default="auto",
        help="equilibrium: 'auto' picks the most favorable oracle one, else a file",
    )
    p.add_argument("--cap", type=int, default=ENUMERATION_CAP)

    p = sub.add_parser("reproduce", help="reproduce published separations and coverage bounds")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--separation", choices=list(SEPARATION_PAIRS))
    group.add_argument("--remark", choices=["44", "54"])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--players", type=int, default=2)
    p.add_argument("--facilities", type=int, default=2)
    p.add_argument("--out-csv", help="per-seed coefficient table (remark mode)")

    p = sub.add_parser("sweep", help="gap-versus-size experiment")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-plot", required=True)

    return parser


def _print(line: str) -> None:
    sys.stdout.write(line + "\n")


def _cmd_validate(args: argparse.Namespace) -> int:
    game = formats.load_game(args.game)
    if args.rho:
        rho = formats.load_rho(args.rho)
        rho.validate_for(game)
        _print(f"rho_entries {len(rho.support)}")
    sys.stdout.write(formats.game_to_text(game))
    _print(f"game_hash {formats.hash_game(game)}")
    return EXIT_OK


def _cmd_collect(args: argparse.Namespace) -> int:
    game = formats.load_game(args.game)
    rho = formats.load_rho(args.rho)
    dataset = collect(game, rho, args.records, FeedbackLevel(args.level), args.seed)
    save_dataset(dataset, args.out)
    _print(f"records {len(dataset)}")
    _print(f"game_hash {dataset.game_hash}")
    return EXIT_OK


def _cmd_fit(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data)
    model = fit(dataset, delta=args.delta, iota=args.iota)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(formats.model_to_text(model))
    _print(f"kind {getattr(model, 'level', FeedbackLevel.FACILITY)}")
    _print(f"records {model.num_records}")
    return EXIT_OK


def _cmd_solve(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data)
    game = None
    if args.game:
        game = formats.load_game(args.game)
        if formats.hash_game(game) != dataset.game_hash:
            sys.stderr.write("warning: dataset was not collected from this game file\n")
    if game is None:
        if args.oracle:
            raise InputError("--oracle needs --game")
        raise InputError("solve needs --game to know the action spaces")
    model = fit(dataset, delta=args.delta, iota=args.iota)
    cert = surrogate_minimize(model, game, cap=args.cap)
    true_gap = pure_gap(game, cert.action) if args.oracle else None
    text = formats.certificate_to_text(cert, true_gap)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def _resolve_ne(
    args: argparse.Namespace, game: CongestionGame
) -> list[JointAction]:
    if args.ne == "auto":
        return enumerate_pure_ne(game, cap=args.cap)
    with open(args.ne, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith("congame-"):
                continue
            token = line.split()[1] if line.startswith("action ") else line.split()[0]
            action = token_to_action(token, path=args.ne, line=lineno)
            game.validate_joint_action(action)
            return [action]
    raise FormatError("no action found", path=args.ne)


def _cmd_coverage(args: argparse.Namespace) -> int:
    game = formats.load_game(args.game)
    candidates = _resolve_ne(args, game)
    if args.kind in ("unilateral", "facility", "one-unit"):
        if not args.rho:
            raise InputError(f"--kind {args.kind} needs --rho")
        rho = formats.load_rho(args.rho)
        if args.kind == "one-unit":
            results = [one_unit_deviation_check(game, rho, ne) for ne in candidates]
            ok = any(passed for passed, _ in results)
            _print("kind=one-unit")
            _print(f"feasible={'true' if ok else 'false'}")
            if not ok:
                cells = ";".join(f"cell({f},{n})" for f, n in results[0][1])
                _print(f"uncovered={cells}")
            return EXIT_OK
        compute = unilateral_coefficient if args.kind == "unilateral" else facility_unilateral_coefficient
        reports = [compute(game, rho, ne, cap=args.cap) for ne in candidates]
        feasible = [r for r in reports if r.feasible]
        report = min(feasible, key=lambda r: r.coefficient) if feasible else reports[0]
    else:
        if not args.data:
            raise InputError("--kind covariance needs --data")
        dataset = load_dataset(args.data, game=game)
        if dataset.hash_mismatch:
            sys.stderr.write("warning: dataset was not collected from this game file\n")
        level = FeedbackLevel(args.level) if args.level else None
        reports = [
            covariance_domination_coefficient(game, dataset, ne, level) for ne in candidates
        ]
        report = max(reports, key=lambda r: (r.feasible, r.coefficient))
    sys.stdout.write(formats.coverage_report_to_text(report))
    return EXIT_OK


def _cmd_reproduce(args: argparse.Namespace) -> int:
    if args.separation:
        level = FeedbackLevel(args.separation)
        names = SEPARATION_PAIRS[args.separation]
        left, right = build(names[0]), build(names[1])
        same = sufficient_statistics(left, level) == sufficient_statistics(right, level)
        ne_left = set(enumerate_pure_ne(left.game))
        ne_right = set(enumerate_pure_ne(right.game))
        verdict = separation_check(names, level)
        value = minimax_gap(names)
        claimed = left.claimed_gap_bound or Fraction(0)
        _print(f"pair {names[0]} {names[1]}")
        _print(f"level {level}")
        _print(f"statistics_identical {'pass' if same else 'fail'}")
        _print(f"ne_disjoint {'pass' if not (ne_left & ne_right) else 'fail'}")
        _print(f"separation {'pass' if verdict else 'fail'}")
        _print(f"minimax_gap {repr(value)}")
        _print(f"claimed_bound {claimed}")
        _print(f"bound_respected {'pass' if value >= float(claimed) else 'fail'}")
        return EXIT_OK
    return _reproduce_remark(args)


def remark_sample_size(support_size: int, delta: float) -> int:
    """Records needed by the coverage propositions: ``8 log(S/delta) S``."""
    return math.ceil(8.0 * math.log(support_size / delta) * support_size)


def _reproduce_remark(args: argparse.Namespace) -> int:
    if args.trials < 1:
        raise InputError("reproduction needs at least one trial")
    if args.remark == "44":
        inst = build("remark44", args.players, args.facilities)
        level = FeedbackLevel.AGENT
        m, F = inst.game.num_players, inst.game.num_facilities
        threshold = 1.0 / (2.0 * m * F**4)
        support_size = m * F + 1
    else:
        inst = build("remark54", num_facilities=args.facilities)
        level = FeedbackLevel.GAME
        F = inst.game.num_facilities
        threshold = 1.0 / (24.0 * F**3)
        support_size = 3 * F + 1
    n = remark_sample_size(support_size, args.delta)
    ne = inst.known_ne[0]
    rows = []
    passes = 0
    for seed in range(args.trials):
        dataset = collect(inst.game, inst.rho, n, level, seed)
        report = covariance_domination_coefficient(inst.game, dataset, ne, level)
        coefficient = float(report.coefficient) if report.feasible else 0.0
        ok = coefficient >= threshold
        passes += ok
        rows.append((seed, n, coefficient, threshold, int(ok)))
    fraction = passes / args.trials
    if args.out_csv:
        import csv

        with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["seed", "n", "coefficient", "threshold", "pass"])
            for seed, size, coefficient, bound, ok in rows:
                writer.writerow([seed, size, repr(coefficient), repr(bound), ok])
    _print(f"remark {args.remark}")
    _print(f"players {inst.game.num_players}")
    _print(f"facilities {inst.game.num_facilities}")
    _print(f"level {level}")
    _print(f"n {n}")
    _print(f"threshold {repr(threshold)}")
    _print(f"pass_fraction {repr(fraction)}")
    _print(f"verdict {'pass' if fraction >= 0.95 else 'fail'}")
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        spec = sweep_mod.parse_spec(fh.read(), path=args.spec)
    rows = sweep_mod.run_sweep(spec)
    sweep_mod.emit_csv(rows, args.out_csv)
    sweep_mod.emit_plot(rows, args.out_plot)
    for n in spec.n_grid:
        gaps = sorted(row.true_gap for row in rows if row.n == n)
        mid = len(gaps) // 2
        median = gaps[mid] if len(gaps) % 2 else (gaps[mid - 1] + gaps[mid]) / 2.0
        _print(f"n {n} median_gap {repr(median)}")
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "collect": _cmd_collect,
    "fit": _cmd_fit,
    "solve": _cmd_solve,
    "coverage": _cmd_coverage,
    "reproduce": _cmd_reproduce,
    "sweep": _cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except CoverageInfeasibleError as exc:
        sys.stdout.write(f"refusal=infeasible_coverage\nreason={exc}\n")
        return EXIT_INFEASIBLE
    except ResourceLimitError as exc:
        sys.stderr.write(f"resource limit: {exc}\n")
        return EXIT_RESOURCE
    except (FormatError, InputError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
