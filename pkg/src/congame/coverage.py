"""Coverage diagnostics: does a dataset's exploration support equilibrium search?

Three notions are implemented, matching what each feedback level needs:

- the unilateral concentrability of a policy: the largest density ratio
  between any one-player deviation from the policy and the exploration
  distribution (pure deviations suffice; mixed ones are their convex
  combinations);
- the facility variant: the same ratio taken cell-wise over facility
  selector-count occupancies, together with the one-unit-deviation check
  that every cell reachable by a single deviation from an equilibrium is
  explored at all;
- covariance domination for the linear levels: the largest ``C`` with
  ``V >= I + n C u u^T`` over deviation features ``u``, computed per
  deviation as ``1 / (n u^T (V - I)^+ u)`` and zero when ``u`` leaves the
  span of the data.

Density ratios use exact rational arithmetic so statements like "the
coefficient equals the number of reachable profiles" hold exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

import numpy as np

from .data import Dataset, ExplorationPolicy, FeedbackLevel
from .errors import InputError
from .estimators import FeatureMap, LinearModel
from .game import (
    ENUMERATION_CAP,
    ActionSet,
    CongestionGame,
    JointAction,
    NE_TOLERANCE,
    ProductPolicy,
    compose_deviation,
    facility_loads,
    pure_gap,
    selected_facilities,
)

PolicyLike = Union[ProductPolicy, ExplorationPolicy, JointAction]

RANGE_TOLERANCE = 1e-9
"""Residual-norm tolerance deciding whether a deviation feature lies in the
span of the observed covariance."""


@dataclass(frozen=True)
class CoverageReport:
    """Outcome of a coverage computation.

    ``coefficient`` is an exact rational for the density-ratio kinds and a
    float for the covariance kinds; infeasible reports carry ``inf`` (ratio
    kinds: some required profile or cell has zero exploration mass) or ``0.0``
    (covariance kinds: some deviation feature escapes the data's span).
    ``witness`` names the extremal deviation; ``uncovered`` lists what broke
    feasibility.
    """

    kind: str
    coefficient: Fraction | float
    feasible: bool
    witness: tuple | None = None
    uncovered: tuple = ()


def _support_items(
    game: CongestionGame, policy: PolicyLike, cap: int = ENUMERATION_CAP
) -> list[tuple[JointAction, Fraction]]:
    if isinstance(policy, (ProductPolicy, ExplorationPolicy)):
        return list(policy.support_items(game, cap))
    game.validate_joint_action(policy)
    return [(policy, Fraction(1))]


def _as_product_policy(game: CongestionGame, policy: ProductPolicy | JointAction) -> ProductPolicy:
    if isinstance(policy, ProductPolicy):
        policy.validate_for(game)
        return policy
    return ProductPolicy.pure(game, policy)


def unilateral_coefficient(
    game: CongestionGame,
    rho: ExplorationPolicy,
    policy: ProductPolicy | JointAction,
    cap: int = ENUMERATION_CAP,
) -> CoverageReport:
    """Largest density ratio of any unilateral deviation from ``policy``.

    Maximizes ``(pi_i', pi_{-i})(a) / rho(a)`` over players, pure deviations,
    and profiles; mixed deviations are convex combinations of pure ones, so
    the maximum over pure deviations is the full supremum. Infeasible when
    some reachable profile has zero exploration mass.
    """
    rho.validate_for(game)
    pi = _as_product_policy(game, policy)
    from .game import _others_support

    best: Fraction = Fraction(0)
    witness: tuple | None = None
    uncovered: list[tuple[int, ActionSet, JointAction]] = []
    for i in range(game.num_players):
        combos = _others_support(game, pi, i, cap)
        for alt in game.action_spaces[i]:
            for others, w, _ in combos:
                a = compose_deviation(game, others, i, alt)
                mass = rho.probability(a)
                if mass == 0:
                    uncovered.append((i, alt, a))
                    continue
                ratio = w / mass
                if ratio > best:
                    best = ratio
                    witness = (i, alt, a)
    if uncovered:
        return CoverageReport(
            kind="unilateral",
            coefficient=math.inf,
            feasible=False,
            witness=witness,
            uncovered=tuple(uncovered),
        )
    return CoverageReport(kind="unilateral", coefficient=best, feasible=True, witness=witness)


def facility_density(
    game: CongestionGame, policy: PolicyLike, facility: int, count: int, cap: int = ENUMERATION_CAP
) -> Fraction:
    """Probability that ``facility`` has exactly ``count`` selectors."""
    if not 0 <= facility < game.num_facilities:
        raise InputError(f"facility {facility} out of range")
    if not 0 <= count <= game.num_players:
        raise InputError(f"count {count} out of range 0..{game.num_players}")
    total = Fraction(0)
    for a, w in _support_items(game, policy, cap):
        if facility_loads(game, a)[facility] == count:
            total += w
    return total


def _density_table(
    game: CongestionGame, policy: PolicyLike, cap: int = ENUMERATION_CAP
) -> dict[tuple[int, int], Fraction]:
    table: dict[tuple[int, int], Fraction] = {}
    for a, w in _support_items(game, policy, cap):
        loads = facility_loads(game, a)
        for f in range(game.num_facilities):
            key = (f, loads[f])
            table[key] = table.get(key, Fraction(0)) + w
    return table


def required_cells(
    game: CongestionGame, ne_action: JointAction
) -> set[tuple[int, int]]:
    """Cells any single deviation from ``ne_action`` can occupy.

    For each player and each alternative action, the deviated profile selects
    some facilities; every such ``(facility, resulting count)`` pair with a
    positive count must be explored for facility feedback to certify the
    equilibrium.
    """
    game.validate_joint_action(ne_action)
    cells: set[tuple[int, int]] = set()
    for i in range(game.num_players):
        for alt in game.action_spaces[i]:
            a = ne_action[:i] + (alt,) + ne_action[i + 1:]
            loads = facility_loads(game, a)
            for f in selected_facilities(a):
                cells.add((f, loads[f]))
    return cells


def one_unit_deviation_check(
    game: CongestionGame,
    rho: ExplorationPolicy,
    ne_action: JointAction,
    cap: int = ENUMERATION_CAP,
) -> tuple[bool, tuple[tuple[int, int], ...]]:
    """Check that ``rho`` touches every cell a single deviation can reach.

    ``ne_action`` must be a pure equilibrium. Returns the verdict and the
    sorted uncovered cells.
    """
    if pure_gap(game, ne_action) > NE_TOLERANCE:
        raise InputError(f"{ne_action!r} is not a pure equilibrium")
    rho.validate_for(game)
    density = _density_table(game, rho, cap)
    missing = sorted(
        cell
        for cell in required_cells(game, ne_action)
        if density.get(cell, Fraction(0)) == 0
    )
    return (not missing, tuple(missing))


def facility_unilateral_coefficient(
    game: CongestionGame,
    rho: ExplorationPolicy,
    pi_star: ProductPolicy | JointAction,
    cap: int = ENUMERATION_CAP,
) -> CoverageReport:
    """Cell-wise density-ratio coefficient for facility feedback.

    Maximizes, over players, pure deviations, and occupied cells, the ratio
    of the deviated profile's cell density to the exploration density.
    Infeasible when a reachable cell has zero exploration mass.
    """
    rho.validate_for(game)
    pi = _as_product_policy(game, pi_star)
    from .game import _others_support

    rho_density = _density_table(game, rho, cap)
    best: Fraction = Fraction(0)
    witness: tuple | None = None
    uncovered: set[tuple[int, int]] = set()
    for i in range(game.num_players):
        combos = _others_support(game, pi, i, cap)
        for alt in game.action_spaces[i]:
            cell_mass: dict[tuple[int, int], Fraction] = {}
            for others, w, _ in combos:
                a = compose_deviation(game, others, i, alt)
                loads = facility_loads(game, a)
                for f in selected_facilities(a):
                    key = (f, loads[f])
                    cell_mass[key] = cell_mass.get(key, Fraction(0)) + w
            for cell, mass in cell_mass.items():
                if mass == 0:
                    continue
                denom = rho_density.get(cell, Fraction(0))
                if denom == 0:
                    uncovered.add(cell)
                    continue
                ratio = mass / denom
                if ratio > best:
                    best = ratio
                    witness = (i, alt) + cell
    if uncovered:
        return CoverageReport(
            kind="facility",
            coefficient=math.inf,
            feasible=False,
            witness=witness,
            uncovered=tuple(sorted(uncovered)),
        )
    return CoverageReport(kind="facility", coefficient=best, feasible=True, witness=witness)


def _power_of_two_scale(matrix: np.ndarray) -> float:
    peak = float(np.max(np.abs(matrix)))
    if peak == 0.0:
        return 1.0
    return 2.0 ** math.floor(math.log2(peak))


def _pinv_quadratic(matrix: np.ndarray, u: np.ndarray) -> tuple[float, bool]:
    """``u^T M^+ u`` for PSD ``M`` plus an in-span verdict for ``u``.

    ``M`` is divided by a power of two before the eigendecomposition, which
    is exact in floating point; scaling a dataset by a power of two therefore
    rescales this quadratic form exactly.
    """
    norm_u = float(np.linalg.norm(u))
    if norm_u == 0.0:
        return 0.0, True
    scale = _power_of_two_scale(matrix)
    eigenvalues, vectors = np.linalg.eigh(matrix / scale)
    top = float(eigenvalues[-1])
    if top <= 0.0:
        return math.inf, False
    cut = top * 1e-10
    keep = eigenvalues > cut
    basis = vectors[:, keep]
    weights = basis.T @ u
    # explicit residual vector: the norm-difference identity cancels badly
    residual = float(np.linalg.norm(u - basis @ weights))
    in_span = residual <= RANGE_TOLERANCE * norm_u
    quad = float(np.sum(weights**2 / eigenvalues[keep])) / scale
    return quad, in_span


def _deviation_features(
    game: CongestionGame, fmap: FeatureMap, ne_action: JointAction
) -> list[tuple[int, ActionSet, np.ndarray]]:
    out = []
    for i in range(game.num_players):
        for alt in game.action_spaces[i]:
            a = ne_action[:i] + (alt,) + ne_action[i + 1:]
            u = fmap.feature_vector(a, i)
            out.append((i, alt, u))
    return out


def _covariance_from_actions(
    fmap: FeatureMap, actions: Iterable[JointAction], level: FeedbackLevel
) -> np.ndarray:
    d = fmap.dimension
    V = np.eye(d)
    counts: dict[JointAction, int] = {}
    for a in actions:
        counts[a] = counts.get(a, 0) + 1
    for a, c in counts.items():
        if level is FeedbackLevel.AGENT:
            for i in range(len(a)):
                rows = list(fmap.feature_indices(a, i))
                if rows:
                    V[np.ix_(rows, rows)] += float(c)
        else:
            agg = fmap.aggregate_vector(a)
            V += float(c) * np.outer(agg, agg)
    return V


def covariance_domination_coefficient(
    game: CongestionGame,
    source: Dataset | LinearModel,
    ne_action: JointAction,
    level: FeedbackLevel | None = None,
) -> CoverageReport:
    """Largest ``C`` with ``V >= I + n C u u^T`` for every deviation feature.

    ``source`` supplies the regularized covariance ``V`` and the record count
    ``n``: either a fitted linear model or a dataset (only its actions
    matter). Per deviation the binding value is ``1 / (n u^T (V - I)^+ u)``;
    a deviation whose feature leaves the span of ``V - I`` forces the
    coefficient to zero.
    """
    game.validate_joint_action(ne_action)
    if isinstance(source, LinearModel):
        if level is not None and level is not source.level:
            raise InputError("explicit level disagrees with the fitted model")
        level = source.level
        fmap = source.feature_map
        V = source.cov
        n = source.num_records
    else:
        if level is None:
            level = source.level
        if level is FeedbackLevel.FACILITY:
            level = FeedbackLevel.AGENT  # facility data dominates agent features
        fmap = FeatureMap(source.num_players, source.num_facilities)
        V = _covariance_from_actions(fmap, (a for a, _ in source.records), level)
        n = len(source)
    if n < 1:
        raise InputError("covariance domination needs at least one record")
    kind = "weak-covariance" if level is FeedbackLevel.AGENT else "strong-covariance"
    M = V - np.eye(fmap.dimension)
    best = math.inf
    witness: tuple | None = None
    uncovered: list[tuple[int, ActionSet]] = []
    for i, alt, u in _deviation_features(game, fmap, ne_action):
        if not u.any():
            continue
        quad, in_span = _pinv_quadratic(M, u)
        if not in_span:
            uncovered.append((i, alt))
            continue
        value = math.inf if quad == 0.0 else 1.0 / (n * quad)
        if value < best:
            best = value
            witness = (i, alt)
    if uncovered:
        return CoverageReport(
            kind=kind, coefficient=0.0, feasible=False, witness=witness, uncovered=tuple(uncovered)
        )
    return CoverageReport(kind=kind, coefficient=best, feasible=best > 0.0, witness=witness)


def population_covariance_coefficient(
    game: CongestionGame,
    rho: ExplorationPolicy,
    ne_action: JointAction,
    level: FeedbackLevel,
) -> CoverageReport:
    """Covariance coefficient of the idealized infinite dataset.

    The population covariance is ``n E_rho[sum of feature outer products] +
    I``; the record count cancels from the binding values, so the report is
    size-free. Useful as a feasibility gate before any data is drawn.
    """
    if level is FeedbackLevel.FACILITY:
        level = FeedbackLevel.AGENT
    rho.validate_for(game)
    game.validate_joint_action(ne_action)
    fmap = FeatureMap(game.num_players, game.num_facilities)
    d = fmap.dimension
    E = np.zeros((d, d))
    for a, w in rho.support:
        fw = float(w)
        if level is FeedbackLevel.AGENT:
            for i in range(len(a)):
                rows = list(fmap.feature_indices(a, i))
                if rows:
                    E[np.ix_(rows, rows)] += fw
        else:
            agg = fmap.aggregate_vector(a)
            E += fw * np.outer(agg, agg)
    kind = "weak-covariance" if level is FeedbackLevel.AGENT else "strong-covariance"
    best = math.inf
    witness: tuple | None = None
    uncovered: list[tuple[int, ActionSet]] = []
    for i, alt, u in _deviation_features(game, fmap, ne_action):
        if not u.any():
            continue
        quad, in_span = _pinv_quadratic(E, u)
        if not in_span:
            uncovered.append((i, alt))
            continue
        value = math.inf if quad == 0.0 else 1.0 / quad
        if value < best:
            best = value
            witness = (i, alt)
    if uncovered:
        return CoverageReport(
            kind=kind, coefficient=0.0, feasible=False, witness=witness, uncovered=tuple(uncovered)
        )
    return CoverageReport(kind=kind, coefficient=best, feasible=best > 0.0, witness=witness)


# --- exploration designs realizing the coverage conditions ------------------


def one_unit_deviation_policy(game: CongestionGame, ne_action: JointAction) -> ExplorationPolicy:
    """Uniform exploration over the equilibrium and all single deviations.

    The support is every profile obtained by letting one player switch to any
    alternative action (the equilibrium itself included), deduplicated, so by
    construction every reachable cell is explored.
    """
    game.validate_joint_action(ne_action)
    actions: list[JointAction] = [ne_action]
    for i in range(game.num_players):
        for alt in game.action_spaces[i]:
            actions.append(ne_action[:i] + (alt,) + ne_action[i + 1:])
    return ExplorationPolicy.uniform(actions)


def uniform_configuration_policy(game: CongestionGame, ne_action: JointAction) -> ExplorationPolicy:
    """Three-profile exploration hitting counts ``n*-1, n*, n*+1`` per facility.

    The profiles shift every facility's equilibrium selector count down and
    up by one simultaneously (clipped to the valid range): the down-shift
    drops each facility's lowest-index selector, the up-shift adds its
    lowest-index non-selector. Each explored cell then has density at least
    1/3, so the facility coefficient of the equilibrium is at most 3.
    """
    game.validate_joint_action(ne_action)

    def shift(delta: int) -> JointAction:
        actions = [set(s) for s in ne_action]
        for f in range(game.num_facilities):
            holders = [i for i in range(game.num_players) if f in actions[i]]
            if delta < 0 and holders:
                actions[holders[0]].discard(f)
            elif delta > 0:
                outsiders = [i for i in range(game.num_players) if f not in actions[i]]
                if outsiders:
                    actions[outsiders[0]].add(f)
        return tuple(tuple(sorted(s)) for s in actions)

    candidates = [shift(-1), ne_action, shift(+1)]
    valid = []
    for a in candidates:
        try:
            game.validate_joint_action(a)
        except InputError:
            continue
        valid.append(a)
    return ExplorationPolicy.uniform(valid)
