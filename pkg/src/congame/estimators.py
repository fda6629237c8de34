"""Reward estimation from offline data, one estimator per feedback level.

Facility feedback admits direct per-cell empirical means over the cells
``(facility, selector count)``. Agent and game feedback are handled through a
linear reduction: a player's reward is linear in a 0/1 feature vector over
those cells, so ridge regression plus an elliptical confidence bonus applies.
Every estimator exposes ``reward_and_bonus(a, i) -> (estimate, bonus)`` and
the bonus is a width: with probability ``1 - delta`` the true mean reward of
every ``(player, joint action)`` pair lies within it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Protocol

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .data import Dataset, FeedbackLevel
from .errors import InputError
from .game import CongestionGame, JointAction

__all__ = [
    "FeatureMap",
    "FacilityEstimate",
    "LinearModel",
    "RewardEstimator",
    "default_iota",
    "fit_facility",
    "fit_agent_ridge",
    "fit_game_ridge",
    "facility_reward_and_bonus",
    "agent_reward_and_bonus",
    "game_reward_and_bonus",
]


class RewardEstimator(Protocol):
    """Anything the surrogate solver can query for estimates and widths."""

    def reward_and_bonus(self, a: JointAction, player: int) -> tuple[float, float]: ...


def default_iota(num_players: int, num_facilities: int, delta: float) -> float:
    """Log confidence term ``2 log(4 (m+1) F / delta)`` shared by all levels."""
    if not 0.0 < delta < 1.0:
        raise InputError("delta must be in (0, 1)")
    return 2.0 * math.log(4.0 * (num_players + 1) * num_facilities / delta)


@dataclass(frozen=True)
class FeatureMap:
    """Bijection between cells ``(facility, count)`` and ``0..mF-1``.

    Cell ``(f, n)`` with ``n`` in ``1..m`` maps to ``m*f + (n-1)``. A player's
    feature vector for a joint action has a 1 at the cell of every facility
    they selected, so their expected reward is the inner product with the
    table of per-cell means.
    """

    num_players: int
    num_facilities: int

    def __post_init__(self) -> None:
        if self.num_players < 1 or self.num_facilities < 1:
            raise InputError("feature map needs positive player and facility counts")

    @property
    def dimension(self) -> int:
        return self.num_players * self.num_facilities

    def index(self, facility: int, count: int) -> int:
        """Flat index of cell ``(facility, count)``."""
        if not 0 <= facility < self.num_facilities:
            raise InputError(f"facility {facility} out of range")
        if not 1 <= count <= self.num_players:
            raise InputError(f"count {count} out of range 1..{self.num_players}")
        return self.num_players * facility + (count - 1)

    def cell(self, index: int) -> tuple[int, int]:
        """Inverse of ``index``."""
        if not 0 <= index < self.dimension:
            raise InputError(f"feature index {index} out of range")
        return divmod(index, self.num_players)[0], index % self.num_players + 1

    def feature_indices(self, a: JointAction, player: int) -> tuple[int, ...]:
        """Active cells of ``player`` under ``a``, in facility order."""
        loads: dict[int, int] = {}
        for action in a:
            for f in action:
                loads[f] = loads.get(f, 0) + 1
        return tuple(self.index(f, loads[f]) for f in a[player])

    def feature_vector(self, a: JointAction, player: int) -> np.ndarray:
        """0/1 vector with ones at ``feature_indices``."""
        x = np.zeros(self.dimension)
        for k in self.feature_indices(a, player):
            x[k] = 1.0
        return x

    def aggregate_vector(self, a: JointAction) -> np.ndarray:
        """Sum of all players' feature vectors; entry at ``(f, n)`` equals
        ``n`` when facility ``f`` has ``n`` selectors."""
        x = np.zeros(self.dimension)
        for i in range(len(a)):
            for k in self.feature_indices(a, i):
                x[k] += 1.0
        return x


@dataclass(frozen=True, eq=False)
class FacilityEstimate:
    """Per-cell counts and empirical means fitted from facility feedback.

    ``counts[f, n]`` holds the number of records in which facility ``f`` had
    exactly ``n`` selectors, for ``n`` in ``0..m``; every record contributes
    to exactly one cell per facility, so each facility's counts sum to the
    record count. ``means[f, n]`` is the empirical mean for ``n >= 1`` (zero
    where unobserved). The bonus for ``(a, i)`` sums per selected facility
    the Hoeffding width ``sqrt(iota / max(count, 1))``.
    """

    counts: np.ndarray
    means: np.ndarray
    iota: float
    delta: float
    num_records: int
    num_players: int
    num_facilities: int

    def reward_and_bonus(self, a: JointAction, player: int) -> tuple[float, float]:
        loads: dict[int, int] = {}
        for action in a:
            for f in action:
                loads[f] = loads.get(f, 0) + 1
        estimate = 0.0
        bonus = 0.0
        for f in a[player]:
            n = loads[f]
            estimate += float(self.means[f, n])
            bonus += math.sqrt(self.iota / max(int(self.counts[f, n]), 1))
        return estimate, bonus


def fit_facility(dataset: Dataset, delta: float, iota: float | None = None) -> FacilityEstimate:
    """Empirical cell means from a facility-level dataset."""
    if dataset.level is not FeedbackLevel.FACILITY:
        raise InputError("facility estimation needs facility-level feedback")
    m, F = dataset.num_players, dataset.num_facilities
    if iota is None:
        iota = default_iota(m, F, delta)
    counts = np.zeros((F, m + 1), dtype=np.int64)
    sums = np.zeros((F, m + 1))
    for a, fb in dataset.records:
        loads = [0] * F
        for action in a:
            for f in action:
                loads[f] += 1
        for f in range(F):
            counts[f, loads[f]] += 1
        for f, r in fb:  # type: ignore[union-attr]
            sums[f, loads[f]] += r
    means = np.zeros((F, m + 1))
    observed = counts > 0
    observed[:, 0] = False  # an empty facility yields no reward sample
    means[observed] = sums[observed] / counts[observed]
    return FacilityEstimate(
        counts=counts,
        means=means,
        iota=iota,
        delta=delta,
        num_records=len(dataset),
        num_players=m,
        num_facilities=F,
    )


def facility_reward_and_bonus(
    estimate: FacilityEstimate, a: JointAction, player: int
) -> tuple[float, float]:
    """Estimate and width of ``player``'s reward under ``a``."""
    return estimate.reward_and_bonus(a, player)


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Ridge regression state for the agent or game feedback level.

    ``cov`` is the regularized design matrix ``V`` (identity plus summed
    feature outer products), ``theta`` the ridge solution, and ``beta`` the
    squared confidence radius. Agent-level bonuses are per player; the
    game level only observes the aggregate, so its bonus takes the largest
    elliptical norm over players, giving every player the same width.
    """

    level: FeedbackLevel
    feature_map: FeatureMap
    theta: np.ndarray
    cov: np.ndarray
    beta: float
    iota: float
    delta: float
    num_records: int

    @cached_property
    def _cho(self):
        return cho_factor(self.cov, lower=True)

    def _quad(self, x: np.ndarray) -> float:
        """Elliptical norm squared ``x^T V^{-1} x`` via the cached factor."""
        return float(x @ cho_solve(self._cho, x))

    def predict(self, a: JointAction, player: int) -> float:
        """Point estimate ``<A_i(a), theta>``."""
        idx = list(self.feature_map.feature_indices(a, player))
        return float(self.theta[idx].sum())

    def reward_and_bonus(self, a: JointAction, player: int) -> tuple[float, float]:
        estimate = self.predict(a, player)
        sqrt_beta = math.sqrt(self.beta)
        if self.level is FeedbackLevel.AGENT:
            x = self.feature_map.feature_vector(a, player)
            return estimate, math.sqrt(self._quad(x)) * sqrt_beta
        width = 0.0
        for j in range(len(a)):
            xj = self.feature_map.feature_vector(a, j)
            width = max(width, math.sqrt(self._quad(xj)))
        return estimate, width * sqrt_beta


def _grouped_rows(dataset: Dataset, fmap: FeatureMap):
    """Group records by joint action; returns per-action counts, per-player
    index tuples, and per-player feedback sums (first-seen order)."""
    groups: dict[JointAction, list] = {}
    for a, fb in dataset.records:
        entry = groups.get(a)
        if entry is None:
            idx = tuple(fmap.feature_indices(a, i) for i in range(dataset.num_players))
            entry = [0, idx, [0.0] * dataset.num_players]
            groups[a] = entry
        entry[0] += 1
        if dataset.level is FeedbackLevel.AGENT:
            for i, r in enumerate(fb):  # type: ignore[arg-type]
                entry[2][i] += r
        else:
            entry[2][0] += fb  # type: ignore[operator]
    return groups


def fit_agent_ridge(
    dataset: Dataset,
    fmap: FeatureMap | None = None,
    delta: float = 0.1,
    iota: float | None = None,
) -> LinearModel:
    """Ridge fit of per-player totals against per-player features.

    ``V = I + sum_k sum_i A_i A_i^T`` and ``theta = V^{-1} sum_k sum_i A_i
    r_i``. The confidence radius is ``sqrt(beta) = 2 sqrt(d) +
    sqrt(d log(1 + m n F / d) + iota)`` with ``d = mF``.
    """
    if dataset.level is not FeedbackLevel.AGENT:
        raise InputError("agent ridge estimation needs agent-level feedback")
    m, F = dataset.num_players, dataset.num_facilities
    if fmap is None:
        fmap = FeatureMap(m, F)
    if (fmap.num_players, fmap.num_facilities) != (m, F):
        raise InputError("feature map does not match the dataset's dimensions")
    if iota is None:
        iota = default_iota(m, F, delta)
    d = fmap.dimension
    V = np.eye(d)
    y = np.zeros(d)
    for count, idx, sums in _grouped_rows(dataset, fmap).values():
        for i in range(m):
            rows = list(idx[i])
            if not rows:
                continue
            V[np.ix_(rows, rows)] += float(count)
            y[rows] += sums[i]
    n = len(dataset)
    sqrt_beta = 2.0 * math.sqrt(d) + math.sqrt(d * math.log(1.0 + m * n * F / d) + iota)
    theta = cho_solve(cho_factor(V, lower=True), y)
    return LinearModel(
        level=FeedbackLevel.AGENT,
        feature_map=fmap,
        theta=theta,
        cov=V,
        beta=sqrt_beta**2,
        iota=iota,
        delta=delta,
        num_records=n,
    )


def fit_game_ridge(
    dataset: Dataset,
    fmap: FeatureMap | None = None,
    delta: float = 0.1,
    iota: float | None = None,
) -> LinearModel:
    """Ridge fit of grand totals against aggregate features.

    ``V = I + sum_k A A^T`` with ``A(a) = sum_i A_i(a)`` and ``theta =
    V^{-1} sum_k A r``. The confidence radius is ``sqrt(beta) = 2 sqrt(d) +
    sqrt(d log(1 + n m) + iota)``.
    """
    if dataset.level is not FeedbackLevel.GAME:
        raise InputError("game ridge estimation needs game-level feedback")
    m, F = dataset.num_players, dataset.num_facilities
    if fmap is None:
        fmap = FeatureMap(m, F)
    if (fmap.num_players, fmap.num_facilities) != (m, F):
        raise InputError("feature map does not match the dataset's dimensions")
    if iota is None:
        iota = default_iota(m, F, delta)
    d = fmap.dimension
    V = np.eye(d)
    y = np.zeros(d)
    for a, entry in _grouped_rows(dataset, fmap).items():
        count, _, sums = entry
        agg = fmap.aggregate_vector(a)
        V += float(count) * np.outer(agg, agg)
        y += sums[0] * agg
    n = len(dataset)
    sqrt_beta = 2.0 * math.sqrt(d) + math.sqrt(d * math.log(1.0 + n * m) + iota)
    theta = cho_solve(cho_factor(V, lower=True), y)
    return LinearModel(
        level=FeedbackLevel.GAME,
        feature_map=fmap,
        theta=theta,
        cov=V,
        beta=sqrt_beta**2,
        iota=iota,
        delta=delta,
        num_records=n,
    )


def agent_reward_and_bonus(model: LinearModel, a: JointAction, player: int) -> tuple[float, float]:
    """Estimate and per-player elliptical width from an agent-level model."""
    if model.level is not FeedbackLevel.AGENT:
        raise InputError("model was not fitted on agent-level feedback")
    return model.reward_and_bonus(a, player)


def game_reward_and_bonus(model: LinearModel, a: JointAction, player: int) -> tuple[float, float]:
    """Estimate and the shared worst-player width from a game-level model."""
    if model.level is not FeedbackLevel.GAME:
        raise InputError("model was not fitted on game-level feedback")
    return model.reward_and_bonus(a, player)


def fit(
    dataset: Dataset, delta: float = 0.1, iota: float | None = None
) -> FacilityEstimate | LinearModel:
    """Fit the estimator matching the dataset's feedback level."""
    if dataset.level is FeedbackLevel.FACILITY:
        return fit_facility(dataset, delta, iota)
    if dataset.level is FeedbackLevel.AGENT:
        return fit_agent_ridge(dataset, delta=delta, iota=iota)
    return fit_game_ridge(dataset, delta=delta, iota=iota)
