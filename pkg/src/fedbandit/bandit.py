"""LinUCB contextual bandit over the aggregation rules.

Disjoint linear arms: each arm a keeps a ridge design matrix A_a (initialised
to the identity) and response vector b_a.  Given a context x the arm's score
is ``x . theta_a + alpha * sqrt(x . A_a^-1 x)`` with ``theta_a`` the ridge
estimate ``A_a^-1 b_a``; the highest score is played.  Only the played arm is
updated: ``A += x x^T``, ``b += r x``.  Solves go through
``numpy.linalg.solve`` rather than an explicit inverse.

Rewards trade off accuracy gain against a per-rule heuristic cost:
``r = (acc_t - acc_prev) - lambda_cost * cost(rule)`` with accuracies in
[0, 1] units and rewards left unclipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .aggregation import RuleId


class BanditNumericsError(RuntimeError):
    """Raised when an arm's design matrix becomes numerically singular."""


@dataclass
class ArmState:
    """Per-arm ridge statistics: A = I + sum(x x^T), b = sum(r x)."""

    A: np.ndarray
    b: np.ndarray

    @classmethod
    def fresh(cls, dim: int) -> "ArmState":
        return cls(A=np.eye(dim), b=np.zeros(dim))

    def theta(self) -> np.ndarray:
        try:
            return np.linalg.solve(self.A, self.b)
        except np.linalg.LinAlgError as exc:
            raise BanditNumericsError("arm design matrix is singular") from exc


@dataclass(frozen=True)
class BanditConfig:
    alpha: float = 1.5
    num_arms: int = 3
    context_dim: int = 3

    def __post_init__(self) -> None:
        if not self.alpha >= 0:
            raise ValueError("alpha must be >= 0")
        if self.num_arms < 1:
            raise ValueError("num_arms must be >= 1")
        if self.context_dim < 1:
            raise ValueError("context_dim must be >= 1")


@dataclass(frozen=True)
class CostTable:
    """Normalised heuristic cost of applying each rule."""

    fedavg: float = 0.1
    median: float = 0.4
    krum: float = 0.8

    def __post_init__(self) -> None:
        for name in ("fedavg", "median", "krum"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ValueError(f"cost {name} must lie in [0, 1]")

    def cost(self, rule: RuleId) -> float:
        return (self.fedavg, self.median, self.krum)[int(rule)]


@dataclass(frozen=True)
class RewardParams:
    lambda_cost: float = 0.5

    def __post_init__(self) -> None:
        if not self.lambda_cost >= 0:
            raise ValueError("lambda_cost must be >= 0")


def compute_reward(
    acc_t: float,
    acc_prev: float,
    rule: RuleId,
    costs: CostTable,
    params: RewardParams,
) -> float:
    """Accuracy delta minus the weighted rule cost; unclipped."""
    return (acc_t - acc_prev) - params.lambda_cost * costs.cost(rule)


def ucb_scores(arms: list[ArmState], x: np.ndarray, alpha: float) -> np.ndarray:
    """Upper confidence bound of each arm at context x."""
    scores = np.empty(len(arms))
    for i, arm in enumerate(arms):
        theta = arm.theta()
        try:
            widened = np.linalg.solve(arm.A, x)
        except np.linalg.LinAlgError as exc:
            raise BanditNumericsError("arm design matrix is singular") from exc
        scores[i] = x @ theta + alpha * np.sqrt(max(x @ widened, 0.0))
    return scores


def select_arm(
    arms: list[ArmState], x: np.ndarray, cfg: BanditConfig, round_index: int = 0
) -> tuple[int, np.ndarray]:
    """Pick the highest-scoring arm; exact ties rotate with the round index.

    On the first round every fresh arm ties, so arm 0 is played; subsequent
    ties walk through the tied set round-robin instead of starving the
    higher-indexed arms.
    """
    scores = ucb_scores(arms, x, cfg.alpha)
    tied = np.flatnonzero(scores == scores.max())
    chosen = int(tied[round_index % len(tied)])
    return chosen, scores


def update_arm(arm: ArmState, x: np.ndarray, reward: float) -> ArmState:
    """Rank-one ridge update with the observed (context, reward) pair."""
    return ArmState(A=arm.A + np.outer(x, x), b=arm.b + reward * x)


@dataclass
class LinUcbAgent:
    """Stateful wrapper tracking the arms and the round counter."""

    cfg: BanditConfig = field(default_factory=BanditConfig)

    def __post_init__(self) -> None:
        self.arms = [ArmState.fresh(self.cfg.context_dim) for _ in range(self.cfg.num_arms)]
        self.rounds_played = 0

    def select(self, x: np.ndarray) -> tuple[int, np.ndarray]:
        chosen, scores = select_arm(self.arms, x, self.cfg, self.rounds_played)
        self.rounds_played += 1
        return chosen, scores

    def update(self, arm_index: int, x: np.ndarray, reward: float) -> None:
        self.arms[arm_index] = update_arm(self.arms[arm_index], x, reward)
