"""Robust aggregation rules: the arsenal the strategy layer chooses from.

All rules consume a list of equal-length update vectors and produce one
aggregated update.  ``RuleId`` integer values are stable and appear as-is in
CSV logs and configs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class RuleId(IntEnum):
    FEDAVG = 0
    MEDIAN = 1
    KRUM = 2


RULE_NAMES = {RuleId.FEDAVG: "fedavg", RuleId.MEDIAN: "median", RuleId.KRUM: "krum"}
RULES_BY_NAME = {name: rule for rule, name in RULE_NAMES.items()}


@dataclass(frozen=True)
class KrumConfig:
    """Krum's robustness assumption: the number f of tolerated Byzantine clients."""

    f: int

    def __post_init__(self) -> None:
        if self.f < 0:
            raise ValueError("f must be >= 0")


def _stack(updates: list[np.ndarray]) -> np.ndarray:
    if len(updates) == 0:
        raise ValueError("need at least one update")
    first = updates[0].shape
    for i, u in enumerate(updates):
        if u.ndim != 1 or u.shape != first:
            raise ValueError(f"update {i} has shape {u.shape}, expected {first}")
    return np.stack(updates)


def fed_avg(updates: list[np.ndarray]) -> np.ndarray:
    """Element-wise mean of the updates."""
    return _stack(updates).mean(axis=0)


def coordinate_wise_median(updates: list[np.ndarray]) -> np.ndarray:
    """Element-wise median; for an even count, the mean of the two middle values."""
    return np.median(_stack(updates), axis=0)


def krum(updates: list[np.ndarray], cfg: KrumConfig) -> tuple[np.ndarray, int]:
    """Select the single update closest to its k = N - f - 2 nearest neighbours.

    Each update is scored by the sum of its k smallest squared L2 distances
    to the other updates; the lowest score wins, ties to the lowest client
    index.  Requires N >= f + 3 so that k >= 1.  Returns (selected update,
    selected index).
    """
    mat = _stack(updates)
    n = mat.shape[0]
    k = n - cfg.f - 2
    if k < 1:
        raise ValueError(
            f"krum needs N >= f + 3 (got N={n}, f={cfg.f})"
        )
    sq = (mat * mat).sum(axis=1)
    dists = sq[:, None] + sq[None, :] - 2.0 * (mat @ mat.T)
    np.maximum(dists, 0.0, out=dists)
    scores = np.empty(n)
    for i in range(n):
        to_others = np.delete(dists[i], i)
        to_others.sort()
        scores[i] = to_others[:k].sum()
    chosen = int(np.argmin(scores))
    return mat[chosen].copy(), chosen


def aggregate(
    rule: RuleId, updates: list[np.ndarray], krum_cfg: KrumConfig | None = None
) -> np.ndarray:
    """Dispatch to the chosen rule and return the aggregated update."""
    if rule == RuleId.FEDAVG:
        return fed_avg(updates)
    if rule == RuleId.MEDIAN:
        return coordinate_wise_median(updates)
    if rule == RuleId.KRUM:
        if krum_cfg is None:
            raise ValueError("krum requires a KrumConfig")
        vec, _ = krum(updates, krum_cfg)
        return vec
    raise ValueError(f"unknown rule {rule!r}")
