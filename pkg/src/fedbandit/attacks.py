"""Model-poisoning transforms applied to a malicious client's honest update.

Attackers first train honestly on their own shard, then transform the result:

* ``standard``: scale the honest update by ``scale_factor`` (optionally
  flipping its sign).  Loud but destructive.
* ``stealth``: keep only the (by default sign-flipped) direction of the
  honest update and rescale it to the mean L2 norm of the benign updates,
  so norm-based diagnostics see nothing unusual.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

ATTACK_KINDS = ("none", "standard", "stealth")
NORM_SOURCES = ("oracle", "self")


@dataclass(frozen=True)
class AttackConfig:
    """Attack family and knobs.

    ``sign_flip=None`` resolves to the per-kind default: False for the
    standard scaling attack, True for the stealth attack.  ``norm_source``
    picks where stealth attackers learn the benign norm from: ``oracle``
    reads the true benign norms of the round (simulation shortcut), ``self``
    uses the attacker's own honest update norm.
    """

    kind: str = "none"
    scale_factor: float = 5.0
    sign_flip: bool | None = None
    norm_source: str = "oracle"

    def __post_init__(self) -> None:
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}; expected one of {ATTACK_KINDS}")
        if not self.scale_factor > 0:
            raise ValueError("scale_factor must be positive")
        if self.norm_source not in NORM_SOURCES:
            raise ValueError(
                f"unknown norm_source {self.norm_source!r}; expected one of {NORM_SOURCES}"
            )

    @property
    def resolved_sign_flip(self) -> bool:
        if self.sign_flip is None:
            return self.kind == "stealth"
        return self.sign_flip


def _sign(cfg: AttackConfig) -> float:
    return -1.0 if cfg.resolved_sign_flip else 1.0


def standard_poison(honest: np.ndarray, cfg: AttackConfig) -> np.ndarray:
    """Return the scaled (and possibly sign-flipped) honest update."""
    return _sign(cfg) * cfg.scale_factor * honest


def stealth_poison(
    honest: np.ndarray, benign_norms: np.ndarray, cfg: AttackConfig
) -> np.ndarray:
    """Return a malicious update whose norm matches the mean benign norm.

    The direction is the honest update's direction times the attack sign.
    A zero honest update has no direction; in that case a deterministic
    all-ones unit direction is used instead (and logged).
    """
    norms = np.asarray(benign_norms, dtype=np.float64)
    if norms.ndim != 1 or len(norms) == 0:
        raise ValueError("benign_norms must be a non-empty 1-d array")
    if norms.min() < 0:
        raise ValueError("benign_norms must be non-negative")
    target = norms.mean()
    own = float(np.linalg.norm(honest))
    if own == 0.0:
        logger.warning(
            "stealth attack fallback: zero honest update, using all-ones direction"
        )
        direction = np.ones_like(honest) / np.sqrt(honest.shape[0])
    else:
        direction = _sign(cfg) * honest / own
    return direction * target
