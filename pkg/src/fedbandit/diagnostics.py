"""Lightweight per-round telemetry computed from the client updates.

The three summary statistics form the context the strategy layer sees:

* ``norm_variance`` — population variance of the update L2 norms; loud
  magnitude attacks inflate it.
* ``avg_cosine_similarity`` — mean pairwise cosine similarity over all
  N*(N-1)/2 unordered pairs; disagreement about direction lowers it.
  Zero-length updates contribute similarity 0 with every partner.
* ``mean_update_norm`` — L2 norm of the mean update (the FedAvg vector).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StateVector:
    norm_variance: float
    avg_cosine_similarity: float
    mean_update_norm: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.norm_variance, self.avg_cosine_similarity, self.mean_update_norm]
        )


def compute_state(updates: list[np.ndarray]) -> StateVector:
    """Summarise one round of updates; requires at least two clients."""
    n = len(updates)
    if n < 2:
        raise ValueError("need at least two updates to compute diagnostics")
    mat = np.stack(updates)
    norms = np.linalg.norm(mat, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = mat / safe[:, None]
    unit[norms == 0] = 0.0
    gram = unit @ unit.T
    pair_sum = (gram.sum() - np.trace(gram)) / 2.0
    return StateVector(
        norm_variance=float(norms.var()),
        avg_cosine_similarity=float(pair_sum / (n * (n - 1) / 2)),
        mean_update_norm=float(np.linalg.norm(mat.mean(axis=0))),
    )
