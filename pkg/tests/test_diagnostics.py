"""Tests for the per-round update telemetry."""

from __future__ import annotations

import numpy as np
import pytest

from fedbandit.attacks import AttackConfig, standard_poison, stealth_poison
from fedbandit.diagnostics import compute_state


def _brute_force(updates):
    """Naive double-loop reference, written independently of the package."""
    n = len(updates)
    norms = [float(np.sqrt(np.sum(u * u))) for u in updates]
    mean_norm_vec = sum(updates) / n
    mean = sum(norms) / n
    variance = sum((x - mean) ** 2 for x in norms) / n
    cos_sum = 0.0
    pairs = 0
    for i in range(n):
        for j in range(i + 1, n):
            pairs += 1
            if norms[i] == 0.0 or norms[j] == 0.0:
                continue
            cos_sum += float(updates[i] @ updates[j]) / (norms[i] * norms[j])
    return variance, cos_sum / pairs, float(np.sqrt(np.sum(mean_norm_vec * mean_norm_vec)))


def test_requires_two_updates():
    with pytest.raises(ValueError):
        compute_state([np.ones(3)])


def test_identical_updates():
    u = np.array([3.0, 4.0])
    state = compute_state([u.copy(), u.copy(), u.copy()])
    assert state.norm_variance == 0.0
    assert state.avg_cosine_similarity == pytest.approx(1.0, abs=1e-12)
    assert state.mean_update_norm == pytest.approx(5.0, abs=1e-12)


def test_orthogonal_equal_norm_pair():
    state = compute_state([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
    assert state.norm_variance == 0.0
    assert state.avg_cosine_similarity == 0.0
    assert state.mean_update_norm == pytest.approx(np.sqrt(0.5), abs=1e-12)


def test_zero_vector_contributes_zero_cosine():
    state = compute_state([np.array([2.0, 0.0]), np.zeros(2)])
    assert state.avg_cosine_similarity == 0.0
    # one norm is 2, the other 0: population variance is 1
    assert state.norm_variance == pytest.approx(1.0, abs=1e-12)
    assert state.mean_update_norm == pytest.approx(1.0, abs=1e-12)


def test_all_zero_updates():
    state = compute_state([np.zeros(4), np.zeros(4), np.zeros(4)])
    assert state.norm_variance == 0.0
    assert state.avg_cosine_similarity == 0.0
    assert state.mean_update_norm == 0.0


def test_matches_brute_force_on_random_batches():
    rng = np.random.default_rng(3)
    for _ in range(80):
        n = int(rng.integers(2, 12))
        d = int(rng.integers(1, 16))
        updates = [rng.standard_normal(d) * rng.uniform(0.1, 5) for _ in range(n)]
        if rng.random() < 0.2:
            updates[0] = np.zeros(d)
        state = compute_state(updates)
        var, cos, mnorm = _brute_force(updates)
        assert state.norm_variance == pytest.approx(var, abs=1e-12, rel=1e-12)
        assert state.avg_cosine_similarity == pytest.approx(cos, abs=1e-12)
        assert state.mean_update_norm == pytest.approx(mnorm, abs=1e-12, rel=1e-12)


def test_permutation_invariance():
    rng = np.random.default_rng(5)
    updates = [rng.standard_normal(6) for _ in range(9)]
    perm = rng.permutation(9)
    a = compute_state(updates)
    b = compute_state([updates[i] for i in perm])
    assert a.as_array() == pytest.approx(b.as_array(), abs=1e-12)


def test_standard_attack_inflates_norm_variance():
    rng = np.random.default_rng(9)
    cfg = AttackConfig(kind="standard", scale_factor=5.0)
    for _ in range(25):
        honest = [rng.standard_normal(10) for _ in range(8)]
        baseline = compute_state(honest).norm_variance
        attacked = list(honest)
        attacked[0] = standard_poison(honest[0], cfg)
        attacked[1] = standard_poison(honest[1], cfg)
        assert compute_state(attacked).norm_variance > baseline


def test_stealth_attack_preserves_norm_variance_when_benign_norms_are_equal():
    # All benign updates share one norm; the stealth update copies it, so the
    # variance stays exactly at the all-benign value (zero) to 1e-9.
    rng = np.random.default_rng(10)
    cfg = AttackConfig(kind="stealth")
    directions = [rng.standard_normal(8) for _ in range(6)]
    benign = [2.5 * d / np.linalg.norm(d) for d in directions]
    benign_var = compute_state(benign).norm_variance
    attacked = list(benign)
    attacked[0] = stealth_poison(benign[0], np.full(5, 2.5), cfg)
    attacked_var = compute_state(attacked).norm_variance
    assert abs(attacked_var - benign_var) <= 1e-9


def test_as_array_order():
    state = compute_state([np.array([1.0, 0.0]), np.array([1.0, 0.0])])
    arr = state.as_array()
    assert arr[0] == state.norm_variance
    assert arr[1] == state.avg_cosine_similarity
    assert arr[2] == state.mean_update_norm
