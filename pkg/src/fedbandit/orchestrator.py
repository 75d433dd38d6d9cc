"""The federated round loop.

Each round: broadcast the global model, let every client train locally on its
own shard, apply the configured poisoning transform to the malicious clients'
updates, compute the telemetry state, pick an aggregation rule (fixed rule or
LinUCB over the scaled state), apply the aggregated delta to the global
model, and score the step on the server's proxy validation set.

The global update is additive: ``W_{t+1} = W_t + aggregate(deltas)``; there
is no separate server learning rate.  Malicious clients are the first
``num_malicious`` client ids, fixed for the whole run.  Clients are
stateless: momentum buffers are rebuilt inside each local_train call.

Reward uses proxy-set accuracy; the disjoint test split is evaluated and
logged every round for reporting but never influences decisions.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import seeds
from .aggregation import KrumConfig, RuleId, aggregate
from .attacks import standard_poison, stealth_poison
from .bandit import LinUcbAgent, compute_reward
from .config import ScenarioConfig, config_hash
from .data import Dataset, PartitionConfig, dirichlet_partition, generate_synthetic, holdout_split, subset
from .diagnostics import StateVector, compute_state
from .localtrain import DivergenceError, ModelParams, apply_update, evaluate, init_model, local_train


@dataclass
class RoundLog:
    """Everything recorded about one round; maps 1:1 onto a rounds.csv row.

    ``wall_time_ms`` is reserved and always 0.0: measured timings would break
    the byte-identical log contract, so they are reported in the run manifest
    instead.
    """

    round_index: int
    chosen_rule: RuleId
    state: StateVector
    scaled_state: np.ndarray
    val_accuracy: float
    test_accuracy: float
    reward: float
    ucb_scores: np.ndarray | None
    wall_time_ms: float = 0.0


class RunningMinMax:
    """Online per-component min-max scaler into [0, 1].

    The very first observation is returned unscaled (identity); afterwards
    each component is scaled by the running range including the current
    observation, clamped to [0, 1].  A component that has never varied maps
    to 0.5.
    """

    def __init__(self) -> None:
        self.lows: np.ndarray | None = None
        self.highs: np.ndarray | None = None

    def observe(self, x: np.ndarray) -> np.ndarray:
        if self.lows is None:
            self.lows = x.copy()
            self.highs = x.copy()
            return x.copy()
        self.lows = np.minimum(self.lows, x)
        self.highs = np.maximum(self.highs, x)
        span = self.highs - self.lows
        scaled = np.where(span > 0, (x - self.lows) / np.where(span > 0, span, 1.0), 0.5)
        return np.clip(scaled, 0.0, 1.0)


@dataclass
class RunState:
    """Mutable state of a scenario run between rounds."""

    cfg: ScenarioConfig
    model: ModelParams
    shards: list[Dataset]
    val_set: Dataset
    test_set: Dataset
    malicious: frozenset[int]
    agent: LinUcbAgent | None
    scaler: RunningMinMax = field(default_factory=RunningMinMax)
    prev_val_accuracy: float = 0.0


def prepare_run(cfg: ScenarioConfig) -> RunState:
    """Build datasets, shards, model, and (for adaptive runs) the bandit."""
    ds_cfg = cfg.dataset
    full = generate_synthetic(
        ds_cfg.num_classes,
        ds_cfg.num_features,
        ds_cfg.samples_per_class,
        ds_cfg.class_separation,
        seeds.stream_seed(cfg.seed, seeds.DATA),
    )
    pool, test_set = holdout_split(
        full, cfg.holdout.test_fraction, seeds.stream_seed(cfg.seed, seeds.TEST_SPLIT)
    )
    train_pool, val_set = holdout_split(
        pool, cfg.holdout.val_fraction, seeds.stream_seed(cfg.seed, seeds.VAL_SPLIT)
    )
    partition = dirichlet_partition(
        train_pool,
        PartitionConfig(
            beta=cfg.partition_beta,
            num_clients=cfg.num_clients,
            seed=seeds.stream_seed(cfg.seed, seeds.PARTITION),
        ),
    )
    shards = [subset(train_pool, idx) for idx in partition.assignments]
    model = init_model(
        ds_cfg.num_features,
        ds_cfg.num_classes,
        cfg.model.hidden,
        seeds.stream_seed(cfg.seed, seeds.MODEL_INIT),
    )
    agent = LinUcbAgent(cfg.bandit) if cfg.strategy.mode == "adaptive" else None
    state = RunState(
        cfg=cfg,
        model=model,
        shards=shards,
        val_set=val_set,
        test_set=test_set,
        malicious=frozenset(range(cfg.num_malicious)),
        agent=agent,
    )
    state.prev_val_accuracy = evaluate(model, val_set)
    return state


def _client_updates(
    state: RunState, round_index: int, executor: ThreadPoolExecutor | None
) -> list[np.ndarray]:
    """Honest local training for every client, then the poisoning transform."""
    cfg = state.cfg
    model = state.model

    def train_one(cid: int) -> np.ndarray:
        return local_train(
            model,
            state.shards[cid],
            cfg.train,
            seeds.stream_seed(cfg.seed, seeds.CLIENT, cid, round_index),
        )

    ids = range(cfg.num_clients)
    if executor is None:
        honest = [train_one(cid) for cid in ids]
    else:
        honest = list(executor.map(train_one, ids))

    updates = list(honest)
    if cfg.attack.kind == "standard":
        for cid in sorted(state.malicious):
            updates[cid] = standard_poison(honest[cid], cfg.attack)
    elif cfg.attack.kind == "stealth":
        benign_norms = np.array(
            [
                np.linalg.norm(honest[cid])
                for cid in ids
                if cid not in state.malicious
            ]
        )
        for cid in sorted(state.malicious):
            if cfg.attack.norm_source == "oracle" and len(benign_norms) > 0:
                source = benign_norms
            else:
                source = np.array([np.linalg.norm(honest[cid])])
            updates[cid] = stealth_poison(honest[cid], source, cfg.attack)
    return updates


def run_round(
    state: RunState, round_index: int, executor: ThreadPoolExecutor | None = None
) -> RoundLog:
    """Advance the simulation by one round and log what happened."""
    cfg = state.cfg
    updates = _client_updates(state, round_index, executor)
    raw_state = compute_state(updates)
    scaled = state.scaler.observe(raw_state.as_array())

    if state.agent is not None:
        chosen, scores = state.agent.select(scaled)
        rule = RuleId(chosen)
        ucb = scores
    else:
        rule = state.cfg.strategy.rule
        assert rule is not None  # guaranteed by config validation
        ucb = None

    delta = aggregate(rule, updates, KrumConfig(cfg.resolved_krum_f))
    new_model = apply_update(state.model, delta)
    if not np.all(np.isfinite(new_model.flat)):
        raise DivergenceError(
            f"global model diverged at round {round_index} under rule {rule.name}"
        )
    state.model = new_model

    val_acc = evaluate(new_model, state.val_set)
    test_acc = evaluate(new_model, state.test_set)
    reward = compute_reward(val_acc, state.prev_val_accuracy, rule, cfg.costs, cfg.reward)
    if state.agent is not None:
        state.agent.update(int(rule), scaled, reward)
    state.prev_val_accuracy = val_acc

    return RoundLog(
        round_index=round_index,
        chosen_rule=rule,
        state=raw_state,
        scaled_state=scaled,
        val_accuracy=val_acc,
        test_accuracy=test_acc,
        reward=reward,
        ucb_scores=ucb,
    )


def run_scenario(
    cfg: ScenarioConfig, threads: int = 1
) -> tuple[list[RoundLog], dict]:
    """Run all rounds of a scenario and return (logs, summary).

    ``threads`` only sets the worker pool width for client training; results
    are byte-identical for any thread count because every client draws from
    its own derived seed and updates are joined in client order.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    state = prepare_run(cfg)
    started = time.perf_counter()
    logs: list[RoundLog] = []
    if threads == 1:
        for t in range(cfg.rounds):
            logs.append(run_round(state, t, None))
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            for t in range(cfg.rounds):
                logs.append(run_round(state, t, executor))
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    summary = summarize(cfg, logs)
    summary["_timing_ms"] = elapsed_ms  # stripped before summary.json is written
    return logs, summary


def selection_percentages(logs: list[RoundLog]) -> dict[str, float]:
    total = len(logs)
    counts = {rule: 0 for rule in RuleId}
    for log in logs:
        counts[log.chosen_rule] += 1
    return {
        "fedavg": 100.0 * counts[RuleId.FEDAVG] / total,
        "median": 100.0 * counts[RuleId.MEDIAN] / total,
        "krum": 100.0 * counts[RuleId.KRUM] / total,
    }


def summarize(cfg: ScenarioConfig, logs: list[RoundLog]) -> dict:
    """Final-round statistics in the shape written to summary.json."""
    if not logs:
        raise ValueError("cannot summarise an empty run")
    test_accs = [log.test_accuracy for log in logs]
    last = test_accs[-10:]
    mean_cost = float(
        np.mean([cfg.costs.cost(log.chosen_rule) for log in logs])
    )
    return {
        "schema_version": 1,
        "label": cfg.label,
        "config_hash": config_hash(cfg),
        "rounds": len(logs),
        "final_accuracy": test_accs[-1],
        "final_val_accuracy": logs[-1].val_accuracy,
        "std_last10": float(np.std(last)),
        "selection_pct": selection_percentages(logs),
        "mean_round_cost": mean_cost,
    }
