"""fedbandit: a deterministic federated-learning simulator whose server picks
its aggregation rule each round with a LinUCB contextual bandit.

The public surface mirrors the module layout: data synthesis and partitioning
(:mod:`fedbandit.data`), local models and training (:mod:`fedbandit.localtrain`),
poisoning attacks (:mod:`fedbandit.attacks`), robust aggregation rules
(:mod:`fedbandit.aggregation`), update telemetry (:mod:`fedbandit.diagnostics`),
the bandit (:mod:`fedbandit.bandit`), the round loop
(:mod:`fedbandit.orchestrator`), and configs (:mod:`fedbandit.config`).
"""

__version__ = "0.1.0"

from .aggregation import (
    KrumConfig,
    RuleId,
    aggregate,
    coordinate_wise_median,
    fed_avg,
    krum,
)
from .attacks import AttackConfig, standard_poison, stealth_poison
from .bandit import (
    ArmState,
    BanditConfig,
    CostTable,
    LinUcbAgent,
    RewardParams,
    compute_reward,
    select_arm,
    ucb_scores,
    update_arm,
)
from .config import (
    ConfigError,
    ScenarioConfig,
    config_from_dict,
    config_hash,
    config_to_dict,
    load_config,
)
from .data import (
    Dataset,
    Partition,
    PartitionConfig,
    dirichlet_partition,
    generate_synthetic,
    holdout_split,
    subset,
)
from .diagnostics import StateVector, compute_state
from .localtrain import (
    DivergenceError,
    ModelParams,
    TrainConfig,
    apply_update,
    evaluate,
    init_model,
    local_train,
    loss,
    loss_and_grad,
    model_dim,
)
from .orchestrator import RoundLog, RunState, prepare_run, run_round, run_scenario

__all__ = [
    "__version__",
    "AttackConfig",
    "ArmState",
    "BanditConfig",
    "ConfigError",
    "CostTable",
    "Dataset",
    "DivergenceError",
    "KrumConfig",
    "LinUcbAgent",
    "ModelParams",
    "Partition",
    "PartitionConfig",
    "RewardParams",
    "RoundLog",
    "RuleId",
    "RunState",
    "ScenarioConfig",
    "StateVector",
    "TrainConfig",
    "aggregate",
    "apply_update",
    "compute_reward",
    "compute_state",
    "config_from_dict",
    "config_hash",
    "config_to_dict",
    "coordinate_wise_median",
    "dirichlet_partition",
    "evaluate",
    "fed_avg",
    "generate_synthetic",
    "holdout_split",
    "init_model",
    "krum",
    "load_config",
    "local_train",
    "loss",
    "loss_and_grad",
    "model_dim",
    "prepare_run",
    "run_round",
    "run_scenario",
    "select_arm",
    "standard_poison",
    "stealth_poison",
    "subset",
    "ucb_scores",
    "update_arm",
]
