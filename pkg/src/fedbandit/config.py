"""Scenario configuration: parsing, validation, serialisation, hashing.

Configs are plain JSON with a ``schema_version`` field.  Every hyperparameter
is a named key with a default, so a config file only needs to spell out what
it changes.  ``load_config`` / ``config_from_dict`` validate eagerly and
report every problem with its field path; ``config_to_dict`` round-trips
(parse -> serialise -> parse is the identity on the resolved config).
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .aggregation import RULES_BY_NAME, RULE_NAMES, RuleId
from .attacks import ATTACK_KINDS, NORM_SOURCES, AttackConfig
from .bandit import BanditConfig, CostTable, RewardParams
from .localtrain import TrainConfig

SCHEMA_VERSION = 1

STRATEGY_MODES = ("static", "adaptive")

_LABEL_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


class ConfigError(ValueError):
    """Carries the full list of field-precise validation messages."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


@dataclass(frozen=True)
class DatasetParams:
    num_classes: int = 10
    num_features: int = 16
    samples_per_class: int = 100
    class_separation: float = 2.0


@dataclass(frozen=True)
class HoldoutParams:
    # val_fraction carves the server's proxy validation set out of the
    # training pool; test_fraction carves the reporting test set first.
    val_fraction: float = 0.1
    test_fraction: float = 0.2


@dataclass(frozen=True)
class ModelArch:
    hidden: int | None = None


@dataclass(frozen=True)
class StrategyParams:
    mode: str = "adaptive"
    rule: RuleId | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    label: str
    seed: int = 0
    rounds: int = 50
    num_clients: int = 20
    num_malicious: int = 5
    krum_f: int | None = None  # None: assume the true number of malicious clients
    partition_beta: float = 0.5
    dataset: DatasetParams = field(default_factory=DatasetParams)
    holdout: HoldoutParams = field(default_factory=HoldoutParams)
    model: ModelArch = field(default_factory=ModelArch)
    train: TrainConfig = field(default_factory=lambda: TrainConfig(learning_rate=0.001))
    attack: AttackConfig = field(default_factory=AttackConfig)
    strategy: StrategyParams = field(default_factory=StrategyParams)
    bandit: BanditConfig = field(default_factory=BanditConfig)
    costs: CostTable = field(default_factory=CostTable)
    reward: RewardParams = field(default_factory=RewardParams)

    @property
    def resolved_krum_f(self) -> int:
        return self.num_malicious if self.krum_f is None else self.krum_f


def _check(errors: list[str], ok: bool, path: str, message: str) -> bool:
    if not ok:
        errors.append(f"{path}: {message}")
    return ok


def _take_int(errors: list[str], d: dict, key: str, default, path: str):
    value = d.get(key, default)
    if value is None and default is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        errors.append(f"{path}: expected an integer, got {value!r}")
        return default
    return value


def _take_num(errors: list[str], d: dict, key: str, default, path: str):
    value = d.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{path}: expected a number, got {value!r}")
        return default
    return float(value)


def _reject_unknown(errors: list[str], d: dict, allowed: set[str], path: str) -> None:
    for key in sorted(set(d) - allowed):
        errors.append(f"{path}{key}: unknown field")


def _parse_rule(errors: list[str], value, path: str) -> RuleId | None:
    if value is None:
        return None
    if isinstance(value, str) and value.lower() in RULES_BY_NAME:
        return RULES_BY_NAME[value.lower()]
    if isinstance(value, int) and not isinstance(value, bool) and value in (0, 1, 2):
        return RuleId(value)
    errors.append(
        f"{path}: expected one of {sorted(RULES_BY_NAME)} or 0/1/2, got {value!r}"
    )
    return None


def config_from_dict(raw: dict[str, Any]) -> ScenarioConfig:
    """Validate a parsed JSON object and build the scenario config.

    Raises ConfigError carrying one message per offending field.
    """
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["config: expected a JSON object at the top level"])

    top_allowed = {
        "schema_version", "label", "seed", "rounds", "num_clients",
        "num_malicious", "krum_f", "partition", "dataset", "holdout",
        "model", "train", "attack", "strategy", "bandit", "costs", "reward",
    }
    _reject_unknown(errors, raw, top_allowed, "")

    version = raw.get("schema_version")
    _check(errors, version == SCHEMA_VERSION, "schema_version",
           f"must be {SCHEMA_VERSION}, got {version!r}")

    label = raw.get("label")
    if not (isinstance(label, str) and _LABEL_RE.match(label)):
        errors.append(
            "label: required; must be letters/digits/._- and start alphanumeric"
        )
        label = "invalid"

    seed = _take_int(errors, raw, "seed", 0, "seed")
    rounds = _take_int(errors, raw, "rounds", 50, "rounds")
    n_clients = _take_int(errors, raw, "num_clients", 20, "num_clients")
    n_malicious = _take_int(errors, raw, "num_malicious", 5, "num_malicious")
    krum_f = _take_int(errors, raw, "krum_f", None, "krum_f")

    _check(errors, rounds >= 1, "rounds", "must be >= 1")
    _check(errors, n_clients >= 2, "num_clients", "must be >= 2")
    _check(errors, 0 <= n_malicious < n_clients, "num_malicious",
           f"must satisfy 0 <= num_malicious < num_clients (got {n_malicious} of {n_clients})")
    if krum_f is not None:
        _check(errors, krum_f >= 0, "krum_f", "must be >= 0")

    part = raw.get("partition", {})
    beta = 0.5
    if _check(errors, isinstance(part, dict), "partition", "expected an object"):
        _reject_unknown(errors, part, {"beta"}, "partition.")
        beta = _take_num(errors, part, "beta", 0.5, "partition.beta")
        _check(errors, beta > 0, "partition.beta", "must be positive")

    ds = raw.get("dataset", {})
    dataset = DatasetParams()
    if _check(errors, isinstance(ds, dict), "dataset", "expected an object"):
        _reject_unknown(
            errors, ds,
            {"num_classes", "num_features", "samples_per_class", "class_separation"},
            "dataset.",
        )
        num_classes = _take_int(errors, ds, "num_classes", 10, "dataset.num_classes")
        num_features = _take_int(errors, ds, "num_features", 16, "dataset.num_features")
        spc = _take_int(errors, ds, "samples_per_class", 100, "dataset.samples_per_class")
        sep = _take_num(errors, ds, "class_separation", 2.0, "dataset.class_separation")
        _check(errors, num_classes >= 2, "dataset.num_classes", "must be >= 2")
        _check(errors, num_features >= 1, "dataset.num_features", "must be >= 1")
        _check(errors, spc >= 1, "dataset.samples_per_class", "must be >= 1")
        _check(errors, sep >= 0, "dataset.class_separation", "must be >= 0")
        dataset = DatasetParams(num_classes, num_features, spc, sep)

    ho = raw.get("holdout", {})
    holdout = HoldoutParams()
    if _check(errors, isinstance(ho, dict), "holdout", "expected an object"):
        _reject_unknown(errors, ho, {"val_fraction", "test_fraction"}, "holdout.")
        vf = _take_num(errors, ho, "val_fraction", 0.1, "holdout.val_fraction")
        tf = _take_num(errors, ho, "test_fraction", 0.2, "holdout.test_fraction")
        _check(errors, 0 < vf < 1, "holdout.val_fraction", "must lie in (0, 1)")
        _check(errors, 0 < tf < 1, "holdout.test_fraction", "must lie in (0, 1)")
        holdout = HoldoutParams(vf, tf)

    mo = raw.get("model", {})
    model = ModelArch()
    if _check(errors, isinstance(mo, dict), "model", "expected an object"):
        _reject_unknown(errors, mo, {"hidden"}, "model.")
        hidden = _take_int(errors, mo, "hidden", None, "model.hidden")
        if hidden is not None:
            _check(errors, hidden >= 1, "model.hidden", "must be >= 1 (or null)")
        model = ModelArch(hidden)

    tr = raw.get("train", {})
    train = TrainConfig(learning_rate=0.001)
    if _check(errors, isinstance(tr, dict), "train", "expected an object"):
        _reject_unknown(
            errors, tr, {"learning_rate", "momentum", "epochs", "batch_size"}, "train."
        )
        lr = _take_num(errors, tr, "learning_rate", 0.001, "train.learning_rate")
        momentum = _take_num(errors, tr, "momentum", 0.9, "train.momentum")
        epochs = _take_int(errors, tr, "epochs", 1, "train.epochs")
        batch = _take_int(errors, tr, "batch_size", 32, "train.batch_size")
        _check(errors, lr >= 0, "train.learning_rate", "must be >= 0")
        _check(errors, 0 <= momentum < 1, "train.momentum", "must lie in [0, 1)")
        _check(errors, epochs >= 1, "train.epochs", "must be >= 1")
        _check(errors, batch >= 1, "train.batch_size", "must be >= 1")
        try:
            train = TrainConfig(lr, momentum, epochs, batch)
        except ValueError:
            pass

    at = raw.get("attack", {})
    attack = AttackConfig()
    if _check(errors, isinstance(at, dict), "attack", "expected an object"):
        _reject_unknown(
            errors, at, {"kind", "scale_factor", "sign_flip", "norm_source"}, "attack."
        )
        kind = at.get("kind", "none")
        _check(errors, kind in ATTACK_KINDS, "attack.kind",
               f"must be one of {ATTACK_KINDS}, got {kind!r}")
        scale = _take_num(errors, at, "scale_factor", 5.0, "attack.scale_factor")
        _check(errors, scale > 0, "attack.scale_factor", "must be positive")
        sign_flip = at.get("sign_flip", None)
        _check(errors, sign_flip is None or isinstance(sign_flip, bool),
               "attack.sign_flip", "must be true/false/null")
        norm_source = at.get("norm_source", "oracle")
        _check(errors, norm_source in NORM_SOURCES, "attack.norm_source",
               f"must be one of {NORM_SOURCES}, got {norm_source!r}")
        try:
            attack = AttackConfig(kind, scale, sign_flip, norm_source)
        except ValueError:
            pass

    st = raw.get("strategy", {})
    strategy = StrategyParams()
    if _check(errors, isinstance(st, dict), "strategy", "expected an object"):
        _reject_unknown(errors, st, {"mode", "rule"}, "strategy.")
        mode = st.get("mode", "adaptive")
        _check(errors, mode in STRATEGY_MODES, "strategy.mode",
               f"must be one of {STRATEGY_MODES}, got {mode!r}")
        rule = _parse_rule(errors, st.get("rule"), "strategy.rule")
        if mode == "static":
            _check(errors, rule is not None, "strategy.rule",
                   "required when strategy.mode is 'static'")
        strategy = StrategyParams(mode if mode in STRATEGY_MODES else "adaptive", rule)

    ba = raw.get("bandit", {})
    bandit = BanditConfig()
    if _check(errors, isinstance(ba, dict), "bandit", "expected an object"):
        _reject_unknown(errors, ba, {"alpha"}, "bandit.")
        alpha = _take_num(errors, ba, "alpha", 1.5, "bandit.alpha")
        _check(errors, alpha >= 0, "bandit.alpha", "must be >= 0")
        try:
            bandit = BanditConfig(alpha=alpha)
        except ValueError:
            pass

    co = raw.get("costs", {})
    costs = CostTable()
    if _check(errors, isinstance(co, dict), "costs", "expected an object"):
        _reject_unknown(errors, co, {"fedavg", "median", "krum"}, "costs.")
        vals = {}
        for name, default in (("fedavg", 0.1), ("median", 0.4), ("krum", 0.8)):
            v = _take_num(errors, co, name, default, f"costs.{name}")
            _check(errors, 0 <= v <= 1, f"costs.{name}", "must lie in [0, 1]")
            vals[name] = v
        try:
            costs = CostTable(**vals)
        except ValueError:
            pass

    re_ = raw.get("reward", {})
    reward = RewardParams()
    if _check(errors, isinstance(re_, dict), "reward", "expected an object"):
        _reject_unknown(errors, re_, {"lambda_cost"}, "reward.")
        lam = _take_num(errors, re_, "lambda_cost", 0.5, "reward.lambda_cost")
        _check(errors, lam >= 0, "reward.lambda_cost", "must be >= 0")
        try:
            reward = RewardParams(lam)
        except ValueError:
            pass

    # Krum's precondition is enforced at validation time whenever the rule is
    # reachable: always for adaptive runs (Krum is an arm), and for static
    # Krum runs.
    krum_reachable = strategy.mode == "adaptive" or strategy.rule == RuleId.KRUM
    if krum_reachable and not errors:
        eff_f = n_malicious if krum_f is None else krum_f
        _check(
            errors,
            n_clients >= eff_f + 3,
            "num_clients",
            f"krum requires N >= f + 3 (got N={n_clients}, f={eff_f})",
        )

    if errors:
        raise ConfigError(errors)

    return ScenarioConfig(
        label=label,
        seed=seed,
        rounds=rounds,
        num_clients=n_clients,
        num_malicious=n_malicious,
        krum_f=krum_f,
        partition_beta=beta,
        dataset=dataset,
        holdout=holdout,
        model=model,
        train=train,
        attack=attack,
        strategy=strategy,
        bandit=bandit,
        costs=costs,
        reward=reward,
    )


def config_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    """Serialise the resolved config to the JSON shape accepted by the parser."""
    return {
        "schema_version": SCHEMA_VERSION,
        "label": cfg.label,
        "seed": cfg.seed,
        "rounds": cfg.rounds,
        "num_clients": cfg.num_clients,
        "num_malicious": cfg.num_malicious,
        "krum_f": cfg.krum_f,
        "partition": {"beta": cfg.partition_beta},
        "dataset": {
            "num_classes": cfg.dataset.num_classes,
            "num_features": cfg.dataset.num_features,
            "samples_per_class": cfg.dataset.samples_per_class,
            "class_separation": cfg.dataset.class_separation,
        },
        "holdout": {
            "val_fraction": cfg.holdout.val_fraction,
            "test_fraction": cfg.holdout.test_fraction,
        },
        "model": {"hidden": cfg.model.hidden},
        "train": {
            "learning_rate": cfg.train.learning_rate,
            "momentum": cfg.train.momentum,
            "epochs": cfg.train.epochs,
            "batch_size": cfg.train.batch_size,
        },
        "attack": {
            "kind": cfg.attack.kind,
            "scale_factor": cfg.attack.scale_factor,
            "sign_flip": cfg.attack.sign_flip,
            "norm_source": cfg.attack.norm_source,
        },
        "strategy": {
            "mode": cfg.strategy.mode,
            "rule": None if cfg.strategy.rule is None else RULE_NAMES[cfg.strategy.rule],
        },
        "bandit": {"alpha": cfg.bandit.alpha},
        "costs": {
            "fedavg": cfg.costs.fedavg,
            "median": cfg.costs.median,
            "krum": cfg.costs.krum,
        },
        "reward": {"lambda_cost": cfg.reward.lambda_cost},
    }


def config_hash(cfg: ScenarioConfig) -> str:
    """Content hash of the resolved config (sha256 of canonical JSON)."""
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: str | Path) -> ScenarioConfig:
    """Read and validate a JSON config file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError([f"config: cannot read {p}: {exc}"]) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: {p} is not valid JSON: {exc}"]) from exc
    return config_from_dict(raw)


def replace_field(raw: dict[str, Any], dotted_key: str, value: Any) -> dict[str, Any]:
    """Return a copy of a raw config dict with one dotted-path scalar replaced."""
    parts = dotted_key.split(".")
    out = json.loads(json.dumps(raw))
    node = out
    for part in parts[:-1]:
        nxt = node.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            node[part] = nxt
        node = nxt
    node[parts[-1]] = value
    return out
