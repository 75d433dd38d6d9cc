"""Command-line front end: run scenarios, sweep a config key, plot results.

Outputs land under an output root (``--out`` flag, else the FEDBANDIT_OUT
environment variable, else ``./runs``), one directory per run label holding
``rounds.csv``, ``summary.json``, and ``manifest.json``.  The manifest
records the config content hash; rerunning a label with a *different* config
is refused rather than silently overwritten.

Exit codes: 0 success, 1 runtime failure (divergence, missing files),
2 config validation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Any

from . import __version__
from .config import (
    ConfigError,
    ScenarioConfig,
    config_from_dict,
    config_hash,
    config_to_dict,
    replace_field,
)
from .localtrain import DivergenceError
from .orchestrator import RoundLog, run_scenario

ENV_OUT = "FEDBANDIT_OUT"

CSV_COLUMNS = (
    "round,chosen_rule,norm_variance,avg_cos_sim,mean_update_norm,"
    "scaled_s1,scaled_s2,scaled_s3,val_accuracy,test_accuracy,reward,"
    "ucb_fedavg,ucb_median,ucb_krum,wall_time_ms"
)


def _fmt(value: float) -> str:
    return repr(float(value))


def write_rounds_csv(logs: list[RoundLog], path: Path) -> None:
    """Serialise round logs with a fixed, versioned column order.

    Floats are written with shortest round-trip repr so identical runs
    produce byte-identical files.  UCB columns stay blank for static runs.
    """
    lines = [CSV_COLUMNS]
    for log in logs:
        if log.ucb_scores is None:
            ucb = ["", "", ""]
        else:
            ucb = [_fmt(v) for v in log.ucb_scores]
        lines.append(
            ",".join(
                [
                    str(log.round_index),
                    str(int(log.chosen_rule)),
                    _fmt(log.state.norm_variance),
                    _fmt(log.state.avg_cosine_similarity),
                    _fmt(log.state.mean_update_norm),
                    _fmt(log.scaled_state[0]),
                    _fmt(log.scaled_state[1]),
                    _fmt(log.scaled_state[2]),
                    _fmt(log.val_accuracy),
                    _fmt(log.test_accuracy),
                    _fmt(log.reward),
                    *ucb,
                    _fmt(log.wall_time_ms),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n")


def read_rounds_csv(path: Path) -> list[dict[str, str]]:
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    expected = CSV_COLUMNS.split(",")
    if list(rows[0].keys()) != expected:
        raise ValueError(f"{path}: unexpected columns {list(rows[0].keys())}")
    return rows


class OutputClash(RuntimeError):
    """A label directory already holds a run with a different config."""


def execute_run(
    cfg: ScenarioConfig, out_root: Path, threads: int, source: str
) -> tuple[Path, dict]:
    """Run one scenario and write rounds.csv / summary.json / manifest.json."""
    target = out_root / cfg.label
    chash = config_hash(cfg)
    manifest_path = target / "manifest.json"
    if manifest_path.exists():
        previous = json.loads(manifest_path.read_text())
        if previous.get("config_hash") != chash:
            raise OutputClash(
                f"{target} already holds a run with config hash "
                f"{previous.get('config_hash')!r} != {chash!r}; "
                "pick a new label or output root"
            )
    target.mkdir(parents=True, exist_ok=True)
    logs, summary = run_scenario(cfg, threads=threads)
    timing_ms = summary.pop("_timing_ms", 0.0)
    write_rounds_csv(logs, target / "rounds.csv")
    (target / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    manifest = {
        "label": cfg.label,
        "config_hash": chash,
        "source_config": source,
        "config": config_to_dict(cfg),
        "threads": threads,
        "duration_ms": timing_ms,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "package_version": __version__,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return target, summary


def _print_summary(summary: dict) -> None:
    pct = summary["selection_pct"]
    print(f"run {summary['label']}: {summary['rounds']} rounds")
    print(
        f"  final accuracy (test) {summary['final_accuracy']:.4f}"
        f"  (val {summary['final_val_accuracy']:.4f})"
        f"  std(last10) {summary['std_last10']:.4f}"
    )
    print(
        f"  selection % fedavg {pct['fedavg']:.1f} | median {pct['median']:.1f}"
        f" | krum {pct['krum']:.1f}  mean cost {summary['mean_round_cost']:.3f}"
    )


def _out_root(args: argparse.Namespace) -> Path:
    if args.out is not None:
        return Path(args.out)
    return Path(os.environ.get(ENV_OUT, "runs"))


def _load_raw(path: str) -> dict[str, Any]:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: {path} is not valid JSON: {exc}"]) from exc


def _apply_seed_override(cfg: ScenarioConfig, seed: int | None) -> ScenarioConfig:
    if seed is None:
        return cfg
    return replace(cfg, seed=seed, label=f"{cfg.label}-s{seed}")


def cmd_run(args: argparse.Namespace) -> int:
    raw = _load_raw(args.config)
    cfg = _apply_seed_override(config_from_dict(raw), args.seed_override)
    target, summary = execute_run(cfg, _out_root(args), args.threads, args.config)
    _print_summary(summary)
    print(f"  wrote {target / 'rounds.csv'}")
    return 0


def _parse_sweep_values(text: str) -> list[Any]:
    values: list[Any] = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            values.append(json.loads(token))
        except json.JSONDecodeError:
            values.append(token)
    if not values:
        raise ConfigError(["--values: no values given"])
    return values


def cmd_sweep(args: argparse.Namespace) -> int:
    raw = _load_raw(args.config)
    values = _parse_sweep_values(args.values)
    base_label = raw.get("label", "sweep")
    key_leaf = args.key.split(".")[-1]
    sweep_dir = _out_root(args) / f"{base_label}-sweep-{key_leaf}"

    results: list[tuple[Any, dict]] = []
    for value in values:
        varied = replace_field(raw, args.key, value)
        varied["label"] = f"{base_label}-{key_leaf}-{value}"
        cfg = _apply_seed_override(config_from_dict(varied), args.seed_override)
        _, summary = execute_run(cfg, sweep_dir, args.threads, args.config)
        _print_summary(summary)
        results.append((value, summary))

    comparison = sweep_dir / "comparison.csv"
    with comparison.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [args.key, "final_accuracy", "final_val_accuracy", "std_last10",
             "mean_round_cost", "pct_fedavg", "pct_median", "pct_krum"]
        )
        for value, summary in results:
            pct = summary["selection_pct"]
            writer.writerow(
                [value, summary["final_accuracy"], summary["final_val_accuracy"],
                 summary["std_last10"], summary["mean_round_cost"],
                 pct["fedavg"], pct["median"], pct["krum"]]
            )

    selection = sweep_dir / "selection_pct.csv"
    with selection.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([args.key, "pct_fedavg", "pct_median", "pct_krum"])
        for value, summary in results:
            pct = summary["selection_pct"]
            writer.writerow([value, pct["fedavg"], pct["median"], pct["krum"]])

    print(f"wrote {comparison}")
    print(f"wrote {selection}")
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(args.out) if args.out is not None else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)

    runs: list[tuple[str, list[dict[str, str]]]] = []
    for run_dir in args.run_dirs:
        path = Path(run_dir) / "rounds.csv"
        if not path.exists():
            print(f"error: {path} not found", file=sys.stderr)
            return 1
        try:
            rows = read_rounds_csv(path)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        runs.append((Path(run_dir).name, rows))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, rows in runs:
        ax.plot(
            [int(r["round"]) for r in rows],
            [float(r["test_accuracy"]) for r in rows],
            label=name,
        )
    ax.set_xlabel("round")
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    curves = out_dir / "accuracy_curves.svg"
    fig.tight_layout()
    fig.savefig(curves)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    width = 0.25
    names = [name for name, _ in runs]
    for offset, (rule_name, rule_id) in enumerate(
        (("fedavg", 0), ("median", 1), ("krum", 2))
    ):
        pcts = []
        for _, rows in runs:
            chosen = [int(r["chosen_rule"]) for r in rows]
            pcts.append(100.0 * sum(c == rule_id for c in chosen) / len(chosen))
        ax.bar(
            [i + (offset - 1) * width for i in range(len(runs))],
            pcts,
            width=width,
            label=rule_name,
        )
    ax.set_xticks(range(len(runs)))
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("selection %")
    ax.legend(fontsize=8)
    bars = out_dir / "selection_bars.svg"
    fig.tight_layout()
    fig.savefig(bars)
    plt.close(fig)

    print(f"wrote {curves}")
    print(f"wrote {bars}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedbandit",
        description="Deterministic federated-learning simulator with adaptive robust aggregation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", default=None, help=f"output root (default ${ENV_OUT} or ./runs)")
        p.add_argument("--threads", type=int, default=1, help="client training worker threads")
        p.add_argument("--seed-override", type=int, default=None, dest="seed_override",
                       help="replace the config seed (label gets an -s<seed> suffix)")

    p_run = sub.add_parser("run", help="run one scenario config")
    p_run.add_argument("config")
    add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a config once per value of one scalar key")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--key", required=True, help="dotted config path, e.g. reward.lambda_cost")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_plot = sub.add_parser("plot", help="plot accuracy curves and selection bars for run dirs")
    p_plot.add_argument("run_dirs", nargs="+")
    p_plot.add_argument("--out", default=None, help="directory for the images (default .)")
    p_plot.set_defaults(func=cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for message in exc.errors:
            print(f"config error: {message}", file=sys.stderr)
        return 2
    except OutputClash as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, ValueError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
