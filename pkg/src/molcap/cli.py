"""Command-line front end: presets, sweeps, and CSV/JSON artifacts.

Per-step curve files carry ``step, reactions_left, optimistic_nodes,
pessimistic_nodes``; per-cycle files carry ``cycle, messages_useful,
messages_useless``. All files are UTF-8 with LF line endings and a header
row, and identical command lines produce byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import fields
from pathlib import Path

from .harness import (
    AggregateResult,
    MODES,
    RunMetrics,
    SimConfig,
    aggregate,
    config_as_dict,
    run_many,
    run_one,
    theoretic_optimum,
)

PRESETS = (
    "exp1-modes",
    "exp2-threshold-sweep",
    "exp3-switch",
    "exp4-messages",
    "scenario-count-aggregate",
)

THRESHOLD_SWEEP = (0.1, 0.3, 0.5, 0.7, 0.9)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="molcap",
        description="simulate atomic capture of molecules by concurrent requesters",
    )
    parser.add_argument("--nodes", type=int, default=None, help="node count (default 250)")
    parser.add_argument("--molecules", type=int, default=None, help="initial molecule count (default 15000)")
    parser.add_argument("--mode", choices=MODES, default=None, help="capture mode (default mixed)")
    parser.add_argument("--threshold", type=float, default=None, help="protocol switch threshold s in (0,1] (default 0.7)")
    parser.add_argument("--seed", default=None, help="base seed (default 1)")
    parser.add_argument("--runs", type=int, default=None, help="repetitions to average (default 50)")
    parser.add_argument("--max-steps", type=int, default=None, help="step budget per run (default 500)")
    parser.add_argument("--cycle-len", type=int, default=None, help="steps per message-accounting cycle (default 12)")
    parser.add_argument("--w-local", type=int, default=None, help="local success-history window (default 20)")
    parser.add_argument("--w-remote", type=int, default=None, help="gossiped success-rate window (default 20)")
    parser.add_argument("--local-weight", type=float, default=None, help="weight of the local rate in the blend (default 0.3)")
    parser.add_argument("--preset", choices=PRESETS, default=None, help="run a canned experiment")
    parser.add_argument("--config", type=Path, default=None, help="JSON file with config fields; flags override it")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory (default ./out)")
    parser.add_argument("--trace", action="store_true", help="also write the per-message trace (single run only)")
    return parser


_PRESET_OVERRIDES = {
    "scenario-count-aggregate": {"rule_set": "count-aggregate", "nodes": 10, "molecules": 10},
}


def _merge_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> SimConfig:
    """Precedence, lowest first: defaults, --config file, preset, flags."""
    merged: dict = {}
    if args.config is not None:
        try:
            loaded = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config file: {exc}")
        if not isinstance(loaded, dict):
            parser.error("config file must hold a JSON object")
        known = {f.name for f in fields(SimConfig)}
        unknown = set(loaded) - known
        if unknown:
            parser.error(f"unknown config fields: {sorted(unknown)}")
        merged.update(loaded)
    if args.preset in _PRESET_OVERRIDES:
        merged.update(_PRESET_OVERRIDES[args.preset])
    flag_fields = (
        "nodes", "molecules", "mode", "threshold", "seed", "runs",
        "max_steps", "cycle_len", "w_local", "w_remote", "local_weight",
    )
    for name in flag_fields:
        value = getattr(args, name)
        if value is not None:
            merged[name] = value
    if "seed" in merged and isinstance(merged["seed"], str) and merged["seed"].isdigit():
        merged["seed"] = int(merged["seed"])
    config = SimConfig(**merged)
    try:
        config.validate()
    except ValueError as exc:
        parser.error(str(exc))
    return config


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_curve_csv(path: Path, agg: AggregateResult) -> None:
    rows = [
        (t, agg.reactions_left[t], agg.optimistic_nodes[t], agg.pessimistic_nodes[t])
        for t in range(len(agg.reactions_left))
    ]
    _write_csv(path, ["step", "reactions_left", "optimistic_nodes", "pessimistic_nodes"], rows)


def write_cycles_csv(path: Path, agg: AggregateResult) -> None:
    rows = [
        (c, agg.messages_useful[c], agg.messages_useless[c])
        for c in range(len(agg.messages_useful))
    ]
    _write_csv(path, ["cycle", "messages_useful", "messages_useless"], rows)


def write_optimum_csv(path: Path, config: SimConfig) -> None:
    curve = theoretic_optimum(config)
    _write_csv(path, ["step", "reactions_left"], list(enumerate(curve)))


def write_reaction_log_csv(path: Path, metrics: RunMetrics) -> None:
    rows = [
        (
            r.step,
            r.requester,
            r.rule_name,
            ";".join(str(i) for i in r.consumed_ids),
            ";".join(str(i) for i in r.produced_ids),
        )
        for r in metrics.reaction_log
    ]
    _write_csv(path, ["step", "requester_node", "rule_name", "consumed_ids", "produced_ids"], rows)


def write_trace_csv(path: Path, metrics: RunMetrics) -> None:
    rows = [
        (sent_at, src, dst, kind.value, mid, attempt_id, rtype.value)
        for sent_at, src, dst, kind, mid, _owner, attempt_id, rtype in metrics.trace
    ]
    _write_csv(path, ["step", "from", "to", "kind", "molecule_id", "attempt_id", "request_type"], rows)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _agg_summary(agg: AggregateResult) -> dict:
    return {
        "steps_to_inertia": agg.steps_to_inertia,
        "mean_steps_to_inertia": agg.mean_steps_to_inertia,
        "inertia_fraction": agg.inertia_fraction,
        "total_messages": agg.total_messages,
        "total_reactions": agg.total_reactions,
    }


def _sweep(config: SimConfig, **overrides) -> AggregateResult:
    cfg = SimConfig(**{**config_as_dict(config), **overrides})
    return aggregate(run_many(cfg))


def run_exp1(config: SimConfig, out: Path) -> None:
    summary: dict = {"config": config_as_dict(config), "modes": {}}
    for mode in MODES:
        agg = _sweep(config, mode=mode)
        write_curve_csv(out / f"exp1-{mode.removesuffix('-only')}.csv", agg)
        summary["modes"][mode] = _agg_summary(agg)
    write_optimum_csv(out / "exp1-optimum.csv", config)
    optimum_steps = len(theoretic_optimum(config)) - 1
    mixed_mean = summary["modes"]["mixed"]["mean_steps_to_inertia"]
    summary["optimum_steps"] = optimum_steps
    if optimum_steps > 0:
        summary["mixed_vs_optimum_percent"] = 100.0 * (mixed_mean / optimum_steps - 1.0)
    _write_json(out / "exp1-summary.json", summary)


def run_exp2(config: SimConfig, out: Path) -> None:
    summary: dict = {"config": config_as_dict(config), "thresholds": {}}
    for s in THRESHOLD_SWEEP:
        agg = _sweep(config, mode="mixed", threshold=s)
        write_curve_csv(out / f"exp2-s{s}.csv", agg)
        summary["thresholds"][str(s)] = _agg_summary(agg)
    _write_json(out / "exp2-summary.json", summary)


def _switch_window(metrics: RunMetrics) -> int | None:
    steps = [s for s in metrics.final_switch_steps if s is not None]
    if len(steps) != len(metrics.final_switch_steps) or not steps:
        return None
    return max(steps) - min(steps)


def run_exp3(config: SimConfig, out: Path) -> None:
    runs = run_many(SimConfig(**{**config_as_dict(config), "mode": "mixed"}))
    agg = aggregate(runs)
    write_curve_csv(out / "exp3-nodes.csv", agg)
    windows = [_switch_window(m) for m in runs]
    summary = {
        "config": config_as_dict(config),
        "switch_windows": windows,
        "max_switch_window": max((w for w in windows if w is not None), default=None),
        **_agg_summary(agg),
    }
    _write_json(out / "exp3-summary.json", summary)


def run_exp4(config: SimConfig, out: Path) -> None:
    summary: dict = {"config": config_as_dict(config), "modes": {}}
    for mode in MODES:
        agg = _sweep(config, mode=mode)
        write_cycles_csv(out / f"exp4-{mode.removesuffix('-only')}-cycles.csv", agg)
        summary["modes"][mode] = _agg_summary(agg)
    _write_json(out / "exp4-summary.json", summary)


def run_scenario(config: SimConfig, out: Path) -> None:
    runs = run_many(config)
    agg = aggregate(runs)
    write_curve_csv(out / "scenario-steps.csv", agg)
    finals = [sorted(m.final_payloads, key=str) for m in runs]
    summary = {
        "config": config_as_dict(config),
        "final_multisets": finals,
        "all_runs_agree": all(f == finals[0] for f in finals),
        **_agg_summary(agg),
    }
    _write_json(out / "scenario-summary.json", summary)


def run_custom(config: SimConfig, out: Path, trace: bool) -> None:
    if config.runs == 1:
        metrics = run_one(config, f"{config.seed}/0", keep_trace=trace)
        runs = [metrics]
        write_reaction_log_csv(out / "run-reactions.csv", metrics)
        if trace:
            write_trace_csv(out / "run-trace.csv", metrics)
    else:
        runs = run_many(config)
    agg = aggregate(runs)
    write_curve_csv(out / "run.csv", agg)
    write_cycles_csv(out / "run-cycles.csv", agg)
    _write_json(out / "run-summary.json", {"config": config_as_dict(config), **_agg_summary(agg)})


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = _merge_config(args, parser)
    if args.trace and (args.preset is not None or config.runs != 1):
        parser.error("--trace needs a presetless invocation with --runs 1")
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    if args.preset == "exp1-modes":
        run_exp1(config, out)
    elif args.preset == "exp2-threshold-sweep":
        run_exp2(config, out)
    elif args.preset == "exp3-switch":
        run_exp3(config, out)
    elif args.preset == "exp4-messages":
        run_exp4(config, out)
    elif args.preset == "scenario-count-aggregate":
        run_scenario(config, out)
    else:
        run_custom(config, out, args.trace)
    return 0


if __name__ == "__main__":
    sys.exit(main())
