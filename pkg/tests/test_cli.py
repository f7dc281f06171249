"""Flag handling, file outputs, and byte-level determinism."""

import json

import pytest

from molcap.cli import main

FAST = [
    "--nodes", "4", "--molecules", "16", "--runs", "2",
    "--max-steps", "120", "--seed", "7",
]


def run_cli(args):
    return main([str(a) for a in args])


def read(path):
    return path.read_bytes()


def test_custom_run_writes_curves_and_summary(tmp_path):
    assert run_cli(FAST + ["--out", tmp_path]) == 0
    curve = (tmp_path / "run.csv").read_text().splitlines()
    assert curve[0] == "step,reactions_left,optimistic_nodes,pessimistic_nodes"
    assert curve[1].startswith("0,8")
    cycles = (tmp_path / "run-cycles.csv").read_text().splitlines()
    assert cycles[0] == "cycle,messages_useful,messages_useless"
    summary = json.loads((tmp_path / "run-summary.json").read_text())
    assert summary["config"]["nodes"] == 4
    assert summary["inertia_fraction"] == 1.0


def test_single_run_emits_reaction_log(tmp_path):
    assert run_cli(FAST[:-2] + ["--runs", "1", "--seed", "7", "--out", tmp_path]) == 0
    log = (tmp_path / "run-reactions.csv").read_text().splitlines()
    assert log[0] == "step,requester_node,rule_name,consumed_ids,produced_ids"
    assert len(log) == 9  # header + floor(16/2) reactions
    assert all(row.count(";") == 1 for row in log[1:])  # two consumed ids


def test_trace_export(tmp_path):
    assert run_cli(FAST[:-2] + ["--runs", "1", "--seed", "7", "--trace", "--out", tmp_path]) == 0
    trace = (tmp_path / "run-trace.csv").read_text().splitlines()
    assert trace[0] == "step,from,to,kind,molecule_id,attempt_id,request_type"
    summary = json.loads((tmp_path / "run-summary.json").read_text())
    assert len(trace) - 1 == summary["total_messages"]


def test_identical_command_lines_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli(FAST + ["--out", a])
    run_cli(FAST + ["--out", b])
    for name in ("run.csv", "run-cycles.csv"):
        assert read(a / name) == read(b / name)
    sa = json.loads((a / "run-summary.json").read_text())
    sb = json.loads((b / "run-summary.json").read_text())
    assert sa == sb


def test_seed_changes_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli(FAST[:-1] + ["4", "--out", a])
    run_cli(FAST[:-1] + ["5", "--out", b])
    assert read(a / "run.csv") != read(b / "run.csv")


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nodes": 4, "molecules": 10, "runs": 1,
                               "max_steps": 100, "seed": 2}))
    out = tmp_path / "out"
    assert run_cli(["--config", cfg, "--molecules", "6", "--out", out]) == 0
    summary = json.loads((out / "run-summary.json").read_text())
    assert summary["config"]["molecules"] == 6  # flag wins
    assert summary["config"]["nodes"] == 4  # file survives


def test_unknown_config_field_is_a_usage_error(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"banana": 1}))
    with pytest.raises(SystemExit) as err:
        run_cli(["--config", cfg, "--out", tmp_path])
    assert err.value.code == 2


def test_threshold_out_of_range_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as err:
        run_cli(FAST + ["--threshold", "1.2", "--out", tmp_path])
    assert err.value.code == 2


def test_unknown_preset_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit):
        run_cli(["--preset", "exp9", "--out", tmp_path])


def test_non_numeric_flag_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit):
        run_cli(["--nodes", "many", "--out", tmp_path])


def test_trace_needs_single_run(tmp_path):
    with pytest.raises(SystemExit):
        run_cli(FAST + ["--trace", "--out", tmp_path])


def test_exp1_preset_writes_all_curves(tmp_path):
    assert run_cli(FAST + ["--preset", "exp1-modes", "--out", tmp_path]) == 0
    for name in ("exp1-optimistic.csv", "exp1-pessimistic.csv", "exp1-mixed.csv",
                 "exp1-optimum.csv", "exp1-summary.json"):
        assert (tmp_path / name).exists(), name
    summary = json.loads((tmp_path / "exp1-summary.json").read_text())
    assert set(summary["modes"]) == {"optimistic-only", "pessimistic-only", "mixed"}
    optimum = (tmp_path / "exp1-optimum.csv").read_text().splitlines()
    assert optimum[0] == "step,reactions_left"
    assert optimum[1] == "0,8"


def test_exp2_preset_sweeps_thresholds(tmp_path):
    assert run_cli(FAST + ["--preset", "exp2-threshold-sweep", "--out", tmp_path]) == 0
    for s in ("0.1", "0.3", "0.5", "0.7", "0.9"):
        assert (tmp_path / f"exp2-s{s}.csv").exists()
    summary = json.loads((tmp_path / "exp2-summary.json").read_text())
    assert set(summary["thresholds"]) == {"0.1", "0.3", "0.5", "0.7", "0.9"}


def test_exp3_preset_reports_switch_windows(tmp_path):
    assert run_cli(FAST + ["--preset", "exp3-switch", "--out", tmp_path]) == 0
    summary = json.loads((tmp_path / "exp3-summary.json").read_text())
    assert len(summary["switch_windows"]) == 2
    assert (tmp_path / "exp3-nodes.csv").exists()


def test_exp4_preset_writes_cycle_files(tmp_path):
    assert run_cli(FAST + ["--preset", "exp4-messages", "--out", tmp_path]) == 0
    for name in ("exp4-mixed-cycles.csv", "exp4-optimistic-cycles.csv",
                 "exp4-pessimistic-cycles.csv", "exp4-summary.json"):
        assert (tmp_path / name).exists(), name


def test_scenario_preset_reaches_the_oracle(tmp_path):
    assert run_cli(["--runs", "3", "--seed", "5", "--max-steps", "300",
                    "--preset", "scenario-count-aggregate", "--out", tmp_path]) == 0
    summary = json.loads((tmp_path / "scenario-summary.json").read_text())
    assert summary["all_runs_agree"] is True
    assert summary["final_multisets"][0] == [49, "a"]
    assert summary["inertia_fraction"] == 1.0


def test_preset_outputs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli(FAST + ["--preset", "exp1-modes", "--out", a])
    run_cli(FAST + ["--preset", "exp1-modes", "--out", b])
    for name in ("exp1-optimistic.csv", "exp1-pessimistic.csv", "exp1-mixed.csv"):
        assert read(a / name) == read(b / name)
