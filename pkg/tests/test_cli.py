import csv
import json

import numpy as np
import pytest

from dfprune.cli import main
from dfprune.model import load_network

from conftest import FIXTURES

SYNTH = str(FIXTURES / "mlp_synthbin.json")
SYNTH_DS = str(FIXTURES / "synthbin_test.nnds")
SIGMOID = str(FIXTURES / "mlp_8x8digits_sigmoid.json")


def prune_args(tmp_path, **overrides):
    args = {
        "--model": SYNTH,
        "--target": "0.4",
        "--batch": "0.2",
        "--alpha": "0.75",
        "--phi": "0.9",
        "--seed": "42",
        "--out": str(tmp_path / "pruned.json"),
        "--trace": str(tmp_path / "trace.csv"),
    }
    args.update(overrides)
    flat = ["prune"]
    for k, v in args.items():
        if v is not None:
            flat += [k, v]
    return flat


def test_missing_model_is_usage_error(tmp_path, capsys):
    code = main(["prune", "--target", "0.4", "--out", str(tmp_path / "x.json")])
    assert code == 1
    err = capsys.readouterr().err
    assert "usage" in err.lower()


def test_unknown_command_is_usage_error(capsys):
    assert main(["frobnicate"]) == 1


def test_prune_writes_model_trace_manifest(tmp_path):
    out = tmp_path / "pruned.json"
    assert main(prune_args(tmp_path)) == 0
    pruned = load_network(out)
    # run stops once ceil(0.4 * 32) = 13 units are gone
    assert pruned.total_hidden_units() == 32 - 13
    trace_rows = list(csv.reader(open(tmp_path / "trace.csv")))
    assert trace_rows[0][0] == "epoch"
    manifest = json.loads((tmp_path / "pruned.json.manifest.json").read_text())
    assert manifest["command"] == "prune"
    assert manifest["config"]["target"] == 0.4
    assert manifest["seed"] == 42
    assert manifest["duration_seconds"] > 0
    assert manifest["engine_version"]


def test_prune_traces_are_byte_identical_for_same_seed(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    assert main(prune_args(a, **{"--out": str(a / "m.json"), "--trace": str(a / "t.csv")})) == 0
    assert main(prune_args(b, **{"--out": str(b / "m.json"), "--trace": str(b / "t.csv")})) == 0
    assert (a / "t.csv").read_bytes() == (b / "t.csv").read_bytes()
    assert (a / "m.json").read_bytes() == (b / "m.json").read_bytes()


def test_prune_one_shot_has_no_draws(tmp_path):
    assert main(prune_args(tmp_path, **{"--mode": "one-shot"})) == 0
    rows = list(csv.DictReader(open(tmp_path / "trace.csv")))
    assert rows and all(row["random_draw"] == "" for row in rows)


def test_alpha_auto_picks_sigmoid_default(tmp_path):
    out = tmp_path / "p.json"
    code = main([
        "prune", "--model", SIGMOID, "--target", "0.1", "--batch", "0.1",
        "--alpha", "auto", "--seed", "1", "--out", str(out),
    ])
    assert code == 0
    manifest = json.loads((out.parent / "p.json.manifest.json").read_text())
    assert manifest["config"]["alpha"] == 0.05
    assert manifest["config"]["beta"] == 0.95


def test_eval_writes_one_row_per_epsilon(tmp_path):
    pruned = tmp_path / "pruned.json"
    assert main(prune_args(tmp_path, **{"--out": str(pruned)})) == 0
    report = tmp_path / "report.csv"
    code = main([
        "eval", "--original", SYNTH, "--pruned", str(pruned),
        "--dataset", SYNTH_DS, "--epsilon", "0.01,0.05", "--out", str(report),
    ])
    assert code == 0
    rows = list(csv.DictReader(open(report)))
    assert [row["epsilon"] for row in rows] == ["0.01", "0.05"]
    assert all(0 <= float(row["preservation"]) for row in rows)
    assert float(rows[0]["sparsity"]) == pytest.approx(13 / 32)


def test_eval_identity_pair_preserves_everything(tmp_path):
    report = tmp_path / "report.csv"
    code = main([
        "eval", "--original", SYNTH, "--pruned", SYNTH,
        "--dataset", SYNTH_DS, "--epsilon", "0", "--out", str(report),
    ])
    assert code == 0
    row = next(csv.DictReader(open(report)))
    assert float(row["preservation"]) == 1.0
    assert row["acc_orig"] == row["acc_pruned"]


def test_eval_bad_epsilon_is_usage_error(tmp_path, capsys):
    code = main([
        "eval", "--original", SYNTH, "--pruned", SYNTH,
        "--dataset", SYNTH_DS, "--epsilon", "abc", "--out", str(tmp_path / "r.csv"),
    ])
    assert code == 1


def test_eval_topk_column(tmp_path):
    report = tmp_path / "report.csv"
    code = main([
        "eval", "--original", SYNTH, "--pruned", SYNTH, "--dataset", SYNTH_DS,
        "--epsilon", "0.05", "--topk", "2", "--out", str(report),
    ])
    assert code == 0
    row = next(csv.DictReader(open(report)))
    assert float(row["topk"]) == 1.0


def test_sweep_emits_monotone_sparsity(tmp_path):
    out = tmp_path / "final.json"
    report = tmp_path / "sweep.csv"
    code = main([
        "sweep", "--model", SYNTH, "--target", "0.5", "--batch", "0.2",
        "--alpha", "0.75", "--seed", "3", "--out", str(out),
        "--dataset", SYNTH_DS, "--epsilon", "0.05", "--report", str(report),
        "--eval-every", "1",
    ])
    assert code == 0
    rows = list(csv.DictReader(open(report)))
    sparsities = [float(r["sparsity"]) for r in rows]
    assert sparsities[0] == 0.0
    assert all(a <= b for a, b in zip(sparsities, sparsities[1:]))
    assert sparsities[-1] >= 0.5
    assert load_network(out).total_hidden_units() == 32 - 16


def test_sweep_one_shot_mode(tmp_path):
    out = tmp_path / "final.json"
    report = tmp_path / "sweep.csv"
    code = main([
        "sweep", "--model", SYNTH, "--target", "0.5", "--batch", "0.2",
        "--seed", "3", "--mode", "one-shot", "--out", str(out),
        "--dataset", SYNTH_DS, "--epsilon", "0.05", "--report", str(report),
    ])
    assert code == 0
    rows = list(csv.DictReader(open(report)))
    assert len(rows) == 2
    assert float(rows[0]["sparsity"]) == 0.0
    assert float(rows[1]["sparsity"]) >= 0.5


def test_missing_file_maps_to_exit_one(tmp_path, capsys):
    code = main(prune_args(tmp_path, **{"--model": str(tmp_path / "nope.json")}))
    assert code == 1
    assert "error" in capsys.readouterr().err.lower()


def test_interval_explosion_exits_two_and_flushes_trace(tmp_path):
    from conftest import make_net
    from dfprune.model import save_network

    net = make_net((2, 8, 8, 8, 8, 2), ("relu",) * 4 + ("identity",), seed=0, scale=1e8)
    model = tmp_path / "boom.json"
    save_network(net, model)
    trace = tmp_path / "t.csv"
    code = main([
        "prune", "--model", str(model), "--target", "0.5", "--batch", "0.5",
        "--alpha", "0.75", "--out", str(tmp_path / "out.json"), "--trace", str(trace),
    ])
    assert code == 2
    assert trace.exists()
    header = trace.read_text().splitlines()[0]
    assert header.startswith("epoch,layer,nominee")
