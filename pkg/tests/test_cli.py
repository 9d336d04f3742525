"""End-to-end command-line runs: exit codes and artifact files."""

import json
import os

import pytest

from freqscope.cli import LOCK_NAME, main
from freqscope.config import RESOLVED_CONFIG_NAME
from freqscope.trace import load_trace, save_trace, FrequencyTrace


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def website_ds(tmp_path_factory):
    """Small simulated website dataset shared by train/eval/defend tests."""
    out = tmp_path_factory.mktemp("ds") / "web"
    rc = run_cli(
        "simulate", "--kind", "website", "--classes", "4", "--measurements", "10",
        "--samples", "160", "--seed", "11", "--out", out,
    )
    assert rc == 0
    return out


def tree_bytes(root):
    """Sorted (relative path, file bytes) pairs below root."""
    found = []
    for base, _, files in os.walk(root):
        for name in sorted(files):
            p = os.path.join(base, name)
            with open(p, "rb") as fh:
                found.append((os.path.relpath(p, root), fh.read()))
    return sorted(found)


def test_simulate_writes_dataset_and_resolved(website_ds):
    dirs = sorted(d for d in os.listdir(website_ds)
                  if os.path.isdir(website_ds / d))
    assert len(dirs) == 4
    first = website_ds / dirs[0]
    traces = sorted(os.listdir(first))
    assert len(traces) == 10
    assert traces[0].endswith(".ftrace")
    assert (website_ds / RESOLVED_CONFIG_NAME).exists()
    assert not (website_ds / LOCK_NAME).exists()  # lock released


def test_simulate_reruns_byte_identical(tmp_path, website_ds):
    out2 = tmp_path / "web2"
    rc = run_cli(
        "simulate", "--kind", "website", "--classes", "4", "--measurements", "10",
        "--samples", "160", "--seed", "11", "--out", out2,
    )
    assert rc == 0
    assert tree_bytes(website_ds) == tree_bytes(out2)


def test_simulate_seed_changes_bytes(tmp_path):
    outs = []
    for seed in (1, 2):
        out = tmp_path / f"s{seed}"
        assert run_cli("simulate", "--kind", "website", "--classes", "2",
                       "--measurements", "2", "--samples", "60",
                       "--seed", seed, "--out", out) == 0
        outs.append(tree_bytes(out))
    assert outs[0] != outs[1]


def test_simulate_respects_lock(tmp_path):
    out = tmp_path / "locked"
    out.mkdir()
    (out / LOCK_NAME).write_text("424242\n")
    rc = run_cli("simulate", "--kind", "website", "--classes", "2",
                 "--measurements", "2", "--samples", "40", "--out", out)
    assert rc == 3
    (out / LOCK_NAME).unlink()
    assert run_cli("simulate", "--kind", "website", "--classes", "2",
                   "--measurements", "2", "--samples", "40", "--out", out) == 0


def test_simulate_keystrokes_kind(tmp_path):
    pwfile = tmp_path / "pw.txt"
    pwfile.write_text("monkey\nvelvet\n")
    out = tmp_path / "keys"
    rc = run_cli("simulate", "--kind", "keystrokes", "--passwords", pwfile,
                 "--per-label", "3", "--out", out)
    assert rc == 0
    labels = sorted(d for d in os.listdir(out) if os.path.isdir(out / d))
    assert labels == ["monkey", "velvet"]
    t = load_trace(out / "monkey" / "0000.ftrace")
    assert t.interval_ms == 20
    assert t.label == "monkey"


def test_simulate_duplicate_passwords_rejected(tmp_path):
    pwfile = tmp_path / "pw.txt"
    pwfile.write_text("monkey\nmonkey\n")
    rc = run_cli("simulate", "--kind", "keystrokes", "--passwords", pwfile,
                 "--per-label", "3", "--out", tmp_path / "x")
    assert rc == 2


def test_bad_config_file_exits_2(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("simulate.clases = 4\n")
    rc = run_cli("simulate", "--kind", "website", "--config", conf,
                 "--out", tmp_path / "x")
    assert rc == 2


def test_unknown_profile_exits_2(tmp_path):
    rc = run_cli("simulate", "--kind", "website", "--profile", "pentium3",
                 "--classes", "2", "--measurements", "2", "--samples", "40",
                 "--out", tmp_path / "x")
    assert rc == 2


def test_train_and_eval_round_trip(tmp_path, website_ds, capsys):
    model = tmp_path / "model.json"
    rc = run_cli("train", "--dataset", website_ds, "--model", model,
                 "--classifier", "knn", "--k", "3",
                 "--split-seed", "5", "--fractions", "0.5,0.25,0.25")
    assert rc == 0
    assert model.exists()
    assert (tmp_path / "model.json.resolved.conf").exists()
    doc = json.loads(model.read_text())
    assert doc["format"] == "freqscope-model"
    assert doc["metadata"]["split_seed"] == 5

    out = tmp_path / "eval"
    rc = run_cli("eval", "--dataset", website_ds, "--model", model,
                 "--split", "test", "--topk", "2", "--out", out)
    assert rc == 0
    text = capsys.readouterr().out
    assert "top-1 accuracy" in text
    assert (out / "report.txt").exists()
    kv = (out / "report.kv").read_text()
    assert any(line.startswith("top1 = ") for line in kv.splitlines())
    assert (out / "confusion.csv").read_text().startswith("true\\pred,")
    assert (out / RESOLVED_CONFIG_NAME).exists()


def test_eval_missing_dataset_exits_3(tmp_path, website_ds):
    model = tmp_path / "model.json"
    assert run_cli("train", "--dataset", website_ds, "--model", model) == 0
    rc = run_cli("eval", "--dataset", tmp_path / "absent", "--model", model)
    assert rc == 3


def test_eval_malformed_model_exits_3(tmp_path, website_ds):
    model = tmp_path / "broken.json"
    model.write_text("{not json")
    assert run_cli("eval", "--dataset", website_ds, "--model", model) == 3


def test_train_forest_kind(tmp_path, website_ds):
    model = tmp_path / "forest.json"
    rc = run_cli("train", "--dataset", website_ds, "--model", model,
                 "--classifier", "forest", "--trees", "10",
                 "--fractions", "0.5,0.25,0.25")
    assert rc == 0
    assert json.loads(model.read_text())["kind"] == "forest"


def test_collect_sim_source(tmp_path):
    out = tmp_path / "collected"
    rc = run_cli("collect", "--source", "sim", "--workload", "idle",
                 "--samples", "30", "--measurements", "2", "--label", "idle run",
                 "--out", out)
    assert rc == 0
    label_dir = out / "idle%20run"
    files = sorted(os.listdir(label_dir))
    assert files == ["0000.ftrace", "0001.ftrace"]
    # appending keeps numbering monotonic
    rc = run_cli("collect", "--source", "sim", "--workload", "idle",
                 "--samples", "30", "--measurements", "1", "--label", "idle run",
                 "--out", out)
    assert rc == 0
    assert sorted(os.listdir(label_dir))[-1] == "0002.ftrace"


def test_collect_masked_policy_exits_4(tmp_path):
    rc = run_cli("collect", "--source", "sim", "--workload", "idle",
                 "--samples", "10", "--measurements", "1", "--label", "x",
                 "--policy", "masked", "--out", tmp_path / "y")
    assert rc == 4


def test_collect_replay_is_bit_exact(tmp_path):
    src = FrequencyTrace(samples=[1_500_000 + 100_000 * i for i in range(12)],
                         interval_ms=10, device="ryzen5", label="orig")
    path = tmp_path / "orig.ftrace"
    save_trace(src, path)
    out = tmp_path / "replayed"
    rc = run_cli("collect", "--source", "replay", "--replay", path,
                 "--samples", "12", "--measurements", "1", "--label", "copy",
                 "--sleep-ms", "0", "--out", out)
    assert rc == 0
    got = load_trace(out / "copy" / "0000.ftrace")
    assert got.samples == src.samples


def test_collect_replay_exhausted_exits_3(tmp_path):
    src = FrequencyTrace(samples=[1_500_000] * 5, interval_ms=10,
                         device="ryzen5", label="orig")
    path = tmp_path / "short.ftrace"
    save_trace(src, path)
    rc = run_cli("collect", "--source", "replay", "--replay", path,
                 "--samples", "50", "--measurements", "1", "--label", "x",
                 "--out", tmp_path / "y")
    assert rc == 3


def test_collect_all_hooks_fail_exits_5(tmp_path):
    rc = run_cli("collect", "--source", "sim", "--workload", "idle",
                 "--samples", "10", "--measurements", "2", "--label", "x",
                 "--pre-hook", "exit 9", "--out", tmp_path / "y")
    assert rc == 5


def test_collect_sysfs_fixture(tmp_path, monkeypatch):
    policy = tmp_path / "cpufreq" / "policy0"
    policy.mkdir(parents=True)
    (policy / "scaling_cur_freq").write_text("2500000\n")
    monkeypatch.setenv("FREQSCOPE_SYSFS_ROOT", str(tmp_path))
    out = tmp_path / "out"
    rc = run_cli("collect", "--source", "sysfs", "--samples", "3",
                 "--measurements", "1", "--interval-ms", "1", "--label", "live",
                 "--sleep-ms", "0", "--out", out)
    assert rc == 0
    got = load_trace(out / "live" / "0000.ftrace")
    assert got.samples == [2_500_000] * 3


def test_keystrokes_single_trace(tmp_path, capsys):
    idle, hi = 806_000, 1_500_000
    t = FrequencyTrace(samples=[idle] * 20 + [hi] * 10 + [idle] * 20,
                       interval_ms=20, device="cortex_a73", label="typed")
    path = tmp_path / "typed.ftrace"
    save_trace(t, path)
    out = tmp_path / "detected"
    rc = run_cli("keystrokes", "--trace", path, "--out", out)
    assert rc == 0
    assert "presses = 1" in (out / "keystrokes.kv").read_text()
    assert "presses" in capsys.readouterr().out


def test_keystrokes_needs_trace_or_dataset():
    assert run_cli("keystrokes") == 2


def test_keystrokes_guess_curve(tmp_path, capsys):
    pwfile = tmp_path / "pw.txt"
    pwfile.write_text("ffffff\nqpqpqp\n")
    ds = tmp_path / "keys"
    assert run_cli("simulate", "--kind", "keystrokes", "--passwords", pwfile,
                   "--per-label", "10", "--out", ds) == 0
    out = tmp_path / "curve"
    rc = run_cli("keystrokes", "--dataset", ds, "--guess-curve", "2", "--out", out)
    assert rc == 0
    curve = (out / "guesses.csv").read_text().splitlines()
    assert curve[0] == "guess,accuracy"
    assert len(curve) == 3


def test_defend_sweep(tmp_path, website_ds, capsys):
    out = tmp_path / "sweep"
    rc = run_cli("defend", "--dataset", website_ds,
                 "--defense", "resolution:1,4",
                 "--defense", "mask:1700000",
                 "--fractions", "0.5,0.25,0.25", "--out", out)
    assert rc == 0
    csv = (out / "sweep.csv").read_text().splitlines()
    assert csv[0] == "defense,param,top1_clean,top1_defended"
    assert len(csv) == 4
    assert (out / "sweep.dat").exists()
    assert (out / RESOLVED_CONFIG_NAME).exists()
    assert "resolution_reduce" in capsys.readouterr().out


def test_defend_restrict_is_a_usage_error(tmp_path, website_ds):
    rc = run_cli("defend", "--dataset", website_ds, "--defense", "restrict",
                 "--out", tmp_path / "x")
    assert rc == 2


def test_report_from_eval_kv(tmp_path, website_ds, capsys):
    model = tmp_path / "m.json"
    assert run_cli("train", "--dataset", website_ds, "--model", model,
                   "--fractions", "0.5,0.25,0.25") == 0
    evals = []
    for name in ("run_a", "run_b"):
        out = tmp_path / name
        assert run_cli("eval", "--dataset", website_ds, "--model", model,
                       "--out", out) == 0
        evals.append(out / "report.kv")
    capsys.readouterr()
    rc = run_cli("report", "--eval-kv", evals[0], "--eval-kv", evals[1],
                 "--out", tmp_path / "rpt")
    assert rc == 0
    text = capsys.readouterr().out
    assert "run_a" in text and "run_b" in text
    assert (tmp_path / "rpt" / "eval.dat").exists()
