import json

import pytest

from framepick.cli import main
from framepick.suite import load_suite


def run_cli(args):
    return main(args)


@pytest.fixture(scope="module")
def micro_suite_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("suites") / "micro.json"
    code = run_cli(["gen", "--preset", "micro", "--n", "3", "--seed", "5",
                    "--out", str(path)])
    assert code == 0
    return path


def test_gen_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert run_cli([
            "gen", "--n", "4", "--seed", "7", "--out", str(out),
            "--preset", "micro",
        ]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_micro_preset_properties(micro_suite_file):
    configs = load_suite(micro_suite_file)
    assert len(configs) == 3
    for config in configs:
        assert config.n_frames <= 6
        assert config.transition_noise is False


def test_unknown_flag_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli(["gen", "--bogus-flag", "1", "--out", "x.json"])
    assert exc.value.code == 1
    assert "error" in capsys.readouterr().err


def test_unknown_subcommand_exits_1():
    with pytest.raises(SystemExit) as exc:
        run_cli(["frobnicate"])
    assert exc.value.code == 1


def test_stats_cache_command(micro_suite_file, tmp_path):
    cache_path = tmp_path / "stats.json"
    code = run_cli([
        "stats", "--suite", str(micro_suite_file), "--cache", str(cache_path),
        "--horizon", "2", "--runs", "5",
    ])
    assert code == 0
    data = json.loads(cache_path.read_text())
    assert len(data) == 3
    for entry in data.values():
        assert set(entry) == {"1", "2"}


def test_train_eval_pipeline(micro_suite_file, tmp_path):
    ckpt = tmp_path / "agent.fpqn"
    log = tmp_path / "train.jsonl"
    code = run_cli([
        "train", "--suite", str(micro_suite_file), "--out", str(ckpt),
        "--episodes", "3", "--lr", "1e-3", "--batch-size", "8",
        "--t-train", "2", "--seed", "2", "--log", str(log),
        "--figures", str(tmp_path / "figs"), "--quiet",
    ])
    assert code == 0
    assert ckpt.exists()
    assert (tmp_path / "figs" / "training_curves.png").exists()

    outdir = tmp_path / "report"
    code = run_cli([
        "eval", "--suite", str(micro_suite_file), "--checkpoint", str(ckpt),
        "--out", str(outdir), "--rounds", "3", "--mode", "oracle",
        "--random-repeats", "2",
    ])
    assert code == 0
    assert (outdir / "report.csv").exists()
    assert (outdir / "report.json").exists()
    assert (outdir / "curves.png").exists()
    assert (outdir / "auc_bars.png").exists()
    report = json.loads((outdir / "report.json").read_text())
    assert set(report["policies"]) == {
        "agent", "random", "linspace", "worst-oracle", "worst-wild",
    }


def test_compare_without_agent(micro_suite_file, tmp_path):
    outdir = tmp_path / "cmp"
    code = run_cli([
        "compare", "--suite", str(micro_suite_file), "--out", str(outdir),
        "--policies", "random,worst-oracle", "--rounds", "2",
    ])
    assert code == 0
    report = json.loads((outdir / "report.json").read_text())
    assert set(report["policies"]) == {"random", "worst-oracle"}


def test_compare_agent_without_checkpoint_exits_1(micro_suite_file, tmp_path, capsys):
    code = run_cli([
        "compare", "--suite", str(micro_suite_file), "--out", str(tmp_path / "x"),
        "--policies", "agent",
    ])
    assert code == 1
    assert "checkpoint" in capsys.readouterr().err


def test_eval_with_missing_suite_exits_2(tmp_path):
    code = run_cli([
        "eval", "--suite", str(tmp_path / "missing.json"),
        "--checkpoint", str(tmp_path / "missing.fpqn"),
        "--out", str(tmp_path / "out"),
    ])
    assert code == 2


def test_grad_check_quick():
    code = run_cli(["grad-check", "--draws", "3", "--tolerance", "1e-4"])
    assert code == 0


def test_grad_check_fails_on_impossible_tolerance(capsys):
    code = run_cli(["grad-check", "--draws", "2", "--tolerance", "1e-18"])
    assert code == 2
    assert "FAIL" in capsys.readouterr().err


def test_env_var_override(micro_suite_file, tmp_path, monkeypatch):
    monkeypatch.setenv("FRAMEPICK_SEED", "7")
    monkeypatch.setenv("FRAMEPICK_OUT", str(tmp_path / "env.json"))
    code = main(["gen", "--preset", "micro", "--n", "2"])
    assert code == 0
    assert (tmp_path / "env.json").exists()
