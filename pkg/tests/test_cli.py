import json

import pytest

from main import run_cli


TINY_CONFIG = """\
data:
  splits: [0.5, 0.25, 0.25]
model:
  d_emb: 8
  d_h: 8
  max_len: 6
training:
  batch: 4
  actor_pretrain_epochs: 1
  critic_pretrain_epochs: 1
  joint_epochs: 1
  beam: 2
reward:
  name: bleu
"""


def _gen(out, seed=0):
    return run_cli(
        [
            "gen-data",
            "--scenes", "12",
            "--objects", "4",
            "--attributes", "2",
            "--d-img", "8",
            "--emb-dim", "8",
            "--seed", str(seed),
            "--out", str(out),
        ]
    )


def test_help_exits_cleanly(capsys):
    assert run_cli(["--help"]) == 0
    assert run_cli(["score", "--help"]) == 0
    assert "--candidates" in capsys.readouterr().out


def test_usage_errors_exit_with_one(capsys):
    assert run_cli([]) == 1
    assert run_cli(["train"]) == 1
    assert run_cli(["fly"]) == 1
    assert run_cli(["gen-data", "--scenes", "many", "--out", "x"]) == 1
    assert "error:" in capsys.readouterr().err


def test_data_errors_exit_with_two(tmp_path, capsys):
    assert run_cli(["eval", "--checkpoint", str(tmp_path / "missing.bin"), "--data", str(tmp_path / "c.jsonl")]) == 2
    (tmp_path / "foreign.bin").write_bytes(b"not a checkpoint at all")
    assert run_cli(["eval", "--checkpoint", str(tmp_path / "foreign.bin"), "--data", str(tmp_path / "c.jsonl")]) == 2
    assert "error:" in capsys.readouterr().err


def test_gen_data_is_deterministic(tmp_path):
    assert _gen(tmp_path / "a", seed=4) == 0
    assert _gen(tmp_path / "b", seed=4) == 0
    for name in ("corpus.jsonl", "vocab.txt", "embeddings.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    lines = (tmp_path / "a" / "corpus.jsonl").read_text().splitlines()
    assert len(lines) == 12
    assert len(json.loads(lines[0])["features"]) == 8


def test_score_reports_a_perfect_match(tmp_path, capsys):
    (tmp_path / "cands.jsonl").write_text('{"id": 0, "tokens": "a red dog runs fast"}\n')
    (tmp_path / "refs.jsonl").write_text('{"id": 0, "refs": ["a red dog runs fast", "a dog"]}\n')
    argv = ["score", "--candidates", str(tmp_path / "cands.jsonl"), "--references", str(tmp_path / "refs.jsonl")]
    assert run_cli(argv + ["--metric", "bleu4"]) == 0
    assert capsys.readouterr().out.splitlines()[-1] == "bleu4,100.00"
    assert run_cli(argv + ["--metric", "rouge_l,bleu1"]) == 0
    rows = capsys.readouterr().out.splitlines()[-2:]
    assert sorted(rows) == ["bleu1,100.00", "rouge_l,100.00"]


def test_score_rejects_malformed_and_misaligned_input(tmp_path, capsys):
    (tmp_path / "cands.jsonl").write_text('{"id": 0, "tokens": "a dog"}\n{"id": 1\n')
    (tmp_path / "refs.jsonl").write_text('{"id": 0, "refs": ["a dog"]}\n')
    argv = ["score", "--candidates", str(tmp_path / "cands.jsonl"), "--references", str(tmp_path / "refs.jsonl")]
    assert run_cli(argv + ["--metric", "bleu4"]) == 2
    assert ":2:" in capsys.readouterr().err

    (tmp_path / "cands.jsonl").write_text('{"id": 0, "tokens": "a dog"}\n{"id": 1, "tokens": "a cat"}\n')
    assert run_cli(argv + ["--metric", "bleu4"]) == 2
    assert run_cli(argv + ["--metric", "meteor"]) == 2


def test_train_eval_and_report_end_to_end(tmp_path, capsys):
    data = tmp_path / "data"
    assert _gen(data) == 0
    (tmp_path / "config.yaml").write_text(TINY_CONFIG)
    common = ["--config", str(tmp_path / "config.yaml"), "--data", str(data / "corpus.jsonl"), "--embeddings", str(data / "embeddings.txt")]

    assert run_cli(["train", *common, "--out", str(tmp_path / "run")]) == 0
    run = tmp_path / "run"
    for name in ("checkpoint.bin", "checkpoint.bin.json", "report.json", "report.csv", "timing.json"):
        assert (run / name).exists()
    report = json.loads((run / "report.json").read_text())
    assert set(report["tables"]) == {"val", "test"}
    assert "wall_clock" not in report
    assert report["config"]["reward"] == "bleu"

    eval_argv = [
        "eval",
        "--checkpoint", str(run / "checkpoint.bin"),
        "--data", str(data / "corpus.jsonl"),
        "--embeddings", str(data / "embeddings.txt"),
        "--metrics", "bleu,wmd",
        "--out", str(tmp_path / "eval.csv"),
    ]
    assert run_cli(eval_argv) == 0
    header = (tmp_path / "eval.csv").read_text().splitlines()[0]
    assert header == "split,bleu1,bleu2,bleu3,bleu4,wmd"

    capsys.readouterr()
    assert run_cli(["report", str(run), str(run)]) == 0
    assert "0.00" in capsys.readouterr().out


@pytest.mark.parametrize("reward", ["ml", "constant"])
def test_train_accepts_reward_overrides(tmp_path, reward):
    data = tmp_path / "data"
    assert _gen(data) == 0
    (tmp_path / "config.yaml").write_text(TINY_CONFIG)
    argv = [
        "train",
        "--config", str(tmp_path / "config.yaml"),
        "--data", str(data / "corpus.jsonl"),
        "--reward", reward,
        "--out", str(tmp_path / "run"),
    ]
    assert run_cli(argv) == 0
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert report["config"]["reward"] == reward
    assert len(report["losses"]["joint_actor"]) == (0 if reward == "ml" else 1)
