"""Command-line surface: exit codes, file outputs, reproducibility."""

import json

import pytest

from ligram.checkpoint import load_checkpoint
from ligram.cli import main


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    code = main(
        [
            "synth",
            "--classes", "3",
            "--docs-per-class", "14",
            "--vocab-per-class", "12",
            "--dim", "12",
            "--seed", "21",
            "--out", str(out),
        ]
    )
    assert code == 0
    return out


def common_flags(fixture_dir, out_dir):
    return [
        "--corpus", str(fixture_dir / "corpus.jsonl"),
        "--morpheme-emb", str(fixture_dir / "morpheme_embeddings.lgem"),
        "--entity-emb", str(fixture_dir / "entity_embeddings.lgem"),
        "--min-freq", "1",
        "--split-per-class", "6",
        "--seed", "21",
        "--out", str(out_dir),
    ]


def test_validate_ok(fixture_dir, tmp_path, capsys):
    code = main(["validate"] + common_flags(fixture_dir, tmp_path))
    captured = capsys.readouterr()
    assert code == 0
    assert "texts" in captured.out
    assert "42" in captured.out


def test_validate_reports_dim_mismatch(fixture_dir, tmp_path, capsys):
    code = main(
        ["validate"] + common_flags(fixture_dir, tmp_path) + ["--embedding-dim", "768"]
    )
    captured = capsys.readouterr()
    assert code == 1
    assert "morpheme_embeddings.lgem" in captured.err


def test_validate_missing_corpus(tmp_path, capsys):
    code = main(["validate", "--corpus", str(tmp_path / "nope.jsonl")])
    captured = capsys.readouterr()
    assert code == 1
    assert "error:" in captured.err


def test_build_graphs_deterministic(fixture_dir, tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["build-graphs"] + common_flags(fixture_dir, out_a)) == 0
    assert main(["build-graphs"] + common_flags(fixture_dir, out_b)) == 0
    files_a = sorted(p.name for p in (out_a / "graphs").iterdir())
    files_b = sorted(p.name for p in (out_b / "graphs").iterdir())
    assert files_a == files_b
    assert {"morpheme.adj", "pos.adj", "entity.adj"} <= set(files_a)
    for name in files_a:
        assert (out_a / "graphs" / name).read_bytes() == (out_b / "graphs" / name).read_bytes()


def test_train_evaluate_round_trip(fixture_dir, tmp_path, capsys):
    out = tmp_path / "run"
    flags = common_flags(fixture_dir, out)
    code = main(["train"] + flags + ["--max-epochs", "40", "--hidden", "16"])
    assert code == 0
    captured = capsys.readouterr()
    summary = json.loads(captured.out)
    assert summary["val_accuracy"] >= 0.5
    checkpoint_path = out / "checkpoint.lgck"
    assert checkpoint_path.is_file()
    assert (out / "history.json").is_file()
    loaded = load_checkpoint(checkpoint_path)
    assert loaded.kinds == ("morpheme", "pos", "entity")
    code = main(
        ["evaluate", "--checkpoint", str(checkpoint_path), "--split", "val"]
    )
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["accuracy"] == pytest.approx(summary["val_accuracy"])
    assert len(report["confusion"]) == 3


def test_train_with_ablation_flags_shrinks_checkpoint(fixture_dir, tmp_path, capsys):
    out = tmp_path / "run"
    flags = common_flags(fixture_dir, out)
    code = main(
        ["train"] + flags + ["--max-epochs", "10", "--hidden", "8", "--no-entity"]
    )
    capsys.readouterr()
    assert code == 0
    loaded = load_checkpoint(out / "checkpoint.lgck")
    assert loaded.kinds == ("morpheme", "pos")
    assert not any(name.startswith("entity.") for name in loaded.arrays)
    assert loaded.arrays["doc.w1"].shape[0] == 2 * 8


def test_history_reproducible(fixture_dir, tmp_path, capsys):
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        code = main(
            ["train"]
            + common_flags(fixture_dir, out)
            + ["--max-epochs", "12", "--hidden", "8"]
        )
        assert code == 0
        capsys.readouterr()
        outs.append((out / "history.json").read_text(encoding="utf-8"))
    assert outs[0] == outs[1]


def test_gradcheck_command(capsys):
    code = main(["gradcheck", "--seed", "5"])
    captured = capsys.readouterr()
    assert code == 0
    assert "max relative error" in captured.out


def test_synth_reproducible(tmp_path):
    args = ["synth", "--classes", "2", "--docs-per-class", "5", "--seed", "3"]
    main(args + ["--out", str(tmp_path / "s1")])
    main(args + ["--out", str(tmp_path / "s2")])
    for name in ("corpus.jsonl", "morpheme_embeddings.lgem", "entity_embeddings.lgem"):
        assert (tmp_path / "s1" / name).read_bytes() == (tmp_path / "s2" / name).read_bytes()


def test_config_file_with_flag_override(fixture_dir, tmp_path, capsys):
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "corpus": str(fixture_dir / "corpus.jsonl"),
                "morpheme_emb": str(fixture_dir / "morpheme_embeddings.lgem"),
                "entity_emb": str(fixture_dir / "entity_embeddings.lgem"),
                "min_freq": 1,
                "split_per_class": 6,
                "seed": 21,
                "max_epochs": 5,
                "hidden": 8,
                "out": str(tmp_path / "from_config"),
            }
        ),
        encoding="utf-8",
    )
    code = main(["train", "--config", str(config_path), "--max-epochs", "3"])
    capsys.readouterr()
    assert code == 0
    history = json.loads((tmp_path / "from_config" / "history.json").read_text())
    assert len(history["epochs"]) == 3


def test_unknown_config_key_rejected(tmp_path, capsys):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"not_a_key": 1}), encoding="utf-8")
    code = main(["validate", "--config", str(config_path)])
    captured = capsys.readouterr()
    assert code == 1
    assert "not_a_key" in captured.err


def test_ablate_grid(fixture_dir, tmp_path, capsys):
    out = tmp_path / "ablate_run"
    flags = common_flags(fixture_dir, out)
    code = main(["ablate"] + flags + ["--max-epochs", "6", "--hidden", "8"])
    captured = capsys.readouterr()
    assert code == 0
    payload = json.loads((out / "ablate" / "ablation.json").read_text())
    labels = [row["model"] for row in payload["results"]]
    assert labels == [
        "morpheme", "pos", "entity", "morpheme/pos", "morpheme/entity",
        "pos/entity", "w/o SemCon", "full",
    ]
    assert "| Model | ACC | F1 |" in captured.out
    entity_only = load_checkpoint(out / "ablate" / "entity" / "seed_21" / "checkpoint.lgck")
    assert entity_only.kinds == ("entity",)
    assert set(entity_only.arrays) == {"entity.w1", "entity.w2", "doc.w1", "doc.w2"}
    md = (out / "ablate" / "ablation.md").read_text(encoding="utf-8")
    assert md.count("|") > 20
