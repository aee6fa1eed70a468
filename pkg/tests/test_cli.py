import json

import pytest

from lexsyn.cli import main

from conftest import DATA


def files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "manifest.json"}


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "gen-corpus" in capsys.readouterr().out


def test_unknown_command_exits_two():
    assert main(["bogus"]) == 2


def test_missing_required_flag_exits_two():
    assert main(["augment", "--out", "x"]) == 2


def test_unknown_config_key_exits_two(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"training": {"learning_rat": 0.1}}))
    assert main(["gen-corpus", "--out", str(tmp_path / "o"), "--config", str(cfg)]) == 2


def test_missing_input_exits_one(tmp_path):
    assert main(["validate", "--input", str(tmp_path / "nope.conllu"), "--out", str(tmp_path)]) == 1


def test_validate_sample(tmp_path):
    assert main(["validate", "--input", str(DATA / "sample.conllu"), "--out", str(tmp_path)]) == 0


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert main(["gen-corpus", "--out", str(out), "--train", "24", "--test", "12", "--seed", "3"]) == 0
    return out


def test_gen_corpus_deterministic_with_manifest(corpus, tmp_path):
    assert main(["gen-corpus", "--out", str(tmp_path), "--train", "24", "--test", "12", "--seed", "3"]) == 0
    assert files(tmp_path) == files(corpus)
    man = json.loads((corpus / "manifest.json").read_text())
    assert man["command"] == "gen-corpus" and man["seed"] == 3
    assert man["config"]["corpus"]["train"] == 24
    assert "numpy" in man["versions"]


def test_augment_byte_identical(corpus, tmp_path):
    args = ["augment", "--input", str(corpus / "en.train.conllu"), "--lang", "en",
            "--lexicon", f"fr={corpus / 'lexicon.en-fr.txt'}", "--lexicon", f"tr={corpus / 'lexicon.en-tr.txt'}",
            "--alpha", "0.5", "--cs-mode", "random", "--seed", "9"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert files(tmp_path / "a") == files(tmp_path / "b")
    assert (tmp_path / "a" / "augmented.conllu").read_bytes() != (corpus / "en.train.conllu").read_bytes()


def test_train_eval_transfer(corpus, tmp_path):
    run = tmp_path / "run"
    assert main(["train", "--corpus", str(corpus), "--out", str(run), "--epochs", "1", "--lr", "1e-3",
                 "--batch-size", "8"]) == 0
    for name in ("model.json", "log.jsonl", "metrics.jsonl", "manifest.json"):
        assert (run / name).exists()
    assert main(["eval", "--model", str(run / "model.json"), "--corpus", str(corpus), "--out", str(tmp_path / "e")]) == 0
    assert main(["transfer-matrix", "--model", str(run / "model.json"), "--corpus", str(corpus),
                 "--out", str(tmp_path / "t")]) == 0
    assert (tmp_path / "t" / "transfer.csv").read_text().startswith("accuracy,en,fr,tr")
    assert main(["similarity", "--model", str(run / "model.json"), "--corpus", str(corpus),
                 "--out", str(tmp_path / "s")]) == 0


def test_gradcheck_passes(tmp_path):
    assert main(["gradcheck", "--samples", "20", "--out", str(tmp_path)]) == 0
