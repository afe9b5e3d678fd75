from __future__ import annotations

import json
import subprocess
import sys
import time
from pathlib import Path

import pytest

from conftest import DATA
from quotemark.cli import RunConfig, run_command
from quotemark.corpus import save_bundle
from synthetic import make_corpus

FIXTURE = str(DATA / "two_paragraphs.json")


def _rows(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]


def test_quotes_command(tmp_path):
    out = tmp_path / "quotes.jsonl"
    assert run_command(["quotes", "--corpus", FIXTURE, "--out", str(out)]) == 0
    (row,) = _rows(out)
    assert (row["novel_id"], row["start"], row["end"]) == ("two_paragraphs", 0, 19)
    manifest = json.loads((tmp_path / "quotes.jsonl.manifest.json").read_text())
    assert manifest["command"] == "quotes"
    assert set(manifest["outputs"]) == {"quotes.jsonl"}
    assert RunConfig.from_json(json.loads((tmp_path / "quotes.jsonl.config.json").read_text())) == RunConfig()


def test_evaluate_charid_worked_example(tmp_path, capsys):
    gold = [["Elizabeth Bennet", "Eliza", "Lizzie", "Liz"], ["Mary Bennet", "Mary"], ["The Queen"]]
    pred = [["Elizabeth Bennet", "Eliza"], ["Liz", "Lizzie"], ["Mary Bennet", "Mary"]]
    (tmp_path / "gold.json").write_text(json.dumps(gold))
    (tmp_path / "pred.json").write_text(json.dumps(pred))
    code = run_command(["evaluate", "--task", "charid", "--gold", str(tmp_path / "gold.json"), "--pred", str(tmp_path / "pred.json")])
    assert code == 0
    assert "CR 0.667 h 1.000 c 1.500" in capsys.readouterr().out


def test_attribute_and_evaluate(tmp_path, capsys):
    out = tmp_path / "att.jsonl"
    assert run_command(["attribute", "--corpus", FIXTURE, "--out", str(out)]) == 0
    (row,) = _rows(out)
    assert (row["quote_id"], row["predicted_char_id"], row["method"]) == ("Q0", 1, "explicit_rule")
    assert json.loads((tmp_path / "att.unresolved.json").read_text())["mean"] == 0.0
    assert run_command(["evaluate", "--task", "attribution", "--gold", FIXTURE, "--pred", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["accuracy"]["overall"] == 1.0


def test_characters_and_mentions(tmp_path):
    assert run_command(["characters", "--corpus", FIXTURE, "--out", str(tmp_path / "c.json"), "--min-count", "1"]) == 0
    chars = json.loads((tmp_path / "c.json").read_text())["novels"]["two_paragraphs"]
    assert chars
    assert run_command(["mentions", "--corpus", FIXTURE, "--out", str(tmp_path / "m.jsonl")]) == 0
    assert len(_rows(tmp_path / "m.jsonl")) == 5


def test_usage_and_data_errors(tmp_path):
    assert run_command(["quotes", "--bogus"]) == 2
    assert run_command(["quotes", "--corpus", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x.jsonl")]) == 1
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for b in make_corpus(3, 10):
        save_bundle(b, corpus / f"{b.novel_id}.json")
    assert run_command(["train", "--corpus", str(corpus), "--split", "novels", "--out", str(tmp_path / "t")]) == 1


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"seed": 7, "seq": {"epochs": 2}}))
    out = tmp_path / "q"
    assert run_command(["quotes", "--corpus", FIXTURE, "--config", str(cfg), "--seed", "9", "--out", str(out)]) == 0
    written = RunConfig.from_json(json.loads((out / "config.json").read_text()))
    assert (written.seed, written.seq.epochs, written.seq.seed) == (9, 2, 9)
    cfg.write_text(json.dumps({"sede": 1}))
    assert run_command(["quotes", "--corpus", FIXTURE, "--config", str(cfg), "--out", str(out)]) == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["ingest", "--corpus", FIXTURE],
        ["characters", "--corpus", FIXTURE],
        ["quotes", "--corpus", FIXTURE],
        ["mentions", "--corpus", FIXTURE],
        ["attribute", "--corpus", FIXTURE],
        ["attribute", "--corpus", FIXTURE, "--method", "nearest"],
        ["train", "--corpus", FIXTURE],
        ["report", "--corpus", FIXTURE],
    ],
)
def test_every_command_is_fast_on_the_fixture(tmp_path, argv):
    t0 = time.perf_counter()
    assert run_command(argv + ["--out", str(tmp_path / "out")]) == 0
    assert time.perf_counter() - t0 < 1.0
    assert (tmp_path / "out" / "manifest.json").exists()


def test_report_is_byte_identical_across_runs(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for b in make_corpus(3, 30):
        save_bundle(b, corpus / f"{b.novel_id}.json")
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"seq": {"epochs": 5}}))
    for name in ("a", "b"):
        assert run_command(["report", "--corpus", str(corpus), "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "attributions_seq_model_quotations.jsonl" in files and "report.json" in files
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "quotemark", "quotes", "--corpus", FIXTURE, "--out", str(tmp_path / "q.jsonl")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert len(_rows(tmp_path / "q.jsonl")) == 1
