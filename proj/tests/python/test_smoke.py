import json
import os
import subprocess

import pydess
import pytest


def test_parse_and_serialize_roundtrip():
    line = "the food was great####[([1], [3], 'POS')]"
    s = pydess.parse_aste_line(line)
    assert s.tokens == ["the", "food", "was", "great"]
    assert len(s.gold) == 1
    t = s.gold[0]
    assert (t.aspect.start, t.aspect.end) == (1, 1)
    assert t.sentiment == pydess.Sentiment.POS
    assert pydess.serialize_sentence(s) == line


def test_parse_rejects_bad_input():
    with pytest.raises(Exception):
        pydess.parse_aste_line("no separator")
    with pytest.raises(Exception):
        pydess.parse_aste_line("a b####[([0], [5], 'POS')]")


def test_synthetic_corpus_stats():
    corpus = pydess.synthetic_corpus(16, 7)
    assert len(corpus) == 16
    stats = pydess.dataset_stats(corpus)
    assert stats.num_sentences == 16
    assert stats.pos + stats.neu + stats.neg == stats.num_triplets
    # generator is deterministic under a fixed seed
    again = pydess.synthetic_corpus(16, 7)
    assert [s.tokens for s in again] == [s.tokens for s in corpus]


def test_enumerate_spans():
    spans = pydess.enumerate_spans(5, 3)
    assert len(spans) == 5 + 4 + 3
    assert all(s.width() <= 3 for s in spans)


def test_exact_match():
    t = pydess.Triplet(pydess.Span(1, 1), pydess.Span(3, 3), pydess.Sentiment.POS)
    wrong = pydess.Triplet(pydess.Span(1, 1), pydess.Span(3, 3), pydess.Sentiment.NEG)
    perfect = pydess.exact_match({"s1": [t]}, {"s1": [t]})
    assert perfect.f1 == 1.0
    miss = pydess.exact_match({"s1": [wrong]}, {"s1": [t]})
    assert miss.tp == 0 and miss.fp == 1 and miss.fn == 1


@pytest.fixture(scope="module")
def cli():
    path = os.environ.get("DESS_CLI")
    if not path or not os.path.exists(path):
        pytest.skip("DESS_CLI not set")
    return path


def run(cli, *args):
    out = subprocess.run([cli, *args], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    return out.stdout


def test_cli_pipeline(cli, tmp_path):
    data = tmp_path / "data.txt"
    ckpt = tmp_path / "model.ckpt"
    cfg = tmp_path / "cfg.json"
    preds = tmp_path / "preds.jsonl"
    attn_dir = tmp_path / "attn"

    run(cli, "gen-synth", "--out", str(data), "--n", "8", "--seed", "3")
    stats = json.loads(run(cli, "stats", "--data", str(data)))
    assert stats["sentences"] == 8
    assert stats["pos"] + stats["neu"] + stats["neg"] == stats["triplets"]

    cfg.write_text(json.dumps({"train": {"epochs": 2, "patience": 2}}))
    summary = json.loads(
        run(cli, "train", "--data", str(data), "--preset", "toy",
            "--config", str(cfg), "--checkpoint", str(ckpt), "--seed", "5")
    )
    assert summary["epochs_run"] == 2
    assert ckpt.exists()

    report = json.loads(run(cli, "eval", "--data", str(data), "--checkpoint", str(ckpt)))
    assert 0.0 <= report["metrics"]["f1"] <= 1.0
    assert all(v >= 0 for v in report["errors"].values())

    run(cli, "predict", "--data", str(data), "--checkpoint", str(ckpt),
        "--out", str(preds))
    lines = [json.loads(l) for l in preds.read_text().splitlines()]
    assert len(lines) == 8
    assert all("id" in l and "triplets" in l for l in lines)

    # module predictions agree with the CLI output
    module_preds = pydess.predict_file(str(ckpt), str(data))
    for l in lines:
        got = {
            ((t.aspect.start, t.aspect.end), (t.opinion.start, t.opinion.end),
             str(t.sentiment).rsplit(".", 1)[-1])
            for t in module_preds[l["id"]]
        }
        want = {
            (tuple(t["aspect"]), tuple(t["opinion"]), t["sentiment"])
            for t in l["triplets"]
        }
        assert got == want

    run(cli, "attn-export", "--data", str(data), "--checkpoint", str(ckpt),
        "--out", str(attn_dir), "--layer", "-1", "--head", "mean", "--pgm")
    csvs = sorted(attn_dir.glob("*.csv"))
    assert len(csvs) == 8
    first = csvs[0].read_text().strip().splitlines()
    row = [float(x) for x in first[0].split(",")]
    assert abs(sum(row) - 1.0) < 1e-4  # CSV text precision
    assert len(sorted(attn_dir.glob("*.pgm"))) == 8
