import csv
import json

import pytest

from gmmlda.cli import build_parser, inspect_model, main, read_config
from gmmlda.model import read_assignments, read_model

SYNTH = ["synth", "--k", "3", "--t", "2", "--docs", "12", "--vocab-size", "30",
         "--sentences", "4", "--tokens", "6", "--gamma", "0.5", "--lambda0", "1.0", "--seed", "0"]


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "syn"
    assert main(SYNTH + ["--labeled-fraction", "0.25", "--out", str(out)]) == 0
    return out


def train(syn, out, *extra):
    return main(["train", "--corpus", str(syn / "corpus.jsonl"), "--vocab", str(syn / "vocab.json"),
                 "--k", "3", "--t", "2", "--iters", "20", "--report-every", "5",
                 "--seed", "1,2", "--out", str(out), *extra])


class TestSynth:
    def test_outputs(self, synth_dir):
        for name in ("corpus.jsonl", "vocab.json", "truth.jsonl", "split.json"):
            assert (synth_dir / name).exists()
        ids = json.loads((synth_dir / "split.json").read_text())["labeled_ids"]
        assert len(ids) == 3
        truth = read_assignments(synth_dir / "truth.jsonl")
        assert len(truth) == 12 and all(min(r["z"]) >= 1 for r in truth)


class TestTrainEval:
    def test_unsupervised_round_trip(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "run"
        assert train(synth_dir, out) == 0
        for seed in (1, 2):
            d = out / f"seed_{seed}"
            dump = read_model(d / "model.json")
            assert dump["K"] == 3 and dump["seed"] == seed
            rows = list(csv.reader(open(d / "diagnostics.csv")))
            assert rows[0] == ["iteration", "joint_log_score", "intent_fraction", "mean_rho"]
            assert [r[0] for r in rows[1:]] == ["5", "10", "15", "20"]
        capsys.readouterr()
        assert main(["eval", "--out", str(out)]) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert len(metrics["runs"]) == 2 and "accuracy" not in metrics["mean"]
        assert -1 <= metrics["ari"] <= 1
        printed = json.loads(capsys.readouterr().out)
        assert printed == metrics["mean"]

    def test_deterministic(self, synth_dir, tmp_path):
        assert train(synth_dir, tmp_path / "a") == 0
        assert train(synth_dir, tmp_path / "b") == 0
        for seed in (1, 2):
            a = (tmp_path / "a" / f"seed_{seed}" / "assignments.jsonl").read_bytes()
            b = (tmp_path / "b" / f"seed_{seed}" / "assignments.jsonl").read_bytes()
            assert a == b

    def test_parallel_matches_serial(self, synth_dir, tmp_path):
        assert train(synth_dir, tmp_path / "a") == 0
        assert train(synth_dir, tmp_path / "b", "--jobs", "2") == 0
        a = (tmp_path / "a" / "seed_2" / "assignments.jsonl").read_bytes()
        assert a == (tmp_path / "b" / "seed_2" / "assignments.jsonl").read_bytes()

    def test_supervised(self, synth_dir, tmp_path):
        out = tmp_path / "sup"
        assert train(synth_dir, out, "--labeled-split", str(synth_dir / "split.json"),
                     "--prediction", "mode:5") == 0
        dump = read_model(out / "seed_1" / "model.json")
        assert dump["supervised"] is True
        labeled = set(json.loads((synth_dir / "split.json").read_text())["labeled_ids"])
        truth = {r["id"]: r["z"] for r in read_assignments(synth_dir / "truth.jsonl")}
        for rec in read_assignments(out / "seed_1" / "assignments.jsonl"):
            if rec["id"] in labeled:
                assert rec["z"] == truth[rec["id"]]
        assert main(["eval", "--out", str(out)]) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert 0 <= metrics["mean"]["accuracy"] <= 1

    @pytest.mark.parametrize("variant", ["intent_only", "uniform_order"])
    def test_variants(self, synth_dir, tmp_path, variant):
        out = tmp_path / variant
        assert train(synth_dir, out, "--variant", variant) == 0
        dump = read_model(out / "seed_1" / "model.json")
        if variant == "intent_only":
            assert all(row[1] == 0 for row in dump["word_type_counts"])
        else:
            assert dump["rho"] == [0.0, 0.0]

    def test_entropic(self, synth_dir, tmp_path):
        assert train(synth_dir, tmp_path / "e", "--c", "1.0") == 0
        assert read_model(tmp_path / "e" / "seed_1" / "model.json")["hyper"]["c"] == 1.0


class TestErrors:
    def test_missing_corpus(self, tmp_path, capsys):
        assert main(["train", "--corpus", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path)]) != 0
        assert "not found" in capsys.readouterr().err

    def test_supervised_without_labels(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text(json.dumps({"id": "a", "sentences": [{"tokens": ["aa", "bb"]}]}) + "\n")
        split = tmp_path / "s.json"
        split.write_text(json.dumps({"labeled_ids": ["a"]}))
        assert main(["train", "--corpus", str(p), "--no-filter", "--labeled-split", str(split),
                     "--iters", "1", "--out", str(tmp_path / "o")]) == 1

    def test_bad_prediction(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["train", "--out", "x", "--prediction", "median"])

    def test_eval_without_runs(self, synth_dir):
        assert main(["eval", "--corpus", str(synth_dir / "corpus.jsonl"), "--vocab",
                     str(synth_dir / "vocab.json"), "--out", str(synth_dir)]) == 1

    def test_inspect_bad_n(self, tmp_path):
        assert main(["inspect", "--model", str(tmp_path / "m.json"), "--n", "3"]) == 1


class TestConfig:
    def test_precedence(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# defaults\nk = 7\niters = 50\nno-filter = true\n")
        args = build_parser(read_config(cfg)).parse_args(["train", "--out", "o", "--k", "4"])
        assert args.k == 4 and args.iters == 50 and args.no_filter is True
        args = build_parser().parse_args(["train", "--out", "o"])
        assert args.k == 5 and args.iters == 2000 and args.seed == [1, 2, 3, 4, 5]

    def test_config_anywhere(self, synth_dir, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("k = 3\nt = 2\niters = 3\nseed = 9\n")
        out = tmp_path / "o"
        assert main(["train", "--corpus", str(synth_dir / "corpus.jsonl"), "--vocab",
                     str(synth_dir / "vocab.json"), "--out", str(out), "--config", str(cfg)]) == 0
        assert (out / "seed_9" / "model.json").exists()

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("just words\n")
        assert main(["--config", str(cfg), "inspect", "--model", "x"]) == 2


class TestPreprocessInspect:
    def test_preprocess(self, tmp_path, capsys):
        p = tmp_path / "c.jsonl"
        sent = {"tokens": ["Alpha", "beta", "gamma", "delta", "eps", "of"], "label": "M"}
        p.write_text(json.dumps({"id": "a", "sentences": [sent] * 3}) + "\n")
        stop = tmp_path / "stop.txt"
        stop.write_text("of\n")
        assert main(["preprocess", "--corpus", str(p), "--stopwords", str(stop), "--out", str(tmp_path / "o")]) == 0
        stats = json.loads(capsys.readouterr().out)
        assert stats == {"docs": 1, "sentences": 3, "tokens": 15, "vocab": 5}

    def test_inspect(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "sup"
        assert train(synth_dir, out, "--labeled-split", str(synth_dir / "split.json")) == 0
        dump = read_model(out / "seed_1" / "model.json")
        info = inspect_model(dump, 1000)
        assert all(len(r["words"]) == 30 for r in info["intents"] + info["topics"])
        assert [r["intent"] for r in info["intents"]] == dump["pi0"]
        assert [r["no"] for r in info["intents"]] == [0, 1, 2]
        info = inspect_model(dump, 4)
        assert all(len(r["words"]) == 4 for r in info["intents"])
        assert len(info["word_types"]["intent"]) <= 4
        capsys.readouterr()
        assert main(["inspect", "--model", str(out / "seed_1" / "model.json"), "--n", "3"]) == 0
        text = capsys.readouterr().out
        assert text.startswith("canonical order:") and "topics:" in text
        with pytest.raises(ValueError):
            inspect_model(dump, 0)
