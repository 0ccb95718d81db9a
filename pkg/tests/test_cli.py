import json

import pytest

from synth import random_token_corpus, table1_corpus
from tamkit.cli import main
from tamkit.corpus import serialize_corpus
from tamkit.storage import load_model, save_model

import random


@pytest.fixture
def corpus_file(tmp_path):
    ds = random_token_corpus(random.Random(14), max_examples=60, n_labels=3)
    path = tmp_path / "corpus.tsv"
    path.write_text(serialize_corpus(ds), encoding="utf-8")
    return path


@pytest.fixture
def suffix_corpus_file(tmp_path):
    ds = table1_corpus(300, seed=4)
    path = tmp_path / "table1.tsv"
    path.write_text(serialize_corpus(ds), encoding="utf-8")
    return path


def read(path):
    return path.read_bytes()


class TestExitCodes:
    def test_knn_with_feature_set_one_is_usage_error(self, corpus_file, capsys):
        code = main(["cv", "--input", str(corpus_file), "--method", "knn",
                     "--features", "1", "--folds", "3"])
        assert code == 1
        assert "feature-set 2" in capsys.readouterr().err

    def test_missing_file_is_data_error(self, tmp_path):
        code = main(["cv", "--input", str(tmp_path / "absent.tsv"),
                     "--method", "dlist"])
        assert code == 2

    def test_malformed_corpus_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.tsv"
        bad.write_text("justonefield\n", encoding="utf-8")
        code = main(["distribution", "--input", str(bad)])
        assert code == 2
        assert "line 1" in capsys.readouterr().err

    def test_single_label_svm_is_training_error(self, tmp_path):
        path = tmp_path / "one.tsv"
        path.write_text("only\tあった\nonly\tいった\nonly\tうった\n",
                        encoding="utf-8")
        code = main(["eval", "--input", str(path), "--method", "svm"])
        assert code == 3

    def test_train_baseline_is_usage_error(self, corpus_file, tmp_path):
        code = main(["train", "--input", str(corpus_file), "--method",
                     "baseline", "--out", str(tmp_path / "m.json")])
        assert code == 1

    def test_unknown_flag_is_usage_error(self, capsys):
        assert main(["cv", "--bogus"]) == 1


class TestDeterminism:
    def test_cv_reports_are_byte_identical(self, corpus_file, tmp_path):
        outs = []
        for name in ("a.jsonl", "b.jsonl"):
            out = tmp_path / name
            code = main(["cv", "--input", str(corpus_file), "--method", "dlist",
                         "--features", "3", "--folds", "5", "--seed", "11",
                         "--out", str(out)])
            assert code == 0
            outs.append(read(out))
        assert outs[0] == outs[1]

    def test_svm_eval_reports_are_byte_identical(self, corpus_file, tmp_path):
        outs = []
        for name in ("a.jsonl", "b.jsonl"):
            out = tmp_path / name
            code = main(["eval", "--input", str(corpus_file), "--method", "svm",
                         "--d", "2", "--out", str(out)])
            assert code == 0
            outs.append(read(out))
        assert outs[0] == outs[1]

    def test_different_seed_changes_fold_records(self, corpus_file, tmp_path):
        outs = []
        for seed in ("1", "2"):
            out = tmp_path / f"s{seed}.jsonl"
            main(["cv", "--input", str(corpus_file), "--method", "dlist",
                  "--features", "3", "--folds", "5", "--seed", seed,
                  "--out", str(out)])
            outs.append(read(out))
        assert outs[0] != outs[1]


class TestReports:
    def test_report_structure(self, corpus_file, tmp_path):
        out = tmp_path / "r.jsonl"
        main(["cv", "--input", str(corpus_file), "--method", "maxent",
              "--features", "3", "--folds", "4", "--seed", "0",
              "--out", str(out)])
        records = [json.loads(line) for line in out.read_text().splitlines()]
        kinds = [r["record"] for r in records]
        assert kinds.count("fold") == 4
        assert kinds[-1] == "summary"
        summary = records[-1]
        assert summary["config"]["seed"] == 0
        assert summary["config"]["method"] == "maxent"
        assert summary["config"]["feature_set"] == 3
        assert summary["closed"] is False
        n_predictions = kinds.count("prediction")
        assert n_predictions == summary["total"]

    def test_eval_closed_flag(self, corpus_file, tmp_path):
        out = tmp_path / "r.jsonl"
        main(["eval", "--input", str(corpus_file), "--method", "dlist",
              "--out", str(out)])
        summary = json.loads(out.read_text().splitlines()[-1])
        assert summary["closed"] is True

    def test_eval_baseline_without_training(self, suffix_corpus_file, tmp_path):
        out = tmp_path / "r.jsonl"
        code = main(["eval", "--input", str(suffix_corpus_file), "--method",
                     "baseline", "--out", str(out)])
        assert code == 0
        summary = json.loads(out.read_text().splitlines()[-1])
        assert summary["precision"] == pytest.approx(0.78, abs=0.02)

    def test_distribution_output(self, suffix_corpus_file, tmp_path):
        out = tmp_path / "d.jsonl"
        assert main(["distribution", "--input", str(suffix_corpus_file),
                     "--out", str(out)]) == 0
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert records[0]["label"] == "present"
        assert abs(sum(r["rate"] for r in records) - 1.0) < 1e-9


class TestModelFiles:
    def test_train_then_eval_model(self, corpus_file, tmp_path):
        model_path = tmp_path / "model.json"
        assert main(["train", "--input", str(corpus_file), "--method", "svm",
                     "--features", "1", "--out", str(model_path)]) == 0
        out = tmp_path / "r.jsonl"
        assert main(["eval", "--input", str(corpus_file), "--model",
                     str(model_path), "--out", str(out)]) == 0
        summary = json.loads(out.read_text().splitlines()[-1])
        assert summary["config"]["method"] == "svm"
        assert summary["precision"] > 0.5

    def test_model_round_trip_all_methods(self, tmp_path):
        ds = random_token_corpus(random.Random(6), max_examples=30, n_labels=2)
        from tamkit.evaluate import LearnerSpec, fit
        from tamkit.features import FeatureSet
        for method, mode in (("knn", FeatureSet.FS2), ("dlist", FeatureSet.FS1),
                             ("maxent", FeatureSet.FS3), ("svm", FeatureSet.FS1)):
            model = fit(LearnerSpec(method, k=3), ds, mode)
            path = tmp_path / f"{method}.json"
            save_model(path, model)
            again = load_model(path)
            for ex in ds:
                assert model.predict(ex) == again.predict(ex)

    def test_bad_model_file(self, tmp_path, corpus_file):
        path = tmp_path / "m.json"
        path.write_text('{"format": "something-else"}', encoding="utf-8")
        assert main(["eval", "--input", str(corpus_file), "--model",
                     str(path)]) == 2


class TestAnalyze:
    def test_sign_test_and_effective_features(self, tmp_path):
        # method A sees only suffixes, method B additionally sees the flip
        # token, built exactly like the modality construction
        from synth import modality_corpus
        ds = modality_corpus(240, flip_rate=0.25, seed=9, n_stems=12)
        corpus_path = tmp_path / "c.tsv"
        corpus_path.write_text(serialize_corpus(ds), encoding="utf-8")
        report_a = tmp_path / "a.jsonl"
        report_b = tmp_path / "b.jsonl"
        base = ["cv", "--input", str(corpus_path), "--method", "svm",
                "--d", "1", "--folds", "4", "--seed", "3"]
        assert main(base + ["--features", "2", "--out", str(report_a)]) == 0
        assert main(base + ["--features", "1", "--out", str(report_b)]) == 0
        out = tmp_path / "analysis.jsonl"
        code = main(["analyze", "--input", str(corpus_path),
                     "--report-a", str(report_a), "--report-b", str(report_b),
                     "--features", "3", "--out", str(out)])
        assert code == 0
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert records[0]["record"] == "sign_test"
        features = [r["feature"] for r in records[1:]]
        from synth import MODAL_ADVERB
        assert MODAL_ADVERB in features


def test_cv_all_grid(tmp_path):
    ds = random_token_corpus(random.Random(30), max_examples=36, n_labels=2)
    # guarantee enough examples per fold
    while len(ds) < 18:
        ds = random_token_corpus(random.Random(31), max_examples=36, n_labels=2)
    path = tmp_path / "c.tsv"
    path.write_text(serialize_corpus(ds), encoding="utf-8")
    out = tmp_path / "table.txt"
    code = main(["cv", "--input", str(path), "--all", "--folds", "3",
                 "--seed", "0", "--out", str(out)])
    assert code == 0
    table = out.read_text()
    assert "knn (k=1)" in table
    assert "svm (d=2)" in table
    assert "baseline =" in table
    assert table.count("%") >= 2 * (5 + 3 * 4) + 1  # open+closed per grid cell
