"""Command-line runs: exit codes, written files and reproducibility."""

import json
import logging

import pytest

from config import RESOLVED_CONFIG_FILE, RUN_SPEC_FILE, RunConfig, RunSpec, update_model_config
from databench.corpus_io import MANIFEST_FILE, corpus_file, read_corpus
from evaluation.baselines import random_baseline
from errors import EXIT_CONFIG, EXIT_MISSING_FILE, EXIT_OK, EXIT_USAGE
from main import dispatch, parse_layers, replay_argv
from runtime.checkpoint import load_checkpoint

TINY_BENCH = [
    "--set", "bench.n_classes=20",
    "--set", "bench.videos_per_class=3",
    "--set", "bench.n_min=20",
    "--set", "bench.n_max=40",
    "--set", "bench.d_f=8",
    "--set", "bench.d_sig=4",
    "--set", "bench.m_min=3",
    "--set", "bench.m_max=5",
    "--set", "bench.min_len=3",
    "--set", "bench.max_len=40",
    "--set", "bench.clutter_regions=1",
]
MICRO_MODEL = [
    "--set", "model.d_f=8",
    "--set", "model.d_r=8",
    "--set", "model.d_g=8",
    "--set", "model.d_model=8",
    "--set", "model.heads=2",
    "--set", "model.layers=1",
    "--set", "model.window=2",
    "--batch", "8",
    "--epochs", "1",
    "--max-steps", "2",
]


@pytest.fixture(autouse=True)
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for handler in list(root.handlers):
        if handler not in handlers:
            root.removeHandler(handler)
    root.setLevel(level)


@pytest.fixture
def corpus(tmp_path):
    out = tmp_path / "corpus"
    assert dispatch(["synth", "--seed", "7", "--out", str(out), *TINY_BENCH]) == EXIT_OK
    return out


class TestSynth:

    def test_writes_splits_manifest_and_run_files(self, corpus, capsys):
        for name in ("train.jsonl", "valid.jsonl", "test.jsonl", MANIFEST_FILE, RESOLVED_CONFIG_FILE, RUN_SPEC_FILE):
            assert (corpus / name).exists()
        resolved = RunConfig.model_validate_json((corpus / RESOLVED_CONFIG_FILE).read_text(encoding="utf-8"))
        assert resolved.bench.n_classes == 20
        assert resolved.model.seed == 7
        spec = json.loads((corpus / RUN_SPEC_FILE).read_text(encoding="utf-8"))
        assert spec["subcommand"] == "synth" and spec["seed"] == 7

    def test_rerun_is_byte_identical(self, tmp_path, corpus):
        again = tmp_path / "again"
        assert dispatch(["synth", "--seed", "7", "--out", str(again), *TINY_BENCH]) == EXIT_OK
        for split in ("train", "valid", "test"):
            assert corpus_file(corpus, split).read_bytes() == corpus_file(again, split).read_bytes()
        assert (corpus / MANIFEST_FILE).read_bytes() == (again / MANIFEST_FILE).read_bytes()

    def test_resolved_config_replays_the_run(self, tmp_path, corpus):
        replay = tmp_path / "replay"
        assert dispatch(["synth", "--config", str(corpus / RESOLVED_CONFIG_FILE), "--out", str(replay)]) == EXIT_OK
        assert corpus_file(corpus, "test").read_bytes() == corpus_file(replay, "test").read_bytes()


class TestEval:

    def test_random_baseline_matches_library(self, tmp_path, corpus, capsys):
        out = tmp_path / "random"
        code = dispatch(["eval", "--data", str(corpus), "--baseline", "random", "--seed", "7", "--out", str(out)])
        assert code == EXIT_OK
        expected = random_baseline(read_corpus(corpus_file(corpus, "test")), 7)
        assert json.loads((out / "eval_report.json").read_text(encoding="utf-8")) == expected.model_dump(mode="json")
        assert "Random" in capsys.readouterr().out

    def test_checkpoint_needed_without_baseline(self, tmp_path, corpus):
        assert dispatch(["eval", "--data", str(corpus), "--out", str(tmp_path / "e")]) == EXIT_CONFIG


class TestTrainPredict:

    def test_train_eval_predict(self, tmp_path, corpus, capsys):
        run = tmp_path / "train"
        assert dispatch(["train", "--data", str(corpus), "--out", str(run), *MICRO_MODEL]) == EXIT_OK
        assert (run / "model.ckpt").exists() and (run / "train_log.json").exists()

        rerun = tmp_path / "train2"
        assert dispatch(["train", "--data", str(corpus), "--out", str(rerun), *MICRO_MODEL]) == EXIT_OK
        assert (run / "model.ckpt").read_bytes() == (rerun / "model.ckpt").read_bytes()

        evaluated = tmp_path / "eval"
        code = dispatch(["eval", "--data", str(corpus), "--checkpoint", str(run / "model.ckpt"),
                         "--out", str(evaluated)])
        assert code == EXIT_OK
        assert json.loads((evaluated / "eval_report.json").read_text(encoding="utf-8"))["count"] > 0

        capsys.readouterr()
        predicted = tmp_path / "predict"
        code = dispatch(["predict", "--data", str(corpus), "--checkpoint", str(run / "model.ckpt"),
                         "--decode", "constrained", "--out", str(predicted)])
        assert code == EXIT_OK
        s, e = (int(x) for x in capsys.readouterr().out.split())
        assert s <= e
        prediction = json.loads((predicted / "prediction.json").read_text(encoding="utf-8"))
        assert (prediction["s"], prediction["e"]) == (s, e)
        assert abs(sum(prediction["p_s"]) - 1.0) < 1e-9


class TestReplay:
    """resolved_config.json plus run_spec.json repeat a run without its original flags."""

    @pytest.fixture
    def checkpoint(self, tmp_path, corpus):
        run = tmp_path / "train"
        assert dispatch(["train", "--data", str(corpus), "--out", str(run), *MICRO_MODEL]) == EXIT_OK
        return run / "model.ckpt"

    @staticmethod
    def replay(run, out):
        spec = RunSpec.model_validate_json((run / RUN_SPEC_FILE).read_text(encoding="utf-8"))
        return dispatch(replay_argv(spec, run / RESOLVED_CONFIG_FILE, out))

    def test_eval_records_the_checkpoint_config(self, tmp_path, corpus, checkpoint):
        run = tmp_path / "eval"
        code = dispatch(["eval", "--data", str(corpus), "--checkpoint", str(checkpoint), "--split", "valid",
                         "--decode", "constrained", "--window", "1", "--out", str(run)])
        assert code == EXIT_OK

        resolved = RunConfig.model_validate_json((run / RESOLVED_CONFIG_FILE).read_text(encoding="utf-8"))
        expected = update_model_config(load_checkpoint(checkpoint).config, decode="constrained", window=1)
        assert resolved.model == expected
        spec = json.loads((run / RUN_SPEC_FILE).read_text(encoding="utf-8"))
        assert spec["arguments"] == {"data": str(corpus), "checkpoint": str(checkpoint), "split": "valid"}
        assert spec["flags"] == {"window": 1, "decode": "constrained"}

        again = tmp_path / "eval-again"
        assert self.replay(run, again) == EXIT_OK
        assert (run / "eval_report.json").read_bytes() == (again / "eval_report.json").read_bytes()

    def test_window_flag_reaches_the_evaluated_model(self, tmp_path, corpus, checkpoint):
        starts = []
        for window in ("0", "30"):
            out = tmp_path / f"w{window}"
            assert dispatch(["predict", "--data", str(corpus), "--checkpoint", str(checkpoint),
                             "--window", window, "--out", str(out)]) == EXIT_OK
            starts.append(json.loads((out / "prediction.json").read_text(encoding="utf-8"))["p_s"])
        assert starts[0] != starts[1]

    def test_predict_replays(self, tmp_path, corpus, checkpoint):
        sample_id = read_corpus(corpus_file(corpus, "test"))[-1].sample_id
        run = tmp_path / "predict"
        assert dispatch(["predict", "--data", str(corpus), "--checkpoint", str(checkpoint),
                         "--sample-id", sample_id, "--out", str(run)]) == EXIT_OK
        again = tmp_path / "predict-again"
        assert self.replay(run, again) == EXIT_OK
        assert json.loads((again / "prediction.json").read_text(encoding="utf-8"))["id"] == sample_id
        assert (run / "prediction.json").read_bytes() == (again / "prediction.json").read_bytes()

    def test_sweep_replays(self, tmp_path, corpus):
        run = tmp_path / "sweep"
        assert dispatch(["sweep", "--data", str(corpus), "--layers", "1,2", "--out", str(run), *MICRO_MODEL]) == EXIT_OK
        spec = json.loads((run / RUN_SPEC_FILE).read_text(encoding="utf-8"))
        assert spec["arguments"] == {"data": str(corpus), "layers": "1,2"}

        again = tmp_path / "sweep-again"
        assert self.replay(run, again) == EXIT_OK
        for name in ("sweep.csv", "sweep.json"):
            assert (run / name).read_bytes() == (again / name).read_bytes()

    def test_random_baseline_replays(self, tmp_path, corpus):
        run = tmp_path / "random"
        assert dispatch(["eval", "--data", str(corpus), "--baseline", "random", "--seed", "11",
                         "--out", str(run)]) == EXIT_OK
        again = tmp_path / "random-again"
        assert self.replay(run, again) == EXIT_OK
        assert (run / "eval_report.json").read_bytes() == (again / "eval_report.json").read_bytes()


class TestGradcheck:

    def test_micro_config_passes(self, tmp_path, capsys):
        out = tmp_path / "gc"
        assert dispatch(["gradcheck", "--max-entries", "6", "--out", str(out)]) == EXIT_OK
        assert "max relative error" in capsys.readouterr().out
        report = json.loads((out / "gradcheck.json").read_text(encoding="utf-8"))
        assert report["passed"] and report["max_error"] < 1e-4


class TestFailures:

    def test_usage_errors(self, tmp_path):
        assert dispatch([]) == EXIT_USAGE
        assert dispatch(["train", "--out", str(tmp_path)]) == EXIT_USAGE
        assert dispatch(["sweep", "--data", str(tmp_path), "--layers", "0..2"]) == EXIT_USAGE

    def test_missing_corpus(self, tmp_path):
        code = dispatch(["eval", "--data", str(tmp_path / "nowhere"), "--baseline", "random",
                         "--out", str(tmp_path / "out")])
        assert code == EXIT_MISSING_FILE

    def test_bad_config(self, tmp_path):
        assert dispatch(["synth", "--set", "model.dropout=0.5", "--out", str(tmp_path)]) == EXIT_CONFIG
        assert dispatch(["synth", "--set", "model.heads=3", "--out", str(tmp_path)]) == EXIT_CONFIG


class TestParseLayers:

    def test_forms(self):
        assert parse_layers("1..7") == [1, 2, 3, 4, 5, 6, 7]
        assert parse_layers("1,3,5") == [1, 3, 5]
        assert parse_layers("2") == [2]
