"""Exit codes, file outputs, and end-to-end wiring of the relabel CLI."""

import json
import os

import pytest

from relabel.active_loop import ReviewDecision
from relabel.corpus import DEFAULT_TAG_SET, load_conll
from relabel.noise_lab import read_ledger
from relabel.service.cli import main
from relabel.service.store import QueueStore
from relabel.tagger import load_model
from relabel.tagger.features import STUDENT, TEACHER

TS = DEFAULT_TAG_SET

FAST = ["--epochs", "2", "--learning-rate", "0.5"]
SMALL = ["--epochs", "8", "--learning-rate", "0.5"]


def run(tmp_path, *argv):
    return main(["--data-dir", str(tmp_path), *argv])


class TestSynthAndIngest:
    def test_synth_writes_train_corpus(self, tmp_path, capsys):
        assert run(tmp_path, "synth", "--n", "20", "--seed", "1") == 0
        corpus = load_conll(tmp_path / "train.conll", TS)
        assert len(corpus) == 20
        assert "wrote 20 utterances" in capsys.readouterr().out

    def test_synth_strip_writes_unlabeled_pool(self, tmp_path):
        assert run(tmp_path, "synth", "--n", "15", "--strip") == 0
        pool = load_conll(tmp_path / "unlabeled.conll", TS, split="unlabeled")
        assert len(pool) == 15
        assert all(all(t == 0 for t in u.gold_tags) for u in pool)

    def test_ingest_canonicalizes(self, tmp_path, capsys):
        source = tmp_path / "raw.conll"
        source.write_text("alpha B-ORG\nsystems I-ORG\n\ncall O\nbob B-PER\n\n")
        assert run(tmp_path, "ingest", str(source)) == 0
        corpus = load_conll(tmp_path / "train.conll", TS)
        assert len(corpus) == 2
        assert "ingested 2 utterances" in capsys.readouterr().out

    def test_ingest_missing_file_exits_2(self, tmp_path, capsys):
        assert run(tmp_path, "ingest", str(tmp_path / "absent.conll")) == 2
        assert "error:" in capsys.readouterr().err

    def test_ingest_malformed_exits_2(self, tmp_path, capsys):
        source = tmp_path / "raw.conll"
        source.write_text("alpha B-ORG extra-column\n\n")
        assert run(tmp_path, "ingest", str(source)) == 2
        assert "error:" in capsys.readouterr().err

    def test_env_var_sets_data_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("RELABEL_DATA_DIR", str(tmp_path / "from-env"))
        assert main(["synth", "--n", "5"]) == 0
        assert (tmp_path / "from-env" / "train.conll").exists()

    def test_custom_entity_types(self, tmp_path):
        source = tmp_path / "raw.conll"
        source.write_text("paris B-LOC\n\n")
        assert main([
            "--data-dir", str(tmp_path), "--entity-types", "PER,LOC",
            "ingest", str(source),
        ]) == 0


class TestUsageErrors:
    def test_unknown_subcommand_exits_1(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as err:
            run(tmp_path, "frobnicate")
        assert err.value.code == 1
        assert "usage" in capsys.readouterr().err

    def test_missing_required_flag_exits_1(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            run(tmp_path, "corrupt")
        assert err.value.code == 1

    def test_no_subcommand_exits_1(self):
        with pytest.raises(SystemExit) as err:
            main([])
        assert err.value.code == 1


class TestFoldsCommand:
    def test_writes_assignment(self, tmp_path, capsys):
        run(tmp_path, "synth", "--n", "10")
        assert run(tmp_path, "folds", "--folds", "5", "--seed", "3") == 0
        payload = json.loads((tmp_path / "folds.json").read_text())
        assert payload["k"] == 5 and payload["seed"] == 3
        assert len(payload["assignment"]) == 10
        assert "sizes 2/2/2/2/2" in capsys.readouterr().out

    def test_missing_corpus_exits_2(self, tmp_path):
        assert run(tmp_path, "folds") == 2


class TestCorruptCommand:
    def test_writes_corpus_and_ledger(self, tmp_path, capsys):
        run(tmp_path, "synth", "--n", "60", "--seed", "3")
        assert run(tmp_path, "corrupt", "--rate", "0.2", "--seed", "1") == 0
        corrupted = load_conll(tmp_path / "corrupted.conll", TS)
        ledger = read_ledger(tmp_path / "ledger.jsonl")
        assert len(corrupted) == 60
        assert len(ledger.entries) > 0
        assert f"corrupted {len(ledger.entries)} of 60" in capsys.readouterr().out

    def test_rate_rounding_to_zero_exits_2(self, tmp_path):
        run(tmp_path, "synth", "--n", "10")
        assert run(tmp_path, "corrupt", "--rate", "0.01") == 2

    def test_bad_rule_syntax_exits_2(self, tmp_path):
        run(tmp_path, "synth", "--n", "10")
        assert run(tmp_path, "corrupt", "--rate", "0.5", "--types", "ORG") == 2


class TestTrainEvalCommands:
    def test_train_saves_model(self, tmp_path, capsys):
        run(tmp_path, "synth", "--n", "30")
        assert run(tmp_path, "train", *FAST) == 0
        weights = load_model(tmp_path / "teacher.crf")
        assert weights.capacity == TEACHER
        assert "fingerprint" in capsys.readouterr().out

    def test_student_capacity_and_out_path(self, tmp_path):
        run(tmp_path, "synth", "--n", "30")
        out = tmp_path / "compact.crf"
        assert run(
            tmp_path, "train", "--capacity", "student", "--out", str(out), *FAST
        ) == 0
        assert load_model(out).capacity == STUDENT

    def test_eval_prints_table(self, tmp_path, capsys):
        run(tmp_path, "synth", "--n", "30")
        run(tmp_path, "synth", "--n", "10", "--seed", "9", "--split", "test")
        run(tmp_path, "train", *FAST)
        capsys.readouterr()
        assert run(
            tmp_path, "eval",
            "--model", str(tmp_path / "teacher.crf"),
            "--against", str(tmp_path / "test.conll"),
        ) == 0
        out = capsys.readouterr().out
        assert out.startswith("type\tprecision\trecall\tf1")
        assert "\noverall\t" in out

    def test_eval_writes_report_file(self, tmp_path, capsys):
        run(tmp_path, "synth", "--n", "30")
        run(tmp_path, "synth", "--n", "10", "--seed", "9", "--split", "test")
        run(tmp_path, "train", *FAST)
        capsys.readouterr()
        report = tmp_path / "report.tsv"
        run(
            tmp_path, "eval", "--model", str(tmp_path / "teacher.crf"),
            "--against", str(tmp_path / "test.conll"), "--out", str(report),
        )
        assert report.read_text() == capsys.readouterr().out


class TestFlagCommand:
    def test_flag_on_corrupted_corpus_fills_queue(self, tmp_path, capsys):
        run(tmp_path, "synth", "--n", "200", "--seed", "1")
        run(tmp_path, "corrupt", "--rate", "0.3", "--seed", "0")
        assert run(
            tmp_path, "flag", "--corpus", str(tmp_path / "corrupted.conll"),
            "--folds", "2", "--threshold", "2.0", "--focus", "ORG", *SMALL,
        ) == 0
        out = capsys.readouterr().out
        store = QueueStore(tmp_path)
        n_queued = len(store.items())
        assert n_queued > 0
        assert f"flagged {n_queued} of 200" in out
        assert (tmp_path / "gap_records.jsonl").exists()

    def test_flag_empty_queue_still_writes_files(self, tmp_path, capsys):
        run(tmp_path, "synth", "--n", "12", "--seed", "1")
        assert run(
            tmp_path, "flag", "--folds", "2", "--threshold", "50", "--epochs", "1",
        ) == 0
        assert "flagged 0 of 12" in capsys.readouterr().out
        assert QueueStore(tmp_path).items() == []

    def test_missing_corpus_exits_2(self, tmp_path):
        assert run(tmp_path, "flag") == 2


class TestMergeCommand:
    def queue_with_decision(self, tmp_path, verdict="correct_as_is"):
        run(tmp_path, "synth", "--n", "200", "--seed", "1")
        run(tmp_path, "corrupt", "--rate", "0.3", "--seed", "0")
        run(
            tmp_path, "flag", "--corpus", str(tmp_path / "corrupted.conll"),
            "--folds", "2", *SMALL,
        )
        store = QueueStore(tmp_path)
        items = store.items()
        assert items
        item = items[0]
        new_tags = None
        if verdict == "corrected":
            new_tags = ("B-ORG",) + ("O",) * (len(item.tokens) - 1)
        store.record_decision(ReviewDecision(
            utterance_id=item.utterance_id, verdict=verdict,
            annotator_id="cli-test", timestamp=1.0, new_tags=new_tags,
        ))
        return item

    def test_merge_empty_log_is_identity(self, tmp_path):
        run(tmp_path, "synth", "--n", "12", "--seed", "1")
        run(tmp_path, "flag", "--folds", "2", "--threshold", "50", "--epochs", "1")
        assert run(tmp_path, "merge") == 0
        assert (tmp_path / "merged.conll").read_bytes() == \
            (tmp_path / "train.conll").read_bytes()

    def test_merge_applies_correction(self, tmp_path, capsys):
        item = self.queue_with_decision(tmp_path, verdict="corrected")
        assert run(
            tmp_path, "merge", "--corpus", str(tmp_path / "corrupted.conll"),
        ) == 0
        merged = load_conll(tmp_path / "merged.conll", TS)
        got = merged.get(item.utterance_id)
        assert got.revision == 1
        assert got.source == "reannotated"
        assert TS.labels[got.gold_tags[0]] == "B-ORG"
        assert "1 corrected, 0 accepted" in capsys.readouterr().out

    def test_merge_without_queue_exits_2(self, tmp_path):
        run(tmp_path, "synth", "--n", "10")
        assert run(tmp_path, "merge") == 2


class TestDistillCommand:
    def test_end_to_end(self, tmp_path, capsys):
        run(tmp_path, "synth", "--n", "60", "--seed", "1")
        run(tmp_path, "synth", "--n", "30", "--seed", "9", "--strip")
        run(tmp_path, "train", *FAST)
        pseudo_path = tmp_path / "pseudo.conll"
        assert run(
            tmp_path, "distill", "--floor", "0",
            "--save-pseudo", str(pseudo_path), *FAST,
        ) == 0
        student = load_model(tmp_path / "student.crf")
        assert student.capacity == STUDENT
        out = capsys.readouterr().out
        assert "pseudo-labeled 30 of 30" in out
        assert pseudo_path.exists()
        assert (tmp_path / "pseudo.conll.meta.json").exists()

    def test_missing_teacher_exits_2(self, tmp_path):
        run(tmp_path, "synth", "--n", "10")
        assert run(tmp_path, "distill") == 2


class TestRecoverCommand:
    def test_prints_table_and_detection(self, tmp_path, capsys):
        run(tmp_path, "synth", "--n", "200", "--seed", "1")
        run(tmp_path, "synth", "--n", "60", "--seed", "2", "--split", "test")
        capsys.readouterr()
        report_path = tmp_path / "recovery.tsv"
        assert run(
            tmp_path, "recover", "--rate", "0.35", "--folds", "2",
            "--budget", "0.2", "--report", str(report_path), *SMALL,
        ) == 0
        out = capsys.readouterr().out
        assert out.startswith("type\tf1_clean\tf1_corrupted\tf1_repaired\trecovery")
        assert "precision" in out and "lift" in out
        assert report_path.read_text() == out

    def test_degenerate_focus_exits_2(self, tmp_path, capsys):
        run(tmp_path, "synth", "--n", "200", "--seed", "1")
        run(tmp_path, "synth", "--n", "60", "--seed", "2", "--split", "test")
        assert run(
            tmp_path, "recover", "--rate", "0.35", "--folds", "2",
            "--focus", "GPE", *SMALL,
        ) == 2
        assert "error:" in capsys.readouterr().err
