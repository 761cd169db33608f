import json
import logging
import math

import pytest

from conftest import make_dataset
from regiolex.aggregate import ClassLexicon, LexiconEntry
from regiolex.classifier import ConstantScorer, RandomBaselineScorer, UniformScorer
from regiolex.errors import ValidationError
from regiolex.evaluate import (
    Gazetteer,
    MatchPolicy,
    Metrics,
    evaluate,
    load_gazetteer,
    place_name_share,
    random_baseline,
    run_report,
)

Z99 = 2.5758293035489004  # two-sided 99% normal quantile


def balanced(labels, per_class, stem="t"):
    return make_dataset(
        {name: [f"{stem} {name} {i}" for i in range(per_class)] for name in labels}
    )


class TestEvaluate:
    def test_constant_scorer_balanced_accuracy(self):
        labels = [f"c{i}" for i in range(5)]
        metrics = evaluate(ConstantScorer(labels, index=0), balanced(labels, 8))
        assert metrics.accuracy == pytest.approx(0.2, abs=1e-15)
        assert metrics.n == 40

    def test_uniform_scorer_predicts_class_zero(self):
        labels = ["A", "B", "C"]
        metrics = evaluate(UniformScorer(labels), balanced(labels, 4))
        # every argmax-tie resolves to the lowest index
        assert [row[0] for row in metrics.confusion] == [4, 4, 4]

    def test_confusion_sums(self):
        labels = ["A", "B", "C"]
        data = balanced(labels, 7)
        metrics = evaluate(RandomBaselineScorer(labels, seed=3), data)
        assert sum(sum(row) for row in metrics.confusion) == metrics.n
        for row in metrics.confusion:
            assert sum(row) == 7

    def test_random_baseline_scorer_near_chance(self):
        labels = ["A", "B", "C"]
        n_per = 1700
        metrics = evaluate(RandomBaselineScorer(labels, seed=0), balanced(labels, n_per))
        n = 3 * n_per
        p = 1.0 / 3.0
        half_width = Z99 * math.sqrt(p * (1 - p) / n)
        assert abs(metrics.accuracy - p) <= half_width

    def test_batch_size_invariance(self):
        labels = ["A", "B"]
        data = balanced(labels, 13)
        m1 = evaluate(RandomBaselineScorer(labels), data, batch_size=1)
        m256 = evaluate(RandomBaselineScorer(labels), data, batch_size=256)
        assert m1.confusion == m256.confusion

    def test_perfect_scorer_diagonal(self):
        labels = ["A", "B"]

        class Oracle(UniformScorer):
            def score_batch(self, texts):
                return [[1.0, 0.0] if "A" in t else [0.0, 1.0] for t in texts]

        metrics = evaluate(Oracle(labels), balanced(labels, 6))
        assert metrics.accuracy == 1.0
        assert metrics.confusion == [[6, 0], [0, 6]]
        for cs in metrics.per_class:
            assert cs.precision == 1.0 and cs.recall == 1.0 and cs.f1 == 1.0

    def test_f1_harmonic_mean_and_undefined_flags(self):
        labels = ["A", "B", "C"]
        metrics = evaluate(ConstantScorer(labels, index=0), balanced(labels, 5))
        a = metrics.per_class[0]
        assert a.precision == pytest.approx(1 / 3, abs=1e-15)
        assert a.recall == 1.0
        want_f1 = 2 * a.precision * a.recall / (a.precision + a.recall)
        assert abs(a.f1 - want_f1) <= 1e-12
        for cs in metrics.per_class[1:]:
            # never predicted: precision is 0/0, recall a true 0
            assert cs.precision == 0.0 and cs.precision_undefined
            assert cs.recall == 0.0 and not cs.recall_undefined
            assert cs.f1 == 0.0

    def test_manifest_mismatch_rejected(self):
        data = balanced(["A", "B"], 2)
        with pytest.raises(ValidationError, match="does not match"):
            evaluate(UniformScorer(["A", "C"]), data)

    def test_empty_dataset_rejected(self):
        data = make_dataset({"A": [], "B": []})
        with pytest.raises(ValidationError, match="empty"):
            evaluate(UniformScorer(["A", "B"]), data)

    def test_random_baseline_values(self):
        assert random_baseline(3) == pytest.approx(1 / 3, abs=1e-15)
        assert random_baseline(4) == 0.25
        assert random_baseline(5) == 0.2
        with pytest.raises(ValidationError):
            random_baseline(1)

    def test_metrics_dict_round_trip(self):
        labels = ["A", "B"]
        metrics = evaluate(ConstantScorer(labels), balanced(labels, 3))
        back = Metrics.from_dict(json.loads(json.dumps(metrics.to_dict())))
        assert back == metrics


class TestGazetteer:
    def test_load_skips_comments_blanks_duplicates(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text(
            "# header comment\nWien\n\n  Bern  \nWien\n", encoding="utf-8"
        )
        gaz = load_gazetteer(path)
        assert gaz.names == frozenset({"Wien", "Bern"})

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("# only a comment\n\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="no names"):
            load_gazetteer(path)

    def test_exact_policy(self):
        gaz = Gazetteer(names=frozenset({"Österreich"}))
        assert gaz.matches("Österreich")
        assert not gaz.matches("Österreicher")
        assert not gaz.matches("Öster")

    def test_prefix_derivation_policy(self):
        gaz = Gazetteer(
            names=frozenset({"Österreich"}),
            match_policy=MatchPolicy.EXACT_OR_PREFIX_DERIVATION,
        )
        assert gaz.matches("Österreich")
        assert gaz.matches("Österreicher")  # 2 extra chars
        assert gaz.matches("Österreichisch")  # 4 extra chars, at the limit
        assert not gaz.matches("Österreichische")  # 5 extra chars
        assert not gaz.matches("Öste")  # shorter than the name

    def test_empty_gazetteer_rejected(self):
        with pytest.raises(ValidationError):
            Gazetteer(names=frozenset())


def lex(idx, label, words, impact=0.5, support=2):
    return ClassLexicon(
        class_index=idx,
        label=label,
        entries=[LexiconEntry(word=w, avg_impact=impact, support=support) for w in words],
    )


class TestPlaceNameShare:
    def test_share_counts_matches(self):
        gaz = Gazetteer(names=frozenset({"loc1", "loc2"}))
        lexicons = [
            lex(0, "A", ["loc1", "loc2", "w1", "w2"]),  # 2/4
            lex(1, "B", ["loc1", "w1", "w2", "w3"]),  # 1/4
        ]
        report = place_name_share(lexicons, gaz)
        assert report.per_class_share == [0.5, 0.25]
        assert report.mean_share == pytest.approx(0.375, abs=1e-15)
        assert report.matched_words == [["loc1", "loc2"], ["loc1"]]

    def test_fourteen_of_one_hundred(self):
        words = [f"loc{i}" for i in range(14)] + [f"w{i}" for i in range(86)]
        gaz = Gazetteer(names=frozenset(f"loc{i}" for i in range(14)))
        report = place_name_share([lex(0, "A", words)], gaz)
        assert report.per_class_share == [pytest.approx(0.14, abs=1e-15)]

    def test_no_overlap_share_zero(self):
        gaz = Gazetteer(names=frozenset({"nowhere"}))
        report = place_name_share([lex(0, "A", ["w1", "w2"])], gaz)
        assert report.per_class_share == [0.0]
        assert report.matched_words == [[]]

    def test_empty_lexicon_flagged(self, caplog):
        gaz = Gazetteer(names=frozenset({"loc1"}))
        lexicons = [lex(0, "A", ["loc1"]), ClassLexicon(1, "B", [])]
        with caplog.at_level(logging.WARNING, logger="regiolex.evaluate"):
            report = place_name_share(lexicons, gaz)
        assert report.per_class_share == [1.0, 0.0]
        assert report.empty_classes == ["B"]
        assert any("empty" in r.getMessage() for r in caplog.records)

    def test_share_monotone_in_gazetteer(self):
        words = [f"loc{i}" for i in range(5)] + ["w1"]
        small = Gazetteer(names=frozenset({"loc0"}))
        big = Gazetteer(names=frozenset({"loc0", "loc1", "loc2"}))
        share_small = place_name_share([lex(0, "A", words)], small).per_class_share[0]
        share_big = place_name_share([lex(0, "A", words)], big).per_class_share[0]
        assert share_big >= share_small

    def test_mean_is_unweighted(self):
        gaz = Gazetteer(names=frozenset({"loc1"}))
        lexicons = [
            lex(0, "A", ["loc1"]),  # share 1.0 over 1 word
            lex(1, "B", ["w1", "w2", "w3", "w4"]),  # share 0.0 over 4 words
        ]
        report = place_name_share(lexicons, gaz)
        assert report.mean_share == 0.5

    def test_no_lexicons_rejected(self):
        gaz = Gazetteer(names=frozenset({"x"}))
        with pytest.raises(ValidationError):
            place_name_share([], gaz)


class TestRunReport:
    def _metrics(self):
        labels = ["A", "B"]
        return evaluate(ConstantScorer(labels, index=0), balanced(labels, 4))

    def _lexicons(self):
        return [lex(0, "A", ["loc1", "w1"], impact=0.25), lex(1, "B", ["w2"], impact=0.125)]

    def _place(self):
        gaz = Gazetteer(names=frozenset({"loc1"}))
        return place_name_share(self._lexicons(), gaz)

    def test_writes_all_files(self, tmp_path):
        paths = run_report(self._metrics(), self._lexicons(), self._place(), tmp_path)
        names = [p.name for p in paths]
        assert names == [
            "report.txt", "report.json",
            "fig_confusion.png", "fig_lexicons.png", "fig_place_share.png",
        ]
        for p in paths:
            assert p.exists() and p.stat().st_size > 0
        for p in paths[2:]:
            assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_no_place_report_drops_figure(self, tmp_path):
        paths = run_report(self._metrics(), self._lexicons(), None, tmp_path)
        names = [p.name for p in paths]
        assert "fig_place_share.png" not in names
        assert len(paths) == 4
        assert json.loads((tmp_path / "report.json").read_text())["place_names"] is None

    def test_json_mirrors_metrics(self, tmp_path):
        metrics = self._metrics()
        run_report(metrics, self._lexicons(), self._place(), tmp_path)
        sidecar = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
        assert Metrics.from_dict(sidecar["metrics"]) == metrics
        assert sidecar["random_baseline"] == 0.5
        assert sidecar["lexicon_sizes"] == {"A": 2, "B": 1}
        assert sidecar["place_names"]["mean_share"] == pytest.approx(0.25, abs=1e-15)
        heads = sidecar["lexicon_heads"]
        assert [w for w, _, _ in heads["A"]] == ["loc1", "w1"]

    def test_text_contains_key_numbers(self, tmp_path):
        run_report(self._metrics(), self._lexicons(), self._place(), tmp_path)
        text = (tmp_path / "report.txt").read_text(encoding="utf-8")
        assert "Accuracy: 0.500000" in text
        assert "random baseline over 2 classes: 0.500000" in text
        assert "precision 0/0" in text
        assert "mean share: 0.250000" in text

    def test_empty_lexicon_renders_no_entries(self, tmp_path):
        lexicons = [ClassLexicon(0, "A", []), ClassLexicon(1, "B", [])]
        run_report(self._metrics(), lexicons, None, tmp_path)
        text = (tmp_path / "report.txt").read_text(encoding="utf-8")
        assert "(no entries)" in text

    def test_rerun_byte_identical(self, tmp_path):
        d1, d2 = tmp_path / "r1", tmp_path / "r2"
        run_report(self._metrics(), self._lexicons(), self._place(), d1)
        run_report(self._metrics(), self._lexicons(), self._place(), d2)
        for p1 in sorted(d1.iterdir()):
            assert p1.read_bytes() == (d2 / p1.name).read_bytes(), p1.name
