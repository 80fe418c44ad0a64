import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from motivmine import synth
from motivmine.corpus import Dataset, FeatureBlock, Label, load_dataset, save_dataset
from motivmine.errors import ConfigError, DataError
from motivmine.runner import (
    MODEL_FEATURE_SETS,
    ExperimentConfig,
    assemble_features,
    compare_top_terms,
    featurize,
    fit_artifacts,
    load_artifacts,
    run_all,
    run_experiment,
    save_artifacts,
    summary_table,
)
from motivmine.textprep import TokenizedDoc

REPO_ROOT = Path(__file__).resolve().parent.parent

R, D = Label.RETENTION, Label.DROPOUT

FAST = dict(
    lda_sweeps=30, fold_in_sweeps=10, svm_epochs=200, svm_tol=1e-3,
    k_topics=4, cv_folds=3, min_df=2,
)


@pytest.fixture(scope="module")
def small_dataset():
    return synth.generate(synth.SynthConfig(n_records=320, seed=5))


def block(name, columns, rows):
    return FeatureBlock(
        block_name=name,
        column_names=tuple(f"c{i}" for i in range(columns)),
        matrix=np.full((rows, columns), 0.5),
    )


class TestModelFeatureSets:
    def test_table_mapping_exhaustive(self):
        assert MODEL_FEATURE_SETS == {
            1: ("structured",),
            2: ("tfidf",),
            3: ("tfidf", "lda", "liwc"),
            4: ("structured", "tfidf"),
            5: ("structured", "lda", "liwc"),
            6: ("structured", "tfidf", "lda", "liwc"),
        }

    def test_structured_in_models_1_4_5_6_only(self):
        with_structured = {m for m, blocks in MODEL_FEATURE_SETS.items() if "structured" in blocks}
        assert with_structured == {1, 4, 5, 6}

    def test_tfidf_in_models_2_3_4_6_only(self):
        with_tfidf = {m for m, blocks in MODEL_FEATURE_SETS.items() if "tfidf" in blocks}
        assert with_tfidf == {2, 3, 4, 6}


class TestAssembleFeatures:
    def all_blocks(self, rows=4):
        return {
            "structured": block("structured", 3, rows),
            "tfidf": block("tfidf", 5, rows),
            "lda": block("lda", 2, rows),
            "liwc": block("liwc", 4, rows),
        }

    def test_model_1_structured_only(self):
        matrix = assemble_features(ExperimentConfig(model_id=1), self.all_blocks())
        assert matrix.block_names == ("structured",)
        assert all(name.startswith("structured:") for name in matrix.column_names)

    def test_model_3_text_features_only(self):
        matrix = assemble_features(ExperimentConfig(model_id=3), self.all_blocks())
        assert matrix.block_names == ("tfidf", "lda", "liwc")
        assert matrix.n_cols == 5 + 2 + 4

    def test_width_is_sum_of_parts(self):
        blocks = {"structured": block("structured", 5, 3), "tfidf": block("tfidf", 7, 3)}
        matrix = assemble_features(ExperimentConfig(model_id=4), blocks)
        assert matrix.n_cols == 12

    def test_every_model_id_width(self):
        blocks = self.all_blocks()
        widths = {"structured": 3, "tfidf": 5, "lda": 2, "liwc": 4}
        for model_id, wanted in MODEL_FEATURE_SETS.items():
            matrix = assemble_features(ExperimentConfig(model_id=model_id), blocks)
            assert matrix.n_cols == sum(widths[b] for b in wanted)
            assert matrix.block_names == wanted

    def test_row_mismatch_names_blocks(self):
        blocks = {"structured": block("structured", 3, 4), "tfidf": block("tfidf", 5, 6)}
        with pytest.raises(DataError, match="structured"):
            assemble_features(ExperimentConfig(model_id=4), blocks)

    def test_missing_block_rejected(self):
        with pytest.raises(DataError, match="lda"):
            assemble_features(ExperimentConfig(model_id=5), {"structured": block("structured", 3, 4)})

    def test_row_order_preserved(self):
        rows = np.arange(12.0).reshape(4, 3)
        blocks = {
            "structured": FeatureBlock(
                block_name="structured", column_names=("a", "b", "c"), matrix=rows
            )
        }
        matrix = assemble_features(ExperimentConfig(model_id=1), blocks)
        np.testing.assert_array_equal(matrix.matrix.toarray(), rows)


class TestConfig:
    def test_defaults_valid(self):
        ExperimentConfig().validate()

    def test_bad_model_id(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(model_id=7).validate()

    def test_bad_fraction(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(train_fraction=1.0).validate()

    def test_from_file(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text(
            "# experiment\nmodel_id = 4\nseed = 9\nk_topics = 5\n"
            "svm_c = 0.5\nlda_alpha = none\nstopwords_path = 'some/path.txt'\n"
        )
        config = ExperimentConfig.from_file(path)
        assert config.model_id == 4
        assert config.seed == 9
        assert config.svm_c == 0.5
        assert config.lda_alpha is None
        assert config.stopwords_path == "some/path.txt"

    def test_from_file_overrides(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("model_id = 2\n")
        config = ExperimentConfig.from_file(path, model_id=6, seed=3)
        assert config.model_id == 6 and config.seed == 3

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("no_such_key = 1\n")
        with pytest.raises(ConfigError, match="no_such_key"):
            ExperimentConfig.from_file(path)

    def test_bad_value(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("model_id = abc\n")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(path)

    def test_stage_seeds_differ(self):
        config = ExperimentConfig(seed=10)
        seeds = {config.split_seed, config.cv_seed, config.lda_seed, config.svm_seed, config.fold_in_seed}
        assert len(seeds) == 5


class TestCompareTopTerms:
    def doc(self, rid, tokens):
        return TokenizedDoc(record_id=rid, tokens=tuple(tokens), raw_sentence_count=1)

    def test_identical_documents_full_overlap(self):
        docs = [self.doc("a", ["x", "y"]), self.doc("b", ["x", "y"])]
        result = compare_top_terms(docs, [D, D], [D, R], n=100)
        assert result.overlap == 1.0

    def test_disjoint_vocabularies_zero_overlap(self):
        docs = [self.doc("a", ["x", "y"]), self.doc("b", ["p", "q"])]
        result = compare_top_terms(docs, [D, D], [D, R], n=100)
        assert result.overlap == 0.0

    def test_empty_group_noted(self):
        docs = [self.doc("a", ["x"]), self.doc("b", ["y"])]
        result = compare_top_terms(docs, [D, R], [D, D], n=10)
        assert result.overlap is None
        assert any("incorrectly" in note for note in result.notes)
        assert result.correct_dropout_terms

    def test_only_predicted_dropouts_count(self):
        docs = [self.doc("a", ["x"]), self.doc("b", ["y"]), self.doc("c", ["z"])]
        result = compare_top_terms(docs, [D, R, D], [D, D, R], n=5)
        assert result.correct_dropout_terms == (("x", 1),)
        assert result.false_dropout_terms == (("z", 1),)

    def test_frequency_then_lexicographic(self):
        docs = [self.doc("a", ["bb", "bb", "aa", "cc"]), self.doc("b", ["aa"])]
        result = compare_top_terms(docs, [D, D], [D, R], n=2)
        assert [t for t, _ in result.correct_dropout_terms] == ["bb", "aa"]

    def test_n_domain(self):
        with pytest.raises(ValueError):
            compare_top_terms([], [], [], n=0)

    def test_alignment_checked(self):
        with pytest.raises(ValueError):
            compare_top_terms([self.doc("a", [])], [D], [], n=1)


class TestSynth:
    def test_deterministic(self):
        a = synth.generate(synth.SynthConfig(n_records=50, seed=3))
        b = synth.generate(synth.SynthConfig(n_records=50, seed=3))
        assert a.records == b.records

    def test_label_rate(self):
        ds = synth.generate(synth.SynthConfig(n_records=2000, seed=0, dropout_rate=0.25))
        rate = sum(1 for r in ds if r.label is D) / len(ds)
        assert 0.2 < rate < 0.3

    def test_round_trips_through_loader(self, tmp_path):
        ds = synth.generate(synth.SynthConfig(n_records=40, seed=1))
        path = tmp_path / "synth.csv"
        save_dataset(ds, path)
        assert load_dataset(path, program_map=synth.program_map()).records == ds.records

    def test_pure_signal_uses_disjoint_vocabularies(self):
        cfg = synth.SynthConfig(n_records=400, seed=2, text_signal=1.0)
        ds = synth.generate(cfg)
        dropout_text = " ".join(r.motivation_text for r in ds if r.label is D)
        retention_text = " ".join(r.motivation_text for r in ds if r.label is R)
        assert "twijfel" in dropout_text and "twijfel" not in retention_text
        assert "passie" in retention_text and "passie" not in dropout_text

    def test_mixed_signal_tilts_marker_rates(self):
        cfg = synth.SynthConfig(n_records=600, seed=2, text_signal=0.4)
        ds = synth.generate(cfg)

        def rate(term, label):
            records = [r for r in ds if r.label is label]
            return sum(r.motivation_text.count(term) for r in records) / len(records)

        # markers appear in both classes but at class-tilted rates
        assert rate("twijfel", D) > rate("twijfel", R) > 0
        assert rate("passie", R) > rate("passie", D) > 0


class TestRunExperiment:
    def test_deterministic_reports(self, small_dataset):
        config = ExperimentConfig(model_id=4, seed=1, **FAST).validate()
        a = run_experiment(small_dataset, config)
        b = run_experiment(small_dataset, config)
        assert a.canonical_json() == b.canonical_json()
        assert a.sha256() == b.sha256()

    def test_blocks_match_model(self, small_dataset):
        config = ExperimentConfig(model_id=5, seed=1, **FAST).validate()
        report = run_experiment(small_dataset, config)
        assert report.dataset_info["blocks"] == ["structured", "lda", "liwc"]
        assert report.fitted_hashes["lda_sha256"] is not None
        assert report.topic_terms is not None

    def test_no_lda_no_topic_table(self, small_dataset):
        config = ExperimentConfig(model_id=2, seed=1, **FAST).validate()
        report = run_experiment(small_dataset, config)
        assert report.topic_terms is None
        assert report.fitted_hashes["lda_sha256"] is None
        assert report.fitted_hashes["vocab_sha256"] is not None

    def test_leakage_guard(self, small_dataset):
        """Blanking every test-side motivation text must not change any
        train-side fitted object."""
        config = ExperimentConfig(model_id=6, seed=2, **FAST).validate()
        baseline = run_experiment(small_dataset, config)
        from motivmine.corpus import split as split_ds

        _, test_ds = split_ds(small_dataset, config.train_fraction, config.split_seed)
        test_ids = {r.id for r in test_ds}
        blanked = Dataset(
            records=tuple(
                dataclasses.replace(r, motivation_text="") if r.id in test_ids else r
                for r in small_dataset
            )
        )
        modified = run_experiment(blanked, config)
        assert modified.fitted_hashes == baseline.fitted_hashes

    def test_report_json_matches_schema(self, small_dataset):
        jsonschema = pytest.importorskip("jsonschema")
        config = ExperimentConfig(model_id=6, seed=1, **FAST).validate()
        report = run_experiment(small_dataset, config)
        schema = json.loads((REPO_ROOT / "docs" / "report_schema.json").read_text())
        jsonschema.validate(json.loads(report.to_json()), schema)

    def test_cv_folds_recorded(self, small_dataset):
        config = ExperimentConfig(model_id=1, seed=1, **FAST).validate()
        report = run_experiment(small_dataset, config)
        assert len(report.cv_metrics) == config.cv_folds
        assert report.cv_spread >= 0.0
        assert report.cv_warning == (report.cv_spread > 0.1)

    def test_render_text_and_tsv(self, small_dataset):
        config = ExperimentConfig(model_id=4, seed=1, **FAST).validate()
        report = run_experiment(small_dataset, config)
        text = report.render_text()
        assert "test metrics" in text and "cross-validation" in text
        tsv = report.coefficients_tsv()
        assert tsv.startswith("rank\tfeature\tcoefficient")
        assert len(tsv.strip().splitlines()) == len(report.top_coefficients) + 1

    def test_stage_labels_on_errors(self, small_dataset):
        unlabeled = Dataset(
            records=tuple(dataclasses.replace(r, label=None) for r in small_dataset)
        )
        config = ExperimentConfig(model_id=1, seed=0, **FAST).validate()
        with pytest.raises(DataError, match=r"\[split\]"):
            run_experiment(unlabeled, config)


class TestRunAll:
    def test_noise_text_leaves_structured_model_ahead(self):
        ds = synth.generate(
            synth.SynthConfig(n_records=1200, seed=8, text_signal=0.0, structured_signal=1.5)
        )
        config = ExperimentConfig(seed=3, **FAST).validate()
        reports = run_all(ds, config, model_ids=[1, 2])
        f1 = {r.config.model_id: r.test_metrics.total.f1 for r in reports}
        assert f1[1] > f1[2]

    def test_two_models_and_summary(self, small_dataset):
        config = ExperimentConfig(seed=1, **FAST).validate()
        reports = run_all(small_dataset, config, model_ids=[1, 2])
        assert [r.config.model_id for r in reports] == [1, 2]
        table = summary_table(reports)
        lines = table.strip().splitlines()
        assert len(lines) == 3  # header + two models
        assert lines[1].startswith("1")


class TestArtifacts:
    def test_save_load_round_trip(self, small_dataset, tmp_path):
        config = ExperimentConfig(model_id=6, seed=3, **FAST).validate()
        from motivmine.corpus import split as split_ds

        train_ds, test_ds = split_ds(small_dataset, config.train_fraction, config.split_seed)
        artifacts = fit_artifacts(train_ds, config)
        save_artifacts(artifacts, tmp_path / "art")
        loaded = load_artifacts(tmp_path / "art")
        original = featurize(artifacts, test_ds)
        reloaded = featurize(loaded, test_ds)
        for name in original:
            np.testing.assert_array_equal(original[name].dense(), reloaded[name].dense())
            assert original[name].column_names == reloaded[name].column_names
