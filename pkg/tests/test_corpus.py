import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motivmine.corpus import (
    CSV_COLUMNS,
    Dataset,
    FeatureSchema,
    Label,
    StudentRecord,
    encode_structured,
    kfold,
    load_dataset,
    load_program_map,
    save_dataset,
    split,
)
from motivmine.errors import DataError, SchemaError

from conftest import make_dataset, make_record

HEADER = ",".join(CSV_COLUMNS)


def csv_row(**overrides):
    fields = {
        "id": "s1", "cohort": "2014", "prior_education": "1",
        "grade_nl": "7", "grade_en": "8", "grade_math": "",
        "ability_belief": "1", "interest": "0", "gender": "1",
        "date_of_birth": "1996-05-14", "program": "psychologie",
        "discipline": "2", "previously_enrolled": "0", "multiple_requests": "0",
        "motivation_text": "Ik wil dit graag", "label": "0",
    }
    fields.update(overrides)
    return ",".join(fields[c] for c in CSV_COLUMNS)


class TestLoadCsv:
    def test_grades_example(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(HEADER + "\n" + csv_row() + "\n")
        ds = load_dataset(path)
        record = ds.records[0]
        assert record.grade_nl == 7.0
        assert record.grade_en == 8.0
        assert record.grade_math is None
        assert record.cohort == 1 and record.cohort_year == 2014
        assert record.label is Label.RETENTION

    def test_empty_file_with_header(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(HEADER + "\n")
        assert len(load_dataset(path)) == 0

    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "d.csv"
        header = ",".join(c for c in CSV_COLUMNS if c != "motivation_text")
        path.write_text(header + "\n")
        with pytest.raises(SchemaError, match="motivation_text"):
            load_dataset(path)

    def test_malformed_row_carries_row_number(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(HEADER + "\n" + csv_row() + "\n" + csv_row(id="s2", date_of_birth="not-a-date") + "\n")
        with pytest.raises(DataError, match="row 3"):
            load_dataset(path)

    def test_wrong_field_count(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(HEADER + "\n1,2,3\n")
        with pytest.raises(DataError, match="row 2"):
            load_dataset(path)

    def test_unparseable_optional_fields_become_missing(self, tmp_path):
        path = tmp_path / "d.csv"
        row = csv_row(grade_nl="abc", grade_en="0.5", ability_belief="maybe", label="2")
        path.write_text(HEADER + "\n" + row + "\n")
        record = load_dataset(path).records[0]
        assert record.grade_nl is None  # unparseable
        assert record.grade_en is None  # out of the 1..10 range
        assert record.ability_belief is None
        assert record.label is None

    def test_comma_decimal_grade(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(HEADER + "\n" + csv_row(grade_nl='"7,5"') + "\n")
        assert load_dataset(path).records[0].grade_nl == 7.5

    def test_cohort_code_accepted(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(HEADER + "\n" + csv_row(cohort="2") + "\n")
        assert load_dataset(path).records[0].cohort_year == 2015

    def test_program_map_mismatch(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(HEADER + "\n" + csv_row(discipline="1") + "\n")
        with pytest.raises(DataError, match="row 2"):
            load_dataset(path, program_map={"psychologie": 2})


class TestLoadJsonl:
    def test_null_is_missing(self, tmp_path):
        import json

        obj = {
            "id": "s1", "cohort": 2015, "prior_education": 2,
            "grade_nl": 6.5, "grade_en": None, "grade_math": None,
            "ability_belief": None, "interest": True, "gender": False,
            "date_of_birth": "1997-01-30", "program": "biologie",
            "discipline": 1, "previously_enrolled": False,
            "multiple_requests": True, "motivation_text": "tekst", "label": 1,
        }
        path = tmp_path / "d.jsonl"
        path.write_text(json.dumps(obj) + "\n")
        record = load_dataset(path, format="jsonl").records[0]
        assert record.grade_en is None
        assert record.label is Label.DROPOUT
        assert record.multiple_requests is True

    def test_missing_key_named(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"id": "s1"}\n')
        with pytest.raises(SchemaError, match="cohort"):
            load_dataset(path, format="jsonl")

    def test_invalid_json_row_number(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text("{broken\n")
        with pytest.raises(DataError, match="row 1"):
            load_dataset(path, format="jsonl")


class TestSaveLoadRoundTrip:
    @pytest.mark.parametrize("format", ["csv", "jsonl"])
    def test_round_trip(self, tmp_path, format):
        ds = make_dataset(25)
        path = tmp_path / f"d.{format}"
        save_dataset(ds, path, format=format)
        assert load_dataset(path, format=format).records == ds.records

    def test_program_map_file(self, tmp_path):
        path = tmp_path / "map.csv"
        path.write_text("program,discipline\npsychologie,2\nbiologie,1\n")
        assert load_program_map(path) == {"psychologie": 2, "biologie": 1}


class TestRecordValidation:
    def test_grade_out_of_range(self):
        with pytest.raises(DataError, match="grade"):
            make_record(0, grade_nl=0.5)

    def test_duplicate_ids(self):
        with pytest.raises(DataError, match="duplicate"):
            Dataset(records=(make_record(0), make_record(0)))

    def test_bad_discipline(self):
        with pytest.raises(DataError):
            make_record(0, discipline=4)


class TestHsgpaAndAge:
    def test_two_of_three_grades(self):
        record = make_record(0, grade_nl=7.0, grade_en=8.0, grade_math=None)
        assert record.hsgpa() == pytest.approx(7.5, abs=1e-12)

    def test_constant_grades(self):
        record = make_record(0, grade_nl=6.0, grade_en=6.0, grade_math=6.0)
        assert record.hsgpa() == pytest.approx(6.0, abs=1e-12)

    def test_single_grade_is_missing(self):
        record = make_record(0, grade_nl=7.0, grade_en=None, grade_math=None)
        assert record.hsgpa() is None

    @given(
        st.lists(st.one_of(st.none(), st.floats(1.0, 10.0)), min_size=3, max_size=3)
    )
    def test_hsgpa_is_mean_of_present(self, grades):
        record = make_record(0, grade_nl=grades[0], grade_en=grades[1], grade_math=grades[2])
        present = [g for g in grades if g is not None]
        if len(present) >= 2:
            assert record.hsgpa() == pytest.approx(sum(present) / len(present), abs=1e-12)
        else:
            assert record.hsgpa() is None

    def test_age_exact_birthday(self):
        record = make_record(0, date_of_birth=dt.date(1995, 9, 1), cohort=1)
        assert record.age_at_enrollment() == pytest.approx(19.0, abs=1e-12)

    def test_age_fractional(self):
        # born 1995-03-01, anchor 2014-09-01: 19 whole years plus 184/365
        record = make_record(0, date_of_birth=dt.date(1995, 3, 1), cohort=1)
        days_since = (dt.date(2014, 9, 1) - dt.date(2014, 3, 1)).days
        year_len = (dt.date(2015, 3, 1) - dt.date(2014, 3, 1)).days
        assert record.age_at_enrollment() == pytest.approx(19 + days_since / year_len, abs=1e-12)

    def test_age_leap_day_birth(self):
        record = make_record(0, date_of_birth=dt.date(1996, 2, 29), cohort=2)
        age = record.age_at_enrollment()
        assert 19.4 < age < 19.6


class TestEncodeStructured:
    def test_column_layout(self):
        ds = make_dataset(20)
        block, schema = encode_structured(ds)
        assert block.block_name == "structured"
        assert block.column_names == schema.column_names
        assert block.matrix.shape == (20, len(schema.column_names))
        assert block.column_names[:4] == tuple(f"prior_education={i}" for i in (1, 2, 3, 4))
        assert "hsgpa" in block.column_names and "hsgpa_missing" in block.column_names
        assert any(name.startswith("program=") for name in block.column_names)

    def test_standardized_columns(self):
        ds = make_dataset(50)
        block, schema = encode_structured(ds)
        for name in ("hsgpa", "age"):
            col = block.dense()[:, block.column_names.index(name)]
            assert abs(col.mean()) < 1e-9
            assert abs(col.var() - 1.0) < 1e-9

    def test_hsgpa_column_reconstructs_mean(self):
        ds = make_dataset(30)
        block, schema = encode_structured(ds)
        col = block.dense()[:, block.column_names.index("hsgpa")]
        mean, scale = schema.standardization["hsgpa"]
        for i, record in enumerate(ds):
            if record.hsgpa() is not None:
                assert col[i] * scale + mean == pytest.approx(record.hsgpa(), abs=1e-12)

    def test_imputation_and_indicator(self):
        records = [
            make_record(0, grade_nl=6.0, grade_en=8.0),
            make_record(1, grade_nl=None, grade_en=None, grade_math=None),
        ]
        block, schema = encode_structured(Dataset(records=tuple(records)))
        dense = block.dense()
        idx_missing = block.column_names.index("hsgpa_missing")
        assert dense[0, idx_missing] == 0.0
        assert dense[1, idx_missing] == 1.0
        # imputed value equals the training mean, i.e. standardizes to the z-score of the mean
        idx = block.column_names.index("hsgpa")
        mean, scale = schema.standardization["hsgpa"]
        assert dense[1, idx] * scale + mean == pytest.approx(schema.hsgpa_impute)

    def test_apply_mode_is_idempotent(self):
        ds = make_dataset(15)
        block1, schema = encode_structured(ds)
        block2, _ = encode_structured(ds, schema)
        np.testing.assert_array_equal(block1.dense(), block2.dense())

    def test_unseen_program_zero_dummies(self):
        train = make_dataset(10)
        _, schema = encode_structured(train)
        probe = Dataset(records=(make_record(999, program="sterrenkunde", discipline=1),))
        block, _ = encode_structured(probe, schema)
        program_cols = [i for i, n in enumerate(block.column_names) if n.startswith("program=")]
        assert block.dense()[0, program_cols].sum() == 0.0
        assert block.meta["unseen_programs"] == 1

    def test_constant_column_scale_one(self):
        records = [make_record(i, date_of_birth=dt.date(1995, 9, 1), cohort=1) for i in range(5)]
        _, schema = encode_structured(Dataset(records=tuple(records)))
        assert schema.standardization["age"][1] == 1.0

    def test_schema_round_trip(self, tmp_path):
        _, schema = encode_structured(make_dataset(12))
        path = tmp_path / "schema.json"
        schema.save(path)
        assert FeatureSchema.load(path) == schema


class TestSplit:
    def test_full_scale_split_sizes(self):
        ds = make_dataset(7060)
        train, test = split(ds, 0.75, seed=0)
        assert (len(train), len(test)) == (5295, 1765)

    def test_partition_small(self):
        ds = make_dataset(4)
        train, test = split(ds, 0.5, seed=3)
        assert len(train) == 2 and len(test) == 2
        ids = {r.id for r in train} | {r.id for r in test}
        assert ids == {r.id for r in ds}

    def test_determinism(self):
        ds = make_dataset(40)
        a = split(ds, 0.7, seed=11)
        b = split(ds, 0.7, seed=11)
        assert [r.id for r in a[0]] == [r.id for r in b[0]]
        c = split(ds, 0.7, seed=12)
        assert {r.id for r in a[0]} != {r.id for r in c[0]}

    def test_unlabeled_rejected(self):
        ds = Dataset(records=(make_record(0, label=None), make_record(1)))
        with pytest.raises(DataError, match="r0000"):
            split(ds, 0.5, seed=0)

    def test_fraction_domain(self):
        with pytest.raises(ValueError):
            split(make_dataset(4), 1.0, seed=0)

    @given(st.integers(2, 60), st.floats(0.1, 0.9), st.integers(0, 1000))
    @settings(max_examples=40, deadline=None)
    def test_partition_property(self, n, fraction, seed):
        ds = make_dataset(n)
        train, test = split(ds, fraction, seed)
        assert len(train) == int(np.floor(n * fraction))
        train_ids = {r.id for r in train}
        test_ids = {r.id for r in test}
        assert not train_ids & test_ids
        assert train_ids | test_ids == {r.id for r in ds}


class TestKfold:
    def test_even_division(self):
        folds = kfold(make_dataset(10), 5, seed=0)
        assert len(folds) == 5
        assert all(len(val) == 2 for _, val in folds)

    def test_uneven_division(self):
        folds = kfold(make_dataset(11), 5, seed=0)
        sizes = sorted(len(val) for _, val in folds)
        assert sizes == [2, 2, 2, 2, 3]

    def test_k_exceeds_n(self):
        with pytest.raises(DataError):
            kfold(make_dataset(3), 5, seed=0)

    def test_k_too_small(self):
        with pytest.raises(ValueError):
            kfold(make_dataset(5), 1, seed=0)

    @given(st.integers(2, 8), st.integers(8, 50), st.integers(0, 500))
    @settings(max_examples=40, deadline=None)
    def test_partition_property(self, k, n, seed):
        folds = kfold(make_dataset(n), k, seed)
        all_val = np.concatenate([val for _, val in folds])
        assert sorted(all_val.tolist()) == list(range(n))
        for train, val in folds:
            assert not set(train.tolist()) & set(val.tolist())
            assert len(train) + len(val) == n
        sizes = [len(val) for _, val in folds]
        assert max(sizes) - min(sizes) <= 1

    def test_determinism(self):
        a = kfold(make_dataset(13), 4, seed=9)
        b = kfold(make_dataset(13), 4, seed=9)
        for (ta, va), (tb, vb) in zip(a, b):
            np.testing.assert_array_equal(va, vb)
            np.testing.assert_array_equal(ta, tb)
