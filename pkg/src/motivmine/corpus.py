"""Student records: data model, ingestion, structured features, splits.

The CSV/JSONL column contract is fixed (see ``CSV_COLUMNS``).  Optional
fields that fail to parse become missing; malformed required fields fail
with the offending row number.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DataError, SchemaError

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "id", "cohort", "prior_education", "grade_nl", "grade_en", "grade_math",
    "ability_belief", "interest", "gender", "date_of_birth", "program",
    "discipline", "previously_enrolled", "multiple_requests",
    "motivation_text", "label",
)

PRIOR_EDUCATION_LEVELS = (1, 2, 3, 4)
DISCIPLINE_LEVELS = (1, 2, 3)
COHORT_YEARS = {1: 2014, 2: 2015}
BLOCK_NAMES = ("structured", "tfidf", "lda", "liwc")


class Label(enum.IntEnum):
    RETENTION = 0
    DROPOUT = 1


@dataclass(frozen=True)
class StudentRecord:
    """One applicant: structured characteristics, motivation text, label."""

    id: str
    cohort: int  # 1 = 2014, 2 = 2015
    prior_education: int  # 1..4
    grade_nl: float | None
    grade_en: float | None
    grade_math: float | None
    ability_belief: bool | None
    interest: bool | None
    gender: bool | None  # True = male
    date_of_birth: dt.date
    program: str
    discipline: int  # 1 = STEM, 2 = Social, 3 = Humanities
    previously_enrolled: bool
    multiple_requests: bool
    motivation_text: str
    label: Label | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise DataError("record id must be nonempty")
        if self.cohort not in COHORT_YEARS:
            raise DataError(f"record {self.id}: cohort code must be 1 or 2, got {self.cohort}")
        if self.prior_education not in PRIOR_EDUCATION_LEVELS:
            raise DataError(f"record {self.id}: prior_education must be in 1..4")
        if self.discipline not in DISCIPLINE_LEVELS:
            raise DataError(f"record {self.id}: discipline must be in 1..3")
        for name in ("grade_nl", "grade_en", "grade_math"):
            g = getattr(self, name)
            if g is not None and not 1.0 <= g <= 10.0:
                raise DataError(f"record {self.id}: {name} out of range [1, 10]: {g}")

    @property
    def cohort_year(self) -> int:
        return COHORT_YEARS[self.cohort]

    @property
    def grades(self) -> tuple[float | None, float | None, float | None]:
        return (self.grade_nl, self.grade_en, self.grade_math)

    def hsgpa(self) -> float | None:
        """Mean of the present core-subject grades; missing if fewer than
        two grades are present."""
        present = [g for g in self.grades if g is not None]
        if len(present) < 2:
            return None
        return sum(present) / len(present)

    def age_at_enrollment(self) -> float:
        """Fractional years between date of birth and September 1 of the
        cohort year, computed calendar-wise (whole years plus the elapsed
        fraction of the current birthday-to-birthday year)."""
        anchor = dt.date(self.cohort_year, 9, 1)
        return _fractional_years(self.date_of_birth, anchor)


def _add_years(date: dt.date, years: int) -> dt.date:
    try:
        return date.replace(year=date.year + years)
    except ValueError:  # Feb 29 on a non-leap year
        return date.replace(year=date.year + years, month=3, day=1)


def _fractional_years(born: dt.date, anchor: dt.date) -> float:
    if anchor < born:
        raise DataError(f"date of birth {born} is after the academic-year start {anchor}")
    whole = anchor.year - born.year
    if _add_years(born, whole) > anchor:
        whole -= 1
    last_birthday = _add_years(born, whole)
    next_birthday = _add_years(born, whole + 1)
    fraction = (anchor - last_birthday).days / (next_birthday - last_birthday).days
    return whole + fraction


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of records plus, once fitted, the feature schema."""

    records: tuple[StudentRecord, ...]
    schema: "FeatureSchema | None" = None

    def __post_init__(self) -> None:
        seen: set[str] = set()
        dups: set[str] = set()
        for r in self.records:
            (dups if r.id in seen else seen).add(r.id)
        if dups:
            raise DataError(f"duplicate record ids: {sorted(dups)[:10]}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def labels(self) -> list[Label]:
        missing = [r.id for r in self.records if r.label is None]
        if missing:
            raise DataError(f"unlabeled records: {missing[:10]}" + ("..." if len(missing) > 10 else ""))
        return [r.label for r in self.records]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset(records=tuple(self.records[i] for i in indices), schema=self.schema)

    def with_schema(self, schema: "FeatureSchema") -> "Dataset":
        return replace(self, schema=schema)


@dataclass(frozen=True)
class FeatureSchema:
    """Everything fitted on training data that structured encoding needs:
    level orders, imputation constants, standardization statistics."""

    program_levels: tuple[str, ...]
    hsgpa_impute: float
    ability_belief_impute: int
    interest_impute: int
    gender_impute: int
    standardization: dict[str, tuple[float, float]]  # column -> (mean, scale)
    column_names: tuple[str, ...]
    version: int = 1

    def to_json(self) -> str:
        payload = {
            "version": self.version,
            "program_levels": list(self.program_levels),
            "hsgpa_impute": self.hsgpa_impute,
            "ability_belief_impute": self.ability_belief_impute,
            "interest_impute": self.interest_impute,
            "gender_impute": self.gender_impute,
            "standardization": {k: list(v) for k, v in self.standardization.items()},
            "column_names": list(self.column_names),
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FeatureSchema":
        try:
            payload = json.loads(text)
            return cls(
                program_levels=tuple(payload["program_levels"]),
                hsgpa_impute=float(payload["hsgpa_impute"]),
                ability_belief_impute=int(payload["ability_belief_impute"]),
                interest_impute=int(payload["interest_impute"]),
                gender_impute=int(payload["gender_impute"]),
                standardization={k: (float(v[0]), float(v[1])) for k, v in payload["standardization"].items()},
                column_names=tuple(payload["column_names"]),
                version=int(payload["version"]),
            )
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise DataError(f"malformed feature schema: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSchema":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class FeatureBlock:
    """A named, row-aligned group of numeric features."""

    block_name: str
    column_names: tuple[str, ...]
    matrix: np.ndarray | sp.csr_matrix
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.block_name not in BLOCK_NAMES:
            raise DataError(f"unknown block name {self.block_name!r}")
        if self.matrix.shape[1] != len(self.column_names):
            raise DataError(
                f"block {self.block_name}: {self.matrix.shape[1]} matrix columns "
                f"vs {len(self.column_names)} column names"
            )

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        if sp.issparse(self.matrix):
            return self.matrix.toarray()
        return self.matrix


@dataclass(frozen=True)
class FeatureMatrix:
    """Horizontally assembled feature blocks with prefixed column names."""

    column_names: tuple[str, ...]
    matrix: sp.csr_matrix
    block_names: tuple[str, ...]

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]


# --------------------------------------------------------------------------
# Ingestion


def _parse_optional_grade(value) -> float | None:
    if value is None:
        return None
    text = str(value).strip().replace(",", ".")
    if not text:
        return None
    try:
        g = float(text)
    except ValueError:
        return None
    return g if 1.0 <= g <= 10.0 else None


def _parse_optional_bool(value) -> bool | None:
    if value is None:
        return None
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes"):
        return True
    if text in ("0", "false", "no"):
        return False
    return None


def _parse_required_bool(value, column: str) -> bool:
    parsed = _parse_optional_bool(value)
    if parsed is None:
        raise ValueError(f"{column} must be 0/1, got {value!r}")
    return parsed


def _parse_cohort(value) -> int:
    text = str(value).strip() if value is not None else ""
    if text in ("1", "2"):
        return int(text)
    if text in ("2014", "2015"):
        return {"2014": 1, "2015": 2}[text]
    raise ValueError(f"cohort must be 2014/2015 or code 1/2, got {value!r}")


def _parse_label(value) -> Label | None:
    if value is None:
        return None
    text = str(value).strip()
    if text == "0":
        return Label.RETENTION
    if text == "1":
        return Label.DROPOUT
    return None


def _record_from_mapping(row: Mapping, row_no: int, program_map: Mapping[str, int] | None) -> StudentRecord:
    def required(column: str) -> str:
        value = row.get(column)
        if value is None or str(value).strip() == "":
            raise ValueError(f"{column} is required")
        return str(value).strip()

    try:
        record = StudentRecord(
            id=required("id"),
            cohort=_parse_cohort(row.get("cohort")),
            prior_education=int(required("prior_education")),
            grade_nl=_parse_optional_grade(row.get("grade_nl")),
            grade_en=_parse_optional_grade(row.get("grade_en")),
            grade_math=_parse_optional_grade(row.get("grade_math")),
            ability_belief=_parse_optional_bool(row.get("ability_belief")),
            interest=_parse_optional_bool(row.get("interest")),
            gender=_parse_optional_bool(row.get("gender")),
            date_of_birth=dt.date.fromisoformat(required("date_of_birth")),
            program=required("program"),
            discipline=int(required("discipline")),
            previously_enrolled=_parse_required_bool(row.get("previously_enrolled"), "previously_enrolled"),
            multiple_requests=_parse_required_bool(row.get("multiple_requests"), "multiple_requests"),
            motivation_text=str(row.get("motivation_text") or ""),
            label=_parse_label(row.get("label")),
        )
    except (ValueError, DataError) as exc:
        raise DataError(f"row {row_no}: {exc}") from exc
    if program_map is not None:
        expected = program_map.get(record.program)
        if expected is not None and expected != record.discipline:
            raise DataError(
                f"row {row_no}: program {record.program!r} maps to discipline "
                f"{expected}, record says {record.discipline}"
            )
    return record


def load_dataset(
    path: str | Path,
    format: str = "csv",
    program_map: Mapping[str, int] | None = None,
) -> Dataset:
    """Read a dataset file into an ordered, id-unique :class:`Dataset`.

    ``format`` is ``csv`` (empty string = missing) or ``jsonl``
    (``null`` = missing).  A missing required column raises
    :class:`SchemaError` naming it; a malformed row raises
    :class:`DataError` with its row number.
    """
    path = Path(path)
    if format == "csv":
        rows = _read_csv(path)
    elif format == "jsonl":
        rows = _read_jsonl(path)
    else:
        raise ValueError(f"unknown dataset format {format!r}")
    records = [_record_from_mapping(row, row_no, program_map) for row_no, row in rows]
    return Dataset(records=tuple(records))


def _read_csv(path: Path) -> list[tuple[int, dict]]:
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing required columns: {', '.join(missing)}")
        index = {name: i for i, name in enumerate(header)}
        out = []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"row {row_no}: expected {len(header)} fields, got {len(row)}")
            out.append((row_no, {name: row[i] for name, i in index.items()}))
        return out


def _read_jsonl(path: Path) -> list[tuple[int, dict]]:
    out = []
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"row {line_no}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise DataError(f"row {line_no}: expected a JSON object")
            missing = [c for c in CSV_COLUMNS if c not in obj]
            if missing:
                raise SchemaError(f"row {line_no}: missing required keys: {', '.join(missing)}")
            out.append((line_no, obj))
    return out


def save_dataset(dataset: Dataset, path: str | Path, format: str = "csv") -> None:
    """Write a dataset back out in the documented CSV or JSONL layout."""
    path = Path(path)
    if format == "csv":
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_COLUMNS)
            for r in dataset:
                writer.writerow([_field_to_text(r, c) for c in CSV_COLUMNS])
    elif format == "jsonl":
        with path.open("w", encoding="utf-8") as handle:
            for r in dataset:
                handle.write(json.dumps(_record_to_obj(r), ensure_ascii=False) + "\n")
    else:
        raise ValueError(f"unknown dataset format {format!r}")


def _field_to_text(r: StudentRecord, column: str):
    value = _record_to_obj(r)[column]
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    return value


def _record_to_obj(r: StudentRecord) -> dict:
    return {
        "id": r.id,
        "cohort": r.cohort_year,
        "prior_education": r.prior_education,
        "grade_nl": r.grade_nl,
        "grade_en": r.grade_en,
        "grade_math": r.grade_math,
        "ability_belief": r.ability_belief,
        "interest": r.interest,
        "gender": r.gender,
        "date_of_birth": r.date_of_birth.isoformat(),
        "program": r.program,
        "discipline": r.discipline,
        "previously_enrolled": r.previously_enrolled,
        "multiple_requests": r.multiple_requests,
        "motivation_text": r.motivation_text,
        "label": None if r.label is None else int(r.label),
    }


def load_program_map(path: str | Path) -> dict[str, int]:
    """Two-column CSV mapping program code to discipline (1..3)."""
    mapping: dict[str, int] = {}
    with Path(path).open(newline="", encoding="utf-8") as handle:
        for row_no, row in enumerate(csv.reader(handle), start=1):
            if not row or (row_no == 1 and row[0].strip().lower() == "program"):
                continue
            if len(row) != 2:
                raise DataError(f"program map row {row_no}: expected 2 columns")
            try:
                discipline = int(row[1])
            except ValueError as exc:
                raise DataError(f"program map row {row_no}: discipline must be an integer") from exc
            if discipline not in DISCIPLINE_LEVELS:
                raise DataError(f"program map row {row_no}: discipline must be in 1..3")
            mapping[row[0].strip()] = discipline
    return mapping


# --------------------------------------------------------------------------
# Structured feature encoding


STANDARDIZED_COLUMNS = ("hsgpa", "age")


def _schema_column_names(program_levels: Sequence[str]) -> tuple[str, ...]:
    names = [f"prior_education={level}" for level in PRIOR_EDUCATION_LEVELS]
    names += ["hsgpa", "hsgpa_missing"]
    for base in ("ability_belief", "interest", "gender"):
        names += [base, f"{base}_missing"]
    names += ["age", "cohort"]
    names += [f"program={p}" for p in program_levels]
    names += [f"discipline={d}" for d in DISCIPLINE_LEVELS]
    names += ["previously_enrolled", "multiple_requests"]
    return tuple(names)


def _mode(values: list[bool]) -> int:
    if not values:
        return 0
    return 1 if sum(values) * 2 >= len(values) else 0


def encode_structured(
    dataset: Dataset, schema: FeatureSchema | None = None
) -> tuple[FeatureBlock, FeatureSchema]:
    """Encode structured variables into a numeric block.

    With ``schema=None`` the call fits imputation constants, program
    levels and standardization statistics on this dataset (training
    mode); otherwise it applies the given schema (test mode).  In test
    mode a program level unseen at fit time yields all-zero program
    dummies and bumps the block's ``unseen_programs`` meta counter.
    """
    records = dataset.records
    n = len(records)
    hsgpas = [r.hsgpa() for r in records]
    ages = [r.age_at_enrollment() for r in records]

    if schema is None:
        present = [g for g in hsgpas if g is not None]
        schema = FeatureSchema(
            program_levels=tuple(sorted({r.program for r in records})),
            hsgpa_impute=(sum(present) / len(present)) if present else 0.0,
            ability_belief_impute=_mode([r.ability_belief for r in records if r.ability_belief is not None]),
            interest_impute=_mode([r.interest for r in records if r.interest is not None]),
            gender_impute=_mode([r.gender for r in records if r.gender is not None]),
            standardization={},
            column_names=(),
        )
        fitting = True
    else:
        fitting = False

    columns: dict[str, np.ndarray] = {}
    for level in PRIOR_EDUCATION_LEVELS:
        columns[f"prior_education={level}"] = np.array(
            [1.0 if r.prior_education == level else 0.0 for r in records]
        )
    columns["hsgpa"] = np.array([g if g is not None else schema.hsgpa_impute for g in hsgpas])
    columns["hsgpa_missing"] = np.array([1.0 if g is None else 0.0 for g in hsgpas])
    for base, impute in (
        ("ability_belief", schema.ability_belief_impute),
        ("interest", schema.interest_impute),
        ("gender", schema.gender_impute),
    ):
        raw = [getattr(r, base) for r in records]
        columns[base] = np.array([float(impute if v is None else v) for v in raw])
        columns[f"{base}_missing"] = np.array([1.0 if v is None else 0.0 for v in raw])
    columns["age"] = np.array(ages)
    columns["cohort"] = np.array([float(r.cohort) for r in records])

    unseen = 0
    known = set(schema.program_levels)
    for p in schema.program_levels:
        columns[f"program={p}"] = np.array([1.0 if r.program == p else 0.0 for r in records])
    for r in records:
        if r.program not in known:
            unseen += 1
    if unseen:
        log.warning("%d records carry a program level unseen at fit time", unseen)

    for d in DISCIPLINE_LEVELS:
        columns[f"discipline={d}"] = np.array([1.0 if r.discipline == d else 0.0 for r in records])
    columns["previously_enrolled"] = np.array([float(r.previously_enrolled) for r in records])
    columns["multiple_requests"] = np.array([float(r.multiple_requests) for r in records])

    if fitting:
        standardization = {}
        for name in STANDARDIZED_COLUMNS:
            mean = float(np.mean(columns[name])) if n else 0.0
            std = float(np.std(columns[name])) if n else 1.0
            standardization[name] = (mean, std if std > 0.0 else 1.0)
        schema = replace(
            schema,
            standardization=standardization,
            column_names=_schema_column_names(schema.program_levels),
        )

    for name in STANDARDIZED_COLUMNS:
        mean, scale = schema.standardization[name]
        columns[name] = (columns[name] - mean) / scale

    matrix = (
        np.column_stack([columns[name] for name in schema.column_names])
        if n
        else np.zeros((0, len(schema.column_names)))
    )
    block = FeatureBlock(
        block_name="structured",
        column_names=schema.column_names,
        matrix=matrix,
        meta={"unseen_programs": unseen},
    )
    return block, schema


# --------------------------------------------------------------------------
# Splits


def split(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded uniform random split; the first floor(n * fraction) records
    of the permutation go to the training side."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    dataset.labels()  # raises listing unlabeled ids
    n = len(dataset)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(np.floor(n * train_fraction))
    return dataset.subset(perm[:n_train].tolist()), dataset.subset(perm[n_train:].tolist())


def kfold(dataset: Dataset, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded k-fold indices: validation sets are disjoint, exhaustive,
    and differ in size by at most one."""
    if k < 2:
        raise ValueError("k must be >= 2")
    n = len(dataset)
    if k > n:
        raise DataError(f"cannot make {k} folds from {n} records")
    perm = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        val = np.sort(perm[start:start + size])
        train = np.sort(np.concatenate([perm[:start], perm[start + size:]]))
        folds.append((train, val))
        start += size
    return folds
