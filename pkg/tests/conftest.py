import datetime as dt

import pytest

from motivmine import lexicon, textprep
from motivmine.corpus import Dataset, Label, StudentRecord
from motivmine.textprep import TokenizedDoc


def make_docs(token_lists, sentence_counts=None):
    """TokenizedDocs from plain token lists, ids d0, d1, ..."""
    if sentence_counts is None:
        sentence_counts = [1] * len(token_lists)
    return [
        TokenizedDoc(record_id=f"d{i}", tokens=tuple(tokens), raw_sentence_count=n)
        for i, (tokens, n) in enumerate(zip(token_lists, sentence_counts))
    ]


def make_record(i, label=Label.RETENTION, **overrides):
    """A valid record with boring defaults; override any field."""
    fields = dict(
        id=f"r{i:04d}",
        cohort=1 + (i % 2),
        prior_education=1 + (i % 4),
        grade_nl=6.0 + (i % 4),
        grade_en=7.0,
        grade_math=6.5,
        ability_belief=True,
        interest=True,
        gender=bool(i % 2),
        date_of_birth=dt.date(1995 + (i % 3), 3 + (i % 9), 1 + (i % 27)),
        program=("psychologie", "biologie", "rechten")[i % 3],
        discipline=(2, 1, 2)[i % 3],
        previously_enrolled=False,
        multiple_requests=False,
        motivation_text=f"Ik wil graag studeren. Dit is tekst nummer {i}.",
        label=label,
    )
    fields.update(overrides)
    return StudentRecord(**fields)


def make_dataset(n, dropout_every=4):
    """n labeled records; every dropout_every-th record is a dropout."""
    return Dataset(
        records=tuple(
            make_record(i, label=Label.DROPOUT if i % dropout_every == 0 else Label.RETENTION)
            for i in range(n)
        )
    )


@pytest.fixture(scope="session")
def stopwords():
    return textprep.bundled_stopwords()


@pytest.fixture(scope="session")
def mini_lexicon():
    return lexicon.bundled_lexicon()
