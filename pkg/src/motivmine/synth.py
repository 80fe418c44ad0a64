"""Synthetic student-record generator.

The real records are private, so benchmarks and end-to-end tests run on
generated data with controllable class imbalance, a planted token signal
in the motivation texts, and a tunable structured signal (grade and age
shifts between classes).  Everything is deterministic per seed.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Dataset, Label, StudentRecord

PROGRAMS = (
    ("psychologie", 2), ("rechten", 2), ("sociologie", 2), ("pedagogiek", 2),
    ("biologie", 1), ("natuurkunde", 1), ("wiskunde", 1), ("informatica", 1),
    ("geschiedenis", 3), ("taalwetenschap", 3), ("filosofie", 3), ("kunstgeschiedenis", 3),
)

# Shared vocabulary; stopwords appear so preprocessing has work to do.
_BACKGROUND = (
    "studie programma universiteit stad vak vakken kennis toekomst keuze "
    "interesse motivatie leren studeren werken onderzoek wetenschap college "
    "school jaar tijd mensen wereld maatschappij ervaring richting beroep "
    "carriere ontwikkeling mogelijkheden aansluiting niveau uitdaging "
    "de het een en van in op met voor aan ik je dat niet ook zijn heb wil"
).split()

_DROPOUT_TERMS = (
    "twijfel onzeker misschien proberen lastig moeilijk stoppen wisselen "
    "verplicht ouders druk spanning afstand reizen bijbaan geld zorgen "
    "achterstand herkansing uitstellen motivatieprobleem onduidelijk vaag "
    "toeval gok verveling"
).split()

_RETENTION_TERMS = (
    "passie gedreven doelgericht zeker vastbesloten enthousiast verdieping "
    "ambitie droom fascinatie nieuwsgierig plezier doorzetten discipline "
    "planning voorbereid stage master loopbaan specialisatie verdiepen "
    "betrokken gemotiveerd overtuigd doelen"
).split()


_SIGNAL_RATE = 0.15  # fraction of tokens drawn from the class-tilted pools


@dataclass(frozen=True)
class SynthConfig:
    """Generator knobs; defaults mirror the real corpus dimensions.

    ``text_signal`` sets the purity of the planted token signal: at 1.0
    the two classes use disjoint marker vocabularies, at 0.0 markers are
    uninformative.  ``structured_signal`` scales the class shift in
    grades and age.
    """

    n_records: int = 7060
    dropout_rate: float = 0.25
    text_signal: float = 0.35
    structured_signal: float = 1.0
    mean_tokens: int = 45
    seed: int = 0


def program_map() -> dict[str, int]:
    return dict(PROGRAMS)


def _make_text(rng: np.random.Generator, label: Label, cfg: SynthConfig, program: str) -> str:
    n_tokens = max(5, int(rng.poisson(cfg.mean_tokens)))
    own = _DROPOUT_TERMS if label is Label.DROPOUT else _RETENTION_TERMS
    other = _RETENTION_TERMS if label is Label.DROPOUT else _DROPOUT_TERMS
    p_own = 0.5 * (1.0 + cfg.text_signal)
    words = []
    for _ in range(n_tokens):
        draw = rng.random()
        if draw < _SIGNAL_RATE:
            pool = own if rng.random() < p_own else other
            words.append(pool[rng.integers(len(pool))])
        elif draw < _SIGNAL_RATE + 0.05:
            words.append(program)
        else:
            words.append(_BACKGROUND[rng.integers(len(_BACKGROUND))])
    # group into sentences of ~9 words; sprinkle a number occasionally
    sentences = []
    for start in range(0, len(words), 9):
        chunk = words[start:start + 9]
        if rng.random() < 0.1:
            chunk.append(str(rng.integers(1, 2026)))
        sentences.append(" ".join(chunk).capitalize() + ".")
    return " ".join(sentences)


def _maybe(rng: np.random.Generator, value, p_missing: float):
    return None if rng.random() < p_missing else value


def generate(cfg: SynthConfig) -> Dataset:
    """Build a labeled synthetic dataset, deterministic per seed."""
    rng = np.random.default_rng(cfg.seed)
    programs = [p for p, _ in PROGRAMS]
    disciplines = dict(PROGRAMS)
    records = []
    for i in range(cfg.n_records):
        label = Label.DROPOUT if rng.random() < cfg.dropout_rate else Label.RETENTION
        is_dropout = label is Label.DROPOUT
        grade_shift = 0.35 * cfg.structured_signal if is_dropout else 0.0
        base = rng.normal(6.9 - grade_shift, 0.6)

        def grade() -> float | None:
            g = float(np.clip(base + rng.normal(0.0, 0.3), 1.0, 10.0))
            return _maybe(rng, round(g, 1), 0.04)

        cohort_year = int(rng.choice((2014, 2015)))
        age_shift = 0.4 * cfg.structured_signal if is_dropout else 0.0
        age_years = float(np.clip(rng.normal(19.0 + age_shift, 1.6), 16.5, 42.0))
        dob = dt.date(cohort_year, 9, 1) - dt.timedelta(days=int(age_years * 365.2425))
        program = programs[int(rng.integers(len(programs)))]
        p_positive = 0.68 if is_dropout else 0.82
        records.append(
            StudentRecord(
                id=f"S{i:05d}",
                cohort=1 if cohort_year == 2014 else 2,
                prior_education=int(rng.choice((1, 2, 3, 4), p=(0.55, 0.25, 0.13, 0.07))),
                grade_nl=grade(),
                grade_en=grade(),
                grade_math=grade(),
                ability_belief=_maybe(rng, bool(rng.random() < p_positive), 0.02),
                interest=_maybe(rng, bool(rng.random() < p_positive + 0.08), 0.02),
                gender=_maybe(rng, bool(rng.random() < 0.45), 0.01),
                date_of_birth=dob,
                program=program,
                discipline=disciplines[program],
                previously_enrolled=bool(rng.random() < (0.14 if is_dropout else 0.09)),
                multiple_requests=bool(rng.random() < 0.04),
                motivation_text=_make_text(rng, label, cfg, program),
                label=label,
            )
        )
    return Dataset(records=tuple(records))


def write_program_map(path: str | Path) -> None:
    lines = ["program,discipline"]
    lines += [f"{p},{d}" for p, d in PROGRAMS]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
