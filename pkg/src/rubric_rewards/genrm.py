"""GenRM-side verifiable rewards and multi-teacher label construction."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from . import schema
from .errors import EngineError, NoMatchingTeacher
from .execution import merge_call, run_call
from .schema import Criterion, CriterionRecord, Rubric, ScoringOutput, VerifierCall

logger = logging.getLogger(__name__)

# Verifiers whose scores are binary; the rest are similarity-valued.
BINARY_VERIFIERS = frozenset({"expr_verify", "time_verify"})
SIMILARITY_PASS_BAR = 0.95


@dataclass(frozen=True)
class TeacherScoring:
    teacher_id: str
    scoring: ScoringOutput


@dataclass(frozen=True)
class CriterionLabel:
    credit: float  # in {0, 0.5, 1}
    extracted_value: object | None = None  # present iff criterion verifiable

    def to_dict(self) -> dict:
        credit = int(self.credit) if self.credit in (0.0, 1.0) else self.credit
        return {"credit": credit, "extracted_value": self.extracted_value}


def discretize(score: float) -> float:
    """Engine-wide score discretization: <0.5 fail, [0.5,1) partial, 1 full."""
    if score >= 1.0:
        return 1.0
    if score >= 0.5:
        return 0.5
    return 0.0


def lower_median(values: list[float]) -> float:
    """Median that stays inside the discrete credit set for even counts."""
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def _predict_value(call: VerifierCall):
    if call.name == "time_verify":
        return [call.get("predict"), call.get("pformat")]
    return call.get("predict")


def effective_credit(criterion: Criterion, record: CriterionRecord) -> float | None:
    """A teacher's credit for one criterion, routed like the engine.

    Returns None when the record took the wrong execution path; such
    records are excluded from the median.
    """
    if criterion.verifiable:
        if not record.is_call or record.credit.name != criterion.reference.name:
            return None
        try:
            score = run_call(merge_call(criterion.reference, record.credit))
        except EngineError:
            return None
        return discretize(score)
    if record.is_call:
        return None
    return record.credit


def aggregate_teacher_labels(
    teachers: list[TeacherScoring], rubric: Rubric
) -> list[CriterionLabel]:
    """Per-criterion median credit across teachers; for verifiable criteria,
    keep the first teacher value whose credit equals the median."""
    if not teachers:
        raise NoMatchingTeacher("at least one teacher required")
    labels: list[CriterionLabel] = []
    criteria = rubric.criteria()
    for idx, criterion in enumerate(criteria):
        credits: list[float] = []
        records: list[CriterionRecord] = []
        for teacher in teachers:
            teacher_records = teacher.scoring.records()
            if idx >= len(teacher_records):
                continue
            record = teacher_records[idx]
            credit = effective_credit(criterion, record)
            if credit is None:
                logger.warning(
                    "teacher %s excluded on criterion %d (wrong execution path)",
                    teacher.teacher_id,
                    idx,
                )
                continue
            credits.append(credit)
            records.append(record)
        if not credits:
            raise NoMatchingTeacher(f"no usable teacher for criterion {idx}")
        median = lower_median(credits)
        extracted = None
        if criterion.verifiable:
            for credit, record in zip(credits, records):
                if credit == median:
                    extracted = _predict_value(record.credit)
                    break
            if extracted is None and not any(c == median for c in credits):
                raise NoMatchingTeacher(f"no teacher matches median on criterion {idx}")
        labels.append(CriterionLabel(credit=median, extracted_value=extracted))
    return labels


def format_reward(raw: str | bytes, rubric: Rubric) -> int:
    """1 iff the output parses and every pairing check passes."""
    try:
        scoring = schema.parse_scoring(raw)
    except EngineError:
        return 0
    report = schema.validate_pairing(rubric, scoring)
    return 1 if report.ok else 0


def _verifiable_match(criterion: Criterion, student_value, label: CriterionLabel) -> bool:
    """Verifier-measured correctness of the student's extracted value against
    the label's extracted value."""
    reference: VerifierCall = criterion.reference

    def is_empty(value) -> bool:
        if value is None or value == "" or value == []:
            return True
        return isinstance(value, list) and len(value) == 2 and is_empty(value[0])

    # Agreeing that nothing was extracted counts as a match even where the
    # underlying verifier cannot score empty targets.
    if is_empty(label.extracted_value) or is_empty(student_value):
        return is_empty(label.extracted_value) and is_empty(student_value)
    if reference.name == "time_verify":
        # Time extractions carry their own (value, format) pair.
        if not (isinstance(label.extracted_value, list) and len(label.extracted_value) == 2):
            return False
        if not (isinstance(student_value, list) and len(student_value) == 2):
            return False
        target_args = (
            ("target", label.extracted_value[0]),
            ("tformat", label.extracted_value[1]),
        )
        predict_args = (
            ("predict", student_value[0]),
            ("pformat", student_value[1]),
        )
    else:
        target_args = tuple(
            (k, v) for k, v in reference.args if k not in ("target", "candidates")
        )
        target_args += (("target", label.extracted_value),)
        predict_args = (("predict", student_value),)
    try:
        score = run_call(VerifierCall(reference.name, target_args + predict_args))
    except EngineError:
        return False
    if reference.name in BINARY_VERIFIERS:
        return score == 1.0
    return score >= SIMILARITY_PASS_BAR


def content_reward(
    scoring: ScoringOutput, labels: list[CriterionLabel], rubric: Rubric
) -> float:
    """Mean per-criterion agreement with the aggregated labels."""
    criteria = rubric.criteria()
    records = scoring.records()
    correct = 0
    for idx, (criterion, label) in enumerate(zip(criteria, labels)):
        if idx >= len(records):
            continue
        record = records[idx]
        if criterion.verifiable:
            if record.is_call and _verifiable_match(
                criterion, _predict_value(record.credit), label
            ):
                correct += 1
        else:
            if not record.is_call and record.credit == label.credit:
                correct += 1
    return correct / len(criteria)


def genrm_reward(raw: str | bytes, rubric: Rubric, labels: list[CriterionLabel]) -> float:
    """Combined training reward: format gates content."""
    fmt = format_reward(raw, rubric)
    if fmt == 0:
        return 0.0
    return fmt * content_reward(schema.parse_scoring(raw), labels, rubric)
