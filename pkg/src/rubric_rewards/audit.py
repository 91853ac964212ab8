"""Reward-model reliability metrics and failure-mode audits."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from . import schema
from .errors import EmptyAuditSet, EmptyCategory, EngineError, TransportError
from .execution import (
    GenerationRequest,
    GenerationTransport,
    load_template,
    merge_call,
    run_call,
)
from .genrm import CriterionLabel, _predict_value, _verifiable_match
from .schema import Criterion, Rubric, ScoringOutput

REGULAR = "regular"
NO_FINAL_ANSWER = "no_final_answer"
IRRELEVANT = "irrelevant"
WRONG_BUT_PLAUSIBLE = "wrong_but_plausible"
ADVERSARIAL = "adversarial"

CATEGORIES = (REGULAR, NO_FINAL_ANSWER, IRRELEVANT, WRONG_BUT_PLAUSIBLE, ADVERSARIAL)
ABNORMAL_CATEGORIES = CATEGORIES[1:]

FP_SCORE_BAR = 0.5


@dataclass(frozen=True)
class AuditRecord:
    instance_id: str
    rubric: Rubric
    response: str
    category: str
    labels: tuple[CriterionLabel, ...]
    genrm_raw_output: str


@dataclass(frozen=True)
class CategoryFPR:
    average: float
    arguments: float
    credit: float

    def to_dict(self) -> dict:
        return {"average": self.average, "arguments": self.arguments, "credit": self.credit}


@dataclass(frozen=True)
class AuditMetrics:
    schema_acc: float
    criterion_acc: float
    execution_acc: float
    argument_acc: float
    credit_acc: float
    criterion_level_acc: float
    sample_level_acc: float
    fpr_by_category: dict[str, CategoryFPR] = field(default_factory=dict)
    # Alternate per-record execution denominator, reported alongside the
    # per-criterion headline number.
    execution_acc_by_record: float = 0.0

    def to_dict(self) -> dict:
        return {
            "schema_acc": self.schema_acc,
            "criterion_acc": self.criterion_acc,
            "execution_acc": self.execution_acc,
            "execution_acc_by_record": self.execution_acc_by_record,
            "argument_acc": self.argument_acc,
            "credit_acc": self.credit_acc,
            "criterion_level_acc": self.criterion_level_acc,
            "sample_level_acc": self.sample_level_acc,
            "fpr_by_category": {k: v.to_dict() for k, v in self.fpr_by_category.items()},
        }


def _pct(numerator: int, denominator: int) -> float:
    return 100.0 * numerator / denominator if denominator else 0.0


def _slot_outcomes(record: AuditRecord):
    """Yield (criterion, label, parsed_record_or_None, execution_ok)."""
    try:
        scoring = schema.parse_scoring(record.genrm_raw_output)
    except EngineError:
        scoring = None
    criteria = record.rubric.criteria()
    records = scoring.records() if scoring is not None else ()
    for idx, criterion in enumerate(criteria):
        label = record.labels[idx] if idx < len(record.labels) else None
        slot = records[idx] if idx < len(records) else None
        if slot is None:
            yield criterion, label, None, False
            continue
        if criterion.verifiable:
            execution_ok = slot.is_call and slot.credit.name == criterion.reference.name
        else:
            execution_ok = not slot.is_call
        yield criterion, label, slot, execution_ok


def _criterion_correct(criterion: Criterion, label, slot, execution_ok: bool) -> bool:
    if slot is None or not execution_ok or label is None:
        return False
    if criterion.verifiable:
        return _verifiable_match(criterion, _predict_value(slot.credit), label)
    return slot.credit == label.credit


def evaluate_genrm(records: list[AuditRecord]) -> AuditMetrics:
    if not records:
        raise EmptyAuditSet("no audit records")
    schema_ok = 0
    criterion_slot_ok = 0
    execution_records_ok = 0
    execution_ok_count = 0
    criteria_total = 0
    argument_ok = argument_total = 0
    credit_ok = credit_total = 0
    criterion_correct = 0
    sample_ok = 0
    for record in records:
        parsed = None
        try:
            parsed = schema.parse_scoring(record.genrm_raw_output)
            schema_ok += 1
        except EngineError:
            pass
        if parsed is not None:
            report = schema.validate_pairing(record.rubric, parsed)
            if report.all_slots_match:
                criterion_slot_ok += 1
            if report.all_execution_match:
                execution_records_ok += 1
        all_correct = True
        for criterion, label, slot, execution_ok in _slot_outcomes(record):
            criteria_total += 1
            if execution_ok:
                execution_ok_count += 1
            correct = _criterion_correct(criterion, label, slot, execution_ok)
            if criterion.verifiable:
                argument_total += 1
                argument_ok += correct
            else:
                credit_total += 1
                credit_ok += correct
            criterion_correct += correct
            all_correct = all_correct and correct
        sample_ok += all_correct
    return AuditMetrics(
        schema_acc=_pct(schema_ok, len(records)),
        criterion_acc=_pct(criterion_slot_ok, len(records)),
        execution_acc=_pct(execution_ok_count, criteria_total),
        execution_acc_by_record=_pct(execution_records_ok, len(records)),
        argument_acc=_pct(argument_ok, argument_total),
        credit_acc=_pct(credit_ok, credit_total),
        criterion_level_acc=_pct(criterion_correct, criteria_total),
        sample_level_acc=_pct(sample_ok, len(records)),
    )


def engine_score(criterion: Criterion, slot, execution_ok: bool) -> float:
    """The credit the engine would actually award for one slot."""
    if slot is None or not execution_ok:
        return 0.0
    if criterion.verifiable:
        try:
            return run_call(merge_call(criterion.reference, slot.credit))
        except EngineError:
            return 0.0
    return slot.credit


def false_positive_rate(records: list[AuditRecord]) -> dict[str, CategoryFPR]:
    """Per-category FPRs over fail-labeled criteria of abnormal records.

    A false positive is a fail-labeled criterion (label credit 0) whose
    engine-computed score is >= 0.5; 0.5 partial credits count as FPs.
    """
    if not records:
        raise EmptyCategory("no abnormal records")
    by_category: dict[str, list[AuditRecord]] = {}
    for record in records:
        if record.category == REGULAR:
            continue
        by_category.setdefault(record.category, []).append(record)
    if not by_category:
        raise EmptyCategory("no abnormal records")
    out: dict[str, CategoryFPR] = {}
    for category, recs in by_category.items():
        arg_fp = arg_total = credit_fp = credit_total = 0
        for record in recs:
            for criterion, label, slot, execution_ok in _slot_outcomes(record):
                if label is None or label.credit != 0.0:
                    continue
                fp = engine_score(criterion, slot, execution_ok) >= FP_SCORE_BAR
                if criterion.verifiable:
                    arg_total += 1
                    arg_fp += fp
                else:
                    credit_total += 1
                    credit_fp += fp
        out[category] = CategoryFPR(
            average=_pct(arg_fp + credit_fp, arg_total + credit_total),
            arguments=_pct(arg_fp, arg_total),
            credit=_pct(credit_fp, credit_total),
        )
    return out


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def record_to_dict(record: AuditRecord) -> dict:
    return {
        "id": record.instance_id,
        "rubric": schema.rubric_to_dict(record.rubric),
        "response": record.response,
        "category": record.category,
        "labels": [label.to_dict() for label in record.labels],
        "genrm_output": record.genrm_raw_output,
    }


def record_from_dict(obj: dict) -> AuditRecord:
    if not isinstance(obj, dict):
        raise schema.SchemaViolation("audit record must be an object")
    category = obj.get("category", REGULAR)
    if category not in CATEGORIES:
        raise schema.SchemaViolation(f"unknown audit category {category!r}")
    labels = tuple(
        CriterionLabel(
            credit=float(entry["credit"]),
            extracted_value=entry.get("extracted_value"),
        )
        for entry in obj.get("labels", [])
    )
    return AuditRecord(
        instance_id=str(obj.get("id", "")),
        rubric=schema.parse_rubric(json.dumps(obj["rubric"])),
        response=obj.get("response", ""),
        category=category,
        labels=labels,
        genrm_raw_output=obj.get("genrm_output", ""),
    )


def render_report(metrics: AuditMetrics) -> str:
    """Aligned plain-text table of accuracies and per-category FPRs."""
    lines = [
        "Metric                     Value",
        "-------------------------  ------",
        f"Schema accuracy            {metrics.schema_acc:6.1f}",
        f"Criterion-slot accuracy    {metrics.criterion_acc:6.1f}",
        f"Execution accuracy         {metrics.execution_acc:6.1f}",
        f"Argument accuracy          {metrics.argument_acc:6.1f}",
        f"Credit accuracy            {metrics.credit_acc:6.1f}",
        f"Criterion-level accuracy   {metrics.criterion_level_acc:6.1f}",
        f"Sample-level accuracy      {metrics.sample_level_acc:6.1f}",
    ]
    if metrics.fpr_by_category:
        lines.append("")
        lines.append("Category              Average (Arguments / Credit)")
        lines.append("--------------------  ----------------------------")
        for category in ABNORMAL_CATEGORIES:
            fpr = metrics.fpr_by_category.get(category)
            if fpr is None:
                continue
            lines.append(
                f"{category:<20}  {fpr.average:5.1f} ({fpr.arguments:.1f} / {fpr.credit:.1f})"
            )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Abnormal-response dataset construction
# ---------------------------------------------------------------------------

_RESPONSE_TAG = re.compile(r"<response>(.*?)</response>", re.DOTALL)
_EXTRACTIONS_TAG = re.compile(r"<extractions>(.*?)</extractions>", re.DOTALL)


def target_literals(rubric: Rubric) -> list[str]:
    """Every target-side string literal, for leak scanning."""
    literals: list[str] = []

    def walk(value):
        if isinstance(value, str) and value:
            literals.append(value)
        elif isinstance(value, list):
            for item in value:
                walk(item)

    for criterion in rubric.criteria():
        if criterion.verifiable:
            for key, value in criterion.reference.args:
                if key in ("target", "candidates"):
                    walk(value)
    return literals


def _category_instructions() -> dict[str, str]:
    blocks: dict[str, str] = {}
    current = None
    for line in load_template("abnormal_categories").splitlines():
        if line.startswith("#"):
            continue
        header = re.fullmatch(r"\[([a-z_]+)\]", line.strip())
        if header:
            current = header.group(1)
            blocks[current] = ""
        elif current is not None:
            blocks[current] += line + "\n"
    return {k: v.strip() for k, v in blocks.items()}


def build_abnormal_record(
    instance_id: str,
    question: str,
    original_response: str,
    rubric: Rubric,
    category: str,
    generator: GenerationTransport,
    judges: tuple[GenerationTransport, GenerationTransport],
    instruction_key: str | None = None,
) -> AuditRecord | None:
    """Drive the abnormal-response prompts through the transports.

    Returns None when the candidate fails the dual-judge review or leaks a
    target literal; callers filter and rebalance afterwards.
    """
    instructions = _category_instructions()
    key = instruction_key or category
    if key not in instructions:
        raise EmptyCategory(f"no construction instructions for {key!r}")
    prompt = (
        load_template("abnormal_shared")
        .replace("{question}", question)
        .replace("{original_response}", original_response)
        .replace("{checklist}", schema.serialize_rubric(rubric))
        .replace("{failure_instruction}", instructions[key])
    )
    reply = generator.generate(GenerationRequest(system=prompt, user=question))
    response_match = _RESPONSE_TAG.search(reply.text)
    extraction_match = _EXTRACTIONS_TAG.search(reply.text)
    if not response_match or not extraction_match:
        return None
    response = response_match.group(1).strip()
    try:
        annotations = json.loads(extraction_match.group(1))
    except json.JSONDecodeError:
        return None
    if not isinstance(annotations, dict):
        return None
    # Deterministic leak check: the abnormal response must not contain any
    # target literal verbatim.
    for literal in target_literals(rubric):
        if literal in response:
            return None
    labels: list[CriterionLabel] = []
    for criterion in rubric.criteria():
        entry = annotations.get(criterion.description)
        if not isinstance(entry, dict) or entry.get("credit") not in (0, 0.5, 1):
            return None
        extracted = entry.get("extracted_value") if criterion.verifiable else None
        labels.append(CriterionLabel(credit=float(entry["credit"]), extracted_value=extracted))
    check_prompt = (
        load_template("dual_judge_check")
        .replace("{question}", question)
        .replace("{category}", category)
        .replace("{response}", response)
        .replace("{annotations}", json.dumps(annotations, ensure_ascii=False))
    )
    for judge in judges:
        try:
            verdict = judge.generate(GenerationRequest(system=check_prompt, user="Review."))
        except TransportError:
            return None
        if "PASS" not in verdict.text.upper():
            return None
    return AuditRecord(
        instance_id=instance_id,
        rubric=rubric,
        response=response,
        category=category,
        labels=tuple(labels),
        genrm_raw_output="",
    )
