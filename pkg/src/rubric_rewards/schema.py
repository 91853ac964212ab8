"""Rubric and scoring schemas plus the verifier call-expression grammar.

Everything here is pure parsing/validation: values are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import (
    CallParseError,
    CreditDomainError,
    MalformedDocument,
    SchemaViolation,
)

VERIFIER_NAMES = (
    "text_verify",
    "expr_verify",
    "time_verify",
    "list_verify",
    "bbox_verify",
    "point_verify",
)

# Argument name -> accepted literal kind, per verifier.  Kinds:
#   str, bool, list[str], list[list[str]], list[list[int]]
SIGNATURES: dict[str, dict[str, str]] = {
    "text_verify": {
        "target": "str",
        "candidates": "list[str]",
        "use_latex": "bool",
        "ignore_space": "bool",
        "ignore_punc": "bool",
        "ignore_case": "bool",
        "ignore_st": "bool",
        "predict": "str",
    },
    "expr_verify": {"target": "str", "predict": "str"},
    "time_verify": {
        "target": "str",
        "tformat": "str",
        "predict": "str",
        "pformat": "str",
    },
    "list_verify": {
        "target": "list[str]",
        "candidates": "list[list[str]]",
        "predict": "list[str]",
    },
    "bbox_verify": {"target": "list[list[int]]", "predict": "list[list[int]]"},
    "point_verify": {"target": "list[list[int]]", "predict": "list[list[int]]"},
}

# Arguments that only the scoring model may supply.
PREDICT_SIDE_ARGS = frozenset({"predict", "pformat"})

ESSENTIAL = "essential"
ADDITIONAL = "additional"

Literal = str | int | bool | list


@dataclass(frozen=True)
class VerifierCall:
    name: str
    args: tuple[tuple[str, Literal], ...]

    def arg_dict(self) -> dict[str, Literal]:
        return dict(self.args)

    def get(self, key: str, default=None):
        return self.arg_dict().get(key, default)

    def to_string(self) -> str:
        parts = ", ".join(f"{k}={format_literal(v)}" for k, v in self.args)
        return f"{self.name}({parts})"


@dataclass(frozen=True)
class Criterion:
    description: str
    ctype: str  # ESSENTIAL or ADDITIONAL
    weight: int
    reference: str | VerifierCall

    @property
    def verifiable(self) -> bool:
        return isinstance(self.reference, VerifierCall)


@dataclass(frozen=True)
class Rubric:
    essential: tuple[Criterion, ...]
    additional: tuple[Criterion, ...]

    def criteria(self) -> tuple[Criterion, ...]:
        return self.essential + self.additional


@dataclass(frozen=True)
class CriterionRecord:
    criterion: str
    rationale: str
    credit: float | VerifierCall

    @property
    def is_call(self) -> bool:
        return isinstance(self.credit, VerifierCall)


@dataclass(frozen=True)
class ScoringOutput:
    thought: str
    essential: tuple[CriterionRecord, ...]
    additional: tuple[CriterionRecord, ...]

    def records(self) -> tuple[CriterionRecord, ...]:
        return self.essential + self.additional


# ---------------------------------------------------------------------------
# Call-expression grammar
# ---------------------------------------------------------------------------

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r"}


def format_literal(value: Literal) -> str:
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        body = value.replace("\\", "\\\\").replace("'", "\\'")
        return f"'{body}'"
    if isinstance(value, list):
        return "[" + ", ".join(format_literal(v) for v in value) + "]"
    raise TypeError(f"unsupported literal {value!r}")


class _CallParser:
    """Recursive-descent parser over a single call expression.

    Total over arbitrary input: either returns a VerifierCall or raises
    CallParseError with the byte offset of the failure.
    """

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def fail(self, message: str):
        raise CallParseError(message, self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r\n":
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            self.fail(f"expected {ch!r}")
        self.pos += 1

    def ident(self) -> str:
        start = self.pos
        if not (self.peek().isalpha() or self.peek() == "_"):
            self.fail("expected identifier")
        while self.peek().isalnum() or self.peek() == "_":
            self.pos += 1
        return self.text[start : self.pos]

    def parse(self) -> VerifierCall:
        self.skip_ws()
        name = self.ident()
        if name not in VERIFIER_NAMES:
            self.pos -= len(name)
            self.fail(f"unknown verifier {name!r}")
        self.skip_ws()
        self.expect("(")
        args: list[tuple[str, Literal]] = []
        seen: set[str] = set()
        self.skip_ws()
        if self.peek() != ")":
            while True:
                self.skip_ws()
                start = self.pos
                if not (self.peek().isalpha() or self.peek() == "_"):
                    self.fail("positional argument or bad token")
                key = self.ident()
                self.skip_ws()
                if self.peek() != "=":
                    self.pos = start
                    self.fail("positional argument")
                self.pos += 1
                if key in seen:
                    self.pos = start
                    self.fail(f"duplicate keyword {key!r}")
                seen.add(key)
                self.skip_ws()
                args.append((key, self.literal(depth=0)))
                self.skip_ws()
                if self.peek() == ",":
                    self.pos += 1
                    self.skip_ws()
                    if self.peek() == ")":  # trailing comma
                        break
                    continue
                break
        if self.peek() != ")":
            self.fail("unbalanced parentheses")
        self.pos += 1
        self.skip_ws()
        if self.pos != len(self.text):
            self.fail("trailing characters after call")
        return VerifierCall(name, tuple(args))

    def literal(self, depth: int) -> Literal:
        ch = self.peek()
        if ch in "'\"" or (ch in "rR" and self.pos + 1 < len(self.text) and self.text[self.pos + 1] in "'\""):
            return self.string()
        if ch == "[":
            if depth >= 2:
                self.fail("list nesting too deep")
            return self.list_literal(depth)
        if ch == "-" or ch.isdigit():
            return self.integer()
        if self.text.startswith("True", self.pos):
            self.pos += 4
            return True
        if self.text.startswith("False", self.pos):
            self.pos += 5
            return False
        self.fail("unsupported literal")

    def string(self) -> str:
        raw = False
        if self.peek() in "rR":
            raw = True
            self.pos += 1
        quote = self.peek()
        if quote not in "'\"":
            self.fail("expected string literal")
        self.pos += 1
        out: list[str] = []
        while True:
            if self.pos >= len(self.text):
                self.fail("unterminated string")
            ch = self.text[self.pos]
            if ch == "\\" and self.pos + 1 < len(self.text):
                nxt = self.text[self.pos + 1]
                if raw:
                    out.append("\\")
                    out.append(nxt)
                else:
                    out.append(_ESCAPES.get(nxt, nxt))
                self.pos += 2
                continue
            if ch == quote:
                self.pos += 1
                return "".join(out)
            out.append(ch)
            self.pos += 1

    def integer(self) -> int:
        start = self.pos
        if self.peek() == "-":
            self.pos += 1
        if not self.peek().isdigit():
            self.pos = start
            self.fail("expected integer")
        while self.peek().isdigit():
            self.pos += 1
        if self.peek() == ".":
            self.pos = start
            self.fail("unsupported literal (non-integer number)")
        return int(self.text[start : self.pos])

    def list_literal(self, depth: int) -> list:
        self.expect("[")
        items: list = []
        self.skip_ws()
        if self.peek() == "]":
            self.pos += 1
            return items
        while True:
            self.skip_ws()
            items.append(self.literal(depth + 1))
            self.skip_ws()
            if self.peek() == ",":
                self.pos += 1
                self.skip_ws()
                if self.peek() == "]":
                    break
                continue
            break
        if self.peek() != "]":
            self.fail("unbalanced brackets")
        self.pos += 1
        return items


def _kind_of(value: Literal) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, str):
        return "str"
    if isinstance(value, list):
        if not value:
            return "list[]"
        inner = {_kind_of(v) for v in value}
        if inner == {"str"}:
            return "list[str]"
        if inner == {"int"}:
            return "list[int]"
        if inner == {"list[]"}:
            return "list[list[]]"
        if inner <= {"list[str]", "list[]"}:
            return "list[list[str]]"
        if inner <= {"list[int]", "list[]"}:
            return "list[list[int]]"
        return "list[mixed]"
    return "unknown"


def _kind_matches(kind: str, expected: str) -> bool:
    if kind == expected:
        return True
    # Empty containers satisfy any compatible list type.
    if kind == "list[]" and expected.startswith("list["):
        return True
    if kind == "list[list[]]" and expected.startswith("list[list["):
        return True
    return False


def parse_call(text: str, side: str | None = None) -> VerifierCall:
    """Parse a verifier call string.

    side='target' restricts to rubric-side arguments with strict literal
    types; side='predict' restricts to scoring-side arguments but leaves
    list shapes for the verifier to judge (malformed coordinate payloads
    score 0 rather than failing the parse).
    """
    if not isinstance(text, str):
        raise CallParseError("call expression must be text", 0)
    call = _CallParser(text).parse()
    sig = SIGNATURES[call.name]
    for key, value in call.args:
        if key not in sig:
            raise CallParseError(f"unknown argument {key!r} for {call.name}", 0)
        predict_arg = key in PREDICT_SIDE_ARGS
        if side == "target" and predict_arg:
            raise CallParseError(f"{key!r} is not a rubric-side argument", 0)
        if side == "predict" and not predict_arg:
            raise CallParseError(f"{key!r} is not a scoring-side argument", 0)
        strict = side != "predict" or not sig[key].startswith("list[")
        if strict and not _kind_matches(_kind_of(value), sig[key]):
            raise CallParseError(
                f"argument {key!r} of {call.name} must be {sig[key]}", 0
            )
    return call


def is_call_like(text: str) -> bool:
    """True when the text lexically starts with a known verifier name."""
    if not isinstance(text, str):
        return False
    head = text.lstrip()
    return any(
        head.startswith(name) and head[len(name) :].lstrip().startswith("(")
        for name in VERIFIER_NAMES
    )


# ---------------------------------------------------------------------------
# Rubric parsing
# ---------------------------------------------------------------------------


def _load_object(raw: str | bytes) -> dict:
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedDocument(f"not UTF-8: {exc}") from exc
    try:
        obj = json.loads(raw)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedDocument(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedDocument("top-level value must be an object")
    return obj


def _as_weight(value) -> int:
    if isinstance(value, bool):
        raise SchemaViolation("weight must be an integer")
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if not isinstance(value, int):
        raise SchemaViolation("weight must be an integer")
    if value not in (1, 2, 3):
        raise SchemaViolation(f"weight {value} outside {{1, 2, 3}}")
    return value


def _parse_criterion(item, ctype: str, index: int) -> Criterion:
    where = f"{ctype}[{index}]"
    if not isinstance(item, dict):
        raise SchemaViolation(f"{where} must be an object")
    description = item.get("criterion")
    if not isinstance(description, str) or not description.strip():
        raise SchemaViolation(f"{where}: criterion must be non-empty text")
    reference = item.get("reference")
    if not isinstance(reference, str):
        raise SchemaViolation(f"{where}: reference must be text")
    weight = _as_weight(item.get("weight"))
    ref: str | VerifierCall = reference
    if is_call_like(reference):
        ref = parse_call(reference, side="target")
    return Criterion(description=description, ctype=ctype, weight=weight, reference=ref)


def parse_rubric(raw: str | bytes) -> Rubric:
    obj = _load_object(raw)
    if "essential" not in obj:
        raise SchemaViolation("missing essential array")
    sections = {}
    for ctype in (ESSENTIAL, ADDITIONAL):
        items = obj.get(ctype, [])
        if not isinstance(items, list):
            raise SchemaViolation(f"{ctype} must be an array")
        sections[ctype] = tuple(
            _parse_criterion(item, ctype, i) for i, item in enumerate(items)
        )
    if not sections[ESSENTIAL]:
        raise SchemaViolation("essential array must be non-empty")
    seen: set[str] = set()
    for criterion in sections[ESSENTIAL] + sections[ADDITIONAL]:
        key = criterion.description.strip()
        if key in seen:
            raise SchemaViolation(f"duplicate criterion description: {key!r}")
        seen.add(key)
    return Rubric(essential=sections[ESSENTIAL], additional=sections[ADDITIONAL])


def rubric_to_dict(rubric: Rubric) -> dict:
    def dump(criterion: Criterion) -> dict:
        reference = criterion.reference
        if isinstance(reference, VerifierCall):
            reference = reference.to_string()
        return {
            "criterion": criterion.description,
            "reference": reference,
            "weight": criterion.weight,
        }

    return {
        "essential": [dump(c) for c in rubric.essential],
        "additional": [dump(c) for c in rubric.additional],
    }


def serialize_rubric(rubric: Rubric) -> str:
    return json.dumps(rubric_to_dict(rubric), ensure_ascii=False)


# ---------------------------------------------------------------------------
# Scoring-output parsing
# ---------------------------------------------------------------------------

_CREDITS = {0.0, 0.5, 1.0}


def _parse_record(item, ctype: str, index: int) -> CriterionRecord:
    where = f"{ctype}[{index}]"
    if not isinstance(item, dict):
        raise SchemaViolation(f"{where} must be an object")
    criterion = item.get("criterion")
    if not isinstance(criterion, str):
        raise SchemaViolation(f"{where}: criterion must be text")
    rationale = item.get("rationale")
    if not isinstance(rationale, str):
        raise SchemaViolation(f"{where}: rationale must be text")
    credit = item.get("credit")
    if isinstance(credit, bool):
        raise SchemaViolation(f"{where}: credit must be a number or call string")
    if isinstance(credit, (int, float)):
        value = float(credit)
        if value not in _CREDITS:
            raise CreditDomainError(f"{where}: credit {credit} outside {{0, 0.5, 1}}")
        return CriterionRecord(criterion, rationale, value)
    if isinstance(credit, str) and is_call_like(credit):
        return CriterionRecord(criterion, rationale, parse_call(credit, side="predict"))
    raise SchemaViolation(f"{where}: credit must be a number or a verifier call")


def parse_scoring(raw: str | bytes) -> ScoringOutput:
    obj = _load_object(raw)
    thought = obj.get("thought")
    if not isinstance(thought, str):
        raise SchemaViolation("thought must be text")
    sections = {}
    for ctype in (ESSENTIAL, ADDITIONAL):
        items = obj.get(ctype, [])
        if not isinstance(items, list):
            raise SchemaViolation(f"{ctype} must be an array")
        sections[ctype] = tuple(
            _parse_record(item, ctype, i) for i, item in enumerate(items)
        )
    return ScoringOutput(
        thought=thought,
        essential=sections[ESSENTIAL],
        additional=sections[ADDITIONAL],
    )


def scoring_to_dict(scoring: ScoringOutput) -> dict:
    def dump(record: CriterionRecord) -> dict:
        credit = record.credit
        if isinstance(credit, VerifierCall):
            credit = credit.to_string()
        elif credit in (0.0, 1.0):
            credit = int(credit)
        return {
            "criterion": record.criterion,
            "rationale": record.rationale,
            "credit": credit,
        }

    return {
        "thought": scoring.thought,
        "essential": [dump(r) for r in scoring.essential],
        "additional": [dump(r) for r in scoring.additional],
    }


def serialize_scoring(scoring: ScoringOutput) -> str:
    return json.dumps(scoring_to_dict(scoring), ensure_ascii=False)


# ---------------------------------------------------------------------------
# Pairing validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlotCheck:
    slot_match: bool
    execution_match: bool
    call_valid: bool

    @property
    def ok(self) -> bool:
        return self.slot_match and self.execution_match and self.call_valid


@dataclass(frozen=True)
class PairingReport:
    slots: tuple[SlotCheck, ...]
    lengths_match: bool

    @property
    def all_slots_match(self) -> bool:
        return self.lengths_match and all(s.slot_match for s in self.slots)

    @property
    def all_execution_match(self) -> bool:
        return self.lengths_match and all(s.execution_match for s in self.slots)

    @property
    def all_calls_valid(self) -> bool:
        return self.lengths_match and all(s.call_valid for s in self.slots)

    @property
    def ok(self) -> bool:
        return self.lengths_match and all(s.ok for s in self.slots)


def validate_pairing(rubric: Rubric, scoring: ScoringOutput) -> PairingReport:
    """Check slot alignment, execution routing, and call validity.

    Validation failures are reported, never thrown.
    """
    slots: list[SlotCheck] = []
    lengths_match = len(rubric.essential) == len(scoring.essential) and len(
        rubric.additional
    ) == len(scoring.additional)
    for section in (ESSENTIAL, ADDITIONAL):
        criteria = getattr(rubric, section)
        records = getattr(scoring, section)
        for i, criterion in enumerate(criteria):
            if i >= len(records):
                slots.append(SlotCheck(False, False, False))
                continue
            record = records[i]
            slot_match = record.criterion.strip() == criterion.description.strip()
            if criterion.verifiable:
                execution_match = (
                    record.is_call and record.credit.name == criterion.reference.name
                )
            else:
                execution_match = not record.is_call
            # A call present in a parsed ScoringOutput already passed the
            # predict-side grammar, so validity reduces to presence.
            slots.append(SlotCheck(slot_match, execution_match, True))
    return PairingReport(slots=tuple(slots), lengths_match=lengths_match)
