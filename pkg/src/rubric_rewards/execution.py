"""Criterion execution: routing, context assembly, transports.

Verifiable criteria run through target/predict call merging plus a
deterministic verifier; fuzzy criteria pass the judge's discrete credit
through unchanged. Context assembly enforces the exposure policy: target
arguments are withheld from extractors and the image reference is never
placed in any request.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from importlib import resources

import httpx

from . import schema, verifiers
from .errors import (
    EngineError,
    MergeConflict,
    PairingError,
    ParseFailureAfterRetries,
    RoleMismatch,
    TransportError,
)
from .schema import (
    Criterion,
    CriterionRecord,
    Rubric,
    ScoringOutput,
    VerifierCall,
)
from .verifiers import TextFlags

EXTRACTOR = "extractor"
JUDGE = "judge"

MINIMAL = "minimal"
UNLIMITED = "unlimited"

PATH_VERIFIER = "verifier"
PATH_JUDGE = "judge"

# Scoring-side call shapes shown to the model; target arguments never
# appear here.
SCORING_SIGNATURES = {
    "text_verify": "text_verify(predict: str)",
    "expr_verify": "expr_verify(predict: str)",
    "time_verify": "time_verify(predict: str, pformat: str)",
    "list_verify": "list_verify(predict: List[str])",
    "bbox_verify": "bbox_verify(predict: List[List[int]])",
    "point_verify": "point_verify(predict: List[List[int]])",
}


@dataclass(frozen=True)
class TaskInstance:
    prompt_text: str
    response: str
    response_length: int
    image_ref: str = ""  # opaque; carried but never read
    instance_id: str = ""


@dataclass(frozen=True)
class ExposurePolicy:
    mode: str = MINIMAL
    judge_sees_image: bool = False

    def __post_init__(self):
        if self.mode not in (MINIMAL, UNLIMITED):
            raise ValueError(f"unknown exposure mode {self.mode!r}")
        if self.mode == MINIMAL and self.judge_sees_image:
            raise ValueError("minimal exposure forbids judge image access")


@dataclass(frozen=True)
class GenerationRequest:
    system: str
    user: str
    decode_params: tuple[tuple[str, object], ...] = ()

    def key(self) -> str:
        digest = hashlib.sha256()
        digest.update(self.system.encode("utf-8"))
        digest.update(b"\x00")
        digest.update(self.user.encode("utf-8"))
        return digest.hexdigest()


@dataclass(frozen=True)
class GenerationReply:
    text: str
    finish_reason: str = "stop"


@dataclass(frozen=True)
class CriterionScore:
    raw: float
    path: str  # PATH_VERIFIER or PATH_JUDGE
    rationale: str = ""
    call: VerifierCall | None = None


def load_template(name: str) -> str:
    return (
        resources.files("rubric_rewards.templates").joinpath(f"{name}.txt").read_text("utf-8")
    )


def _scoring_system_text() -> str:
    signatures = "\n".join(f"- {sig}" for sig in SCORING_SIGNATURES.values())
    return load_template("response_scoring").replace("{verifier_signatures}", signatures)


def _reference_line(criterion: Criterion, policy: ExposurePolicy) -> str:
    if criterion.verifiable:
        call = criterion.reference
        if policy.mode == UNLIMITED:
            return f"scoring tool: {call.to_string()}"
        return f"scoring tool: {SCORING_SIGNATURES[call.name]}"
    return f"ground truth: {criterion.reference}"


def assemble_context(
    instance: TaskInstance,
    criterion: Criterion,
    role: str,
    policy: ExposurePolicy = ExposurePolicy(),
) -> GenerationRequest:
    """Build a single-criterion generation request for one role."""
    if role == EXTRACTOR and not criterion.verifiable:
        raise RoleMismatch("extractor role needs a verifier-call reference")
    if role == JUDGE and criterion.verifiable:
        raise RoleMismatch("judge role needs a ground-truth reference")
    lines = [
        f"Question: {instance.prompt_text}",
        f"Response: {instance.response}",
        f"Criterion: {criterion.description}",
    ]
    if role == EXTRACTOR:
        call = criterion.reference
        if policy.mode == UNLIMITED:
            lines.append(f"Scoring tool: {call.to_string()}")
        else:
            lines.append(f"Scoring tool: {SCORING_SIGNATURES[call.name]}")
        lines.append(
            "Extract the predicted value from the response and emit the tool call."
        )
    else:
        lines.append(f"Reference: {criterion.reference}")
        lines.append("Assign a credit of 0, 0.5, or 1 with a brief rationale.")
    return GenerationRequest(system=_scoring_system_text(), user="\n".join(lines))


def build_scoring_request(
    instance: TaskInstance,
    rubric: Rubric,
    policy: ExposurePolicy = ExposurePolicy(),
) -> GenerationRequest:
    """One request scoring the whole rubric in a single structured reply."""
    lines = [f"Question: {instance.prompt_text}", f"Response: {instance.response}", "Checklist:"]
    for section in (schema.ESSENTIAL, schema.ADDITIONAL):
        criteria = getattr(rubric, section)
        if not criteria and section == schema.ADDITIONAL:
            continue
        lines.append(f"{section}:")
        for i, criterion in enumerate(criteria, start=1):
            lines.append(
                f"  {i}. {criterion.description} "
                f"({_reference_line(criterion, policy)}; weight {criterion.weight})"
            )
    return GenerationRequest(system=_scoring_system_text(), user="\n".join(lines))


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def merge_call(target: VerifierCall, predict: VerifierCall) -> VerifierCall:
    keys = {k for k, _ in target.args}
    for k, _ in predict.args:
        if k in keys:
            raise MergeConflict(f"keyword {k!r} supplied on both sides")
    return VerifierCall(target.name, target.args + predict.args)


def run_call(call: VerifierCall) -> float:
    args = call.arg_dict()
    if call.name == "text_verify":
        flags = TextFlags(
            use_latex=bool(args.get("use_latex", False)),
            ignore_space=bool(args.get("ignore_space", False)),
            ignore_punc=bool(args.get("ignore_punc", False)),
            ignore_case=bool(args.get("ignore_case", False)),
            ignore_st=bool(args.get("ignore_st", False)),
        )
        return verifiers.text_verify(
            args.get("predict", ""),
            target=args.get("target"),
            candidates=args.get("candidates"),
            flags=flags,
        )
    if call.name == "expr_verify":
        return verifiers.expr_verify(args.get("target", ""), args.get("predict", ""))
    if call.name == "time_verify":
        return verifiers.time_verify(
            args.get("target"),
            args.get("tformat"),
            args.get("predict", ""),
            args.get("pformat", ""),
        )
    if call.name == "list_verify":
        return verifiers.list_verify(
            args.get("predict", []),
            target=args.get("target"),
            candidates=args.get("candidates"),
        )
    if call.name == "bbox_verify":
        return verifiers.bbox_verify(args.get("target"), args.get("predict", []))
    if call.name == "point_verify":
        return verifiers.point_verify(args.get("target"), args.get("predict", []))
    raise EngineError(f"unknown verifier {call.name!r}")


def execute_criterion(criterion: Criterion, record: CriterionRecord) -> CriterionScore:
    if criterion.verifiable:
        if not record.is_call:
            raise PairingError("verifier criterion answered with discrete credit")
        merged = merge_call(criterion.reference, record.credit)
        return CriterionScore(
            raw=run_call(merged),
            path=PATH_VERIFIER,
            rationale=record.rationale,
            call=merged,
        )
    if record.is_call:
        raise PairingError("fuzzy criterion answered with a verifier call")
    return CriterionScore(raw=record.credit, path=PATH_JUDGE, rationale=record.rationale)


def score_response(
    rubric: Rubric, scoring: ScoringOutput, strict: bool = False
) -> list[CriterionScore]:
    """One CriterionScore per rubric criterion, essential then additional.

    Lenient mode scores mismatched slots 0 instead of aborting, so one bad
    record cannot stall a training batch.
    """
    report = schema.validate_pairing(rubric, scoring)
    if strict and not report.ok:
        raise PairingError("rubric/scoring pairing validation failed")
    scores: list[CriterionScore] = []
    slot = 0
    for section in (schema.ESSENTIAL, schema.ADDITIONAL):
        criteria = getattr(rubric, section)
        records = getattr(scoring, section)
        for i, criterion in enumerate(criteria):
            check = report.slots[slot]
            slot += 1
            path = PATH_VERIFIER if criterion.verifiable else PATH_JUDGE
            if i >= len(records) or not (check.slot_match and check.execution_match):
                scores.append(CriterionScore(raw=0.0, path=path))
                continue
            scores.append(execute_criterion(criterion, records[i]))
    return scores


# ---------------------------------------------------------------------------
# Transports
# ---------------------------------------------------------------------------


class GenerationTransport:
    """Abstract request/response contract; implementations must be safe for
    concurrent use up to a caller-set parallelism bound."""

    def generate(self, request: GenerationRequest) -> GenerationReply:
        raise NotImplementedError


class ReplayTransport(GenerationTransport):
    """Replays pre-recorded replies keyed by request hash (for tests)."""

    def __init__(self, replies: dict[str, str | list[str]]):
        self._replies = dict(replies)
        self._cursor: dict[str, int] = {}

    @classmethod
    def from_file(cls, path: str) -> "ReplayTransport":
        replies: dict[str, str | list[str]] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                replies[obj["key"]] = obj["text"]
        return cls(replies)

    def generate(self, request: GenerationRequest) -> GenerationReply:
        key = request.key()
        if key not in self._replies:
            raise TransportError(f"no recorded reply for request {key}")
        entry = self._replies[key]
        if isinstance(entry, list):
            # Sequential replies support retry tests.
            idx = min(self._cursor.get(key, 0), len(entry) - 1)
            self._cursor[key] = idx + 1
            return GenerationReply(text=entry[idx])
        return GenerationReply(text=entry)


class HttpChatTransport(GenerationTransport):
    """Chat-completions style HTTP client configured by environment
    variables JUDGE_ENDPOINT, JUDGE_API_KEY, JUDGE_MODEL."""

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
        timeout: float = 120.0,
    ):
        self.endpoint = endpoint or os.environ.get("JUDGE_ENDPOINT", "")
        self.api_key = api_key or os.environ.get("JUDGE_API_KEY", "")
        self.model = model or os.environ.get("JUDGE_MODEL", "")
        self.timeout = timeout
        if not self.endpoint:
            raise TransportError("JUDGE_ENDPOINT is not configured")

    def generate(self, request: GenerationRequest) -> GenerationReply:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        }
        payload.update(dict(request.decode_params))
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = httpx.post(
                self.endpoint, json=payload, headers=headers, timeout=self.timeout
            )
            response.raise_for_status()
            body = response.json()
            choice = body["choices"][0]
            return GenerationReply(
                text=choice["message"]["content"],
                finish_reason=choice.get("finish_reason", "stop"),
            )
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise TransportError(str(exc)) from exc


def request_scoring(
    instance: TaskInstance,
    rubric: Rubric,
    transport: GenerationTransport,
    policy: ExposurePolicy = ExposurePolicy(),
    retries: int = 2,
) -> ScoringOutput:
    """Drive one scoring request through the transport and parse the reply.

    Retries the identical prompt up to `retries` times on parse failure.
    """
    request = build_scoring_request(instance, rubric, policy)
    last_error: EngineError | None = None
    for _ in range(retries + 1):
        try:
            reply = transport.generate(request)
        except TransportError as exc:
            raise TransportError(
                f"instance {instance.instance_id or '<unnamed>'}: {exc}"
            ) from exc
        try:
            return schema.parse_scoring(reply.text)
        except EngineError as exc:
            last_error = exc
    raise ParseFailureAfterRetries(
        f"instance {instance.instance_id or '<unnamed>'}: {last_error}"
    )
