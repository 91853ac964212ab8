"""HTTP service exposing the reward engine to training loops and tools."""

from __future__ import annotations

import json
import os
from dataclasses import replace

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__, aggregation, audit, execution, genrm, schema
from .errors import CallParseError, EngineError

app = FastAPI(title="rubric-rewards", version=__version__)


@app.exception_handler(EngineError)
async def engine_error_handler(_: Request, exc: EngineError):
    status = 422 if isinstance(exc, CallParseError) else 400
    return JSONResponse(
        status_code=status, content={"code": exc.code, "message": str(exc)}
    )


def _as_text(document: str | dict) -> str:
    if isinstance(document, str):
        return document
    return json.dumps(document, ensure_ascii=False)


class HealthResponse(BaseModel):
    status: str
    version: str


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


class VerifyRequest(BaseModel):
    target_call: str
    predict_call: str


class VerifyResponse(BaseModel):
    score: float
    verifier: str


@app.post("/verify", response_model=VerifyResponse)
def verify(body: VerifyRequest) -> VerifyResponse:
    target = schema.parse_call(body.target_call, side="target")
    predict = schema.parse_call(body.predict_call, side="predict")
    if target.name != predict.name:
        raise EngineError(
            f"verifier name mismatch: {target.name} vs {predict.name}"
        )
    merged = execution.merge_call(target, predict)
    return VerifyResponse(score=execution.run_call(merged), verifier=target.name)


class ScoreRequest(BaseModel):
    rubric: str | dict
    scoring: str | dict
    strict: bool = False


class CriterionScoreModel(BaseModel):
    raw: float
    path: str
    rationale: str = ""


class ScoreResponse(BaseModel):
    scores: list[CriterionScoreModel]
    pairing_ok: bool


@app.post("/score", response_model=ScoreResponse)
def score(body: ScoreRequest) -> ScoreResponse:
    rubric = schema.parse_rubric(_as_text(body.rubric))
    scoring = schema.parse_scoring(_as_text(body.scoring))
    report = schema.validate_pairing(rubric, scoring)
    scores = execution.score_response(rubric, scoring, strict=body.strict)
    return ScoreResponse(
        scores=[
            CriterionScoreModel(raw=s.raw, path=s.path, rationale=s.rationale)
            for s in scores
        ],
        pairing_ok=report.ok,
    )


class PairingRequest(BaseModel):
    rubric: str | dict
    scoring: str | dict


class SlotCheckModel(BaseModel):
    slot_match: bool
    execution_match: bool
    call_valid: bool


class PairingResponse(BaseModel):
    slots: list[SlotCheckModel]
    lengths_match: bool
    ok: bool


@app.post("/pairing", response_model=PairingResponse)
def pairing(body: PairingRequest) -> PairingResponse:
    rubric = schema.parse_rubric(_as_text(body.rubric))
    scoring = schema.parse_scoring(_as_text(body.scoring))
    report = schema.validate_pairing(rubric, scoring)
    return PairingResponse(
        slots=[
            SlotCheckModel(
                slot_match=s.slot_match,
                execution_match=s.execution_match,
                call_valid=s.call_valid,
            )
            for s in report.slots
        ],
        lengths_match=report.lengths_match,
        ok=report.ok,
    )


class FormatRulesModel(BaseModel):
    repetition_enabled: bool = True
    repetition_ngram: int = 20
    max_repetition_ngram_fraction: float = 0.3
    language_enabled: bool = False
    expected_script: str | None = None
    max_foreign_char_fraction: float = 0.1


class ScoreGroupRequest(BaseModel):
    rubric: str | dict
    scorings: list[str | dict]
    response_lengths: list[int]
    responses: list[str] | None = None
    tau: float = aggregation.DEFAULT_TAU
    max_length: int | None = None
    strict: bool = False
    remap: bool = True
    format_rules: FormatRulesModel | None = None


class RolloutBreakdown(BaseModel):
    raw: list[float]
    remapped: list[float]
    base: float
    content_mask: int
    format_mask: int
    final: float
    advantage: float


class ScoreGroupResponse(BaseModel):
    rollouts: list[RolloutBreakdown]


@app.post("/score-group", response_model=ScoreGroupResponse)
def score_group(body: ScoreGroupRequest) -> ScoreGroupResponse:
    if len(body.scorings) != len(body.response_lengths):
        raise EngineError("scorings and response_lengths must have equal length")
    rubric = schema.parse_rubric(_as_text(body.rubric))
    columns = [
        [
            s.raw
            for s in execution.score_response(
                rubric, schema.parse_scoring(_as_text(raw)), strict=body.strict
            )
        ]
        for raw in body.scorings
    ]
    criteria = rubric.criteria()
    group = aggregation.GroupScores(
        scores=tuple(
            tuple(columns[i][k] for i in range(len(columns)))
            for k in range(len(criteria))
        ),
        meta=tuple(
            aggregation.CriterionMeta(ctype=c.ctype, weight=c.weight) for c in criteria
        ),
        tau=body.tau,
    )
    rules = (
        aggregation.FormatRuleSet(**body.format_rules.model_dump())
        if body.format_rules
        else None
    )
    breakdowns = aggregation.reward_group(
        group,
        response_lengths=body.response_lengths,
        responses=body.responses,
        rules=rules,
        max_length=body.max_length,
        remap=body.remap,
    )
    return ScoreGroupResponse(
        rollouts=[RolloutBreakdown(**b.to_dict()) for b in breakdowns]
    )


class FilterInstance(BaseModel):
    id: str
    ctypes: list[str]
    scores: list[list[float]]


class FilterRequest(BaseModel):
    instances: list[FilterInstance]
    mode: str = aggregation.FILTER_ANY


class FilterResponse(BaseModel):
    retained: list[str]


@app.post("/filter", response_model=FilterResponse)
def filter_endpoint(body: FilterRequest) -> FilterResponse:
    retained = aggregation.filter_instances(
        [(inst.id, inst.ctypes, inst.scores) for inst in body.instances],
        mode=body.mode,
    )
    return FilterResponse(retained=retained)


class AuditRequest(BaseModel):
    records: list[dict]


class AuditResponse(BaseModel):
    metrics: dict
    report: str


@app.post("/audit", response_model=AuditResponse)
def audit_endpoint(body: AuditRequest) -> AuditResponse:
    records = [audit.record_from_dict(obj) for obj in body.records]
    metrics = audit.evaluate_genrm(records)
    abnormal = [r for r in records if r.category != audit.REGULAR]
    if abnormal:
        metrics = replace(metrics, fpr_by_category=audit.false_positive_rate(abnormal))
    return AuditResponse(metrics=metrics.to_dict(), report=audit.render_report(metrics))


class LabelRequest(BaseModel):
    rubric: str | dict
    teachers: list[dict]  # [{"teacher_id": ..., "scoring": <str|dict>}]


class LabelResponse(BaseModel):
    labels: list[dict]


@app.post("/labels", response_model=LabelResponse)
def labels_endpoint(body: LabelRequest) -> LabelResponse:
    rubric = schema.parse_rubric(_as_text(body.rubric))
    teachers = [
        genrm.TeacherScoring(
            teacher_id=str(entry.get("teacher_id", i)),
            scoring=schema.parse_scoring(_as_text(entry["scoring"])),
        )
        for i, entry in enumerate(body.teachers)
    ]
    labels = genrm.aggregate_teacher_labels(teachers, rubric)
    return LabelResponse(labels=[label.to_dict() for label in labels])


class GenrmRewardRequest(BaseModel):
    rubric: str | dict
    output: str
    labels: list[dict]


class GenrmRewardResponse(BaseModel):
    format_reward: int
    content_reward: float
    reward: float


@app.post("/genrm-reward", response_model=GenrmRewardResponse)
def genrm_reward_endpoint(body: GenrmRewardRequest) -> GenrmRewardResponse:
    rubric = schema.parse_rubric(_as_text(body.rubric))
    labels = [
        genrm.CriterionLabel(
            credit=float(entry["credit"]), extracted_value=entry.get("extracted_value")
        )
        for entry in body.labels
    ]
    fmt = genrm.format_reward(body.output, rubric)
    content = 0.0
    if fmt:
        content = genrm.content_reward(schema.parse_scoring(body.output), labels, rubric)
    return GenrmRewardResponse(
        format_reward=fmt, content_reward=content, reward=fmt * content
    )


class RequestScoringBody(BaseModel):
    prompt_text: str
    response: str
    response_length: int = 0
    image_ref: str = ""
    instance_id: str = ""
    rubric: str | dict
    exposure: str = execution.MINIMAL
    retries: int = 2


class RequestScoringResponse(BaseModel):
    scoring: dict


def _transport() -> execution.GenerationTransport:
    kind = os.environ.get("TRANSPORT", "replay")
    if kind == "replay":
        path = os.environ.get("REPLAY_FILE", "")
        if not path:
            raise EngineError("REPLAY_FILE is not configured")
        return execution.ReplayTransport.from_file(path)
    return execution.HttpChatTransport()


@app.post("/request-scoring", response_model=RequestScoringResponse)
def request_scoring_endpoint(body: RequestScoringBody) -> RequestScoringResponse:
    instance = execution.TaskInstance(
        prompt_text=body.prompt_text,
        response=body.response,
        response_length=body.response_length,
        image_ref=body.image_ref,
        instance_id=body.instance_id,
    )
    rubric = schema.parse_rubric(_as_text(body.rubric))
    scoring = execution.request_scoring(
        instance,
        rubric,
        transport=_transport(),
        policy=execution.ExposurePolicy(mode=body.exposure),
        retries=body.retries,
    )
    return RequestScoringResponse(scoring=schema.scoring_to_dict(scoring))
