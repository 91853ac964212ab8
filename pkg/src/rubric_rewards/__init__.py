"""Deterministic execution engine for rubric-based RL rewards."""

from . import aggregation, audit, errors, execution, genrm, schema, verifiers
from .aggregation import (
    CriterionMeta,
    FormatRuleSet,
    GroupScores,
    RewardBreakdown,
    content_mask,
    filter_instances,
    final_reward,
    format_mask,
    group_advantages,
    length_gate,
    remap_group,
    reward_group,
)
from .execution import (
    CriterionScore,
    ExposurePolicy,
    GenerationReply,
    GenerationRequest,
    GenerationTransport,
    HttpChatTransport,
    ReplayTransport,
    TaskInstance,
    assemble_context,
    build_scoring_request,
    execute_criterion,
    request_scoring,
    score_response,
)
from .schema import (
    Criterion,
    CriterionRecord,
    PairingReport,
    Rubric,
    ScoringOutput,
    VerifierCall,
    parse_call,
    parse_rubric,
    parse_scoring,
    serialize_rubric,
    serialize_scoring,
    validate_pairing,
)
from .verifiers import (
    TextFlags,
    bbox_verify,
    expr_verify,
    hungarian,
    iou,
    list_verify,
    point_verify,
    text_similarity,
    text_verify,
    time_verify,
)

__version__ = "0.1.0"
