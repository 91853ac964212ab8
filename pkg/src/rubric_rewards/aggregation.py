"""Group reward aggregation: score remapping, masks, final rewards,
group-relative advantages, and offline instance filtering."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .errors import GroupTooSmall, VerifierArgumentError
from .schema import ESSENTIAL

DEFAULT_TAU = 0.5
ADVANTAGE_EPS = 1e-8


@dataclass(frozen=True)
class CriterionMeta:
    ctype: str  # "essential" | "additional"
    weight: int


@dataclass(frozen=True)
class GroupScores:
    """Raw criterion scores for one rollout group: K criteria x G rollouts."""

    scores: tuple[tuple[float, ...], ...]
    meta: tuple[CriterionMeta, ...]
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if not self.scores or not self.scores[0]:
            raise VerifierArgumentError("score matrix must be K>=1 by G>=1")
        g = len(self.scores[0])
        if any(len(row) != g for row in self.scores):
            raise VerifierArgumentError("ragged score matrix")
        if len(self.meta) != len(self.scores):
            raise VerifierArgumentError("meta length must equal criterion count")
        if any(not (0.0 <= v <= 1.0) for row in self.scores for v in row):
            raise VerifierArgumentError("scores must lie in [0, 1]")
        if not (0.0 < self.tau < 1.0):
            raise VerifierArgumentError("tau must lie in (0, 1)")


def remap_row(row: list[float] | tuple[float, ...], tau: float = DEFAULT_TAU) -> list[float]:
    """Group-wise affine remap of one criterion row onto threshold-respecting
    bounds; preserves within-row ordering and threshold side."""
    lo, hi = min(row), max(row)
    lower = 0.0 if lo < tau else 0.5
    upper = 1.0 if hi > tau else 0.5
    if lo == hi:
        return [upper if lo > tau else lower for _ in row]
    # Normalize first: dividing (upper-lower) by a subnormal span overflows.
    return [(v - lo) / (hi - lo) * (upper - lower) + lower for v in row]


def remap_group(group: GroupScores) -> list[list[float]]:
    return [remap_row(row, group.tau) for row in group.scores]


def content_mask(essential_scores: list[float]) -> int:
    """0 on any essential failure (<0.5) or two or more essential partials."""
    if any(v < 0.5 for v in essential_scores):
        return 0
    if sum(1 for v in essential_scores if 0.5 <= v < 1.0) >= 2:
        return 0
    return 1


@dataclass(frozen=True)
class FormatRuleSet:
    repetition_enabled: bool = True
    repetition_ngram: int = 20
    max_repetition_ngram_fraction: float = 0.3
    language_enabled: bool = False
    expected_script: str | None = None  # "latin" | "cjk"
    max_foreign_char_fraction: float = 0.1


_EXEMPT_SPANS = re.compile(
    r"```.*?```|`[^`\n]*`|\$\$.*?\$\$|\$[^$\n]*\$|\\\(.*?\\\)|\\\[.*?\\\]",
    re.DOTALL,
)


def _script_of(ch: str) -> str:
    code = ord(ch)
    if code < 0x250 or 0x1E00 <= code <= 0x1EFF:
        return "latin"
    if (
        0x4E00 <= code <= 0x9FFF
        or 0x3400 <= code <= 0x4DBF
        or 0x3040 <= code <= 0x30FF
        or 0xAC00 <= code <= 0xD7AF
    ):
        return "cjk"
    return "other"


def _repetition_fires(text: str, n: int, max_fraction: float) -> bool:
    if len(text) < 2 * n:
        return False
    counts: dict[str, int] = {}
    best = 0
    for i in range(len(text) - n + 1):
        gram = text[i : i + n]
        counts[gram] = counts.get(gram, 0) + 1
        if counts[gram] > best:
            best = counts[gram]
    if best < 2:
        return False
    coverage = best * n / len(text)
    return coverage > max_fraction


def _language_fires(text: str, expected: str, max_fraction: float) -> bool:
    visible = _EXEMPT_SPANS.sub(" ", text)
    letters = [c for c in visible if c.isalpha()]
    if not letters:
        return False
    foreign = sum(1 for c in letters if _script_of(c) != expected)
    return foreign / len(letters) > max_fraction


def format_mask(response: str, rules: FormatRuleSet = FormatRuleSet()) -> int:
    if rules.repetition_enabled and _repetition_fires(
        response, rules.repetition_ngram, rules.max_repetition_ngram_fraction
    ):
        return 0
    if rules.language_enabled and rules.expected_script and _language_fires(
        response, rules.expected_script, rules.max_foreign_char_fraction
    ):
        return 0
    return 1


def final_reward(
    meta: list[CriterionMeta] | tuple[CriterionMeta, ...],
    scores: list[float],
    content: int = 1,
    fmt: int = 1,
) -> float:
    """Weight-normalized criterion sum gated by the content/format masks."""
    total_weight = sum(m.weight for m in meta)
    base = sum(m.weight * s for m, s in zip(meta, scores)) / total_weight
    return content * fmt * base


def length_gate(reward: float, response_length: int, max_length: int) -> float:
    return 0.0 if response_length > max_length else reward


def group_advantages(rewards: list[float], eps: float = ADVANTAGE_EPS) -> list[float]:
    g = len(rewards)
    if g < 2:
        raise GroupTooSmall(f"need G >= 2 rollouts, got {g}")
    mean = sum(rewards) / g
    variance = sum((r - mean) ** 2 for r in rewards) / g
    std = math.sqrt(variance)
    if std == 0.0:
        return [0.0] * g
    return [(r - mean) / (std + eps) for r in rewards]


@dataclass
class RewardBreakdown:
    raw: list[float]
    remapped: list[float]
    base: float
    content_mask: int
    format_mask: int
    final: float
    advantage: float | None = None

    def to_dict(self) -> dict:
        return {
            "raw": self.raw,
            "remapped": self.remapped,
            "base": self.base,
            "content_mask": self.content_mask,
            "format_mask": self.format_mask,
            "final": self.final,
            "advantage": self.advantage,
        }


def reward_group(
    group: GroupScores,
    response_lengths: list[int] | None = None,
    responses: list[str] | None = None,
    rules: FormatRuleSet | None = None,
    max_length: int | None = None,
    remap: bool = True,
) -> list[RewardBreakdown]:
    """Full group pipeline: remap, mask, aggregate, gate, standardize."""
    g = len(group.scores[0])
    if g < 2:
        raise GroupTooSmall(f"need G >= 2 rollouts, got {g}")
    if response_lengths is not None and len(response_lengths) != g:
        raise VerifierArgumentError("response_lengths must have one entry per rollout")
    if responses is not None and len(responses) != g:
        raise VerifierArgumentError("responses must have one entry per rollout")
    remapped = remap_group(group) if remap else [list(row) for row in group.scores]
    essential_rows = [k for k, m in enumerate(group.meta) if m.ctype == ESSENTIAL]
    breakdowns: list[RewardBreakdown] = []
    for i in range(g):
        column = [remapped[k][i] for k in range(len(group.meta))]
        cmask = content_mask([column[k] for k in essential_rows])
        fmask = 1
        if responses is not None and rules is not None:
            fmask = format_mask(responses[i], rules)
        final = final_reward(group.meta, column, cmask, fmask)
        if max_length is not None and response_lengths is not None:
            final = length_gate(final, response_lengths[i], max_length)
        breakdowns.append(
            RewardBreakdown(
                raw=[group.scores[k][i] for k in range(len(group.meta))],
                remapped=column,
                base=final_reward(group.meta, column),
                content_mask=cmask,
                format_mask=fmask,
                final=final,
            )
        )
    advantages = group_advantages([b.final for b in breakdowns])
    for breakdown, advantage in zip(breakdowns, advantages):
        breakdown.advantage = advantage
    return breakdowns


FILTER_ANY = "any"
FILTER_ESSENTIAL = "essential"


def filter_instances(
    instances: list[tuple[str, list[str], list[list[float]]]],
    mode: str = FILTER_ANY,
) -> list[str]:
    """Retain instances where some rollout scored 0 on a criterion.

    Each instance is (id, ctypes per criterion, rollout score rows); mode
    'essential' requires the zero to land on an essential criterion.
    """
    if mode not in (FILTER_ANY, FILTER_ESSENTIAL):
        raise VerifierArgumentError(f"unknown filter mode {mode!r}")
    retained: list[str] = []
    for instance_id, ctypes, rollouts in instances:
        keep = False
        for scores in rollouts:
            for ctype, score in zip(ctypes, scores):
                if score == 0.0 and (mode == FILTER_ANY or ctype == ESSENTIAL):
                    keep = True
                    break
            if keep:
                break
        if keep:
            retained.append(instance_id)
    return retained
