"""The six deterministic verifiers: text, expression, time, list, bbox, point.

All functions are pure and return scores in [0, 1]; expression and time
checks are binary.
"""

from __future__ import annotations

import math
import re
import unicodedata
from dataclasses import dataclass
from datetime import datetime
from fractions import Fraction

from .errors import FormatError, VerifierArgumentError

COORD_MIN = 0
COORD_MAX = 1000

# Distance at which point proximity reaches 0: 10% of the coordinate-space
# diagonal (sqrt(2) * 1000 / 10).
POINT_DISTANCE_SCALE = 141.42


@dataclass(frozen=True)
class TextFlags:
    use_latex: bool = False
    ignore_space: bool = False
    ignore_punc: bool = False
    ignore_case: bool = False
    ignore_st: bool = False


# Marker characters stripped from both ends when ignore_st is set.
ST_MARKERS = "\"'`«»<>()[]{}.,:;-–—_* \t\r\n"


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (ca != cb),
                )
            )
        previous = current
    return previous[-1]


_LATEX_DROP = re.compile(r"\\left|\\right|\\[,;:!]|\\displaystyle")
_LATEX_WRAP = re.compile(r"\\(?:text|mathrm|mathbf|mathit|operatorname)\{([^{}]*)\}")


def canonical_latex(s: str) -> str:
    s = s.replace("$", "")
    s = _LATEX_DROP.sub("", s)
    s = _LATEX_WRAP.sub(r"\1", s)
    s = s.replace("\\dfrac", "\\frac").replace("\\tfrac", "\\frac")
    s = s.replace("\\%", "%")
    return s


def normalize_text(s: str, flags: TextFlags) -> str:
    if flags.use_latex:
        s = canonical_latex(s)
    if flags.ignore_st:
        s = s.strip(ST_MARKERS)
    if flags.ignore_case:
        s = s.casefold()
    if flags.ignore_punc:
        s = "".join(c for c in s if not unicodedata.category(c).startswith("P"))
    if flags.ignore_space:
        s = "".join(s.split())
    return s


def text_similarity(a: str, b: str, flags: TextFlags = TextFlags()) -> float:
    na, nb = normalize_text(a, flags), normalize_text(b, flags)
    if na == nb:
        return 1.0
    if not na or not nb:
        return 0.0
    return 1.0 - levenshtein(na, nb) / max(len(na), len(nb))


def text_verify(
    predict,
    target: str | None = None,
    candidates: list[str] | None = None,
    flags: TextFlags = TextFlags(),
) -> float:
    if (target is None) == (candidates is None):
        raise VerifierArgumentError("exactly one of target/candidates required")
    if not isinstance(predict, str):
        return 0.0
    if target is not None:
        return text_similarity(target, predict, flags)
    if not candidates:
        raise VerifierArgumentError("candidates must be non-empty")
    return max(text_similarity(c, predict, flags) for c in candidates)


# ---------------------------------------------------------------------------
# Expression equivalence
# ---------------------------------------------------------------------------

_THOUSANDS = re.compile(r"^-?\d{1,3}(,\d{3})+(\.\d+)?$")
_FRAC = re.compile(r"^(-?)\\frac\{(-?[\d.]+)\}\{(-?[\d.]+)\}$")
_SQRT = re.compile(r"^(-?)\\sqrt\{(\d+)\}$")
_SCI = re.compile(r"^(-?[\d.]+)(?:[x×*]|\\times)10\^(?:\{(-?\d+)\}|(-?\d+))$")
_ENOT = re.compile(r"^(-?[\d.]+)[eE](-?\d+)$")


def _numeric(text: str) -> Fraction | None:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        return None


def _parse_expr(s: str):
    """Return ('opt', letter), ('num', Fraction), ('num~', float), or None."""
    if not isinstance(s, str):
        return None
    t = s.strip()
    t = canonical_latex(t)
    for pre, post in (("\\(", "\\)"), ("\\[", "\\]")):
        if t.startswith(pre) and t.endswith(post):
            t = t[len(pre) : -len(post)]
    t = "".join(t.split())
    t = t.rstrip(".;")
    if not t:
        return None
    if re.fullmatch(r"[A-Za-z]", t):
        return ("opt", t.lower())
    if _THOUSANDS.match(t):
        t = t.replace(",", "")
    if t.endswith("%"):
        value = _numeric(t[:-1])
        return None if value is None else ("num", value / 100)
    m = _FRAC.match(t)
    if m:
        num, den = _numeric(m.group(2)), _numeric(m.group(3))
        if num is None or den is None or den == 0:
            return None
        value = num / den
        return ("num", -value if m.group(1) else value)
    m = _SQRT.match(t)
    if m:
        n = int(m.group(2))
        root = math.isqrt(n)
        sign = -1 if m.group(1) else 1
        if root * root == n:
            return ("num", Fraction(sign * root))
        return ("num~", sign * math.sqrt(n))
    m = _SCI.match(t)
    if m:
        mantissa = _numeric(m.group(1))
        exponent = int(m.group(2) if m.group(2) is not None else m.group(3))
        if mantissa is None:
            return None
        return ("num", mantissa * Fraction(10) ** exponent)
    m = _ENOT.match(t)
    if m:
        mantissa = _numeric(m.group(1))
        if mantissa is None:
            return None
        return ("num", mantissa * Fraction(10) ** int(m.group(2)))
    value = _numeric(t)
    if value is not None:
        return ("num", value)
    return None


def expr_verify(target: str, predict: str) -> float:
    a, b = _parse_expr(target), _parse_expr(predict)
    if a is None or b is None:
        return 0.0
    if a[0] == b[0] == "opt":
        return 1.0 if a[1] == b[1] else 0.0
    if a[0].startswith("num") and b[0].startswith("num"):
        if a[0] == "num" and b[0] == "num":
            return 1.0 if a[1] == b[1] else 0.0
        fa, fb = float(a[1]), float(b[1])
        return 1.0 if math.isclose(fa, fb, rel_tol=1e-9, abs_tol=1e-12) else 0.0
    return 0.0


# ---------------------------------------------------------------------------
# Time equivalence
# ---------------------------------------------------------------------------

_DIRECTIVE_FIELDS = {
    "Y": "year",
    "y": "year",
    "m": "month",
    "d": "day",
    "H": "hour",
    "I": "hour",
    "M": "minute",
    "S": "second",
}


def _populated_fields(fmt: str) -> frozenset[str]:
    fields = set()
    i = 0
    while i < len(fmt) - 1:
        if fmt[i] == "%":
            field = _DIRECTIVE_FIELDS.get(fmt[i + 1])
            if field:
                fields.add(field)
            i += 2
        else:
            i += 1
    return frozenset(fields)


def time_verify(target: str, tformat: str, predict: str, pformat: str) -> float:
    tfields = _populated_fields(tformat)
    if not tfields:
        raise FormatError(f"target format {tformat!r} populates no fields")
    try:
        tvalue = datetime.strptime(target, tformat)
    except (ValueError, TypeError) as exc:
        raise FormatError(f"target {target!r} does not match {tformat!r}") from exc
    if not isinstance(predict, str) or not isinstance(pformat, str):
        return 0.0
    pfields = _populated_fields(pformat)
    if not pfields:
        return 0.0
    try:
        pvalue = datetime.strptime(predict, pformat)
    except ValueError:
        return 0.0
    common = tfields & pfields
    if not common:
        return 0.0
    return 1.0 if all(getattr(tvalue, f) == getattr(pvalue, f) for f in common) else 0.0


# ---------------------------------------------------------------------------
# Hungarian assignment (maximization)
# ---------------------------------------------------------------------------


def hungarian(score: list[list[float]]) -> list[tuple[int, int]]:
    """Maximum-total-score assignment over a rectangular score matrix.

    Returns min(rows, cols) (row, col) pairs sorted by row.
    """
    rows = len(score)
    if rows == 0 or any(len(r) == 0 for r in score):
        raise VerifierArgumentError("score matrix must be non-empty")
    cols = len(score[0])
    if any(len(r) != cols for r in score):
        raise VerifierArgumentError("score matrix must be rectangular")
    for r in score:
        for v in r:
            if not math.isfinite(v):
                raise VerifierArgumentError("score matrix entries must be finite")

    n = max(rows, cols)
    big = 1e6 * (1.0 + max(abs(v) for r in score for v in r))
    # Minimize negated scores; padding cells cost `big` so every real
    # row/column of the smaller dimension gets a real partner.
    cost = [
        [-score[i][j] if i < rows and j < cols else big for j in range(n)]
        for i in range(n)
    ]

    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # p[j] = row assigned to column j (1-based)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1][j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    pairs = [
        (p[j] - 1, j - 1)
        for j in range(1, n + 1)
        if p[j] - 1 < rows and j - 1 < cols
    ]
    pairs.sort()
    return pairs


# ---------------------------------------------------------------------------
# List / box / point matching
# ---------------------------------------------------------------------------


def list_verify(
    predict,
    target: list[str] | None = None,
    candidates: list[list[str]] | None = None,
    flags: TextFlags = TextFlags(),
) -> float:
    if (target is None) == (candidates is None):
        raise VerifierArgumentError("exactly one of target/candidates required")
    if candidates is not None:
        if not candidates:
            raise VerifierArgumentError("candidates must be non-empty")
        return max(list_verify(predict, target=c, flags=flags) for c in candidates)
    if not isinstance(predict, list) or not all(isinstance(p, str) for p in predict):
        return 0.0
    if not target:
        return 1.0 if not predict else 0.0
    if not predict:
        return 0.0
    matrix = [[text_similarity(t, p, flags) for p in predict] for t in target]
    matched = sum(matrix[i][j] for i, j in hungarian(matrix))
    return matched / max(len(target), len(predict))


def canonical_box(box) -> tuple[int, int, int, int] | None:
    if not isinstance(box, (list, tuple)) or len(box) != 4:
        return None
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in box):
        return None
    x1, y1, x2, y2 = box
    x1, x2 = sorted((x1, x2))
    y1, y2 = sorted((y1, y2))
    clamp = lambda v: min(max(v, COORD_MIN), COORD_MAX)
    return (clamp(x1), clamp(y1), clamp(x2), clamp(y2))


def iou(a, b) -> float:
    ca, cb = canonical_box(a), canonical_box(b)
    if ca is None or cb is None:
        raise VerifierArgumentError("boxes must be [x1, y1, x2, y2]")
    area_a = (ca[2] - ca[0]) * (ca[3] - ca[1])
    area_b = (cb[2] - cb[0]) * (cb[3] - cb[1])
    if area_a == 0 or area_b == 0:
        return 1.0 if ca == cb else 0.0
    iw = min(ca[2], cb[2]) - max(ca[0], cb[0])
    ih = min(ca[3], cb[3]) - max(ca[1], cb[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (area_a + area_b - inter)


def bbox_verify(target: list, predict) -> float:
    targets = [canonical_box(b) for b in target] if isinstance(target, list) else []
    if not targets or any(t is None for t in targets):
        raise VerifierArgumentError("target must be a non-empty list of boxes")
    if not isinstance(predict, list) or not predict:
        return 0.0
    predicts = [canonical_box(b) for b in predict]
    if any(p is None for p in predicts):
        return 0.0
    matrix = [[iou(t, p) for p in predicts] for t in targets]
    matched = sum(matrix[i][j] for i, j in hungarian(matrix))
    return matched / max(len(targets), len(predicts))


def canonical_point(point) -> tuple[float, float] | None:
    if not isinstance(point, (list, tuple)) or len(point) != 2:
        return None
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in point):
        return None
    clamp = lambda v: min(max(v, COORD_MIN), COORD_MAX)
    return (clamp(point[0]), clamp(point[1]))


def point_proximity(a, b, scale: float = POINT_DISTANCE_SCALE) -> float:
    d = math.dist(a, b)
    return max(0.0, 1.0 - d / scale)


def point_verify(target: list, predict, scale: float = POINT_DISTANCE_SCALE) -> float:
    targets = [canonical_point(p) for p in target] if isinstance(target, list) else []
    if not targets or any(t is None for t in targets):
        raise VerifierArgumentError("target must be a non-empty list of points")
    if not isinstance(predict, list) or not predict:
        return 0.0
    predicts = [canonical_point(p) for p in predict]
    if any(p is None for p in predicts):
        return 0.0
    matrix = [[point_proximity(t, p, scale) for p in predicts] for t in targets]
    matched = sum(matrix[i][j] for i, j in hungarian(matrix))
    return matched / max(len(targets), len(predicts))
