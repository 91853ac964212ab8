"""Verifier correctness against independent oracles plus invariants."""

import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rubric_rewards import verifiers as v
from rubric_rewards.errors import FormatError, VerifierArgumentError
from rubric_rewards.verifiers import TextFlags

# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def oracle_levenshtein(a: str, b: str) -> int:
    """Full-matrix edit distance, written independently of the two-row DP."""
    rows = len(a) + 1
    cols = len(b) + 1
    d = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        d[i][0] = i
    for j in range(cols):
        d[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost)
    return d[-1][-1]


def oracle_best_assignment(matrix) -> float:
    """Maximum assignment total by exhaustive permutation search."""
    rows = len(matrix)
    cols = len(matrix[0])
    k = min(rows, cols)
    best = -math.inf
    for row_subset in itertools.permutations(range(rows), k):
        for col_subset in itertools.permutations(range(cols), k):
            best = max(
                best, sum(matrix[r][c] for r, c in zip(row_subset, col_subset))
            )
    return best


def oracle_iou(a, b) -> float:
    ax0, ax1 = sorted((min(max(a[0], 0), 1000), min(max(a[2], 0), 1000)))
    ay0, ay1 = sorted((min(max(a[1], 0), 1000), min(max(a[3], 0), 1000)))
    bx0, bx1 = sorted((min(max(b[0], 0), 1000), min(max(b[2], 0), 1000)))
    by0, by1 = sorted((min(max(b[1], 0), 1000), min(max(b[3], 0), 1000)))
    area_a = (ax1 - ax0) * (ay1 - ay0)
    area_b = (bx1 - bx0) * (by1 - by0)
    if area_a == 0 or area_b == 0:
        return 1.0 if (ax0, ay0, ax1, ay1) == (bx0, by0, bx1, by1) else 0.0
    iw = max(0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    return inter / (area_a + area_b - inter)


# ---------------------------------------------------------------------------
# Levenshtein / text
# ---------------------------------------------------------------------------


class TestText:
    def test_known_distance(self):
        assert v.levenshtein("kitten", "sitting") == 3
        assert v.text_similarity("kitten", "sitting") == 1 - 3 / 7

    def test_distance_matches_oracle(self):
        rng = random.Random(7)
        alphabet = "abcX "
        for _ in range(200):
            a = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 9)))
            b = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 9)))
            assert v.levenshtein(a, b) == oracle_levenshtein(a, b)

    def test_ignore_case(self):
        assert v.text_verify("PARIS", target="paris", flags=TextFlags(ignore_case=True)) == 1.0
        assert v.text_verify("PARIS", target="paris") < 1.0

    def test_ignore_space(self):
        assert v.text_verify("a b  c", target="abc", flags=TextFlags(ignore_space=True)) == 1.0

    def test_ignore_punc(self):
        assert v.text_verify("a,b.c!", target="abc", flags=TextFlags(ignore_punc=True)) == 1.0

    def test_ignore_st(self):
        assert v.text_verify('"answer."', target="answer", flags=TextFlags(ignore_st=True)) == 1.0

    def test_use_latex(self):
        assert v.text_verify(r"\text{abc}", target="abc", flags=TextFlags(use_latex=True)) == 1.0
        assert (
            v.text_verify(
                r"\left(x\right)", target="(x)", flags=TextFlags(use_latex=True)
            )
            == 1.0
        )

    def test_candidates_take_max(self):
        score = v.text_verify("rome", candidates=["paris", "rome", "lyon"])
        assert score == 1.0

    def test_exactly_one_reference_required(self):
        with pytest.raises(VerifierArgumentError):
            v.text_verify("x")
        with pytest.raises(VerifierArgumentError):
            v.text_verify("x", target="a", candidates=["b"])

    @given(st.text(max_size=20), st.text(max_size=20))
    @settings(max_examples=100)
    def test_similarity_symmetric_and_bounded(self, a, b):
        score = v.text_similarity(a, b)
        assert score == v.text_similarity(b, a)
        assert 0.0 <= score <= 1.0

    def test_identical_scores_one(self):
        assert v.text_similarity("same", "same") == 1.0
        assert v.text_similarity("", "") == 1.0


# ---------------------------------------------------------------------------
# Expression equivalence
# ---------------------------------------------------------------------------


class TestExpr:
    @pytest.mark.parametrize(
        "target,predict,expected",
        [
            ("\\frac{4}{6}", "2/3", 1.0),
            ("B", "b", 1.0),
            ("b.", "B", 1.0),
            ("0.5", "0.49", 0.0),
            ("50%", "0.5", 1.0),
            ("1,234", "1234", 1.0),
            ("\\sqrt{2}", "1.41421356237", 1.0),
            ("\\sqrt{4}", "2", 1.0),
            ("1.5x10^3", "1500", 1.0),
            ("1.5e3", "1500", 1.0),
            ("-3/4", "-0.75", 1.0),
            ("A", "1", 0.0),
            ("1", "not a number", 0.0),
            ("not a number", "1", 0.0),
        ],
    )
    def test_cases(self, target, predict, expected):
        assert v.expr_verify(target, predict) == expected

    def test_exact_fractions_not_float_rounded(self):
        # 1/3 as a decimal approximation must not pass the exact path.
        assert v.expr_verify("1/3", "0.3333333333333333") == 0.0
        assert v.expr_verify("1/3", "2/6") == 1.0

    def test_inexact_relative_tolerance(self):
        root2 = math.sqrt(2)
        assert v.expr_verify("\\sqrt{2}", f"{root2:.15f}") == 1.0
        assert v.expr_verify("\\sqrt{2}", f"{root2 * 1.001:.15f}") == 0.0


# ---------------------------------------------------------------------------
# Timestamps
# ---------------------------------------------------------------------------


class TestTime:
    def test_same_instant_different_formats(self):
        assert v.time_verify("18:15", "%H:%M", "6:15 PM", "%I:%M %p") == 1.0

    def test_different_instant(self):
        assert v.time_verify("18:15", "%H:%M", "6:20 PM", "%I:%M %p") == 0.0

    def test_common_field_subset(self):
        assert v.time_verify("2020-01-02 10:30", "%Y-%m-%d %H:%M", "10:30", "%H:%M") == 1.0
        assert v.time_verify("2020-01-02 10:30", "%Y-%m-%d %H:%M", "10:31", "%H:%M") == 0.0

    def test_disjoint_fields_score_zero(self):
        assert v.time_verify("2020", "%Y", "10:30", "%H:%M") == 0.0

    def test_malformed_target_raises(self):
        with pytest.raises(FormatError):
            v.time_verify("25:99", "%H:%M", "10:00", "%H:%M")
        with pytest.raises(FormatError):
            v.time_verify("10:00", "%Q", "10:00", "%H:%M")

    def test_malformed_predict_scores_zero(self):
        assert v.time_verify("10:00", "%H:%M", "later", "%H:%M") == 0.0


# ---------------------------------------------------------------------------
# Assignment solver
# ---------------------------------------------------------------------------


class TestHungarian:
    def test_known_small_case(self):
        assert v.hungarian([[0.9, 0.8], [0.9, 0.1]]) == [(0, 1), (1, 0)]

    def test_matches_exhaustive_oracle(self):
        rng = random.Random(11)
        for _ in range(60):
            rows = rng.randrange(1, 5)
            cols = rng.randrange(1, 5)
            matrix = [[rng.random() for _ in range(cols)] for _ in range(rows)]
            pairs = v.hungarian(matrix)
            assert len(pairs) == min(rows, cols)
            assert len({r for r, _ in pairs}) == len(pairs)
            assert len({c for _, c in pairs}) == len(pairs)
            total = sum(matrix[r][c] for r, c in pairs)
            assert total == pytest.approx(oracle_best_assignment(matrix), abs=1e-9)

    def test_rectangular_shapes(self):
        wide = v.hungarian([[1.0, 0.0, 0.5]])
        assert wide == [(0, 0)]
        tall = v.hungarian([[0.2], [0.9], [0.1]])
        assert tall == [(1, 0)]


# ---------------------------------------------------------------------------
# List matching
# ---------------------------------------------------------------------------


class TestListVerify:
    def test_partial_match(self):
        score = v.list_verify(["cat", "dog"], target=["cat", "dog", "bird"])
        assert score == pytest.approx(2 / 3)

    def test_permutation_invariant(self):
        a = v.list_verify(["x", "y", "z"], target=["z", "x", "y"])
        b = v.list_verify(["z", "y", "x"], target=["x", "y", "z"])
        assert a == b == 1.0

    def test_candidates_take_max(self):
        score = v.list_verify(["a"], candidates=[["b"], ["a"]])
        assert score == 1.0

    def test_extra_predictions_dilute(self):
        score = v.list_verify(["cat", "junk1", "junk2", "junk3"], target=["cat"])
        assert score == pytest.approx(1 / 4)

    def test_empty_against_empty(self):
        assert v.list_verify([], target=[]) == 1.0

    def test_exactly_one_reference_required(self):
        with pytest.raises(VerifierArgumentError):
            v.list_verify(["a"])


# ---------------------------------------------------------------------------
# Boxes and points
# ---------------------------------------------------------------------------


class TestBox:
    def test_iou_matches_oracle(self):
        rng = random.Random(3)
        for _ in range(300):
            a = [rng.randrange(-50, 1100) for _ in range(4)]
            b = [rng.randrange(-50, 1100) for _ in range(4)]
            assert v.iou(a, b) == pytest.approx(oracle_iou(a, b), abs=1e-12)

    def test_known_pair(self):
        score = v.bbox_verify([[531, 118, 892, 435]], [[529, 119, 890, 433]])
        assert score == pytest.approx(112726 / 115065, abs=1e-12)

    def test_corner_order_irrelevant(self):
        assert v.iou([892, 435, 531, 118], [531, 118, 892, 435]) == 1.0

    def test_degenerate_boxes(self):
        assert v.bbox_verify([[5, 5, 5, 5]], [[5, 5, 5, 5]]) == 1.0
        assert v.bbox_verify([[5, 5, 5, 5]], [[6, 6, 6, 6]]) == 0.0

    def test_coordinates_clamped(self):
        assert v.iou([0, 0, 2000, 2000], [0, 0, 1000, 1000]) == 1.0

    def test_permutation_invariant_sets(self):
        target = [[0, 0, 100, 100], [500, 500, 600, 600]]
        predict = [[500, 500, 600, 600], [0, 0, 100, 100]]
        assert v.bbox_verify(target, predict) == 1.0

    def test_unmatched_counts_against(self):
        score = v.bbox_verify([[0, 0, 100, 100]], [[0, 0, 100, 100], [900, 900, 950, 950]])
        assert score == pytest.approx(0.5)

    def test_malformed_predict_scores_zero(self):
        assert v.bbox_verify([[0, 0, 10, 10]], [[1, 2]]) == 0.0
        assert v.bbox_verify([[0, 0, 10, 10]], []) == 0.0

    def test_malformed_target_raises(self):
        with pytest.raises(VerifierArgumentError):
            v.bbox_verify([], [[0, 0, 10, 10]])
        with pytest.raises(VerifierArgumentError):
            v.bbox_verify([[1, 2]], [[0, 0, 10, 10]])


class TestPoint:
    def test_proximity_known_value(self):
        # Offset (2, 2): distance 2*sqrt(2), scaled by 141.42.
        expected = 1 - math.hypot(2, 2) / 141.42
        assert v.point_verify([[591, 234]], [[589, 236]]) == pytest.approx(expected)

    def test_exact_match(self):
        assert v.point_verify([[10, 10]], [[10, 10]]) == 1.0

    def test_far_point_scores_zero(self):
        assert v.point_verify([[0, 0]], [[500, 500]]) == 0.0

    def test_matching_minimizes_loss(self):
        target = [[0, 0], [100, 100]]
        predict = [[100, 100], [0, 0]]
        assert v.point_verify(target, predict) == 1.0

    def test_malformed_predict_scores_zero(self):
        assert v.point_verify([[1, 2]], [[1]]) == 0.0

    def test_malformed_target_raises(self):
        with pytest.raises(VerifierArgumentError):
            v.point_verify([[1]], [[1, 2]])
        with pytest.raises(VerifierArgumentError):
            v.point_verify([], [])


# ---------------------------------------------------------------------------
# Cross-cutting invariant: every verifier score lies in [0, 1]
# ---------------------------------------------------------------------------


@given(
    st.lists(st.lists(st.integers(-100, 1100), min_size=4, max_size=4), min_size=1, max_size=3),
    st.lists(st.lists(st.integers(-100, 1100), min_size=4, max_size=4), min_size=0, max_size=3),
)
@settings(max_examples=100)
def test_bbox_scores_bounded(target, predict):
    assert 0.0 <= v.bbox_verify(target, predict) <= 1.0
