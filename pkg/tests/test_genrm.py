"""Teacher label aggregation and reward-model training rewards."""

import itertools
import json

import pytest

from rubric_rewards import genrm, schema
from rubric_rewards.errors import NoMatchingTeacher
from rubric_rewards.genrm import CriterionLabel, TeacherScoring

from conftest import load_json, load_jsonl


def build_rubric(time_slot=False):
    verifiable = (
        {
            "criterion": "States the departure time.",
            "reference": "time_verify(target='18:15', tformat='%H:%M')",
            "weight": 2,
        }
        if time_slot
        else {
            "criterion": "Names the station.",
            "reference": "text_verify(target='Gare du Nord', ignore_case=True)",
            "weight": 2,
        }
    )
    return schema.parse_rubric(
        json.dumps(
            {
                "essential": [
                    verifiable,
                    {
                        "criterion": "Explains the route.",
                        "reference": "The route goes through the tunnel.",
                        "weight": 1,
                    },
                ]
            }
        )
    )


def teacher(tid, credit_call, fuzzy_credit):
    return TeacherScoring(
        teacher_id=tid,
        scoring=schema.parse_scoring(
            json.dumps(
                {
                    "thought": "t",
                    "essential": [
                        {"criterion": "Names the station.", "rationale": "", "credit": credit_call},
                        {"criterion": "Explains the route.", "rationale": "", "credit": fuzzy_credit},
                    ],
                }
            )
        ),
    )


class TestDiscretize:
    @pytest.mark.parametrize(
        "score,expected",
        [(0.0, 0.0), (0.49, 0.0), (0.5, 0.5), (0.99, 0.5), (1.0, 1.0)],
    )
    def test_mapping(self, score, expected):
        assert genrm.discretize(score) == expected


class TestLowerMedian:
    @pytest.mark.parametrize(
        "values,expected",
        [
            ([1.0], 1.0),
            ([0.0, 1.0], 0.0),  # even counts resolve downward
            ([0.0, 0.5, 1.0], 0.5),
            ([0.5, 1.0, 1.0, 1.0], 1.0),
            ([0.0, 0.0, 0.5, 1.0], 0.0),
        ],
    )
    def test_cases(self, values, expected):
        assert genrm.lower_median(values) == expected

    def test_exhaustive_against_sorted_oracle(self):
        for n in range(1, 6):
            for values in itertools.product([0.0, 0.5, 1.0], repeat=n):
                expected = sorted(values)[(n - 1) // 2]
                assert genrm.lower_median(list(values)) == expected


class TestEffectiveCredit:
    def test_verifier_slot_rescored_and_discretized(self):
        rubric = build_rubric()
        record = teacher("a", "text_verify(predict='gare du nord')", 1).scoring.essential[0]
        assert genrm.effective_credit(rubric.essential[0], record) == 1.0
        near = teacher("a", "text_verify(predict='gare du nor')", 1).scoring.essential[0]
        assert genrm.effective_credit(rubric.essential[0], near) == 0.5

    def test_wrong_path_excluded(self):
        rubric = build_rubric()
        fuzzy_record = teacher("a", 1, 1).scoring.essential[0]
        assert genrm.effective_credit(rubric.essential[0], fuzzy_record) is None
        call_record = teacher("a", "text_verify(predict='x')", 1).scoring.essential[0]
        assert genrm.effective_credit(rubric.essential[1], call_record) is None


class TestAggregateLabels:
    def test_median_and_value_selection(self):
        rubric = build_rubric()
        teachers = [
            teacher("t1", "text_verify(predict='gare du nord')", 1),
            teacher("t2", "text_verify(predict='')", 0.5),
            teacher("t3", "text_verify(predict='Gare du Nord')", 1),
        ]
        labels = genrm.aggregate_teacher_labels(teachers, rubric)
        assert labels[0].credit == 1.0
        # First teacher whose credit equals the median supplies the value.
        assert labels[0].extracted_value == "gare du nord"
        assert labels[1].credit == 1.0
        assert labels[1].extracted_value is None

    def test_wrong_path_teacher_skipped(self):
        rubric = build_rubric()
        teachers = [
            teacher("t1", 1, 1),  # credit on the verifier slot: excluded there
            teacher("t2", "text_verify(predict='gare du nord')", 0),
        ]
        labels = genrm.aggregate_teacher_labels(teachers, rubric)
        assert labels[0].extracted_value == "gare du nord"
        assert labels[1].credit == 0.0  # lower median of {1, 0}

    def test_time_labels_carry_format(self):
        rubric = build_rubric(time_slot=True)
        scoring = schema.parse_scoring(
            json.dumps(
                {
                    "thought": "t",
                    "essential": [
                        {
                            "criterion": "States the departure time.",
                            "rationale": "",
                            "credit": "time_verify(predict='6:15 PM', pformat='%I:%M %p')",
                        },
                        {"criterion": "Explains the route.", "rationale": "", "credit": 1},
                    ],
                }
            )
        )
        labels = genrm.aggregate_teacher_labels(
            [TeacherScoring("t1", scoring)], rubric
        )
        assert labels[0].credit == 1.0
        assert labels[0].extracted_value == ["6:15 PM", "%I:%M %p"]

    def test_no_teachers(self):
        with pytest.raises(NoMatchingTeacher):
            genrm.aggregate_teacher_labels([], build_rubric())

    def test_no_usable_teacher_for_criterion(self):
        with pytest.raises(NoMatchingTeacher):
            genrm.aggregate_teacher_labels([teacher("t1", 1, 1)], build_rubric())


class TestRewards:
    def _labels(self):
        return [
            CriterionLabel(credit=1.0, extracted_value="gare du nord"),
            CriterionLabel(credit=0.5),
        ]

    def _output(self, predict="Gare du Nord", fuzzy=0.5):
        return json.dumps(
            {
                "thought": "scored",
                "essential": [
                    {
                        "criterion": "Names the station.",
                        "rationale": "",
                        "credit": f"text_verify(predict='{predict}')",
                    },
                    {"criterion": "Explains the route.", "rationale": "", "credit": fuzzy},
                ],
            }
        )

    def test_format_reward(self):
        rubric = build_rubric()
        assert genrm.format_reward(self._output(), rubric) == 1
        assert genrm.format_reward("not json", rubric) == 0
        bad = json.loads(self._output())
        bad["essential"][0]["credit"] = 1  # wrong execution path
        assert genrm.format_reward(json.dumps(bad), rubric) == 0

    def test_content_reward_full_agreement(self):
        rubric = build_rubric()
        scoring = schema.parse_scoring(self._output())
        assert genrm.content_reward(scoring, self._labels(), rubric) == 1.0

    def test_content_reward_value_mismatch(self):
        rubric = build_rubric()
        scoring = schema.parse_scoring(self._output(predict="Montparnasse"))
        assert genrm.content_reward(scoring, self._labels(), rubric) == 0.5

    def test_content_reward_credit_mismatch(self):
        rubric = build_rubric()
        scoring = schema.parse_scoring(self._output(fuzzy=1))
        assert genrm.content_reward(scoring, self._labels(), rubric) == 0.5

    def test_empty_extraction_agreement(self):
        rubric = build_rubric()
        labels = [CriterionLabel(credit=0.0, extracted_value=""), CriterionLabel(credit=0.5)]
        scoring = schema.parse_scoring(self._output(predict=""))
        assert genrm.content_reward(scoring, labels, rubric) == 1.0
        # One-sided emptiness is a disagreement.
        scoring = schema.parse_scoring(self._output(predict="something"))
        assert genrm.content_reward(scoring, labels, rubric) == 0.5

    def test_binary_verifier_requires_exact(self):
        rubric = schema.parse_rubric(
            json.dumps(
                {
                    "essential": [
                        {
                            "criterion": "Gives the total.",
                            "reference": "expr_verify(target='3/4')",
                            "weight": 1,
                        }
                    ]
                }
            )
        )
        labels = [CriterionLabel(credit=1.0, extracted_value="3/4")]
        ok = schema.parse_scoring(
            json.dumps(
                {
                    "thought": "t",
                    "essential": [
                        {
                            "criterion": "Gives the total.",
                            "rationale": "",
                            "credit": "expr_verify(predict='0.75')",
                        }
                    ],
                }
            )
        )
        assert genrm.content_reward(ok, labels, rubric) == 1.0

    def test_combined_reward_gated_by_format(self):
        rubric = build_rubric()
        assert genrm.genrm_reward("garbage", rubric, self._labels()) == 0.0
        assert genrm.genrm_reward(self._output(), rubric, self._labels()) == 1.0


class TestFixtureSpotChecks:
    def test_first_records_match_manifest(self):
        manifest = load_json("genrm_manifest.json")
        for record in load_jsonl("genrm_fixture.jsonl")[:10]:
            rubric = schema.parse_rubric(json.dumps(record["rubric"]))
            labels = [
                CriterionLabel(credit=float(l["credit"]), extracted_value=l["extracted_value"])
                for l in record["labels"]
            ]
            expected = manifest[record["id"]]
            assert genrm.format_reward(record["output"], rubric) == expected["format"]
            reward = genrm.genrm_reward(record["output"], rubric, labels)
            assert reward == pytest.approx(
                expected["format"] * expected["content"], abs=1e-12
            )
