"""Reliability metrics, false-positive rates, abnormal-set construction."""

import json

import pytest

from rubric_rewards import audit, execution, schema
from rubric_rewards.errors import EmptyAuditSet, EmptyCategory, TransportError
from rubric_rewards.genrm import CriterionLabel

from conftest import load_json, load_jsonl


def build_rubric():
    return schema.parse_rubric(
        json.dumps(
            {
                "essential": [
                    {
                        "criterion": "Names the element.",
                        "reference": "text_verify(target='Tungsten', ignore_case=True)",
                        "weight": 2,
                    },
                    {
                        "criterion": "Explains the property.",
                        "reference": "It has the highest melting point.",
                        "weight": 1,
                    },
                ]
            }
        )
    )


def output(predict="tungsten", fuzzy=1, paraphrase=False):
    name = "Mentions the element." if paraphrase else "Names the element."
    return json.dumps(
        {
            "thought": "t",
            "essential": [
                {
                    "criterion": name,
                    "rationale": "",
                    "credit": f"text_verify(predict='{predict}')",
                },
                {"criterion": "Explains the property.", "rationale": "", "credit": fuzzy},
            ],
        }
    )


def record(rid, genrm_output, category=audit.REGULAR, labels=None):
    if labels is None:
        labels = (
            CriterionLabel(credit=1.0, extracted_value="tungsten"),
            CriterionLabel(credit=1.0),
        )
    return audit.AuditRecord(
        instance_id=rid,
        rubric=build_rubric(),
        response="It is tungsten.",
        category=category,
        labels=tuple(labels),
        genrm_raw_output=genrm_output,
    )


class TestEvaluate:
    def test_hand_counted_metrics(self):
        records = [
            record("r0", output()),  # fully correct
            record("r1", "{broken"),  # schema failure
            record("r2", output(fuzzy=0)),  # one credit error
            record("r3", output(paraphrase=True)),  # slot text drift only
        ]
        metrics = audit.evaluate_genrm(records)
        assert metrics.schema_acc == pytest.approx(75.0)
        assert metrics.criterion_acc == pytest.approx(50.0)
        # r1 fails both criteria's execution; everything else executes.
        assert metrics.execution_acc == pytest.approx(100 * 6 / 8)
        assert metrics.argument_acc == pytest.approx(75.0)
        assert metrics.credit_acc == pytest.approx(50.0)
        assert metrics.criterion_level_acc == pytest.approx(100 * 5 / 8)
        assert metrics.sample_level_acc == pytest.approx(50.0)

    def test_empty_set_rejected(self):
        with pytest.raises(EmptyAuditSet):
            audit.evaluate_genrm([])

    def test_report_renders(self):
        metrics = audit.evaluate_genrm([record("r0", output())])
        text = audit.render_report(metrics)
        assert "schema" in text.lower() and "credit" in text.lower()
        assert "100.0" in text


class TestFalsePositives:
    def _fail_labels(self):
        return (
            CriterionLabel(credit=0.0, extracted_value=""),
            CriterionLabel(credit=0.0),
        )

    def test_honest_zero_fpr(self):
        records = [
            record(
                "a0",
                output(predict="", fuzzy=0),
                category=audit.NO_FINAL_ANSWER,
                labels=self._fail_labels(),
            )
        ]
        fpr = audit.false_positive_rate(records)
        assert fpr[audit.NO_FINAL_ANSWER].average == 0.0

    def test_credited_failure_counts(self):
        records = [
            record(
                "a0",
                output(predict="Tungsten", fuzzy=1),  # engine scores 1 on both
                category=audit.ADVERSARIAL,
                labels=self._fail_labels(),
            ),
            record(
                "a1",
                output(predict="", fuzzy=0),
                category=audit.ADVERSARIAL,
                labels=self._fail_labels(),
            ),
        ]
        fpr = audit.false_positive_rate(records)
        assert fpr[audit.ADVERSARIAL].arguments == pytest.approx(50.0)
        assert fpr[audit.ADVERSARIAL].credit == pytest.approx(50.0)
        assert fpr[audit.ADVERSARIAL].average == pytest.approx(50.0)

    def test_partial_credit_is_a_false_positive(self):
        records = [
            record(
                "a0",
                output(predict="", fuzzy=0.5),
                category=audit.IRRELEVANT,
                labels=self._fail_labels(),
            )
        ]
        fpr = audit.false_positive_rate(records)
        assert fpr[audit.IRRELEVANT].credit == pytest.approx(100.0)

    def test_empty_category_rejected(self):
        with pytest.raises(EmptyCategory):
            audit.false_positive_rate([])


class TestRoundTrip:
    def test_record_dict_round_trip(self):
        original = record("r0", output(), category=audit.WRONG_BUT_PLAUSIBLE)
        again = audit.record_from_dict(audit.record_to_dict(original))
        assert again == original


class TestFixture:
    def test_manifest_within_tolerance(self):
        records = [
            audit.record_from_dict(obj) for obj in load_jsonl("audit_fixture.jsonl")
        ]
        manifest = load_json("audit_manifest.json")
        metrics = audit.evaluate_genrm(records).to_dict()
        for key, expected in manifest.items():
            if key == "fpr_by_category":
                continue
            assert metrics[key] == pytest.approx(expected, abs=0.1), key
        abnormal = [r for r in records if r.category != audit.REGULAR]
        fpr = {k: v.to_dict() for k, v in audit.false_positive_rate(abnormal).items()}
        for category, expected in manifest["fpr_by_category"].items():
            for field, value in expected.items():
                assert fpr[category][field] == pytest.approx(value, abs=0.1)


# ---------------------------------------------------------------------------
# Abnormal-record construction
# ---------------------------------------------------------------------------


class CannedTransport(execution.GenerationTransport):
    """Returns scripted texts in order, recording each request."""

    def __init__(self, texts):
        self.texts = list(texts)
        self.requests = []

    def generate(self, request):
        self.requests.append(request)
        if not self.texts:
            raise TransportError("script exhausted")
        return execution.GenerationReply(text=self.texts.pop(0))


def generator_reply(response_text, credit=0):
    extractions = {
        "Names the element.": {"credit": credit, "extracted_value": ""},
        "Explains the property.": {"credit": credit},
    }
    return (
        f"<response>{response_text}</response>\n"
        f"<extractions>{json.dumps(extractions)}</extractions>"
    )


class TestBuildAbnormal:
    def _build(self, generator_texts, judge_texts=("PASS", "PASS")):
        generator = CannedTransport(generator_texts)
        judges = (CannedTransport([judge_texts[0]]), CannedTransport([judge_texts[1]]))
        return audit.build_abnormal_record(
            instance_id="x1",
            question="Which element is it?",
            original_response="It is tungsten.",
            rubric=build_rubric(),
            category=audit.NO_FINAL_ANSWER,
            generator=generator,
            judges=judges,
        )

    def test_happy_path(self):
        built = self._build([generator_reply("I am not sure which element this is.")])
        assert built is not None
        assert built.category == audit.NO_FINAL_ANSWER
        assert built.labels[0].credit == 0.0
        assert built.labels[0].extracted_value == ""
        assert built.labels[1].extracted_value is None

    def test_leaked_target_literal_filtered(self):
        built = self._build([generator_reply("Perhaps Tungsten, but I cannot say.")])
        assert built is None

    def test_missing_tags_filtered(self):
        assert self._build(["no tags at all"]) is None

    def test_judge_veto_filters(self):
        built = self._build(
            [generator_reply("No answer is possible here.")],
            judge_texts=("PASS", "FAIL: too obvious"),
        )
        assert built is None

    def test_unknown_category_rejected(self):
        with pytest.raises(EmptyCategory):
            audit.build_abnormal_record(
                instance_id="x1",
                question="q",
                original_response="r",
                rubric=build_rubric(),
                category="not_a_category",
                generator=CannedTransport([]),
                judges=(CannedTransport([]), CannedTransport([])),
            )

    def test_adversarial_subcategory_keys(self):
        generator = CannedTransport(
            [generator_reply("A long detour that never lands on a name.")]
        )
        built = audit.build_abnormal_record(
            instance_id="x2",
            question="Which element is it?",
            original_response="It is tungsten.",
            rubric=build_rubric(),
            category=audit.ADVERSARIAL,
            generator=generator,
            judges=(CannedTransport(["PASS"]), CannedTransport(["PASS"])),
            instruction_key="adversarial_circumlocution",
        )
        assert built is not None and built.category == audit.ADVERSARIAL
