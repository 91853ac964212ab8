#!/usr/bin/env python3
"""Regenerate the deterministic test fixtures under tests/fixtures/.

Expected metric values in the manifests are computed here by direct
counting, independent of the engine's audit/genrm implementations.
"""

from __future__ import annotations

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from rubric_rewards import cli, execution, schema  # noqa: E402

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")

G = 4
CORPUS_SIZE = 12


def corpus_rubric(i: int) -> dict:
    c = 300 + 11 * i
    return {
        "essential": [
            {
                "criterion": "Names the component code.",
                "reference": f"text_verify(target='MARKER-QQ{i}X', ignore_case=True)",
                "weight": 3,
            },
            {
                "criterion": "Identifies the processing stage.",
                "reference": f"The response identifies stage {i} of the pipeline.",
                "weight": 2,
            },
        ],
        "additional": [
            {
                "criterion": "States the simplified ratio.",
                "reference": f"expr_verify(target=r'\\frac{{{2 * i}}}{{{2 * (i + 1)}}}')",
                "weight": 1,
            },
            {
                "criterion": "Locates the component on the diagram.",
                "reference": f"bbox_verify(target=[[{c}, {c + 7}, {c + 200}, {c + 150}]])",
                "weight": 1,
            },
        ],
    }


def corpus_instance(i: int) -> dict:
    c = 300 + 11 * i
    rubric = corpus_rubric(i)
    good_box = [[c + 2, c + 8, c + 198, c + 149]]
    marker_lower = f"marker-qq{i}x"
    responses = [
        f"The component is {marker_lower}, at stage {i}; ratio {i}/{i + 1}, box {good_box[0]}.",
        f"It might be {marker_lower[:-1]} around stage {i}, ratio unclear, box {good_box[0]}.",
        "I cannot determine the component from the description given.",
        f"Component {marker_lower} again, stage {i}, ratio {i}/{i + 1}, box {good_box[0]}.",
    ]
    predicts = [marker_lower, marker_lower[:-1], "", marker_lower]
    credits = [1, 0.5, 0, 1]
    exprs = [f"{i}/{i + 1}", "999", "", f"{i}/{i + 1}"]
    boxes = [good_box, good_box, [], good_box]
    scorings = []
    for j in range(G):
        scorings.append(
            {
                "thought": f"Rollout {j} review for instance {i}.",
                "essential": [
                    {
                        "criterion": "Names the component code.",
                        "rationale": "Read the component name from the response.",
                        "credit": f"text_verify(predict='{predicts[j]}')",
                    },
                    {
                        "criterion": "Identifies the processing stage.",
                        "rationale": "Compared the stated stage to the reference.",
                        "credit": credits[j],
                    },
                ],
                "additional": [
                    {
                        "criterion": "States the simplified ratio.",
                        "rationale": "Extracted the ratio as written.",
                        "credit": f"expr_verify(predict='{exprs[j]}')",
                    },
                    {
                        "criterion": "Locates the component on the diagram.",
                        "rationale": "Copied the coordinates from the response.",
                        "credit": f"bbox_verify(predict={json.dumps(boxes[j])})",
                    },
                ],
            }
        )
    return {
        "id": f"inst-{i:03d}",
        "prompt": f"Which component handles stage {i}, and where is it?",
        "image_ref": f"img://diagram-{i:03d}",
        "rubric": rubric,
        "responses": responses,
        "response_lengths": [len(r.split()) for r in responses],
        "scorings": scorings,
    }


def write_corpus() -> list[dict]:
    instances = [corpus_instance(i) for i in range(1, CORPUS_SIZE + 1)]
    with open(os.path.join(FIXTURES, "corpus.jsonl"), "w") as fh:
        for inst in instances:
            fh.write(json.dumps(inst, ensure_ascii=False) + "\n")
    return instances


def write_replay(instances: list[dict]):
    """Replay replies for per-rollout scoring requests under minimal exposure."""
    lines = []
    for inst in instances:
        rubric = schema.parse_rubric(json.dumps(inst["rubric"]))
        for j, response in enumerate(inst["responses"]):
            task = execution.TaskInstance(
                prompt_text=inst["prompt"],
                response=response,
                response_length=inst["response_lengths"][j],
                image_ref=inst["image_ref"],
                instance_id=inst["id"],
            )
            request = execution.build_scoring_request(task, rubric)
            lines.append(
                {
                    "key": request.key(),
                    "text": json.dumps(inst["scorings"][j], ensure_ascii=False),
                }
            )
    with open(os.path.join(FIXTURES, "replay.jsonl"), "w") as fh:
        for line in lines:
            fh.write(json.dumps(line, ensure_ascii=False) + "\n")


def write_golden():
    """Golden aggregate output produced by the CLI itself (cross-surface
    equivalence reference for the bindings)."""
    code = cli.main(
        [
            "aggregate",
            "--input",
            os.path.join(FIXTURES, "corpus.jsonl"),
            "--output",
            os.path.join(FIXTURES, "golden_aggregate.jsonl"),
        ]
    )
    assert code == 0


# ---------------------------------------------------------------------------
# GenRM fixture
# ---------------------------------------------------------------------------


def small_rubric(token: str) -> dict:
    return {
        "essential": [
            {
                "criterion": "States the primary code name.",
                "reference": f"text_verify(target='ALPHA-{token}', ignore_case=True)",
                "weight": 3,
            },
            {
                "criterion": "Explains the mechanism.",
                "reference": f"The mechanism involves stage {token}.",
                "weight": 2,
            },
        ],
        "additional": [
            {
                "criterion": "Mentions the auxiliary note.",
                "reference": f"Auxiliary note {token} applies.",
                "weight": 1,
            }
        ],
    }


def small_output(
    token: str,
    predict: str,
    credit1,
    credit2,
    paraphrase: bool = False,
    exec_wrong: bool = False,
) -> str:
    slot0_criterion = (
        "Mentions the primary code name." if paraphrase else "States the primary code name."
    )
    slot0_credit = 1 if exec_wrong else f"text_verify(predict='{predict}')"
    return json.dumps(
        {
            "thought": f"Checked all criteria for {token}.",
            "essential": [
                {
                    "criterion": slot0_criterion,
                    "rationale": "Looked for the code name in the response.",
                    "credit": slot0_credit,
                },
                {
                    "criterion": "Explains the mechanism.",
                    "rationale": "Compared the explanation to the reference.",
                    "credit": credit1,
                },
            ],
            "additional": [
                {
                    "criterion": "Mentions the auxiliary note.",
                    "rationale": "Scanned for the note.",
                    "credit": credit2,
                }
            ],
        },
        ensure_ascii=False,
    )


def write_genrm():
    records = []
    manifest = {}
    for i in range(50):
        token = f"G{i:03d}"
        rubric = small_rubric(token)
        labels = [
            {"credit": 1, "extracted_value": f"alpha-{token.lower()}"},
            {"credit": 1, "extracted_value": None},
            {"credit": 0.5, "extracted_value": None},
        ]
        kind = i % 5
        if kind == 0:  # malformed output
            output = '{"thought": "truncated'
            expected = {"format": 0, "content": 0.0}
        elif kind == 1:  # credit on a verifier slot
            output = small_output(token, "", 1, 0.5, exec_wrong=True)
            expected = {"format": 0, "content": 0.0}
        elif kind == 2:  # wrong extracted value
            output = small_output(token, f"beta-{token.lower()}", 1, 0.5)
            expected = {"format": 1, "content": 2 / 3}
        elif kind == 3:  # wrong fuzzy credit
            output = small_output(token, f"Alpha-{token}", 0, 0.5)
            expected = {"format": 1, "content": 2 / 3}
        else:  # perfect
            output = small_output(token, f"Alpha-{token}", 1, 0.5)
            expected = {"format": 1, "content": 1.0}
        record_id = f"genrm-{i:03d}"
        records.append(
            {"id": record_id, "rubric": rubric, "output": output, "labels": labels}
        )
        manifest[record_id] = expected
    with open(os.path.join(FIXTURES, "genrm_fixture.jsonl"), "w") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    with open(os.path.join(FIXTURES, "genrm_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)


# ---------------------------------------------------------------------------
# Audit fixture
# ---------------------------------------------------------------------------


class Tally:
    def __init__(self):
        self.records = 0
        self.schema_ok = 0
        self.criterion_slot_ok = 0
        self.execution_ok = 0
        self.criteria = 0
        self.argument_ok = 0
        self.argument_total = 0
        self.credit_ok = 0
        self.credit_total = 0
        self.criterion_correct = 0
        self.sample_ok = 0
        self.fpr = {}  # category -> [arg_fp, arg_total, credit_fp, credit_total]


def audit_record(i: int, category: str, behavior: str, tally: Tally) -> dict:
    token = f"A{i:03d}"
    rubric = small_rubric(token)
    regular = category == "regular"
    if regular:
        labels = [
            {"credit": 1, "extracted_value": f"alpha-{token.lower()}"},
            {"credit": 1, "extracted_value": None},
            {"credit": 0.5, "extracted_value": None},
        ]
    else:
        labels = [
            {"credit": 0, "extracted_value": ""},
            {"credit": 0, "extracted_value": None},
            {"credit": 0.5, "extracted_value": None},
        ]

    # Planted behaviors and their exact expected consequences.
    paraphrase = behavior == "paraphrase"
    exec_wrong = behavior == "exec_wrong"
    parse_ok = behavior != "malformed"
    if behavior == "malformed":
        output = "definitely { not json"
    elif regular:
        predict = {
            "arg_wrong": f"beta-{token.lower()}",
            "exec_wrong": "",
        }.get(behavior, f"Alpha-{token}")
        credit1 = 0 if behavior == "credit_wrong" else 1
        output = small_output(
            token, predict, credit1, 0.5, paraphrase=paraphrase, exec_wrong=exec_wrong
        )
    else:
        predict = f"Alpha-{token}" if behavior == "fp_arg" else ""
        credit1 = 1 if behavior == "fp_credit" else 0
        output = small_output(token, predict, credit1, 0.5)

    # Expected bookkeeping (pure counting, mirrors the metric definitions).
    tally.records += 1
    tally.criteria += 3
    tally.argument_total += 1
    tally.credit_total += 2
    tally.schema_ok += parse_ok
    tally.criterion_slot_ok += parse_ok and not paraphrase
    exec0 = parse_ok and not exec_wrong
    tally.execution_ok += exec0 + 2 * parse_ok
    if regular:
        arg_correct = exec0 and behavior not in ("arg_wrong", "exec_wrong", "malformed")
        credit1_correct = parse_ok and behavior != "credit_wrong"
    else:
        arg_correct = exec0 and behavior not in ("fp_arg", "malformed")
        credit1_correct = parse_ok and behavior not in ("fp_credit", "malformed")
    credit2_correct = parse_ok
    tally.argument_ok += arg_correct
    tally.credit_ok += credit1_correct + credit2_correct
    correct = arg_correct + credit1_correct + credit2_correct
    tally.criterion_correct += correct
    tally.sample_ok += correct == 3
    if not regular:
        fpr = tally.fpr.setdefault(category, [0, 0, 0, 0])
        fpr[1] += 1  # fail-labeled verifiable slot
        fpr[3] += 1  # fail-labeled fuzzy slot (credit1)
        fpr[0] += behavior == "fp_arg"
        fpr[2] += behavior == "fp_credit"

    return {
        "id": f"audit-{i:03d}",
        "rubric": rubric,
        "response": f"A response discussing {token.lower()} mechanisms.",
        "category": category,
        "labels": labels,
        "genrm_output": output,
    }


def write_audit():
    tally = Tally()
    records = []
    i = 0
    regular_behaviors = (
        ["malformed", "paraphrase", "exec_wrong", "arg_wrong", "credit_wrong"]
        + ["perfect"] * 5
    )
    for k in range(40):
        records.append(audit_record(i, "regular", regular_behaviors[k % 10], tally))
        i += 1
    abnormal_mixes = {
        "no_final_answer": ["fp_arg"] * 4 + ["fp_credit"] * 4 + ["malformed"] * 2 + ["honest"] * 10,
        "irrelevant": ["fp_arg"] * 1 + ["fp_credit"] * 1 + ["honest"] * 18,
        "wrong_but_plausible": ["fp_arg"] * 2 + ["fp_credit"] * 3 + ["honest"] * 15,
        "adversarial": ["fp_arg"] * 5 + ["fp_credit"] * 4 + ["malformed"] * 1 + ["honest"] * 10,
    }
    for category, behaviors in abnormal_mixes.items():
        for behavior in behaviors:
            records.append(audit_record(i, category, behavior, tally))
            i += 1

    pct = lambda n, d: 100.0 * n / d if d else 0.0
    manifest = {
        "schema_acc": pct(tally.schema_ok, tally.records),
        "criterion_acc": pct(tally.criterion_slot_ok, tally.records),
        "execution_acc": pct(tally.execution_ok, tally.criteria),
        "argument_acc": pct(tally.argument_ok, tally.argument_total),
        "credit_acc": pct(tally.credit_ok, tally.credit_total),
        "criterion_level_acc": pct(tally.criterion_correct, tally.criteria),
        "sample_level_acc": pct(tally.sample_ok, tally.records),
        "fpr_by_category": {
            category: {
                "average": pct(arg_fp + credit_fp, arg_total + credit_total),
                "arguments": pct(arg_fp, arg_total),
                "credit": pct(credit_fp, credit_total),
            }
            for category, (arg_fp, arg_total, credit_fp, credit_total) in tally.fpr.items()
        },
    }
    with open(os.path.join(FIXTURES, "audit_fixture.jsonl"), "w") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    with open(os.path.join(FIXTURES, "audit_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)


def main():
    os.makedirs(FIXTURES, exist_ok=True)
    instances = write_corpus()
    write_replay(instances)
    write_golden()
    write_genrm()
    write_audit()
    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
