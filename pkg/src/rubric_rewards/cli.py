"""Command-line surface for batch scoring, aggregation, filtering, audits.

Exit codes: 0 success, 1 I/O failure, 2 parse error, 3 semantic mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from . import aggregation, audit, execution, schema
from .errors import CallParseError, EngineError

EXIT_OK = 0
EXIT_IO = 1
EXIT_PARSE = 2
EXIT_SEMANTIC = 3


def _read_lines(path: str) -> list[str]:
    try:
        with open(path, encoding="utf-8") as fh:
            return [line.rstrip("\n") for line in fh if line.strip()]
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_IO)


def _write_lines(path: str | None, lines: list[str]):
    try:
        if path is None or path == "-":
            for line in lines:
                print(line)
        else:
            with open(path, "w", encoding="utf-8") as fh:
                for line in lines:
                    fh.write(line + "\n")
    except OSError as exc:
        print(f"error: cannot write {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_IO)


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False)


def _process(records: list[str], worker, parallelism: int) -> list:
    """Order-preserving parallel map over input records."""
    if parallelism <= 1:
        return [worker(record) for record in records]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(worker, records))


def _make_transport(args) -> execution.GenerationTransport:
    if args.transport == "replay":
        if not args.replay_file:
            print("error: --replay-file required for replay transport", file=sys.stderr)
            raise SystemExit(EXIT_IO)
        return execution.ReplayTransport.from_file(args.replay_file)
    return execution.HttpChatTransport()


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_verify(args) -> int:
    try:
        target = schema.parse_call(args.target_call, side="target")
        predict = schema.parse_call(args.predict_call, side="predict")
    except CallParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if target.name != predict.name:
        print(
            f"verifier name mismatch: {target.name} vs {predict.name}", file=sys.stderr
        )
        return EXIT_SEMANTIC
    try:
        score = execution.run_call(execution.merge_call(target, predict))
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    print(f"{score:.4f}")
    return EXIT_OK


def cmd_score(args) -> int:
    errors = 0

    def worker(line: str) -> str | None:
        nonlocal errors
        try:
            obj = json.loads(line)
            rubric = schema.parse_rubric(_dumps(obj["rubric"]))
            raw_scorings = obj.get("scorings")
            if raw_scorings is None:
                raw_scorings = [obj["scoring"]]
            rollouts = []
            for raw in raw_scorings:
                scoring = schema.parse_scoring(_dumps(raw))
                scores = execution.score_response(rubric, scoring, strict=args.strict)
                rollouts.append(
                    [
                        {"raw": s.raw, "path": s.path, "rationale": s.rationale}
                        for s in scores
                    ]
                )
            return _dumps({"id": obj.get("id", ""), "rollouts": rollouts})
        except (EngineError, KeyError, ValueError) as exc:
            errors += 1
            print(f"record error: {exc}", file=sys.stderr)
            if args.strict:
                raise SystemExit(EXIT_SEMANTIC)
            return None

    outputs = [o for o in _process(_read_lines(args.input), worker, args.parallelism) if o]
    _write_lines(args.output, outputs)
    print(f"scored {len(outputs)} records, {errors} errors", file=sys.stderr)
    return EXIT_OK


def _aggregate_record(obj: dict, args) -> dict:
    rubric = schema.parse_rubric(_dumps(obj["rubric"]))
    criteria = rubric.criteria()
    raw_scorings = obj["scorings"]
    if args.group_size and len(raw_scorings) != args.group_size:
        raise EngineError(
            f"expected group size {args.group_size}, got {len(raw_scorings)}"
        )
    columns = []
    for raw in raw_scorings:
        scoring = schema.parse_scoring(_dumps(raw))
        scores = execution.score_response(rubric, scoring, strict=args.strict)
        columns.append([s.raw for s in scores])
    group = aggregation.GroupScores(
        scores=tuple(
            tuple(col[k] for col in columns) for k in range(len(criteria))
        ),
        meta=tuple(
            aggregation.CriterionMeta(ctype=c.ctype, weight=c.weight) for c in criteria
        ),
        tau=args.tau,
    )
    lengths = obj.get("response_lengths", [0] * len(columns))
    responses = obj.get("responses")
    rules = aggregation.FormatRuleSet() if responses is not None else None
    breakdowns = aggregation.reward_group(
        group,
        response_lengths=lengths,
        responses=responses,
        rules=rules,
        max_length=args.max_length,
    )
    return {"id": obj.get("id", ""), "rollouts": [b.to_dict() for b in breakdowns]}


def cmd_aggregate(args) -> int:
    errors = 0
    rewards: list[float] = []

    def worker(line: str) -> str | None:
        nonlocal errors
        try:
            result = _aggregate_record(json.loads(line), args)
            rewards.extend(r["final"] for r in result["rollouts"])
            return _dumps(result)
        except (EngineError, KeyError, ValueError) as exc:
            errors += 1
            print(f"record error: {exc}", file=sys.stderr)
            if args.strict:
                raise SystemExit(EXIT_SEMANTIC)
            return None

    outputs = [o for o in _process(_read_lines(args.input), worker, args.parallelism) if o]
    _write_lines(args.output, outputs)
    mean = sum(rewards) / len(rewards) if rewards else 0.0
    print(
        f"aggregated {len(outputs)} groups, {errors} errors, mean reward {mean:.4f}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_filter(args) -> int:
    instances = []
    for line in _read_lines(args.input):
        try:
            obj = json.loads(line)
            instances.append((str(obj["id"]), obj["ctypes"], obj["scores"]))
        except (KeyError, ValueError) as exc:
            print(f"record error: {exc}", file=sys.stderr)
            return EXIT_PARSE
    retained = aggregation.filter_instances(instances, mode=args.mode)
    _write_lines(args.output, retained)
    print(
        f"retained {len(retained)} of {len(instances)} instances (mode {args.mode})",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_audit(args) -> int:
    records = []
    for line in _read_lines(args.input):
        try:
            records.append(audit.record_from_dict(json.loads(line)))
        except (EngineError, KeyError, ValueError) as exc:
            print(f"record error: {exc}", file=sys.stderr)
            return EXIT_PARSE
    try:
        metrics = audit.evaluate_genrm(records)
        abnormal = [r for r in records if r.category != audit.REGULAR]
        if abnormal:
            metrics = replace(
                metrics, fpr_by_category=audit.false_positive_rate(abnormal)
            )
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    if args.output:
        _write_lines(args.output, [_dumps(metrics.to_dict())])
    print(audit.render_report(metrics))
    print(f"audited {len(records)} records", file=sys.stderr)
    return EXIT_OK


def cmd_build_audit_set(args) -> int:
    transport = _make_transport(args)
    outputs: list[str] = []
    skipped = 0
    for line in _read_lines(args.input):
        try:
            obj = json.loads(line)
            rubric = schema.parse_rubric(_dumps(obj["rubric"]))
            record = audit.build_abnormal_record(
                instance_id=str(obj.get("id", "")),
                question=obj["question"],
                original_response=obj["response"],
                rubric=rubric,
                category=obj["category"],
                generator=transport,
                judges=(transport, transport),
                instruction_key=obj.get("instruction_key"),
            )
        except (EngineError, KeyError, ValueError) as exc:
            print(f"record error: {exc}", file=sys.stderr)
            skipped += 1
            continue
        if record is None:
            skipped += 1
            continue
        outputs.append(_dumps(audit.record_to_dict(record)))
    _write_lines(args.output, outputs)
    print(f"built {len(outputs)} records, skipped {skipped}", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("rubric_rewards.service:app", host=args.host, port=args.port)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_batch_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--input", required=True)
    parser.add_argument("--output", default=None, help="defaults to stdout")
    parser.add_argument("--strict", action="store_true")
    parser.add_argument("--parallelism", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rubric-rewards")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="score one target/predict call pair")
    p.add_argument("target_call")
    p.add_argument("predict_call")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("score", help="score rubric/scoring pairs from a batch file")
    _add_batch_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("aggregate", help="group rewards and advantages")
    _add_batch_flags(p)
    p.add_argument("--tau", type=float, default=aggregation.DEFAULT_TAU)
    p.add_argument("--max-length", type=int, default=None)
    p.add_argument("--group-size", type=int, default=None)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("filter", help="offline instance filtering")
    _add_batch_flags(p)
    p.add_argument("--mode", choices=["any", "essential"], default="any")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("audit", help="reward-model reliability metrics")
    _add_batch_flags(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("build-audit-set", help="construct abnormal-response records")
    _add_batch_flags(p)
    p.add_argument("--transport", choices=["replay", "http"], default="replay")
    p.add_argument("--replay-file", default=None)
    p.add_argument(
        "--exposure", choices=["minimal", "unlimited"], default="minimal"
    )
    p.set_defaults(func=cmd_build_audit_set)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
