"""Command-line entry points.

    dfqa build-wikisql <in> <out> [--limit N --seed S]
    dfqa gen-uci <csv-dir> --roles r1,r2 --n N --model M --out DIR
    dfqa eval <bundle> --model M [--replay-only|--record] [--rel-tol ...]
    dfqa classify-errors <records> --model M --bundle DIR
    dfqa ask <table.csv> "question" --model M
    dfqa worker
    dfqa report <records...> [--formats json,csv] [--rejudge review.jsonl]

A JSON config file (--config) mirrors the flags; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
import uuid
from pathlib import Path
from typing import Any

from . import runner, uci, wikisql
from .bundle import Bundle, read_bundle, write_bundle
from .equivalence import JudgeConfig
from .gateway import Gateway, GenParams
from .model import MitigationFlag, Question, SupplementarySpec, result_to_dict
from .prompts import build_generation_prompt, build_qa_prompt, extract_code
from .runner import EvalConfig
from .sandbox import ExecRequest, Limits, WorkerPool


def _load_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _setting(args: argparse.Namespace, config: dict[str, Any], name: str, default: Any) -> Any:
    value = getattr(args, name.replace("-", "_"), None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return default


def _judge_config(args: argparse.Namespace, config: dict[str, Any]) -> JudgeConfig:
    return JudgeConfig(
        rel_tol=float(_setting(args, config, "rel_tol", 1e-6)),
        abs_tol=float(_setting(args, config, "abs_tol", 1e-9)),
        list_order_sensitive=bool(_setting(args, config, "order_sensitive", False)),
        count_needs_review_as_correct=bool(_setting(args, config, "count_needs_review", False)),
    )


def _eval_config(args: argparse.Namespace, config: dict[str, Any]) -> EvalConfig:
    mode = "record" if getattr(args, "record", False) else "replay"
    if getattr(args, "replay_only", False):
        mode = "replay"
    worker_cmd = _setting(args, config, "worker_command", None)
    return EvalConfig(
        cache_dir=_setting(args, config, "cache_dir", "cache"),
        cache_mode=mode,
        pool_size=int(_setting(args, config, "pool_size", 2)),
        worker_command=worker_cmd,
        limits=Limits(
            wall_seconds=float(_setting(args, config, "wall_seconds", 10.0)),
            memory_mb=int(_setting(args, config, "memory_mb", 512)),
        ),
        judge=_judge_config(args, config),
        max_in_flight=int(_setting(args, config, "max_in_flight", 4)),
    )


def cmd_build_wikisql(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    src = Path(args.source)
    tables_path = src / f"{args.split}.tables.jsonl"
    questions_path = src / f"{args.split}.jsonl"
    if not tables_path.exists() or not questions_path.exists():
        print(f"error: expected {tables_path} and {questions_path}", file=sys.stderr)
        return 2
    exclude: set[str] = set()
    if args.exclude:
        exclude = {line.strip() for line in Path(args.exclude).read_text().splitlines() if line.strip()}
    bundle = wikisql.build_bundle(
        wikisql.read_jsonl(tables_path),
        wikisql.read_jsonl(questions_path),
        limit=_setting(args, config, "limit", None),
        seed=int(_setting(args, config, "seed", 0)),
        exclude_qids=exclude,
        name=f"wikisql-{args.split}",
    )
    write_bundle(bundle, args.out)
    print(f"built {len(bundle.tasks)} tasks ({len(bundle.manifest.get('skipped', []))} skipped) -> {args.out}")
    return 0


def cmd_gen_uci(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    cfg = _eval_config(args, config)
    roles = [r.strip() for r in args.roles.split(",") if r.strip()]
    n = int(args.n)
    gateway = Gateway(cfg.cache_dir, mode=cfg.cache_mode)
    params = GenParams(model_name=args.model, max_tokens=4096)
    pool = WorkerPool(cfg.pool_size, cfg.worker_command)
    try:
        pairs_by_table: dict[str, Any] = {}
        audits = []
        for csv_path in sorted(Path(args.csv_dir).glob("*.csv")):
            table = uci.import_csv(csv_path)
            all_pairs = []
            for role in roles:
                prompt = build_generation_prompt(table.schema, role, n)
                completion = gateway.complete(prompt.as_dicts(), params)
                pairs, dropped = uci.parse_generated_pairs(completion, role)
                if dropped:
                    print(f"{csv_path.name} [{role}]: {dropped} unparseable block(s) dropped")
                all_pairs.extend(pairs)
            curated = uci.curate(all_pairs, table, pool, cfg.limits)
            if args.auto_approve:
                curated = [
                    uci.approve(p) if p.rejection_reason == uci.RejectionReason.NEEDS_MANUAL_REVIEW else p
                    for p in curated
                ]
            pairs_by_table[table.table_id] = (table, curated)
            audits.extend(curated)
        supplementary = SupplementarySpec.from_flags(flags=(MitigationFlag.NO_IMPORT_DIRECTIVE,))
        bundle = uci.pairs_to_bundle(pairs_by_table, name=args.name, supplementary=supplementary)
        out = write_bundle(bundle, args.out)
        uci.write_curation_audit(audits, out / "curation.jsonl")
        kept = sum(1 for p in audits if p.keep)
        review = sum(1 for p in audits if p.rejection_reason == uci.RejectionReason.NEEDS_MANUAL_REVIEW)
        print(f"{len(audits)} pairs generated; {kept} approved, {review} awaiting review -> {out}")
    finally:
        pool.shutdown()
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    cfg = _eval_config(args, config)
    bundle = read_bundle(args.bundle)
    report, records = runner.run_eval(bundle, args.model, cfg)
    out = Path(_setting(args, config, "out", "eval-out"))
    paths = runner.emit_report(report, records, out, formats=("json", "csv"), bundle=bundle)
    print(f"pass@1 = {report.pass_at_1:.4f} over {len(records)} tasks")
    for name, path in sorted(paths.items()):
        print(f"  {name}: {path}")
    return 0


def cmd_classify_errors(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    cfg = _eval_config(args, config)
    records = runner.load_records(args.records)
    bundle = read_bundle(args.bundle)
    gateway = Gateway(cfg.cache_dir, mode=cfg.cache_mode)
    records, failures = runner.classify_errors(records, gateway, bundle, args.model)
    runner.save_records(records, args.records)
    classified = sum(1 for r in records if r.error_classes is not None)
    print(f"classified {classified} records ({failures} gateway failures) -> {args.records}")
    return 0


def cmd_ask(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    cfg = _eval_config(args, config)
    table = uci.import_csv(args.table)
    supplementary = SupplementarySpec.from_flags(flags=(MitigationFlag.NO_IMPORT_DIRECTIVE,))
    question = Question(qid="ask", text=args.question)
    prompt = build_qa_prompt(supplementary, table.schema, question)
    gateway = Gateway(cfg.cache_dir, mode=cfg.cache_mode)
    completion = gateway.complete(prompt.as_dicts(), GenParams(model_name=args.model))
    query = extract_code(completion)
    pool = WorkerPool(cfg.pool_size, cfg.worker_command)
    try:
        response = pool.execute(
            ExecRequest(request_id=f"ask-{uuid.uuid4().hex[:8]}", table=table, query=query, limits=cfg.limits)
        )
    finally:
        pool.shutdown()
    print("query:")
    print(query.source)
    print("answer:")
    print(json.dumps(result_to_dict(response.result), indent=2, ensure_ascii=False))
    return 0


def cmd_worker(args: argparse.Namespace) -> int:
    try:
        from dfqa_worker.protocol import serve
    except ImportError:
        print(
            "error: the dfqa-worker package is not installed; "
            "install it or launch the executor directly with `python -m dfqa_worker`",
            file=sys.stderr,
        )
        return 2
    serve()
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    cfg = _eval_config(args, config)
    formats = tuple(f.strip() for f in args.formats.split(",") if f.strip())
    bundle: Bundle | None = None
    if args.bundle:
        bundle = read_bundle(args.bundle)
    all_reports = []
    out = Path(_setting(args, config, "out", "eval-out"))
    for records_path in args.records:
        records = runner.load_records(records_path)
        if args.rejudge:
            records = runner.apply_review_decisions(records, args.rejudge)
            runner.save_records(records, records_path)
        model = args.model or "unknown"
        report = runner.build_report(records, model=model, bundle=bundle, cfg=cfg)
        all_reports.append((report, records))
    report, records = all_reports[0]
    if len(all_reports) > 1:
        report.error_matrix = runner.merge_error_matrices(r for r, _ in all_reports)
    paths = runner.emit_report(report, records, out, formats=formats, bundle=bundle)
    print(f"pass@1 = {report.pass_at_1:.4f}")
    for name, path in sorted(paths.items()):
        print(f"  {name}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfqa", description="Schema-only DataFrame QA harness")
    parser.add_argument("--config", help="JSON config file mirroring the flags; flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-wikisql", help="transform a WikiSQL release split into a task bundle")
    p.add_argument("source", help="directory holding <split>.jsonl and <split>.tables.jsonl")
    p.add_argument("out")
    p.add_argument("--split", default="test")
    p.add_argument("--limit", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--exclude", help="file of qids to exclude (curated bad-item list)")
    p.set_defaults(func=cmd_build_wikisql)

    p = sub.add_parser("gen-uci", help="generate and curate question/query pairs over CSV tables")
    p.add_argument("csv_dir")
    p.add_argument("--roles", default="data_scientist,general_user,data_owner")
    p.add_argument("--n", default=20)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--name", default="uci-generated")
    p.add_argument("--auto-approve", action="store_true",
                   help="skip the manual-review gate (testing only)")
    _add_gateway_flags(p)
    _add_sandbox_flags(p)
    p.set_defaults(func=cmd_gen_uci)

    p = sub.add_parser("eval", help="run an evaluation over a task bundle")
    p.add_argument("bundle")
    p.add_argument("--model", required=True)
    p.add_argument("--out")
    _add_gateway_flags(p)
    _add_sandbox_flags(p)
    _add_judge_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("classify-errors", help="attach error classes to non-correct records")
    p.add_argument("records")
    p.add_argument("--model", required=True)
    p.add_argument("--bundle", required=True)
    _add_gateway_flags(p)
    p.set_defaults(func=cmd_classify_errors)

    p = sub.add_parser("ask", help="one-shot QA over a CSV table")
    p.add_argument("table")
    p.add_argument("question")
    p.add_argument("--model", required=True)
    _add_gateway_flags(p)
    _add_sandbox_flags(p)
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("worker", help="run the restricted executor on stdin/stdout")
    p.set_defaults(func=cmd_worker)

    p = sub.add_parser("report", help="re-emit reports from saved records")
    p.add_argument("records", nargs="+")
    p.add_argument("--formats", default="json,csv")
    p.add_argument("--model")
    p.add_argument("--bundle")
    p.add_argument("--out")
    p.add_argument("--rejudge", help="review.jsonl with human accept decisions to fold in")
    _add_judge_flags(p)
    p.set_defaults(func=cmd_report)
    return parser


def _add_gateway_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cache-dir")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--replay-only", action="store_true", help="cache only; a miss is an error")
    mode.add_argument("--record", action="store_true", help="fill cache misses from the live endpoint")
    p.add_argument("--max-in-flight", type=int)


def _add_sandbox_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pool-size", type=int)
    p.add_argument("--wall-seconds", type=float)
    p.add_argument("--memory-mb", type=int)


def _add_judge_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rel-tol", type=float)
    p.add_argument("--abs-tol", type=float)
    p.add_argument("--order-sensitive", action="store_true", default=None)
    p.add_argument("--count-needs-review", action="store_true", default=None)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
