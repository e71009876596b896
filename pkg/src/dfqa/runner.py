"""End-to-end evaluation pipeline and metrics.

For every task: build the schema-only prompt, obtain a completion through the
gateway, extract the query, execute it in the sandbox, and judge the result
against ground truth. Task failures of any kind become verdicts on that task's
record; they never abort the run. pass@1 is the fraction of tasks whose first
completion judged correct (strict or relaxed), with needs_review counted as
incorrect unless configured otherwise.

Emitted artifacts: ``records.jsonl`` (full per-task records including
latency), ``records.csv`` (the deterministic view used for replay
comparisons; no timing fields), ``summary.json``, ``error_matrix.csv``, and
``review.jsonl`` holding needs_review items with an editable ``accept`` field
that ``report --rejudge`` folds back in.
"""

from __future__ import annotations

import csv
import hashlib
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

from .bundle import Bundle
from .equivalence import JudgeConfig, judge
from .gateway import Gateway, GatewayError, GenParams
from .model import (
    CORRECT_VERDICTS,
    CanonResult,
    ErrorKind,
    ExecError,
    QueryText,
    Scalar,
    Series,
    Table,
    ValueList,
    Verdict,
    is_error,
    query_from_dict,
    query_to_dict,
    result_from_dict,
    result_to_dict,
)
from .prompts import (
    EmptyCompletion,
    ErrorClass,
    build_error_classification_prompt,
    build_qa_prompt,
    extract_code,
    parse_error_classes,
    render_sample_rows,
)
from .sandbox import ExecRequest, Limits, WorkerPool


class EmptyRun(ValueError):
    pass


@dataclass
class EvalRecord:
    qid: str
    table_id: str
    role: str | None
    qtype: str | None
    prompt_digest: str
    completion: str
    query: QueryText | None
    exec_result: CanonResult
    verdict: Verdict
    latency_ms: float
    error_classes: set[ErrorClass] | None = None
    note: str = ""

    def __post_init__(self) -> None:
        if self.error_classes is not None and self.verdict in CORRECT_VERDICTS:
            raise ValueError("correct records must not carry error classes")

    @property
    def lint(self) -> list[str]:
        return [f.value for f in self.query.lint] if self.query else []


@dataclass
class EvalConfig:
    cache_dir: str | Path = "cache"
    cache_mode: str = "replay"
    pool_size: int = 2
    worker_command: Sequence[str] | None = None
    limits: Limits = field(default_factory=Limits)
    judge: JudgeConfig = field(default_factory=JudgeConfig)
    max_in_flight: int = 4
    max_tokens: int = 512
    request_timeout: float = 60.0

    def digest(self) -> str:
        payload = {
            "cache_mode": self.cache_mode,
            "pool_size": self.pool_size,
            "limits": self.limits.to_dict(),
            "judge": {k: getattr(self.judge, k) for k in self.judge.__dataclass_fields__},
            "max_in_flight": self.max_in_flight,
            "max_tokens": self.max_tokens,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Report:
    pass_at_1: float
    counts: dict[str, int]
    breakdowns: dict[str, dict[str, float]]
    error_matrix: dict[str, dict[str, int]]
    metadata: dict[str, Any]


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def pass_at_1(records: Sequence[EvalRecord], count_needs_review_as_correct: bool = False) -> float:
    """Fraction of records judged correct on the single greedy attempt."""
    if not records:
        raise EmptyRun("no records")
    correct = sum(1 for r in records if r.verdict in CORRECT_VERDICTS)
    if count_needs_review_as_correct:
        correct += sum(1 for r in records if r.verdict is Verdict.NEEDS_REVIEW)
    return correct / len(records)


def _breakdown(records: Sequence[EvalRecord], key: str,
               count_needs_review_as_correct: bool) -> dict[str, float]:
    groups: dict[str, list[EvalRecord]] = {}
    for r in records:
        groups.setdefault(getattr(r, key) or "unspecified", []).append(r)
    return {
        name: pass_at_1(group, count_needs_review_as_correct)
        for name, group in sorted(groups.items())
    }


def _judge_config_for(bundle: Bundle, cfg: EvalConfig) -> JudgeConfig:
    base = JudgeConfig.from_dict(bundle.judge_config) if bundle.judge_config else JudgeConfig()
    overrides = {k: getattr(cfg.judge, k) for k in cfg.judge.__dataclass_fields__}
    defaults = JudgeConfig()
    # Only apply fields the caller actually changed from the defaults, so
    # bundle-provided judge settings survive unless explicitly overridden.
    changed = {k: v for k, v in overrides.items() if v != getattr(defaults, k)}
    return base.merged(changed)


def run_eval(
    bundle: Bundle,
    model: str,
    cfg: EvalConfig,
    gateway: Gateway | None = None,
    pool: WorkerPool | None = None,
) -> tuple[Report, list[EvalRecord]]:
    """Evaluate one model over one bundle. Deterministic under a warm replay
    cache; per-task failures isolate into that task's verdict."""
    started_at = datetime.now(timezone.utc).isoformat()
    own_gateway = gateway is None
    own_pool = pool is None
    if gateway is None:
        gateway = Gateway(cfg.cache_dir, mode=cfg.cache_mode)
    if pool is None:
        pool = WorkerPool(cfg.pool_size, cfg.worker_command)
    params = GenParams(model_name=model, max_tokens=cfg.max_tokens, timeout=cfg.request_timeout)
    judge_cfg = _judge_config_for(bundle, cfg)

    truth_cache: dict[tuple[str, str], CanonResult] = {}
    truth_lock = threading.Lock()

    def ground_truth(task_index: int) -> CanonResult:
        task = bundle.tasks[task_index]
        if task.answer is not None:
            return task.answer
        assert task.reference_query is not None
        key = (task.table_id, task.reference_query.source)
        with truth_lock:
            if key in truth_cache:
                return truth_cache[key]
        response = pool.execute(
            ExecRequest(
                request_id=f"truth-{task.question.qid}",
                table=bundle.table_for(task),
                query=task.reference_query,
                limits=cfg.limits,
            )
        )
        with truth_lock:
            truth_cache[key] = response.result
        return response.result

    def eval_task(task_index: int) -> EvalRecord:
        task = bundle.tasks[task_index]
        question = task.question
        table = bundle.table_for(task)
        prompt = build_qa_prompt(bundle.supplementary, table.schema, question)
        digest = _sha256(json.dumps(prompt.as_dicts(), sort_keys=True, ensure_ascii=True))
        t0 = time.monotonic()
        completion = ""
        query: QueryText | None = None
        note = ""
        try:
            completion = gateway.complete(prompt.as_dicts(), params)
            query = extract_code(completion)
        except (GatewayError, EmptyCompletion) as e:
            exec_result: CanonResult = ExecError(
                ErrorKind.RUNTIME_ERROR, f"{type(e).__name__}: {e}"
            )
            return EvalRecord(
                qid=question.qid,
                table_id=task.table_id,
                role=question.role.value if question.role else None,
                qtype=question.qtype.value if question.qtype else None,
                prompt_digest=digest,
                completion=completion,
                query=None,
                exec_result=exec_result,
                verdict=Verdict.EXEC_ERROR,
                latency_ms=(time.monotonic() - t0) * 1000.0,
                note=f"no query: {type(e).__name__}",
            )
        response = pool.execute(
            ExecRequest(
                request_id=f"pred-{question.qid}",
                table=table,
                query=query,
                limits=cfg.limits,
            )
        )
        truth = ground_truth(task_index)
        if is_error(truth):
            verdict = Verdict.NEEDS_REVIEW
            note = f"reference query failed: {truth.kind.value}"  # type: ignore[union-attr]
        else:
            verdict = judge(response.result, truth, judge_cfg)
        return EvalRecord(
            qid=question.qid,
            table_id=task.table_id,
            role=question.role.value if question.role else None,
            qtype=question.qtype.value if question.qtype else None,
            prompt_digest=digest,
            completion=completion,
            query=query,
            exec_result=response.result,
            verdict=verdict,
            latency_ms=(time.monotonic() - t0) * 1000.0,
            note=note,
        )

    try:
        workers = max(1, min(cfg.max_in_flight, len(bundle.tasks)))
        if workers == 1:
            records = [eval_task(i) for i in range(len(bundle.tasks))]
        else:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                records = list(executor.map(eval_task, range(len(bundle.tasks))))
    finally:
        if own_pool:
            pool.shutdown()

    report = build_report(records, model=model, bundle=bundle, cfg=cfg, started_at=started_at)
    if own_gateway:
        report.metadata["network_calls"] = gateway.network_calls
    return report, records


def build_report(
    records: Sequence[EvalRecord],
    model: str,
    bundle: Bundle | None,
    cfg: EvalConfig,
    started_at: str | None = None,
) -> Report:
    if not records:
        raise EmptyRun("no records")
    nr_correct = cfg.judge.count_needs_review_as_correct
    counts = {v.value: 0 for v in Verdict}
    for r in records:
        counts[r.verdict.value] += 1
    matrix: dict[str, dict[str, int]] = {model: {c.value: 0 for c in ErrorClass}}
    for r in records:
        for cls in r.error_classes or ():
            matrix[model][cls.value] += 1
    return Report(
        pass_at_1=pass_at_1(records, nr_correct),
        counts=counts,
        breakdowns={
            "role": _breakdown(records, "role", nr_correct),
            "qtype": _breakdown(records, "qtype", nr_correct),
        },
        error_matrix=matrix,
        metadata={
            "model": model,
            "dataset": bundle.name if bundle else "unknown",
            "task_count": len(records),
            "config_digest": cfg.digest(),
            "cache_mode": cfg.cache_mode,
            "needs_review_counted_correct": nr_correct,
            "started_at": started_at or datetime.now(timezone.utc).isoformat(),
            "finished_at": datetime.now(timezone.utc).isoformat(),
        },
    )


def _render_result(result: CanonResult, limit: int = 2000) -> str:
    if isinstance(result, ExecError):
        return f"{result.kind.value}: {result.message}" if result.message else result.kind.value
    text = json.dumps(result_to_dict(result), ensure_ascii=False, sort_keys=True)
    return text[:limit]


def classify_errors(
    records: Sequence[EvalRecord],
    gateway: Gateway,
    bundle: Bundle,
    model: str,
    max_in_flight: int = 4,
) -> tuple[list[EvalRecord], int]:
    """Attach error classes to every non-correct record via the classification
    prompt. Gateway failures leave that record's classes unset; the count of
    such failures is returned alongside the updated records."""
    params = GenParams(model_name=model)
    tables = bundle.tables
    tasks_by_qid = {t.question.qid: t for t in bundle.tasks}
    targets = [r for r in records if r.verdict not in CORRECT_VERDICTS]
    failures = 0

    def classify(record: EvalRecord) -> None:
        nonlocal failures
        task = tasks_by_qid.get(record.qid)
        table = tables.get(record.table_id)
        expected = "(unknown)"
        if task is not None:
            if task.answer is not None:
                expected = _render_result(task.answer)
            elif task.reference_query is not None:
                expected = f"result of reference query: {task.reference_query.source}"
        question_text = task.question.text if task else record.qid
        prompt = build_error_classification_prompt(
            {
                "question": question_text,
                "sample_rows": render_sample_rows(table) if table else "(unavailable)",
                "query": record.query.source if record.query else "(none)",
                "exec_output": _render_result(record.exec_result),
                "expected": expected,
            }
        )
        try:
            completion = gateway.complete(prompt.as_dicts(), params)
        except GatewayError:
            failures += 1
            return
        record.error_classes = parse_error_classes(completion)

    if targets:
        with ThreadPoolExecutor(max_workers=max(1, min(max_in_flight, len(targets)))) as executor:
            list(executor.map(classify, targets))
    return list(records), failures


# --- persistence ---------------------------------------------------------------

def record_to_dict(r: EvalRecord) -> dict[str, Any]:
    return {
        "qid": r.qid,
        "table_id": r.table_id,
        "role": r.role,
        "qtype": r.qtype,
        "prompt_digest": r.prompt_digest,
        "completion": r.completion,
        "query": query_to_dict(r.query) if r.query else None,
        "exec_result": result_to_dict(r.exec_result),
        "verdict": r.verdict.value,
        "latency_ms": round(r.latency_ms, 3),
        "error_classes": sorted(c.value for c in r.error_classes) if r.error_classes is not None else None,
        "note": r.note,
    }


def record_from_dict(d: dict[str, Any]) -> EvalRecord:
    return EvalRecord(
        qid=d["qid"],
        table_id=d["table_id"],
        role=d.get("role"),
        qtype=d.get("qtype"),
        prompt_digest=d["prompt_digest"],
        completion=d.get("completion", ""),
        query=query_from_dict(d["query"]) if d.get("query") else None,
        exec_result=result_from_dict(d["exec_result"]),
        verdict=Verdict(d["verdict"]),
        latency_ms=float(d.get("latency_ms", 0.0)),
        error_classes={ErrorClass(c) for c in d["error_classes"]} if d.get("error_classes") is not None else None,
        note=d.get("note", ""),
    )


def save_records(records: Sequence[EvalRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(record_to_dict(r), ensure_ascii=False, sort_keys=True) + "\n")


def load_records(path: str | Path) -> list[EvalRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(record_from_dict(json.loads(line)))
    return records


CSV_COLUMNS = [
    "qid", "table_id", "role", "qtype", "verdict", "query_sha256",
    "completion_sha256", "exec_kind", "lint", "error_classes", "note",
]


def _result_kind(result: CanonResult) -> str:
    if isinstance(result, ExecError):
        return f"error:{result.kind.value}"
    return {Scalar: "scalar", ValueList: "list", Series: "series", Table: "table"}[type(result)]


def records_to_csv(records: Sequence[EvalRecord], path: str | Path) -> None:
    """Deterministic per-record view: content digests instead of free text, no
    timing fields, stable row order. Two replay runs must produce identical
    bytes."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([
                r.qid,
                r.table_id,
                r.role or "",
                r.qtype or "",
                r.verdict.value,
                _sha256(r.query.source) if r.query else "",
                _sha256(r.completion) if r.completion else "",
                _result_kind(r.exec_result),
                ";".join(r.lint),
                ";".join(sorted(c.value for c in r.error_classes)) if r.error_classes is not None else "",
                r.note,
            ])


def error_matrix_to_csv(matrix: dict[str, dict[str, int]], path: str | Path) -> None:
    """One row per model, one column per error class; ready for external
    heatmap plotting."""
    classes = [c.value for c in ErrorClass]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["model"] + classes)
        for model in sorted(matrix):
            writer.writerow([model] + [matrix[model].get(c, 0) for c in classes])


def merge_error_matrices(reports: Iterable[Report]) -> dict[str, dict[str, int]]:
    merged: dict[str, dict[str, int]] = {}
    for report in reports:
        for model, row in report.error_matrix.items():
            target = merged.setdefault(model, {c.value: 0 for c in ErrorClass})
            for cls, count in row.items():
                target[cls] = target.get(cls, 0) + count
    return merged


def report_to_dict(report: Report) -> dict[str, Any]:
    return {
        "pass_at_1": report.pass_at_1,
        "counts": report.counts,
        "breakdowns": report.breakdowns,
        "error_matrix": report.error_matrix,
        "metadata": report.metadata,
    }


def write_review_queue(records: Sequence[EvalRecord], bundle: Bundle | None, path: str | Path) -> int:
    """Export needs_review records for human annotation; `accept` starts null."""
    tasks_by_qid = {t.question.qid: t for t in bundle.tasks} if bundle else {}
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            if r.verdict is not Verdict.NEEDS_REVIEW:
                continue
            count += 1
            task = tasks_by_qid.get(r.qid)
            f.write(json.dumps({
                "qid": r.qid,
                "question": task.question.text if task else None,
                "query": r.query.source if r.query else None,
                "exec_result": result_to_dict(r.exec_result),
                "accept": None,
            }, ensure_ascii=False, sort_keys=True) + "\n")
    return count


def apply_review_decisions(records: Sequence[EvalRecord], review_path: str | Path) -> list[EvalRecord]:
    """Fold human review decisions back into the records: accepted items become
    correct_relaxed, explicitly refused items become incorrect."""
    decisions: dict[str, bool] = {}
    for line in Path(review_path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        item = json.loads(line)
        if item.get("accept") is not None:
            decisions[item["qid"]] = bool(item["accept"])
    updated = []
    for r in records:
        if r.verdict is Verdict.NEEDS_REVIEW and r.qid in decisions:
            r.verdict = Verdict.CORRECT_RELAXED if decisions[r.qid] else Verdict.INCORRECT
            if r.verdict in CORRECT_VERDICTS:
                r.error_classes = None
        updated.append(r)
    return updated


def emit_report(
    report: Report,
    records: Sequence[EvalRecord],
    out_dir: str | Path,
    formats: Sequence[str] = ("json", "csv"),
    bundle: Bundle | None = None,
) -> dict[str, Path]:
    """Write the run artifacts; returns the path of each emitted file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    paths["records_jsonl"] = out / "records.jsonl"
    save_records(records, paths["records_jsonl"])
    if "json" in formats:
        paths["summary"] = out / "summary.json"
        paths["summary"].write_text(
            json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    if "csv" in formats:
        paths["records_csv"] = out / "records.csv"
        records_to_csv(records, paths["records_csv"])
        paths["error_matrix"] = out / "error_matrix.csv"
        error_matrix_to_csv(report.error_matrix, paths["error_matrix"])
    review_path = out / "review.jsonl"
    if write_review_queue(records, bundle, review_path):
        paths["review"] = review_path
    elif review_path.exists():
        review_path.unlink()
    return paths
