"""Task bundles on disk.

A bundle is one directory per dataset:

    tables.jsonl   one DataTable per line
    tasks.jsonl    one TaskInstance per line
    meta.json      dataset name, version, supplementary-spec defaults, and
                   optional judge-config defaults
    manifest.json  optional build audit (skipped items, fallback notes)

All files are UTF-8 with the field names fixed by the model encoders.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .model import (
    DataTable,
    SupplementarySpec,
    TaskInstance,
    dumps,
    supplementary_from_dict,
    supplementary_to_dict,
    table_from_dict,
    table_to_dict,
    task_from_dict,
    task_to_dict,
)


class BundleError(ValueError):
    pass


@dataclass
class Bundle:
    name: str
    version: str
    supplementary: SupplementarySpec
    tables: dict[str, DataTable]
    tasks: list[TaskInstance]
    judge_config: dict[str, Any] = field(default_factory=dict)
    manifest: dict[str, Any] = field(default_factory=dict)

    def table_for(self, task: TaskInstance) -> DataTable:
        try:
            return self.tables[task.table_id]
        except KeyError:
            raise BundleError(f"task {task.question.qid}: unknown table {task.table_id!r}") from None


def write_bundle(bundle: Bundle, path: str | Path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "tables.jsonl", "w", encoding="utf-8") as f:
        for table in bundle.tables.values():
            f.write(dumps(table_to_dict(table)) + "\n")
    with open(out / "tasks.jsonl", "w", encoding="utf-8") as f:
        for task in bundle.tasks:
            f.write(dumps(task_to_dict(task)) + "\n")
    meta = {
        "name": bundle.name,
        "version": bundle.version,
        "supplementary": supplementary_to_dict(bundle.supplementary),
        "judge": bundle.judge_config,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if bundle.manifest:
        (out / "manifest.json").write_text(
            json.dumps(bundle.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return out


def read_bundle(path: str | Path) -> Bundle:
    src = Path(path)
    if not (src / "meta.json").exists():
        raise BundleError(f"{src} is not a task bundle (missing meta.json)")
    meta = json.loads((src / "meta.json").read_text(encoding="utf-8"))
    tables: dict[str, DataTable] = {}
    for line in (src / "tables.jsonl").read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        table = table_from_dict(json.loads(line))
        tables[table.table_id] = table
    tasks: list[TaskInstance] = []
    for line in (src / "tasks.jsonl").read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        tasks.append(task_from_dict(json.loads(line)))
    manifest: dict[str, Any] = {}
    manifest_path = src / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    return Bundle(
        name=meta["name"],
        version=str(meta.get("version", "0")),
        supplementary=supplementary_from_dict(meta.get("supplementary", {})),
        tables=tables,
        tasks=tasks,
        judge_config=meta.get("judge", {}),
        manifest=manifest,
    )
