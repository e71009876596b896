"""Restricted execution and result canonicalization.

The execution namespace contains exactly the dataframe (`df`), the three
whitelisted modules under their conventional aliases (`pd`, `np`, `math`),
and a curated builtin subset. The answer is whatever the query binds to
`result`; if `result` stays unbound and the final statement is a bare
expression, that expression's value is captured instead.

Canonicalization maps any runtime value onto the closed result taxonomy:

    scalar      numbers (finite), strings, bools, nulls, datetimes
    list        flat sequence of scalars (arrays are flattened row-major,
                sets ordered canonically for determinism)
    series      values plus index and optional name
    table       column names plus rectangular rows; a named (e.g. groupby)
                index is reset into columns first, an unnamed positional
                index is dropped
    error       rejected_unsafe / runtime_error / no_result / timeout /
                resource_limit / result_too_large

Anything outside the taxonomy is coerced to its text rendering with memory
addresses zeroed so identical values canonicalize identically across runs.
"""

from __future__ import annotations

import ast
import decimal
import math as _math
import re
from datetime import date, datetime
from typing import Any

import numpy as np
import pandas as pd

from .policy import vet

_SAFE_BUILTINS = {
    "len": len, "min": min, "max": max, "sum": sum, "sorted": sorted,
    "range": range, "abs": abs, "round": round, "str": str, "int": int,
    "float": float, "bool": bool, "list": list, "dict": dict, "set": set,
    "tuple": tuple, "enumerate": enumerate, "zip": zip,
}

_PRELOADED = {"pandas": pd, "numpy": np, "math": _math}

_ADDRESS_RE = re.compile(r"0x[0-9a-fA-F]+")

_DTYPE_RANK = {"null": 0, "bool": 1, "number": 2, "string": 3, "datetime": 4}


def _restricted_import(name: str, globals=None, locals=None, fromlist=(), level=0):
    root = name.split(".")[0]
    if level == 0 and root in _PRELOADED:
        return _PRELOADED[root]
    raise ImportError(f"import of {name!r} is not allowed")


def materialize(table_payload: dict[str, Any]) -> pd.DataFrame:
    """Build the dataframe from a wire table payload, honoring column dtypes.

    Columns use the natural numpy dtype when null-free and the pandas
    nullable variant otherwise, so ordinary queries see ordinary dtypes.
    """
    columns = table_payload["columns"]
    raw_rows = table_payload.get("rows", [])
    data: dict[str, Any] = {}
    for i, col in enumerate(columns):
        name, dtype = col["name"], col["dtype"]
        values = [_decode_cell(row[i]) for row in raw_rows]
        has_null = any(v is None for v in values)
        if dtype == "int":
            if has_null:
                data[name] = pd.array(values, dtype="Int64")
            else:
                data[name] = np.array(values, dtype=np.int64)
        elif dtype == "float":
            data[name] = np.array(
                [float("nan") if v is None else float(v) for v in values], dtype=np.float64
            )
        elif dtype == "bool":
            if has_null:
                data[name] = pd.array(values, dtype="boolean")
            else:
                data[name] = np.array(values, dtype=bool)
        elif dtype == "datetime":
            data[name] = pd.to_datetime(pd.Series(values, dtype="object"))
        else:
            data[name] = pd.Series(values, dtype="object")
    frame = pd.DataFrame(data)
    return frame[[c["name"] for c in columns]] if columns else frame


def _decode_cell(obj: Any) -> Any:
    if isinstance(obj, dict) and set(obj.keys()) == {"$dt"}:
        return datetime.fromisoformat(obj["$dt"])
    return obj


def _encode_scalar(value: Any) -> Any:
    """Map one runtime scalar into its wire cell encoding."""
    if value is None or value is pd.NaT or value is pd.NA:
        return None
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return int(value)
    if isinstance(value, (float, np.floating)):
        f = float(value)
        return f if _math.isfinite(f) else None
    if isinstance(value, str):
        return str(value)
    if isinstance(value, pd.Timestamp):
        if value is pd.NaT:
            return None
        return {"$dt": value.to_pydatetime().isoformat()}
    if isinstance(value, np.datetime64):
        ts = pd.Timestamp(value)
        return None if ts is pd.NaT else {"$dt": ts.to_pydatetime().isoformat()}
    if isinstance(value, datetime):
        return {"$dt": value.isoformat()}
    if isinstance(value, date):
        return {"$dt": datetime(value.year, value.month, value.day).isoformat()}
    try:
        if pd.isna(value):
            return None
    except (TypeError, ValueError):
        pass
    if isinstance(value, (bytes, bytearray)):
        return value.decode("utf-8", "replace")
    if isinstance(value, decimal.Decimal):
        f = float(value)
        return f if _math.isfinite(f) else None
    # outside the taxonomy: text rendering, with memory addresses zeroed
    return _ADDRESS_RE.sub("0x0", str(value))


def _cell_dtype(encoded: Any) -> str:
    if encoded is None:
        return "null"
    if isinstance(encoded, bool):
        return "bool"
    if isinstance(encoded, (int, float)):
        return "number"
    if isinstance(encoded, dict):
        return "datetime"
    return "string"


def _canonical_sort_key(encoded: Any) -> tuple:
    dtype = _cell_dtype(encoded)
    rank = _DTYPE_RANK[dtype]
    if dtype == "null":
        return (rank, 0)
    if dtype == "bool":
        return (rank, int(encoded))
    if dtype == "number":
        return (rank, float(encoded))
    if dtype == "datetime":
        return (rank, encoded["$dt"])
    return (rank, encoded)


def _is_scalar(value: Any) -> bool:
    if value is None or isinstance(value, (bool, int, float, str, bytes, datetime, date,
                                           np.generic, pd.Timestamp, np.datetime64)):
        return True
    try:
        return bool(pd.api.types.is_scalar(value))
    except Exception:
        return False


def canonicalize(value: Any, max_cells: int = 100_000) -> dict[str, Any]:
    """Map a runtime value onto the wire result taxonomy (see module docstring)."""
    if isinstance(value, pd.DataFrame):
        frame = value
        index = frame.index
        named = isinstance(index, pd.MultiIndex) or index.name is not None
        if named:
            frame = frame.reset_index()
        if frame.shape[0] * max(1, frame.shape[1]) > max_cells:
            return _error("result_too_large",
                          f"table of {frame.shape[0]}x{frame.shape[1]} exceeds {max_cells} cells")
        return {
            "kind": "table",
            "columns": [str(c) for c in frame.columns],
            "rows": [[_encode_scalar(v) for v in row] for row in frame.itertuples(index=False, name=None)],
        }
    if isinstance(value, pd.Series):
        if len(value) > max_cells:
            return _error("result_too_large", f"series of {len(value)} exceeds {max_cells} cells")
        index = [_index_entry(i) for i in value.index]
        return {
            "kind": "series",
            "name": None if value.name is None else str(value.name),
            "index": index,
            "values": [_encode_scalar(v) for v in value.to_list()],
        }
    if isinstance(value, pd.Index):
        return canonicalize(list(value), max_cells)
    if isinstance(value, np.ndarray):
        if value.ndim == 0:
            return canonicalize(value.item(), max_cells)
        flat = value.reshape(-1)
        if flat.size > max_cells:
            return _error("result_too_large", f"array of {flat.size} exceeds {max_cells} cells")
        return {"kind": "list", "values": [_encode_scalar(v) for v in flat.tolist()]}
    if isinstance(value, (set, frozenset)):
        encoded = sorted((_encode_scalar(v) for v in value), key=_canonical_sort_key)
        if len(encoded) > max_cells:
            return _error("result_too_large", f"set of {len(encoded)} exceeds {max_cells} cells")
        return {"kind": "list", "values": encoded}
    if isinstance(value, (list, tuple)):
        if len(value) > max_cells:
            return _error("result_too_large", f"list of {len(value)} exceeds {max_cells} cells")
        return {
            "kind": "list",
            "values": [
                _encode_scalar(v) if _is_scalar(v) else _ADDRESS_RE.sub("0x0", str(v))
                for v in value
            ],
        }
    if isinstance(value, pd.Categorical):
        return canonicalize(list(value), max_cells)
    return {"kind": "scalar", "value": _encode_scalar(value)}


def _index_entry(entry: Any) -> Any:
    if isinstance(entry, tuple):  # MultiIndex entry
        return str(entry)
    encoded = _encode_scalar(entry)
    if isinstance(encoded, dict):
        return encoded
    if encoded is None or isinstance(encoded, (bool, int, float, str)):
        return encoded
    return str(encoded)


def _error(kind: str, message: str) -> dict[str, Any]:
    return {"kind": "error", "error_kind": kind, "message": message}


def _set_memory_limit(memory_mb: int):
    """Cap additional allocations at memory_mb over the process's current
    virtual size. Returns a restore callable (no-op where unsupported)."""
    try:
        import resource

        with open("/proc/self/statm", encoding="ascii") as f:
            pages = int(f.read().split()[0])
        import os as _os

        current = pages * _os.sysconf("SC_PAGE_SIZE")
        soft, hard = resource.getrlimit(resource.RLIMIT_AS)
        limit = current + memory_mb * 1024 * 1024
        resource.setrlimit(resource.RLIMIT_AS, (limit, hard))

        def restore() -> None:
            try:
                resource.setrlimit(resource.RLIMIT_AS, (soft, hard))
            except (ValueError, OSError):
                pass

        return restore
    except (ImportError, OSError, ValueError):
        return lambda: None


def run(table_payload: dict[str, Any], query_source: str,
        limits: dict[str, Any] | None = None) -> dict[str, Any]:
    """Vet, execute, and canonicalize one query against one table payload.

    Always returns a wire result dict; failures come back through the error
    taxonomy rather than exceptions.
    """
    limits = limits or {}
    max_cells = int(limits.get("max_result_cells", 100_000))
    memory_mb = int(limits.get("memory_mb", 512))

    reason = vet(query_source)
    if reason is not None:
        return _error("rejected_unsafe", reason)

    try:
        frame = materialize(table_payload)
    except Exception as e:
        return _error("runtime_error", f"table materialization failed: {e}")

    tree = ast.parse(query_source)
    trailing_expr = None
    body = tree.body
    if body and isinstance(body[-1], ast.Expr):
        trailing_expr = ast.Expression(body[-1].value)
        body = body[:-1]

    namespace: dict[str, Any] = {
        "__builtins__": dict(_SAFE_BUILTINS, __import__=_restricted_import),
        "df": frame,
        "pd": pd,
        "np": np,
        "math": _math,
    }

    restore = _set_memory_limit(memory_mb)
    try:
        exec(compile(ast.Module(body=body, type_ignores=[]), "<query>", "exec"), namespace)
        tail_value = None
        has_tail = False
        if trailing_expr is not None:
            tail_value = eval(compile(trailing_expr, "<query>", "eval"), namespace)
            has_tail = True
    except MemoryError:
        restore()
        return _error("resource_limit", "memory limit exceeded")
    except RecursionError:
        restore()
        return _error("resource_limit", "recursion depth exceeded")
    except ImportError as e:
        restore()
        return _error("rejected_unsafe", str(e))
    except BaseException as e:  # noqa: BLE001 - every query failure must map to the taxonomy
        restore()
        return _error("runtime_error", f"{type(e).__name__}: {e}")
    restore()

    if "result" in namespace:
        captured = namespace["result"]
    elif has_tail:
        captured = tail_value
    else:
        return _error("no_result", "query bound no `result` and did not end in an expression")

    try:
        return canonicalize(captured, max_cells)
    except MemoryError:
        return _error("resource_limit", "memory limit exceeded while canonicalizing")
    except Exception as e:
        return _error("runtime_error", f"canonicalization failed: {type(e).__name__}: {e}")
