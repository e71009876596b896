"""Static safety vetting for query source.

A query is rejected before execution if it imports anything outside the
whitelist (pandas, numpy, math), touches any double-underscore name or
attribute, uses a banned builtin, or reaches for filesystem/OS surfaces by
attribute name. Vetting is deliberately conservative: the worker also runs
with a curated builtin namespace, but nothing executes unless the AST is
clean. This is process-level restriction, not VM isolation; deployments that
run truly hostile code should add OS-level sandboxing around the worker.
"""

from __future__ import annotations

import ast

ALLOWED_IMPORTS = frozenset({"pandas", "numpy", "math"})

BANNED_NAMES = frozenset({
    "open", "exec", "eval", "compile", "input", "breakpoint",
    "globals", "locals", "vars", "getattr", "setattr", "delattr", "__import__",
})

# attribute names that reach OS/IO surfaces through module objects
BANNED_ATTRIBUTES = frozenset({
    # module hops (e.g. pd.io.common.os)
    "os", "sys", "io", "subprocess", "socket", "shutil", "pathlib",
    "importlib", "ctypes", "builtins",
    # direct OS calls
    "system", "popen", "environ", "getenv", "putenv", "chdir", "chmod",
    "fork", "execv", "execve", "kill",
    # pandas/numpy readers and writers
    "read_csv", "read_table", "read_json", "read_html", "read_xml",
    "read_pickle", "read_fwf", "read_clipboard", "read_excel", "read_sql",
    "read_sql_query", "read_sql_table", "read_parquet", "read_feather",
    "read_orc", "read_sas", "read_spss", "read_stata", "read_hdf",
    "to_csv", "to_json", "to_pickle", "to_excel", "to_parquet", "to_feather",
    "to_orc", "to_stata", "to_sql", "to_xml", "to_clipboard", "to_hdf",
    "to_latex", "to_markdown",
    "fromfile", "tofile", "save", "savez", "savetxt", "load", "loadtxt",
    "genfromtxt", "memmap", "frombuffer",
})


class SafetyPolicy:
    """Immutable per-process policy; every violation maps to rejected_unsafe."""

    allowed_imports = ALLOWED_IMPORTS
    banned_names = BANNED_NAMES
    banned_attributes = BANNED_ATTRIBUTES
    ban_dunder_access = True


def vet(source: str, policy: type[SafetyPolicy] = SafetyPolicy) -> str | None:
    """Return None when the source is safe to execute, else the rejection reason."""
    try:
        tree = ast.parse(source)
    except (SyntaxError, ValueError) as e:
        return f"syntax: {e}"

    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            for alias in node.names:
                root = alias.name.split(".")[0]
                if root not in policy.allowed_imports:
                    return f"disallowed import: {alias.name}"
        elif isinstance(node, ast.ImportFrom):
            root = (node.module or "").split(".")[0]
            if node.level or root not in policy.allowed_imports:
                return f"disallowed import: from {node.module or '.'}"
            for alias in node.names:
                if alias.name == "*":
                    return "disallowed import: star import"
                if alias.name.startswith("_"):
                    return f"disallowed import: private name {alias.name}"
                if alias.name in policy.banned_attributes:
                    return f"disallowed import: {alias.name}"
        elif isinstance(node, ast.Attribute):
            if policy.ban_dunder_access and node.attr.startswith("__"):
                return f"dunder attribute access: {node.attr}"
            if node.attr in policy.banned_attributes:
                return f"banned attribute: {node.attr}"
        elif isinstance(node, ast.Name):
            if node.id in policy.banned_names:
                return f"banned name: {node.id}"
            if policy.ban_dunder_access and node.id.startswith("__"):
                return f"dunder name: {node.id}"
    return None
