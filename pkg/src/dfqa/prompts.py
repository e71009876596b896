"""Prompt construction, completion parsing, and error-classification prompts.

Prompts are rendered from versioned template files (``templates/``) using
``{{placeholder}}`` substitution so wording experiments never require code
changes. Placeholders per template:

    qa_system.txt       {{assumptions}} {{constraints}}
    qa_user.txt         {{schema_block}} {{question}}
    generation.txt      {{schema_block}} {{role_paragraph}} {{n}}
    classification.txt  {{question}} {{sample_rows}} {{query}} {{exec_output}}
                        {{expected}} {{class_count}} {{class_definitions}}

The QA prompt carries column names and dtypes only, never cell values.
Token counts are estimated as len(text) / 4; the figure is for reporting,
not budgeting.
"""

from __future__ import annotations

import ast
import io
import json
import re
import tokenize
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

from .model import (
    DataTable,
    LintFinding,
    MitigationFlag,
    Question,
    QueryText,
    SupplementarySpec,
    TableSchema,
    encode_cell,
)


class PromptError(ValueError):
    pass


class EmptyCompletion(PromptError):
    pass


@dataclass(frozen=True)
class Message:
    role: str  # "system" | "user"
    content: str

    def to_dict(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class PromptBundle:
    messages: tuple[Message, ...]
    token_estimate: int

    def as_dicts(self) -> list[dict[str, str]]:
        return [m.to_dict() for m in self.messages]


class ErrorClass(str, Enum):
    STRING_ERROR = "string_error"
    ACCESS_ERROR = "access_error"
    CONDITION_ERROR = "condition_error"
    TYPE_ERROR = "type_error"
    EXPECTATION_ERROR = "expectation_error"
    STRUCTURE_ERROR = "structure_error"
    FUNCTION_ERROR = "function_error"
    OTHERS = "others"


def _package_data(name: str) -> str:
    return resources.files("dfqa").joinpath(name).read_text(encoding="utf-8")


def load_roles() -> dict[str, str]:
    """Role id -> characteristic paragraph used verbatim in generation prompts."""
    return json.loads(_package_data("data/roles.json"))


def load_error_classes() -> list[dict[str, str]]:
    """The eight error classes: id, abbreviation, full name, description."""
    return json.loads(_package_data("data/error_classes.json"))


class TemplateSet:
    """Named prompt templates resolved from a directory, defaulting to the
    versions packaged with dfqa."""

    NAMES = ("qa_system", "qa_user", "generation", "classification")

    def __init__(self, directory: str | Path | None = None):
        self._dir = Path(directory) if directory is not None else None

    def load(self, name: str) -> str:
        if name not in self.NAMES:
            raise PromptError(f"unknown template {name!r}")
        if self._dir is not None:
            return (self._dir / f"{name}.txt").read_text(encoding="utf-8")
        return _package_data(f"templates/{name}.txt")

    def render(self, name: str, **values: Any) -> str:
        text = self.load(name)
        for key, value in values.items():
            text = text.replace("{{" + key + "}}", str(value))
        leftover = re.search(r"\{\{(\w+)\}\}", text)
        if leftover:
            raise PromptError(f"unfilled placeholder {leftover.group(1)!r} in {name}")
        return text


DEFAULT_TEMPLATES = TemplateSet()


def _estimate_tokens(messages: Iterable[Message]) -> int:
    return sum(len(m.content) for m in messages) // 4


def render_schema_block(schema: TableSchema, flags: frozenset[MitigationFlag] = frozenset()) -> str:
    """One line per column: ``name: dtype``, plus description and format hint
    lines when the corresponding mitigation flags are set."""
    lines = []
    for col in schema.columns:
        line = f"- {col.name}: {col.dtype.value}"
        if MitigationFlag.COLUMN_DESCRIPTIONS in flags and col.description:
            line += f" ({col.description})"
        if MitigationFlag.DATE_FORMAT_HINTS in flags and col.format_hint:
            line += f" [format: {col.format_hint}]"
        lines.append(line)
    return "\n".join(lines)


_STRONG_LINKS = ("is", "was", "are", "were", "equals", "named", "called")
_WEAK_LINKS = ("of", "for", "on", "in", "at", "by", "with", "to", "from")
_TRAILING_STOPWORDS = {"in", "of", "at", "on", "for", "to", "from", "by", "with"}
_LEADING_STOPWORDS = {"the", "a", "an"}
_QUERY_WORDS = {
    "maximum", "minimum", "average", "total", "count", "number", "sum",
    "mean", "median", "most", "least", "highest", "lowest", "first", "last",
}


def quote_literal_phrases(question: str, column_names: Iterable[str] = ()) -> str:
    """Wrap the likely literal search phrase of a question in double quotes.

    Heuristic: take the span after the last strong linking verb (falling back
    to the last weak preposition), strip leading articles and trailing
    prepositions, and quote it when it is 1 to 6 tokens, not already quoted,
    and not itself a column name. Questions that already contain quotes are
    returned unchanged.
    """
    if '"' in question or "'" in question:
        return question
    trailer = ""
    body = question.rstrip()
    while body and body[-1] in "?.!":
        trailer = body[-1] + trailer
        body = body[:-1].rstrip()
    tokens = body.split()
    lowered = [t.lower() for t in tokens]
    columns = {c.lower() for c in column_names}

    def candidate_after(position: int) -> tuple[int, int] | None:
        span = tokens[position + 1 :]
        end = len(span)
        # trailing prepositions and column mentions frame the literal but are
        # not part of it ("... grey and bell electorate in?")
        while end > 0 and (
            span[end - 1].lower() in _TRAILING_STOPWORDS or span[end - 1].lower() in columns
        ):
            end -= 1
        start = 0
        while start < end and span[start].lower() in _LEADING_STOPWORDS:
            start += 1
        if start >= end or end - start > 6:
            return None
        phrase_tokens = [t.lower() for t in span[start:end]]
        # a span mentioning a column, or made only of query words, is
        # structural rather than a literal value
        if any(t in columns for t in phrase_tokens):
            return None
        if all(t in _QUERY_WORDS or t in _TRAILING_STOPWORDS for t in phrase_tokens):
            return None
        return start, end

    for links in (_STRONG_LINKS, _WEAK_LINKS):
        for pos in range(len(tokens) - 1, -1, -1):
            if lowered[pos] in links:
                cand = candidate_after(pos)
                if cand is not None:
                    start, end = cand
                    span = tokens[pos + 1 :]
                    quoted = '"' + " ".join(span[start:end]) + '"'
                    parts = tokens[: pos + 1] + span[:start] + [quoted] + span[end:]
                    return " ".join(parts) + trailer
    return question


def build_qa_prompt(
    supplementary: SupplementarySpec,
    schema: TableSchema,
    question: Question,
    templates: TemplateSet = DEFAULT_TEMPLATES,
) -> PromptBundle:
    """Assemble the QA prompt from supplementary info, schema metadata, and the
    question. Only column names and dtypes reach the prompt, never cell values."""
    flags = supplementary.mitigation_flags
    assumptions = "\n".join(f"- {a}" for a in supplementary.assumptions) or "- none"
    constraints = "\n".join(f"- {c}" for c in supplementary.constraints) or "- none"
    system = templates.render("qa_system", assumptions=assumptions, constraints=constraints)

    text = question.text
    if MitigationFlag.QUOTE_VALUES in flags:
        text = quote_literal_phrases(text, schema.column_names)
    user = templates.render(
        "qa_user",
        schema_block=render_schema_block(schema, flags),
        question=text,
    )
    messages = (Message("system", system.strip()), Message("user", user.strip()))
    return PromptBundle(messages=messages, token_estimate=_estimate_tokens(messages))


def build_generation_prompt(
    schema: TableSchema,
    role: str,
    n: int,
    templates: TemplateSet = DEFAULT_TEMPLATES,
) -> PromptBundle:
    """Dataset-generation prompt: schema (names and dtypes only), the role's
    characteristic paragraph verbatim, the pair count, and the output format."""
    if n < 1:
        raise PromptError("n must be >= 1")
    roles = load_roles()
    role_key = getattr(role, "value", role)
    if role_key not in roles:
        raise PromptError(f"unknown role {role_key!r}")
    user = templates.render(
        "generation",
        schema_block=render_schema_block(schema),
        role_paragraph=roles[role_key],
        n=n,
    )
    messages = (Message("user", user.strip()),)
    return PromptBundle(messages=messages, token_estimate=_estimate_tokens(messages))


_FENCE_RE = re.compile(r"```[ \t]*(\w+)?[ \t]*\n(.*?)```", re.DOTALL)
_LANG_TAG_RE = re.compile(r"^(python|py|python3)\s*$", re.IGNORECASE)


def lint_query(source: str) -> tuple[LintFinding, ...]:
    """Instruction-adherence findings for a query: imports, comments, and a
    missing `result` assignment. Uses the AST when the source parses, with a
    line-based fallback otherwise."""
    findings: list[LintFinding] = []
    has_import = False
    assigns_result = False
    try:
        tree = ast.parse(source)
    except SyntaxError:
        tree = None
    if tree is not None:
        for node in ast.walk(tree):
            if isinstance(node, (ast.Import, ast.ImportFrom)):
                has_import = True
            elif isinstance(node, ast.Assign):
                for target in node.targets:
                    if isinstance(target, ast.Name) and target.id == "result":
                        assigns_result = True
            elif isinstance(node, (ast.AugAssign, ast.AnnAssign)):
                target = node.target
                if isinstance(target, ast.Name) and target.id == "result":
                    assigns_result = True
    else:
        for line in source.splitlines():
            stripped = line.strip()
            if stripped.startswith(("import ", "from ")):
                has_import = True
            if re.match(r"result\s*(?:[+\-*/]?=)(?!=)", stripped):
                assigns_result = True

    has_comments = False
    try:
        for tok in tokenize.generate_tokens(io.StringIO(source).readline):
            if tok.type == tokenize.COMMENT:
                has_comments = True
                break
    except (tokenize.TokenizeError, IndentationError, SyntaxError):
        has_comments = any(line.lstrip().startswith("#") for line in source.splitlines())

    if has_import:
        findings.append(LintFinding.HAS_IMPORT)
    if has_comments:
        findings.append(LintFinding.HAS_COMMENTS)
    if not assigns_result:
        findings.append(LintFinding.MISSING_RESULT_ASSIGNMENT)
    return tuple(findings)


def extract_code(completion: str) -> QueryText:
    """Pull query source out of a completion: the first fenced code block if one
    exists, else the whole completion. A language tag line inside the fence is
    stripped. Raises EmptyCompletion when nothing remains."""
    match = _FENCE_RE.search(completion)
    if match:
        source = match.group(2)
    else:
        source = completion
        lines = source.splitlines()
        if lines and _LANG_TAG_RE.match(lines[0]):
            source = "\n".join(lines[1:])
    lines = source.splitlines()
    if lines and _LANG_TAG_RE.match(lines[0]):
        lines = lines[1:]
    source = "\n".join(lines).strip()
    if not source:
        raise EmptyCompletion("completion contains no code")
    return QueryText(source=source, lint=lint_query(source))


def render_sample_rows(table: DataTable, limit: int = 3) -> str:
    """First `limit` rows rendered as aligned text for classification prompts."""
    names = table.schema.column_names
    rows = table.rows[:limit]
    rendered = [" | ".join(names)]
    for row in rows:
        rendered.append(" | ".join(_render_cell(c) for c in row))
    return "\n".join(rendered)


def _render_cell(cell: Any) -> str:
    encoded = encode_cell(cell)
    if isinstance(encoded, dict):
        return encoded["$dt"]
    if encoded is None:
        return "null"
    return str(encoded)


def build_error_classification_prompt(
    record: dict[str, Any],
    templates: TemplateSet = DEFAULT_TEMPLATES,
) -> PromptBundle:
    """Classification prompt over five record parts (question, sample rows,
    query, execution output, expected result) plus the eight class
    definitions. Empty output fields render as "(no output)"."""
    classes = load_error_classes()
    definitions = "\n".join(
        f"- {c['abbreviation']} ({c['name']}): {c['description']}" for c in classes
    )

    def part(key: str) -> str:
        value = record.get(key)
        if value is None or (isinstance(value, str) and not value.strip()):
            return "(no output)"
        return str(value)

    user = templates.render(
        "classification",
        question=part("question"),
        sample_rows=part("sample_rows"),
        query=part("query"),
        exec_output=part("exec_output"),
        expected=part("expected"),
        class_count=len(classes),
        class_definitions=definitions,
    )
    messages = (Message("user", user.strip()),)
    return PromptBundle(messages=messages, token_estimate=_estimate_tokens(messages))


def _class_patterns() -> list[tuple[ErrorClass, list[str]]]:
    patterns = []
    for c in load_error_classes():
        cls = ErrorClass(c["id"])
        names = [c["abbreviation"].lower(), c["name"].lower()]
        # tolerate singular/plural drift on the long names
        names += [n.rstrip("s") for n in names if n.endswith("s")]
        patterns.append((cls, names))
    return patterns


def parse_error_classes(completion: str) -> set[ErrorClass]:
    """Case-insensitive multi-label parse of a classification response.
    Text matching no class maps to {others}."""
    text = completion.lower()
    found = {cls for cls, names in _class_patterns() if any(n in text for n in names)}
    if not found:
        return {ErrorClass.OTHERS}
    return found


def render_error_classes(classes: Iterable[ErrorClass]) -> str:
    """Abbreviation rendering whose parse round-trips: render -> parse -> same set."""
    by_id = {c["id"]: c["abbreviation"] for c in load_error_classes()}
    ordered = sorted({ErrorClass(c) for c in classes}, key=lambda c: c.value)
    return "; ".join(by_id[c.value] for c in ordered)
