"""Query model: loading JSON5/YAML query documents and checking them.

A query document uses ``@``-prefixed keywords for structure and plain keys
for output field names::

    {
      "@url": "https://example.org/list",
      "@steps": [
        {"@xpath": "//li", "@fields": {"title": "./a/text()", "link": "./a/@href"}}
      ]
    }
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal
from urllib.parse import urlsplit

import json5
from ruamel.yaml import YAML
from ruamel.yaml.error import MarkedYAMLError, YAMLError

from scrapeql.errors import (
    InvalidQuery,
    QuerySyntaxError,
    SchemaError,
    UnsupportedFeature,
    XPathSyntaxError,
)
from scrapeql.xpath import compile_xpath

__all__ = [
    "Query",
    "Step",
    "FollowSpec",
    "PaginationSpec",
    "Violation",
    "Format",
    "detect_format",
    "parse_query",
    "load_query",
    "from_document",
    "to_document",
    "dump_query",
    "validate",
]

Format = Literal["json5", "yaml"]

QUERY_KEYS = ("@url", "@steps")
STEP_KEYS = ("@xpath", "@name", "@fields", "@follow", "@pagination")
FOLLOW_KEYS = ("@xpath", "@steps")
PAGINATION_KEYS = ("@xpath", "@limit")


@dataclass(frozen=True)
class PaginationSpec:
    xpath: str
    limit: int


@dataclass(frozen=True)
class FollowSpec:
    xpath: str
    steps: tuple[Step, ...]


@dataclass(frozen=True)
class Step:
    xpath: str
    name: str | None = None
    # ordered (field name, expression) pairs; None when @fields is absent
    fields: tuple[tuple[str, str], ...] | None = None
    follow: FollowSpec | None = None
    pagination: PaginationSpec | None = None

    @property
    def field_names(self) -> list[str]:
        return [name for name, _ in self.fields or ()]


@dataclass(frozen=True)
class Query:
    url: str
    steps: tuple[Step, ...]


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


# --- format handling -------------------------------------------------------


def detect_format(filename: str, text: str) -> Format:
    suffix = Path(filename).suffix.lower()
    if suffix in (".json", ".json5"):
        return "json5"
    if suffix in (".yaml", ".yml"):
        return "yaml"
    stripped = text.lstrip()
    if stripped[:1] in ("{", "["):
        return "json5"
    return "yaml"


_JSON5_POS = re.compile(r"<string>:(\d+)\s+(.*?)(?: at column (\d+))?$", re.DOTALL)


def _yaml() -> YAML:
    # pure loader: YAML 1.2 core schema, so ``on``/``yes`` stay strings
    return YAML(typ="safe", pure=True)


def _load_json5(text: str) -> Any:
    try:
        return json5.loads(text, allow_duplicate_keys=False)
    except ValueError as exc:
        msg = str(exc)
        m = _JSON5_POS.match(msg)
        if m:
            col = int(m.group(3)) if m.group(3) else None
            raise QuerySyntaxError(f"invalid JSON5: {m.group(2)}", int(m.group(1)), col) from None
        raise QuerySyntaxError(f"invalid JSON5: {msg}") from None


def _load_yaml(text: str) -> Any:
    try:
        return _yaml().load(text)
    except MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        problem = exc.problem or exc.context or "malformed document"
        if "'@' that cannot start any token" in problem:
            problem += " (quote keys that begin with '@', e.g. \"@url\":)"
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise QuerySyntaxError(f"invalid YAML: {problem}", line, col) from None
    except YAMLError as exc:
        raise QuerySyntaxError(f"invalid YAML: {exc}") from None


def load_document(text: str, format: Format) -> Any:
    if not text or not text.strip():
        raise QuerySyntaxError("query text is empty")
    if format == "json5":
        return _load_json5(text)
    if format == "yaml":
        return _load_yaml(text)
    raise ValueError(f"unknown query format {format!r}")


# --- document <-> model ----------------------------------------------------


class _Builder:
    """Turns a loaded document into model objects, collecting schema problems."""

    def __init__(self) -> None:
        self.problems: list[Violation] = []

    def fail(self, path: str, message: str) -> None:
        self.problems.append(Violation(path, message))

    def mapping(self, value: Any, path: str, allowed: tuple[str, ...]) -> dict | None:
        if not isinstance(value, dict):
            self.fail(path, f"expected an object, got {_type_name(value)}")
            return None
        for key in value:
            if not isinstance(key, str):
                self.fail(path, f"key {key!r} is not a string")
            elif key.startswith("@"):
                if key not in allowed:
                    self.fail(f"{path}.{key}", f"unknown keyword {key!r}")
            else:
                self.fail(f"{path}.{key}", f"unexpected key {key!r} (allowed: {', '.join(allowed)})")
        return value

    def string(self, obj: dict, key: str, path: str, required: bool = True) -> str | None:
        if key not in obj:
            if required:
                self.fail(f"{path}.{key}", f"missing required keyword {key!r}")
            return None
        value = obj[key]
        if not isinstance(value, str):
            self.fail(f"{path}.{key}", f"expected a string, got {_type_name(value)}")
            return None
        return value

    def steps(self, value: Any, path: str) -> tuple[Step, ...]:
        if not isinstance(value, list):
            self.fail(path, f"expected a list of steps, got {_type_name(value)}")
            return ()
        out = []
        for i, raw in enumerate(value):
            step = self.step(raw, f"{path}[{i}]")
            if step is not None:
                out.append(step)
        return tuple(out)

    def step(self, raw: Any, path: str) -> Step | None:
        obj = self.mapping(raw, path, STEP_KEYS)
        if obj is None:
            return None
        xpath = self.string(obj, "@xpath", path)
        name = self.string(obj, "@name", path, required=False)
        fields = None
        if "@fields" in obj:
            fields = self.fields(obj["@fields"], f"{path}.@fields")
        follow = None
        if "@follow" in obj:
            follow = self.follow(obj["@follow"], f"{path}.@follow")
        pagination = None
        if "@pagination" in obj:
            pagination = self.pagination(obj["@pagination"], f"{path}.@pagination")
        return Step(xpath or "", name, fields, follow, pagination)

    def fields(self, value: Any, path: str) -> tuple[tuple[str, str], ...]:
        if not isinstance(value, dict):
            self.fail(path, f"expected an object of field expressions, got {_type_name(value)}")
            return ()
        out = []
        for key, expr in value.items():
            if not isinstance(key, str):
                self.fail(path, f"field name {key!r} is not a string")
                continue
            if key.startswith("@"):
                self.fail(f"{path}.{key}", f"unknown keyword {key!r}")
                continue
            if not isinstance(expr, str):
                self.fail(f"{path}.{key}", f"expected an XPath string, got {_type_name(expr)}")
                continue
            out.append((key, expr))
        return tuple(out)

    def follow(self, value: Any, path: str) -> FollowSpec | None:
        obj = self.mapping(value, path, FOLLOW_KEYS)
        if obj is None:
            return None
        xpath = self.string(obj, "@xpath", path)
        if "@steps" not in obj:
            self.fail(f"{path}.@steps", "missing required keyword '@steps'")
            steps: tuple[Step, ...] = ()
        else:
            steps = self.steps(obj["@steps"], f"{path}.@steps")
        return FollowSpec(xpath or "", steps)

    def pagination(self, value: Any, path: str) -> PaginationSpec | None:
        obj = self.mapping(value, path, PAGINATION_KEYS)
        if obj is None:
            return None
        xpath = self.string(obj, "@xpath", path)
        limit = obj.get("@limit")
        if "@limit" not in obj:
            self.fail(f"{path}.@limit", "missing required keyword '@limit'")
            limit = 1
        elif isinstance(limit, bool) or not isinstance(limit, int):
            self.fail(f"{path}.@limit", f"expected an integer, got {_type_name(limit)}")
            limit = 1
        return PaginationSpec(xpath or "", limit)


def _type_name(value: Any) -> str:
    if value is None:
        return "null"
    return {dict: "object", list: "array", str: "string", bool: "boolean"}.get(
        type(value), type(value).__name__
    )


def from_document(doc: Any) -> Query:
    """Build a :class:`Query` from a loaded document; raises SchemaError."""
    b = _Builder()
    obj = b.mapping(doc, "$", QUERY_KEYS)
    url = ""
    steps: tuple[Step, ...] = ()
    if obj is not None:
        url = b.string(obj, "@url", "$") or ""
        if "@steps" not in obj:
            b.fail("$.@steps", "missing required keyword '@steps'")
        else:
            steps = b.steps(obj["@steps"], "$.@steps")
    if b.problems:
        raise SchemaError(_summary(b.problems), b.problems)
    return Query(url, steps)


def _summary(problems: list[Violation]) -> str:
    lines = [str(p) for p in problems]
    return f"invalid query ({len(lines)} problem{'s' if len(lines) != 1 else ''}):\n  " + "\n  ".join(lines)


def to_document(query: Query) -> dict:
    """The plain-data form of ``query``; inverse of :func:`from_document`."""
    return {"@url": query.url, "@steps": [_step_doc(s) for s in query.steps]}


def _step_doc(step: Step) -> dict:
    doc: dict[str, Any] = {"@xpath": step.xpath}
    if step.name is not None:
        doc["@name"] = step.name
    if step.fields is not None:
        doc["@fields"] = dict(step.fields)
    if step.follow is not None:
        doc["@follow"] = {
            "@xpath": step.follow.xpath,
            "@steps": [_step_doc(s) for s in step.follow.steps],
        }
    if step.pagination is not None:
        doc["@pagination"] = {"@xpath": step.pagination.xpath, "@limit": step.pagination.limit}
    return doc


def dump_query(query: Query, format: Format = "json5") -> str:
    doc = to_document(query)
    if format == "json5":
        return json5.dumps(doc, indent=2, quote_keys=True, trailing_commas=False) + "\n"
    buf = io.StringIO()
    y = _yaml()
    y.default_flow_style = False
    y.sort_base_mapping_type_on_output = False
    y.dump(doc, buf)
    return buf.getvalue()


def parse_query(text: str, format: Format = "json5") -> Query:
    """Parse and validate query text.

    Raises QuerySyntaxError for malformed text and SchemaError when the
    document does not describe a valid query.
    """
    query = from_document(load_document(text, format))
    problems = validate(query)
    if problems:
        raise SchemaError(_summary(problems), problems)
    return query


def load_query(path: str | Path, format: Format | None = None) -> Query:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_query(text, format or detect_format(path.name, text))


# --- validation ------------------------------------------------------------


def _check_url(url: str) -> str | None:
    if not isinstance(url, str) or not url:
        return "URL is empty"
    try:
        parts = urlsplit(url)
    except ValueError as exc:
        return f"malformed URL: {exc}"
    if parts.scheme not in ("http", "https") or not parts.netloc:
        return f"{url!r} is not an absolute http(s) URL"
    return None


def _check_xpath(expr: str, path: str, out: list[Violation], node_selector: bool = False) -> None:
    if not isinstance(expr, str) or not expr.strip():
        out.append(Violation(path, "XPath expression is empty"))
        return
    try:
        compiled = compile_xpath(expr)
    except XPathSyntaxError as exc:
        out.append(Violation(path, f"XPath syntax error: {exc}"))
        return
    except UnsupportedFeature as exc:
        out.append(Violation(path, str(exc)))
        return
    if not compiled.is_path:
        out.append(Violation(path, f"expression {expr!r} is not a location path"))
    elif node_selector and compiled.yields_strings:
        out.append(Violation(path, "element selector may not end in normalize-space()"))


def _validate_steps(steps: tuple[Step, ...], path: str, out: list[Violation]) -> None:
    if not steps:
        out.append(Violation(path, "at least one step is required"))
        return
    seen: dict[str, int] = {}
    for i, step in enumerate(steps):
        at = f"{path}[{i}]"
        _check_xpath(step.xpath, f"{at}.@xpath", out, node_selector=True)
        if step.fields is None and step.follow is None:
            out.append(Violation(at, "step needs '@fields', '@follow' or both"))
        if step.name is not None:
            if not step.name:
                out.append(Violation(f"{at}.@name", "name is empty"))
            elif step.name in seen:
                out.append(
                    Violation(f"{at}.@name", f"duplicate step name {step.name!r} (also at index {seen[step.name]})")
                )
            else:
                seen[step.name] = i
        for fname, expr in step.fields or ():
            if fname.startswith("@"):
                out.append(Violation(f"{at}.@fields.{fname}", "field names may not begin with '@'"))
            _check_xpath(expr, f"{at}.@fields.{fname}", out)
        if step.follow is not None:
            fp = f"{at}.@follow"
            _check_xpath(step.follow.xpath, f"{fp}.@xpath", out)
            _validate_steps(step.follow.steps, f"{fp}.@steps", out)
            taken = set(step.field_names)
            for j, inner in enumerate(step.follow.steps):
                if inner.name is not None and inner.name in taken:
                    out.append(
                        Violation(f"{fp}.@steps[{j}].@name", f"name {inner.name!r} collides with a field of the parent step")
                    )
        if step.pagination is not None:
            pp = f"{at}.@pagination"
            _check_xpath(step.pagination.xpath, f"{pp}.@xpath", out)
            limit = step.pagination.limit
            if isinstance(limit, bool) or not isinstance(limit, int) or limit < 1:
                out.append(Violation(f"{pp}.@limit", f"limit must be a positive integer, got {limit!r}"))


def validate(query: Query) -> list[Violation]:
    """All invariant violations in ``query``; an empty list means valid."""
    out: list[Violation] = []
    problem = _check_url(query.url)
    if problem:
        out.append(Violation("$.@url", problem))
    _validate_steps(query.steps, "$.@steps", out)
    return out


def require_valid(query: Query) -> None:
    problems = validate(query)
    if problems:
        raise InvalidQuery(problems)
