"""Evaluator for the XPath subset used in queries.

Supported: the child, descendant-or-self, self, parent and attribute axes
(abbreviated or spelled out), name / ``*`` / ``text()`` / ``node()`` tests,
predicates built from integer positions, ``=``/``!=`` comparisons, ``and``,
``or``, ``not()``, ``contains()`` and ``normalize-space()``.  A trailing
``/normalize-space()`` step turns a path into a sequence of normalized
strings, one per selected node.

Everything else raises :class:`UnsupportedFeature` at compile time, so a
query using it is rejected before any page is fetched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

from scrapeql.errors import UnsupportedFeature, XPathSyntaxError
from scrapeql.html import Attribute, Document, Element, Node, Text, _Container, string_value

__all__ = [
    "CompiledPath",
    "compile_xpath",
    "select",
    "extract_value",
    "normalize_space",
    "ExtractedValue",
]

ExtractedValue = Union[str, list, None]

_AXES = {
    "child": "child",
    "descendant-or-self": "descendant-or-self",
    "self": "self",
    "parent": "parent",
    "attribute": "attribute",
}
_OTHER_AXES = {
    "ancestor",
    "ancestor-or-self",
    "descendant",
    "following",
    "following-sibling",
    "namespace",
    "preceding",
    "preceding-sibling",
}
_FUNCTIONS = {"contains": 2, "normalize-space": (0, 1), "not": 1}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>"[^"]*"|'[^']*')
  | (?P<number>\d+(?:\.\d*)?|\.\d+)
  | (?P<op>//|::|\.\.|!=|<=|>=|[/()\[\]@,=|*.<>+\-$])
  | (?P<name>[A-Za-z_][\w\-]*(?:\.[\w\-]+)*(?::[A-Za-z_][\w\-.]*)?)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    value: str
    pos: int


def _tokenize(expr: str) -> list[_Tok]:
    out = []
    pos = 0
    while pos < len(expr):
        m = _TOKEN.match(expr, pos)
        if not m:
            raise XPathSyntaxError(f"unexpected character {expr[pos]!r}", expr, pos)
        kind = m.lastgroup
        if kind != "ws":
            out.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    out.append(_Tok("end", "", len(expr)))
    return out


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Step:
    axis: str
    test: str  # element name, "*", "text()", "node()"
    predicates: tuple = ()


@dataclass(frozen=True)
class Path:
    absolute: bool
    steps: tuple[Step, ...]


@dataclass(frozen=True)
class Literal:
    value: str


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


_ANY_NODE = Step("descendant-or-self", "node()")


class _Parser:
    def __init__(self, expr: str):
        self.expr = expr
        self.toks = _tokenize(expr)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str) -> _Tok:
        if self.tok.value != value or self.tok.kind in ("string", "end"):
            found = self.tok.value or "end of expression"
            raise XPathSyntaxError(f"expected {value!r}, found {found!r}", self.expr, self.tok.pos)
        return self.advance()

    def unsupported(self, construct: str):
        raise UnsupportedFeature(construct, self.expr)

    # grammar --------------------------------------------------------------

    def parse(self):
        node = self.or_expr()
        if self.tok.kind != "end":
            self._reject_operator()
            raise XPathSyntaxError(f"unexpected {self.tok.value!r}", self.expr, self.tok.pos)
        return node

    def _reject_operator(self):
        tok = self.tok
        if tok.kind == "op" and tok.value in ("|", "<", ">", "<=", ">=", "+", "-", "*", "$"):
            self.unsupported(tok.value)
        if tok.kind == "name" and tok.value in ("div", "mod"):
            self.unsupported(tok.value)

    def or_expr(self):
        left = self.and_expr()
        while self.tok.kind == "name" and self.tok.value == "or":
            self.advance()
            left = BinOp("or", left, self.and_expr())
        return left

    def and_expr(self):
        left = self.eq_expr()
        while self.tok.kind == "name" and self.tok.value == "and":
            self.advance()
            left = BinOp("and", left, self.eq_expr())
        return left

    def eq_expr(self):
        left = self.primary()
        if self.tok.kind == "op" and self.tok.value in ("=", "!="):
            op = self.advance().value
            right = self.primary()
            if self.tok.kind == "op" and self.tok.value in ("=", "!="):
                self.unsupported("chained comparison")
            return BinOp(op, left, right)
        self._reject_operator()
        return left

    def primary(self):
        tok = self.tok
        if tok.kind == "string":
            self.advance()
            return Literal(tok.value[1:-1])
        if tok.kind == "number":
            self.advance()
            return Number(float(tok.value))
        if tok.kind == "op" and tok.value == "(":
            self.advance()
            inner = self.or_expr()
            self.expect(")")
            if self.tok.value in ("[", "/", "//") and self.tok.kind == "op":
                self.unsupported("filter expression")
            return inner
        if tok.kind == "op" and tok.value == "$":
            self.unsupported("variable reference")
        if tok.kind == "op" and tok.value == "-":
            self.unsupported("unary minus")
        if tok.kind == "name" and self.peek().value == "(" and tok.value not in ("text", "node"):
            return self.function_call()
        return self.path()

    def function_call(self):
        name = self.advance().value
        if name in ("comment", "processing-instruction"):
            self.unsupported(f"{name}()")
        if name not in _FUNCTIONS:
            self.unsupported(f"{name}()")
        self.expect("(")
        args = []
        if not (self.tok.kind == "op" and self.tok.value == ")"):
            args.append(self.or_expr())
            while self.tok.kind == "op" and self.tok.value == ",":
                self.advance()
                args.append(self.or_expr())
        self.expect(")")
        arity = _FUNCTIONS[name]
        allowed = arity if isinstance(arity, tuple) else (arity,)
        if len(args) not in allowed:
            raise XPathSyntaxError(f"{name}() takes {arity} argument(s), got {len(args)}", self.expr)
        if self.tok.kind == "op" and self.tok.value in ("/", "//", "["):
            self.unsupported(f"path step after {name}()")
        return Call(name, tuple(args))

    def path(self):
        absolute = False
        steps: list[Step] = []
        tok = self.tok
        if tok.kind == "op" and tok.value == "/":
            self.advance()
            absolute = True
            if not self._starts_step():
                return Path(True, ())
        elif tok.kind == "op" and tok.value == "//":
            self.advance()
            absolute = True
            steps.append(_ANY_NODE)
        steps.append(self.step())
        while self.tok.kind == "op" and self.tok.value in ("/", "//"):
            if self.advance().value == "//":
                steps.append(_ANY_NODE)
            if self._trailing_normalize():
                steps.append(Step("value", "normalize-space()"))
                break
            steps.append(self.step())
        return Path(absolute, tuple(steps))

    def _trailing_normalize(self) -> bool:
        if not (self.tok.kind == "name" and self.tok.value == "normalize-space"):
            return False
        if self.peek().value != "(" or self.peek(2).value != ")":
            self.unsupported("normalize-space() step with arguments")
        self.i += 3
        if self.tok.kind != "end" and not (self.tok.kind == "op" and self.tok.value in (")", "]", ",")):
            self.unsupported("path step after normalize-space()")
        return True

    def _starts_step(self) -> bool:
        tok = self.tok
        return tok.kind == "name" or (tok.kind == "op" and tok.value in (".", "..", "@", "*"))

    def step(self) -> Step:
        tok = self.tok
        if tok.kind == "op" and tok.value == ".":
            self.advance()
            self._no_predicates(".")
            return Step("self", "node()")
        if tok.kind == "op" and tok.value == "..":
            self.advance()
            self._no_predicates("..")
            return Step("parent", "node()")
        axis = "child"
        if tok.kind == "op" and tok.value == "@":
            self.advance()
            axis = "attribute"
        elif tok.kind == "name" and self.peek().value == "::":
            name = tok.value
            if name in _OTHER_AXES:
                self.unsupported(f"{name}::")
            if name not in _AXES:
                raise XPathSyntaxError(f"unknown axis {name!r}", self.expr, tok.pos)
            axis = _AXES[name]
            self.i += 2
        test = self.node_test(axis)
        preds = []
        while self.tok.kind == "op" and self.tok.value == "[":
            self.advance()
            preds.append(self.or_expr())
            self.expect("]")
        return Step(axis, test, tuple(preds))

    def _no_predicates(self, what: str):
        if self.tok.kind == "op" and self.tok.value == "[":
            self.unsupported(f"predicate on {what!r}")

    def node_test(self, axis: str) -> str:
        tok = self.tok
        if tok.kind == "op" and tok.value == "*":
            self.advance()
            return "*"
        if tok.kind != "name":
            found = tok.value or "end of expression"
            raise XPathSyntaxError(f"expected a node test, found {found!r}", self.expr, tok.pos)
        if self.peek().value == "(":
            if tok.value in ("text", "node"):
                self.i += 1
                self.expect("(")
                self.expect(")")
                if axis == "attribute" and tok.value == "text":
                    return "never"
                return f"{tok.value}()"
            if tok.value == "normalize-space":
                self.unsupported("normalize-space() in the middle of a path")
            self.unsupported(f"{tok.value}()")
        if ":" in tok.value:
            self.unsupported("namespace prefix")
        self.advance()
        return tok.value


@dataclass(frozen=True)
class CompiledPath:
    """A parsed expression ready for evaluation."""

    source: str
    tree: object

    @property
    def yields_strings(self) -> bool:
        """True when the expression ends in a ``normalize-space()`` step."""
        return isinstance(self.tree, Path) and bool(self.tree.steps) and self.tree.steps[-1].axis == "value"

    @property
    def is_path(self) -> bool:
        return isinstance(self.tree, Path)


@lru_cache(maxsize=1024)
def compile_xpath(expr: str) -> CompiledPath:
    if not expr or not expr.strip():
        raise XPathSyntaxError("empty expression", expr or "")
    return CompiledPath(expr, _Parser(expr).parse())


# --- evaluation ------------------------------------------------------------


_XML_SPACE = re.compile(r"[ \t\r\n]+")


def normalize_space(s: str) -> str:
    # XPath 1.0 whitespace is exactly these four characters
    return " ".join(filter(None, _XML_SPACE.split(s)))


def _axis(node: Node, axis: str):
    if axis == "child":
        return node.children if isinstance(node, _Container) else ()
    if axis == "attribute":
        return node.attributes if isinstance(node, Element) else ()
    if axis == "self":
        return (node,)
    if axis == "parent":
        return (node.parent,) if node.parent is not None else ()
    if axis == "descendant-or-self":
        if isinstance(node, _Container):
            return [node, *node.iter_descendants()]
        return (node,)
    raise AssertionError(axis)


def _matches(node: Node, axis: str, test: str) -> bool:
    if test == "node()":
        return True
    if test == "text()":
        return isinstance(node, Text)
    if test == "never":
        return False
    principal = Attribute if axis == "attribute" else Element
    if not isinstance(node, principal):
        return False
    if test == "*":
        return True
    return (node.name if axis == "attribute" else node.tag) == test


def _doc_order(nodes) -> list[Node]:
    seen = {}
    for n in nodes:
        seen[id(n)] = n
    return sorted(seen.values(), key=lambda n: n.order)


def _eval_path(path: Path, context: Node, expr: str) -> list:
    if path.absolute:
        current: list = [context.document]
    else:
        current = [context]
    for step in path.steps:
        if step.axis == "value":
            return [normalize_space(string_value(n)) for n in current]
        out = []
        single = len(current) == 1
        for ctx in current:
            candidates = [n for n in _axis(ctx, step.axis) if _matches(n, step.axis, step.test)]
            for pred in step.predicates:
                candidates = _filter(candidates, pred, expr)
            out.extend(candidates)
        if single:
            # every supported axis yields document order from a single context
            current = out
        else:
            current = _doc_order(out)
    return current


def _filter(nodes: list, pred, expr: str) -> list:
    size = len(nodes)
    kept = []
    for pos, node in enumerate(nodes, 1):
        value = _eval(pred, node, pos, size, expr)
        if isinstance(value, float):
            if value == pos:
                kept.append(node)
        elif _boolean(value):
            kept.append(node)
    return kept


def _string(value) -> str:
    if isinstance(value, list):
        return string_value(value[0]) if value else ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if value != value:
            return "NaN"
        if value == int(value):
            return str(int(value))
        return repr(value)
    return value


def _number(value) -> float:
    if isinstance(value, float):
        return value
    if isinstance(value, bool):
        return 1.0 if value else 0.0
    s = _string(value).strip()
    try:
        return float(s) if re.fullmatch(r"\d+(\.\d*)?|\.\d+", s) else float("nan")
    except ValueError:
        return float("nan")


def _boolean(value) -> bool:
    if isinstance(value, list):
        return bool(value)
    if isinstance(value, float):
        return value != 0 and value == value
    if isinstance(value, str):
        return bool(value)
    return value


def _compare(op: str, left, right) -> bool:
    eq = op == "="
    if isinstance(left, list) and isinstance(right, list):
        rs = {string_value(n) for n in right}
        if eq:
            return any(string_value(n) in rs for n in left)
        return any(string_value(a) != b for a in left for b in rs)
    if isinstance(right, list):
        left, right = right, left
    if isinstance(left, list):
        if isinstance(right, bool):
            return (bool(left) == right) == eq
        if isinstance(right, float):
            return any((_number(string_value(n)) == right) == eq for n in left)
        return any((string_value(n) == right) == eq for n in left)
    if isinstance(left, bool) or isinstance(right, bool):
        return (_boolean(left) == _boolean(right)) == eq
    if isinstance(left, float) or isinstance(right, float):
        return (_number(left) == _number(right)) == eq
    return (left == right) == eq


def _eval(node, context: Node, pos: int, size: int, expr: str):
    if isinstance(node, Literal):
        return node.value
    if isinstance(node, Number):
        return node.value
    if isinstance(node, Path):
        result = _eval_path(node, context, expr)
        if node.steps and node.steps[-1].axis == "value":
            # normalize-space() step inside a predicate: compare as strings
            return result[0] if result else ""
        return result
    if isinstance(node, BinOp):
        if node.op == "and":
            return _boolean(_eval(node.left, context, pos, size, expr)) and _boolean(
                _eval(node.right, context, pos, size, expr)
            )
        if node.op == "or":
            return _boolean(_eval(node.left, context, pos, size, expr)) or _boolean(
                _eval(node.right, context, pos, size, expr)
            )
        return _compare(
            node.op,
            _eval(node.left, context, pos, size, expr),
            _eval(node.right, context, pos, size, expr),
        )
    if isinstance(node, Call):
        args = [_eval(a, context, pos, size, expr) for a in node.args]
        if node.name == "contains":
            return _string(args[1]) in _string(args[0])
        if node.name == "normalize-space":
            return normalize_space(_string(args[0]) if args else string_value(context))
        if node.name == "not":
            return not _boolean(args[0])
    raise AssertionError(node)


def _compile_path(expr: str) -> CompiledPath:
    compiled = compile_xpath(expr)
    if not compiled.is_path:
        raise UnsupportedFeature("non-path expression", expr)
    return compiled


def select(context: Node, expr: str) -> list[Node]:
    """Nodes matched by ``expr`` from ``context``, in document order."""
    compiled = _compile_path(expr)
    if compiled.yields_strings:
        raise UnsupportedFeature("normalize-space() step in a node selector", expr)
    return _eval_path(compiled.tree, context, expr)


def evaluate(context: Node, expr: str) -> list:
    """Nodes or normalized strings produced by a path expression."""
    compiled = _compile_path(expr)
    return _eval_path(compiled.tree, context, expr)


def collapse(values: list[str]) -> ExtractedValue:
    if not values:
        return None
    if len(values) == 1:
        return values[0]
    return list(values)


def extract_value(context: Node, expr: str) -> ExtractedValue:
    """String value(s) of ``expr``: None for no match, a string for one, a list for more."""
    items = evaluate(context, expr)
    return collapse([v if isinstance(v, str) else string_value(v) for v in items])
