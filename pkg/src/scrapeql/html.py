"""HTML document model used by the XPath evaluator.

Parsing is delegated to lexbor (through selectolax), which implements the
HTML5 tree-construction algorithm; the result is copied into a small node
tree that carries document order and parent links, which is all XPath needs.
"""

from __future__ import annotations

import codecs
import re
from typing import Iterator
from urllib.parse import urljoin

from selectolax.lexbor import LexborHTMLParser

__all__ = [
    "Node",
    "Document",
    "Element",
    "Text",
    "Attribute",
    "parse_html",
    "string_value",
    "resolve_charset",
]


class Node:
    __slots__ = ("parent", "order")

    def __init__(self) -> None:
        self.parent: Node | None = None
        self.order = 0

    @property
    def document(self) -> Document:
        node = self
        while node.parent is not None:
            node = node.parent
        assert isinstance(node, Document)
        return node


class _Container(Node):
    __slots__ = ("children",)

    def __init__(self) -> None:
        super().__init__()
        self.children: list[Node] = []

    def iter_descendants(self) -> Iterator[Node]:
        """Yield descendants (not attributes) in document order."""
        stack = list(reversed(self.children))
        while stack:
            node = stack.pop()
            yield node
            if isinstance(node, _Container):
                stack.extend(reversed(node.children))


class Document(_Container):
    __slots__ = ("base_url", "url")

    def __init__(self, url: str) -> None:
        super().__init__()
        self.url = url
        self.base_url = url

    @property
    def root(self) -> Element | None:
        for child in self.children:
            if isinstance(child, Element):
                return child
        return None

    def __repr__(self) -> str:
        return f"<Document {self.url}>"


class Element(_Container):
    __slots__ = ("tag", "attributes")

    def __init__(self, tag: str) -> None:
        super().__init__()
        self.tag = tag
        self.attributes: list[Attribute] = []

    def get(self, name: str, default: str | None = None) -> str | None:
        for attr in self.attributes:
            if attr.name == name:
                return attr.value
        return default

    def __repr__(self) -> str:
        return f"<Element {self.tag} #{self.order}>"


class Text(Node):
    __slots__ = ("value",)

    def __init__(self, value: str) -> None:
        super().__init__()
        self.value = value

    def __repr__(self) -> str:
        return f"<Text {self.value[:20]!r} #{self.order}>"


class Attribute(Node):
    __slots__ = ("name", "value")

    def __init__(self, name: str, value: str) -> None:
        super().__init__()
        self.name = name
        self.value = value

    def __repr__(self) -> str:
        return f"<Attribute {self.name}={self.value!r} #{self.order}>"


def string_value(node: Node) -> str:
    if isinstance(node, (Text, Attribute)):
        return node.value
    assert isinstance(node, _Container)
    return "".join(n.value for n in node.iter_descendants() if isinstance(n, Text))


_BOMS = (
    (codecs.BOM_UTF8, "utf-8"),
    (codecs.BOM_UTF16_LE, "utf-16-le"),
    (codecs.BOM_UTF16_BE, "utf-16-be"),
)
_META_CHARSET = re.compile(
    rb"""<meta[^>]+charset\s*=\s*["']?\s*([A-Za-z0-9_\-:.]+)""", re.IGNORECASE
)


def _codec(name: str | None) -> str | None:
    if not name:
        return None
    try:
        return codecs.lookup(name.strip()).name
    except LookupError:
        return None


def resolve_charset(data: bytes, declared: str | None = None) -> tuple[str, int]:
    """Pick a decoder for ``data``: BOM, then declared charset, then <meta>, then UTF-8.

    Returns the codec name and the number of leading bytes to skip.
    """
    for bom, name in _BOMS:
        if data.startswith(bom):
            return name, len(bom)
    codec = _codec(declared)
    if codec:
        return codec, 0
    match = _META_CHARSET.search(data[:1024])
    if match:
        codec = _codec(match.group(1).decode("ascii", "replace"))
        if codec:
            return codec, 0
    return "utf-8", 0


def _decode(data: bytes | str, charset: str | None) -> str:
    if isinstance(data, str):
        return data
    codec, skip = resolve_charset(data, charset)
    return data[skip:].decode(codec, errors="replace")


def parse_html(data: bytes | str, base_url: str, charset: str | None = None) -> Document:
    """Parse HTML leniently into a :class:`Document`.

    Never fails on malformed markup; the HTML5 error-recovery rules decide
    the tree shape. Comments, doctypes and processing instructions are
    dropped, adjacent text runs are merged.
    """
    parser = LexborHTMLParser(_decode(data, charset))
    doc = Document(base_url)
    order = 1
    top = parser.root
    if top is None:
        return doc

    # (lexbor node, destination container) pairs, children pushed reversed
    stack = [(top, doc)]
    while stack:
        src, dest = stack.pop()
        tag = src.tag
        if tag == "-text":
            value = src.text_content or ""
            prev = dest.children[-1] if dest.children else None
            if isinstance(prev, Text):
                prev.value += value
                continue
            node: Node = Text(value)
            node.parent = dest
            node.order = order
            order += 1
            dest.children.append(node)
            continue
        if tag.startswith("-"):
            continue
        el = Element(tag)
        el.parent = dest
        el.order = order
        order += 1
        for name, value in src.attributes.items():
            attr = Attribute(name, value if value is not None else "")
            attr.parent = el
            attr.order = order
            order += 1
            el.attributes.append(attr)
        dest.children.append(el)
        kids = list(src.iter(include_text=True))
        for kid in reversed(kids):
            stack.append((kid, el))

    base = _base_href(doc)
    if base:
        doc.base_url = urljoin(base_url, base)
    return doc


def _base_href(doc: Document) -> str | None:
    root = doc.root
    if root is None:
        return None
    for head in root.children:
        if isinstance(head, Element) and head.tag == "head":
            for child in head.children:
                if isinstance(child, Element) and child.tag == "base":
                    href = child.get("href")
                    if href:
                        return href.strip()
    return None
