"""Runs a validated query against a fetch backend and assembles the records."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Any, Iterator
from urllib.parse import urldefrag, urljoin, urlsplit

from scrapeql.backends.base import FetchBackend
from scrapeql.errors import MalformedUrl, NavigationError
from scrapeql.html import Document, Node, string_value
from scrapeql.query import FollowSpec, Query, Step, require_valid
from scrapeql.shape import ITEMS_KEY
from scrapeql.xpath import evaluate, extract_value, select

log = logging.getLogger(__name__)

Record = dict[str, Any]


@dataclass(frozen=True)
class ExecutionOptions:
    max_follow_depth: int = 5
    max_pages_per_step: int = 100
    politeness_delay: float = 0.0

    def __post_init__(self):
        if self.max_follow_depth < 1:
            raise ValueError("max_follow_depth must be positive")
        if self.max_pages_per_step < 1:
            raise ValueError("max_pages_per_step must be positive")
        if self.politeness_delay < 0:
            raise ValueError("politeness_delay must be >= 0")


def resolve_url(base: str, href: str) -> str:
    """Resolve ``href`` against the absolute ``base`` URL (RFC 3986 rules)."""
    base_parts = urlsplit(base)
    if base_parts.scheme not in ("http", "https") or not base_parts.netloc:
        raise MalformedUrl(f"base URL {base!r} is not absolute")
    href = href.strip()
    if not href:
        raise MalformedUrl("empty link")
    try:
        url = urljoin(base, href)
        parts = urlsplit(url)
    except ValueError as exc:
        raise MalformedUrl(f"cannot resolve {href!r}: {exc}") from None
    if parts.scheme not in ("http", "https") or not parts.hostname:
        raise MalformedUrl(f"link {href!r} does not resolve to an http(s) URL")
    return url


def _first_url(context: Node, expr: str) -> str | None:
    for item in evaluate(context, expr):
        value = item if isinstance(item, str) else string_value(item)
        value = value.strip()
        if value:
            return value
    return None


class Executor:
    """One query execution over one backend. Navigations are strictly sequential."""

    def __init__(self, backend: FetchBackend, options: ExecutionOptions | None = None):
        self.backend = backend
        self.options = options or ExecutionOptions()
        self.navigations = 0
        self._last_nav: float | None = None

    def navigate(self, url: str) -> Document:
        delay = self.options.politeness_delay
        if delay and self._last_nav is not None:
            wait = self._last_nav + delay - time.monotonic()
            if wait > 0:
                time.sleep(wait)
        try:
            page = self.backend.navigate(url)
        finally:
            self._last_nav = time.monotonic()
        self.navigations += 1
        log.info("navigate url=%s status=%d bytes=%d", page.final_url, page.status, len(page.body))
        return page.parse()

    def run(self, query: Query) -> list[Record]:
        require_valid(query)
        doc = self.navigate(query.url)
        records: list[Record] = []
        for step in query.steps:
            records.extend(self.execute_step(step, doc, 0))
        log.info("done records=%d navigations=%d", len(records), self.navigations)
        return records

    def execute_step(self, step: Step, context: Node, depth: int) -> list[Record]:
        if step.pagination is None:
            return self._records(step, context, depth)
        records: list[Record] = []
        for page_doc in self.paginate(step, context.document):
            ctx = context if page_doc is context.document else page_doc
            records.extend(self._records(step, ctx, depth))
        return records

    def _records(self, step: Step, context: Node, depth: int) -> list[Record]:
        elements = select(context, step.xpath)
        log.debug("step xpath=%s matches=%d depth=%d", step.xpath, len(elements), depth)
        out = []
        for el in elements:
            record: Record = {}
            for name, expr in step.fields or ():
                record[name] = extract_value(el, expr)
            if step.follow is not None:
                self.follow(step.follow, el, record, depth)
            out.append(record)
        return out

    def follow(self, spec: FollowSpec, element: Node, parent: Record, depth: int) -> Record:
        if depth >= self.options.max_follow_depth:
            log.warning("follow skipped: depth %d reached max_follow_depth=%d", depth, self.options.max_follow_depth)
            return self._empty_follow(spec, parent)
        href = _first_url(element, spec.xpath)
        if href is None:
            log.debug("follow xpath=%s produced no URL", spec.xpath)
            return self._empty_follow(spec, parent)
        try:
            url = resolve_url(element.document.base_url, href)
            doc = self.navigate(url)
        except NavigationError as exc:
            log.warning("follow failed url=%s: %s", href, exc)
            return self._empty_follow(spec, parent)
        for inner in spec.steps:
            records = self.execute_step(inner, doc, depth + 1)
            if inner.name is not None:
                parent[inner.name] = records
            elif len(records) == 1:
                for key, value in records[0].items():
                    parent.setdefault(key, value)
            else:
                parent.setdefault(ITEMS_KEY, []).extend(records)
        return parent

    @staticmethod
    def _empty_follow(spec: FollowSpec, parent: Record) -> Record:
        for inner in spec.steps:
            if inner.name is not None:
                parent[inner.name] = []
        return parent

    def paginate(self, step: Step, first: Document) -> Iterator[Document]:
        """Yield ``first`` and then each next page, within limit and cycle bounds."""
        assert step.pagination is not None
        limit = min(step.pagination.limit, self.options.max_pages_per_step)
        visited = {urldefrag(first.url).url}
        current = first
        yield current
        count = 1
        while count < limit:
            href = _first_url(current, step.pagination.xpath)
            if href is None:
                log.debug("pagination ended after %d page(s): no next link", count)
                return
            try:
                url = resolve_url(current.base_url, href)
            except MalformedUrl as exc:
                log.warning("pagination stopped: %s", exc)
                return
            if urldefrag(url).url in visited:
                log.info("pagination stopped: %s was already visited", url)
                return
            try:
                current = self.navigate(url)
            except NavigationError as exc:
                log.warning("pagination stopped at %s: %s", url, exc)
                return
            visited.add(urldefrag(url).url)
            visited.add(urldefrag(current.url).url)
            count += 1
            yield current


def execute(query: Query, backend: FetchBackend, options: ExecutionOptions | None = None) -> list[Record]:
    """Execute ``query`` and return its records in encounter order."""
    return Executor(backend, options).run(query)
