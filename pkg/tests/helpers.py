"""Test doubles and query-text helpers."""

from __future__ import annotations

from pathlib import Path

from scrapeql.backends.base import FetchBackend, Page
from scrapeql.errors import BackendClosed, HttpError

from tests.conftest import QUERIES


class MemoryBackend(FetchBackend):
    """Serves pages from a dict; records every navigation."""

    def __init__(self, pages: dict[str, str | bytes]):
        self.pages = pages
        self.visits: list[str] = []
        self.closed = False

    def navigate(self, url: str) -> Page:
        if self.closed:
            raise BackendClosed()
        self.visits.append(url)
        if url not in self.pages:
            raise HttpError(404, url)
        body = self.pages[url]
        if isinstance(body, str):
            body = body.encode("utf-8")
        return Page(url, body, 200, "utf-8")

    def close(self) -> None:
        self.closed = True


def listing_text(name: str) -> str:
    return (QUERIES / name).read_text(encoding="utf-8")


def rebased(name: str, origin: str, new_origin: str) -> str:
    """Query text with the live site origin swapped for a fixture server."""
    text = listing_text(name)
    assert origin in text
    return text.replace(origin, new_origin)


def write_rebased(tmp_path: Path, name: str, origin: str, new_origin: str) -> Path:
    path = tmp_path / name
    path.write_text(rebased(name, origin, new_origin), encoding="utf-8")
    return path
