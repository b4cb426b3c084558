from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from urllib.parse import urlsplit

from scrapeql import __version__
from scrapeql.errors import MalformedUrl
from scrapeql.html import Document, parse_html

DEFAULT_USER_AGENT = f"scrapeql/{__version__} (+declarative extraction engine)"
DEFAULT_NAVIGATION_TIMEOUT = 30.0
DEFAULT_CONNECT_TIMEOUT = 10.0
DEFAULT_MAX_REDIRECTS = 5


@dataclass(frozen=True)
class Capabilities:
    renders_javascript: bool


@dataclass(frozen=True)
class Page:
    final_url: str
    body: bytes
    status: int = 200
    charset: str | None = None

    def __post_init__(self):
        if not 100 <= self.status <= 599:
            raise ValueError(f"status {self.status} outside 100-599")
        require_absolute(self.final_url)

    def parse(self) -> Document:
        return parse_html(self.body, self.final_url, self.charset)


def require_absolute(url: str) -> str:
    try:
        parts = urlsplit(url)
    except ValueError as exc:
        raise MalformedUrl(f"malformed URL {url!r}: {exc}") from None
    if parts.scheme not in ("http", "https") or not parts.hostname:
        raise MalformedUrl(f"not an absolute http(s) URL: {url!r}")
    return url


class FetchBackend(ABC):
    """Navigation contract shared by all backends.

    One instance serves one execution at a time; ``navigate`` calls are
    sequential. After :meth:`close`, ``navigate`` raises BackendClosed and
    further ``close`` calls do nothing.
    """

    capabilities = Capabilities(renders_javascript=False)

    @abstractmethod
    def navigate(self, url: str) -> Page:
        """Fetch ``url`` and return the resulting page."""

    @abstractmethod
    def close(self) -> None:
        """Release connections or browser sessions."""

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
