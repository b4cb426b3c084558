"""Static HTTP backend: plain GET requests, no script execution."""

from __future__ import annotations

import logging

import httpx

from scrapeql.backends.base import (
    DEFAULT_CONNECT_TIMEOUT,
    DEFAULT_MAX_REDIRECTS,
    DEFAULT_NAVIGATION_TIMEOUT,
    DEFAULT_USER_AGENT,
    Capabilities,
    FetchBackend,
    Page,
    require_absolute,
)
from scrapeql.errors import BackendClosed, HttpError, NetworkError

log = logging.getLogger(__name__)


class HttpBackend(FetchBackend):
    capabilities = Capabilities(renders_javascript=False)

    def __init__(
        self,
        *,
        timeout: float = DEFAULT_NAVIGATION_TIMEOUT,
        connect_timeout: float = DEFAULT_CONNECT_TIMEOUT,
        max_redirects: int = DEFAULT_MAX_REDIRECTS,
        user_agent: str = DEFAULT_USER_AGENT,
        transport: httpx.BaseTransport | None = None,
    ):
        self._client: httpx.Client | None = httpx.Client(
            follow_redirects=True,
            max_redirects=max_redirects,
            timeout=httpx.Timeout(timeout, connect=connect_timeout),
            headers={"User-Agent": user_agent, "Accept-Encoding": "gzip, deflate"},
            transport=transport,
        )

    @property
    def closed(self) -> bool:
        return self._client is None

    def navigate(self, url: str) -> Page:
        if self._client is None:
            raise BackendClosed()
        require_absolute(url)
        try:
            resp = self._client.get(url)
        except httpx.TooManyRedirects as exc:
            raise NetworkError(f"too many redirects fetching {url}: {exc}") from exc
        except httpx.TimeoutException as exc:
            raise NetworkError(f"timed out fetching {url}: {exc!r}") from exc
        except httpx.HTTPError as exc:
            raise NetworkError(f"cannot fetch {url}: {exc!r}") from exc
        if resp.status_code >= 400:
            raise HttpError(resp.status_code, str(resp.url))
        log.debug("GET %s -> %s (%d bytes)", url, resp.status_code, len(resp.content))
        return Page(str(resp.url), resp.content, resp.status_code, resp.charset_encoding)

    def close(self) -> None:
        if self._client is not None:
            self._client.close()
            self._client = None
