"""Remote-browser backend speaking the W3C WebDriver protocol.

The browser (geckodriver, chromedriver, a Selenium grid...) is launched
separately; this client only needs its endpoint URL.
"""

from __future__ import annotations

import logging
from typing import Any

import httpx

from scrapeql.backends.base import (
    DEFAULT_CONNECT_TIMEOUT,
    DEFAULT_NAVIGATION_TIMEOUT,
    Capabilities,
    FetchBackend,
    Page,
    require_absolute,
)
from scrapeql.errors import BackendClosed, BackendUnavailable, NavigationError, NavigationTimeout

log = logging.getLogger(__name__)


class WebDriverBackend(FetchBackend):
    capabilities = Capabilities(renders_javascript=True)

    def __init__(
        self,
        endpoint: str,
        *,
        headless: bool = True,
        browser_name: str | None = None,
        page_load_timeout: float = DEFAULT_NAVIGATION_TIMEOUT,
        connect_timeout: float = DEFAULT_CONNECT_TIMEOUT,
        extra_capabilities: dict[str, Any] | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.headless = headless
        self.browser_name = browser_name
        self.page_load_timeout = page_load_timeout
        self.extra_capabilities = dict(extra_capabilities or {})
        # leave headroom over the page-load timeout so the driver reports it first
        self._http = httpx.Client(
            timeout=httpx.Timeout(page_load_timeout + 10.0, connect=connect_timeout),
            transport=transport,
        )
        self.session_id: str | None = None
        self._closed = False

    def _capabilities(self) -> dict[str, Any]:
        caps: dict[str, Any] = {
            "pageLoadStrategy": "normal",
            "timeouts": {"pageLoad": int(self.page_load_timeout * 1000)},
        }
        if self.browser_name:
            caps["browserName"] = self.browser_name
        if self.headless:
            caps["moz:firefoxOptions"] = {"args": ["-headless"]}
            caps["goog:chromeOptions"] = {"args": ["--headless=new"]}
        caps.update(self.extra_capabilities)
        return {"capabilities": {"alwaysMatch": caps, "firstMatch": [{}]}}

    def _command(self, method: str, path: str, payload: dict | None = None) -> Any:
        url = self.endpoint + path
        try:
            resp = self._http.request(method, url, json=payload)
        except httpx.TimeoutException as exc:
            raise NavigationTimeout(f"WebDriver endpoint timed out on {method} {path}") from exc
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"WebDriver endpoint {self.endpoint} unreachable: {exc!r}") from exc
        try:
            body = resp.json()
        except ValueError:
            raise NavigationError(f"WebDriver returned non-JSON response ({resp.status_code}) for {method} {path}")
        value = body.get("value") if isinstance(body, dict) else None
        if resp.status_code >= 400 or (isinstance(value, dict) and "error" in value):
            error = value.get("error", "unknown error") if isinstance(value, dict) else "unknown error"
            message = value.get("message", "") if isinstance(value, dict) else ""
            if error == "timeout":
                raise NavigationTimeout(f"page load timed out: {message}")
            if error == "session not created":
                raise BackendUnavailable(f"WebDriver could not create a session: {message}")
            raise NavigationError(f"WebDriver error {error!r}: {message}")
        return value

    def _ensure_session(self) -> str:
        if self.session_id is None:
            value = self._command("POST", "/session", self._capabilities())
            if not isinstance(value, dict) or "sessionId" not in value:
                raise BackendUnavailable("WebDriver did not return a session id")
            self.session_id = value["sessionId"]
            log.info("webdriver session %s started at %s", self.session_id, self.endpoint)
        return self.session_id

    def navigate(self, url: str) -> Page:
        if self._closed:
            raise BackendClosed()
        require_absolute(url)
        sid = self._ensure_session()
        # Navigate To returns once the document reached the load state
        self._command("POST", f"/session/{sid}/url", {"url": url})
        source = self._command("GET", f"/session/{sid}/source")
        final_url = self._command("GET", f"/session/{sid}/url") or url
        if not isinstance(source, str):
            raise NavigationError("WebDriver returned no page source")
        return Page(final_url, source.encode("utf-8"), 200, "utf-8")

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        if self.session_id is not None:
            try:
                self._command("DELETE", f"/session/{self.session_id}")
            except NavigationError as exc:
                log.warning("could not end webdriver session %s: %s", self.session_id, exc)
            self.session_id = None
        self._http.close()
