"""Fetch backends and the local fixture site used by tests and benchmarks."""

from scrapeql.backends.base import Capabilities, FetchBackend, Page
from scrapeql.backends.browser import WebDriverBackend
from scrapeql.backends.http import HttpBackend

__all__ = ["Capabilities", "FetchBackend", "Page", "HttpBackend", "WebDriverBackend"]
