"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class ScrapeQLError(Exception):
    pass


# --- query loading ---------------------------------------------------------


class QuerySyntaxError(ScrapeQLError):
    """Malformed JSON5 or YAML text."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class SchemaError(ScrapeQLError):
    """The document parsed but does not describe a valid query."""

    def __init__(self, message: str, violations=()):
        self.violations = list(violations)
        super().__init__(message)


class InvalidQuery(ScrapeQLError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


# --- xpath -----------------------------------------------------------------


class XPathSyntaxError(ScrapeQLError):
    def __init__(self, message: str, expr: str, position: int | None = None):
        self.expr = expr
        self.position = position
        suffix = f" at offset {position}" if position is not None else ""
        super().__init__(f"{message}{suffix} in {expr!r}")


class UnsupportedFeature(ScrapeQLError):
    def __init__(self, construct: str, expr: str):
        self.construct = construct
        self.expr = expr
        super().__init__(f"unsupported XPath construct {construct!r} in {expr!r}")


# --- navigation ------------------------------------------------------------


class NavigationError(ScrapeQLError):
    """Base for anything that prevents a page from being fetched."""


class NetworkError(NavigationError):
    pass


class HttpError(NavigationError):
    def __init__(self, status: int, url: str):
        self.status = status
        self.url = url
        super().__init__(f"HTTP {status} for {url}")


class BackendClosed(NavigationError):
    def __init__(self):
        super().__init__("backend is closed")


class BackendUnavailable(NavigationError):
    pass


class NavigationTimeout(NavigationError):
    pass


class MalformedUrl(NavigationError):
    pass


class AddressInUse(ScrapeQLError):
    pass


class EmptyInput(ScrapeQLError):
    pass
