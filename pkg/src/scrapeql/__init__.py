"""Declarative XPath-based web data extraction."""

__version__ = "0.1.0"

from scrapeql.query import Query, Step, FollowSpec, PaginationSpec, parse_query, load_query
from scrapeql.executor import ExecutionOptions, execute

__all__ = [
    "Query",
    "Step",
    "FollowSpec",
    "PaginationSpec",
    "parse_query",
    "load_query",
    "ExecutionOptions",
    "execute",
    "__version__",
]
