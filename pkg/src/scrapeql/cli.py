"""Command-line entry point.

    scrapeql -q query.json5 -o data.json -l info --xvfb
    scrapeql bench --tiers simple,medium,high --runs 10 --out bench.csv

Exit codes: 0 success, 2 usage error, 3 invalid query, 4 root page could
not be fetched, 5 I/O or serialization failure, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from scrapeql import __version__
from scrapeql.backends import FetchBackend, HttpBackend, WebDriverBackend
from scrapeql.backends.base import DEFAULT_NAVIGATION_TIMEOUT
from scrapeql.errors import (
    InvalidQuery,
    NavigationError,
    QuerySyntaxError,
    SchemaError,
    UnsupportedFeature,
    XPathSyntaxError,
)
from scrapeql.executor import ExecutionOptions, execute
from scrapeql.query import load_query

log = logging.getLogger("scrapeql")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_QUERY = 3
EXIT_NAVIGATION = 4
EXIT_IO = 5

BROWSER_ENDPOINT_ENV = "SCRAPEQL_BROWSER_ENDPOINT"
LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class UsageError(Exception):
    def __init__(self, message: str, usage: str = ""):
        self.usage = usage
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


@dataclass(frozen=True)
class CliConfig:
    query_path: Path
    output_path: Path | None = None
    log_level: str = "warn"
    headless_display: bool = False
    format_override: str | None = None
    backend: str = "static"
    browser_endpoint: str | None = None
    ensure_ascii: bool = True
    timeout: float = DEFAULT_NAVIGATION_TIMEOUT
    options: ExecutionOptions = field(default_factory=ExecutionOptions)


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def _run_parser() -> _Parser:
    p = _Parser(prog="scrapeql", description="Run a declarative extraction query and print JSON records.")
    p.add_argument("-q", "--query", required=True, type=Path, help="query file (.json5, .json, .yaml, .yml)")
    p.add_argument("-o", "--output", type=Path, help="output file (default: standard output)")
    p.add_argument("-l", "--log-level", choices=list(LOG_LEVELS), default="warn")
    p.add_argument("--xvfb", action="store_true", help="run the browser without a display (browser backend only)")
    p.add_argument("--format", choices=["json5", "yaml"], help="query format, overriding detection")
    p.add_argument("--backend", choices=["static", "browser"], default="static")
    p.add_argument("--browser-endpoint", help=f"WebDriver URL (or set {BROWSER_ENDPOINT_ENV})")
    p.add_argument("--max-depth", type=_positive_int, default=ExecutionOptions().max_follow_depth)
    p.add_argument("--max-pages", type=_positive_int, default=ExecutionOptions().max_pages_per_step)
    p.add_argument("--delay", type=float, default=0.0, help="seconds between navigations")
    p.add_argument("--timeout", type=_positive_float, default=DEFAULT_NAVIGATION_TIMEOUT, help="navigation timeout in seconds")
    p.add_argument("--no-ensure-ascii", dest="ensure_ascii", action="store_false", help="write non-ASCII characters unescaped")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def parse_args(argv: Sequence[str], environ: dict | None = None) -> CliConfig:
    environ = os.environ if environ is None else environ
    parser = _run_parser()
    ns = parser.parse_args(list(argv))
    endpoint = ns.browser_endpoint or environ.get(BROWSER_ENDPOINT_ENV) or None
    if ns.backend == "browser" and not endpoint:
        parser.error(f"--backend browser needs --browser-endpoint or {BROWSER_ENDPOINT_ENV}")
    if ns.delay < 0:
        parser.error("--delay must be >= 0")
    return CliConfig(
        query_path=ns.query,
        output_path=ns.output,
        log_level=ns.log_level,
        headless_display=ns.xvfb,
        format_override=ns.format,
        backend=ns.backend,
        browser_endpoint=endpoint,
        ensure_ascii=ns.ensure_ascii,
        timeout=ns.timeout,
        options=ExecutionOptions(
            max_follow_depth=ns.max_depth,
            max_pages_per_step=ns.max_pages,
            politeness_delay=ns.delay,
        ),
    )


def setup_logging(level: str) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("scrapeql")
    root.handlers[:] = [handler]
    root.setLevel(LOG_LEVELS[level])
    root.propagate = False


def make_backend(config: CliConfig) -> FetchBackend:
    if config.backend == "browser":
        assert config.browser_endpoint
        return WebDriverBackend(
            config.browser_endpoint,
            headless=config.headless_display,
            page_load_timeout=config.timeout,
        )
    if config.headless_display:
        log.info("--xvfb has no effect with the static backend; ignoring")
    return HttpBackend(timeout=config.timeout)


def render_json(records: list, ensure_ascii: bool = True) -> str:
    return json.dumps(records, indent=2, ensure_ascii=ensure_ascii) + "\n"


def write_output(records: list, path: Path | None, ensure_ascii: bool = True) -> None:
    text = render_json(records, ensure_ascii)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    Path(path).write_bytes(text.encode("utf-8"))


def _fail(code: int, message: str) -> int:
    log.error(message)
    if not log.isEnabledFor(logging.ERROR):
        print(f"scrapeql: {message}", file=sys.stderr)
    return code


def run(config: CliConfig) -> int:
    setup_logging(config.log_level)
    try:
        query = load_query(config.query_path, config.format_override)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read query file {config.query_path}: {exc.strerror or exc}")
    except QuerySyntaxError as exc:
        return _fail(EXIT_QUERY, f"{config.query_path}: {exc}")
    except SchemaError as exc:
        return _fail(EXIT_QUERY, f"{config.query_path}: {exc}")

    try:
        backend = make_backend(config)
    except NavigationError as exc:
        return _fail(EXIT_NAVIGATION, str(exc))
    try:
        with backend:
            records = execute(query, backend, config.options)
    except NavigationError as exc:
        return _fail(EXIT_NAVIGATION, f"cannot fetch {query.url}: {exc}")
    except (UnsupportedFeature, XPathSyntaxError, InvalidQuery) as exc:
        return _fail(EXIT_QUERY, str(exc))
    except Exception as exc:
        log.debug("unexpected failure", exc_info=True)
        return _fail(EXIT_FAILURE, f"unexpected error: {exc!r}")

    try:
        write_output(records, config.output_path, config.ensure_ascii)
    except (OSError, TypeError, ValueError) as exc:
        return _fail(EXIT_IO, f"cannot write output: {exc}")
    log.info("wrote %d record(s) to %s", len(records), config.output_path or "stdout")
    return EXIT_OK


# --- bench subcommand ------------------------------------------------------


def _bench_parser() -> _Parser:
    p = _Parser(prog="scrapeql bench", description="Measure execution time, CPU and memory on generated fixture sites.")
    p.add_argument("--tiers", default="simple,medium,high", help="comma-separated subset of simple,medium,high")
    p.add_argument("--runs", type=_positive_int, default=10, help="measured runs per tier")
    p.add_argument("--warmup", type=int, default=1, help="unmeasured runs per tier")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("benchmark.csv"), help="CSV path; summary JSON is written beside it")
    p.add_argument("-l", "--log-level", choices=list(LOG_LEVELS), default="warn")
    return p


def bench_main(argv: Sequence[str]) -> int:
    from scrapeql.benchmark import BenchmarkConfig, emit, run_benchmark, summarize, summary_path

    parser = _bench_parser()
    ns = parser.parse_args(list(argv))
    tiers = tuple(t.strip() for t in ns.tiers.split(",") if t.strip())
    try:
        config = BenchmarkConfig(tiers, ns.runs, ns.seed, ns.out, ns.warmup)
    except ValueError as exc:
        parser.error(str(exc))
    setup_logging(ns.log_level)
    records = run_benchmark(config)
    if not records:
        return _fail(EXIT_FAILURE, "benchmark produced no records")
    summary = summarize(records)
    try:
        emit(records, summary, config.output_path)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write benchmark results: {exc}")
    for tier, stats in summary.tiers.items():
        w, c, m = stats["wall_time_ms"], stats["cpu_time_ms"], stats["peak_memory_bytes"]
        print(
            f"{tier:<7} runs={summary.runs[tier]:<3} wall={w.mean:9.1f}±{w.std:.1f} ms  "
            f"cpu={c.mean:9.1f}±{c.std:.1f} ms  peak={m.mean / 2**20:7.1f} MiB"
        )
    print(f"records: {config.output_path}  summary: {summary_path(config.output_path)}")
    expected = len(config.tiers) * config.runs_per_query
    return EXIT_OK if len(records) == expected else EXIT_FAILURE


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if argv and argv[0] == "bench":
            return bench_main(argv[1:])
        config = parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(exc.usage)
        sys.stderr.write(f"scrapeql: error: {exc}\n")
        return EXIT_USAGE
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
