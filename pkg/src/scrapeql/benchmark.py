"""Benchmark harness: repeated tiered runs against generated fixture sites.

Each run executes the tier's canonical query in this process and samples
wall time, CPU time (user + system of this process) and the
peak resident set size. The fixture server runs in a separate process so
its work is not billed to the engine.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import platform
import re
import resource
import shutil
import statistics
import tempfile
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import psutil

from scrapeql.backends.fixtures import TIERS, FixtureProcess, benchmark_query, generate_benchmark_site
from scrapeql.backends.http import HttpBackend
from scrapeql.errors import EmptyInput, ScrapeQLError
from scrapeql.executor import execute
from scrapeql.query import from_document

log = logging.getLogger(__name__)

CSV_HEADER = (
    "tier",
    "run_index",
    "wall_time_ms",
    "cpu_time_ms",
    "peak_memory_bytes",
    "records_extracted",
    "timestamp",
)
METRICS = ("wall_time_ms", "cpu_time_ms", "peak_memory_bytes", "records_extracted")


@dataclass(frozen=True)
class BenchmarkConfig:
    tiers: tuple[str, ...] = TIERS
    runs_per_query: int = 10
    seed: int = 0
    output_path: Path = Path("benchmark.csv")
    warmup_runs: int = 1

    def __post_init__(self):
        if self.runs_per_query < 1:
            raise ValueError("runs_per_query must be >= 1")
        if self.warmup_runs < 0:
            raise ValueError("warmup_runs must be >= 0")
        unknown = [t for t in self.tiers if t not in TIERS]
        if unknown:
            raise ValueError(f"unknown tier(s): {', '.join(unknown)}")


@dataclass(frozen=True)
class BenchmarkRecord:
    tier: str
    run_index: int
    wall_time_ms: float
    cpu_time_ms: float
    peak_memory_bytes: int
    records_extracted: int
    timestamp: str


@dataclass(frozen=True)
class MetricStats:
    mean: float
    std: float
    # False when there was a single sample and std is reported as 0
    std_defined: bool


@dataclass
class BenchmarkSummary:
    tiers: dict[str, dict[str, MetricStats]]
    runs: dict[str, int]
    machine: dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "machine": self.machine,
            "tiers": {
                tier: {"runs": self.runs[tier], **{m: asdict(s) for m, s in stats.items()}}
                for tier, stats in self.tiers.items()
            },
        }


# --- measurement -----------------------------------------------------------

_CLEAR_REFS = Path("/proc/self/clear_refs")
_STATUS = Path("/proc/self/status")


def _reset_peak_rss() -> bool:
    # Linux: writing 5 resets the VmHWM high-water mark
    try:
        _CLEAR_REFS.write_text("5")
        return True
    except OSError:
        return False


def _peak_rss_bytes() -> int:
    try:
        m = re.search(r"VmHWM:\s+(\d+)\s+kB", _STATUS.read_text())
        if m:
            return int(m.group(1)) * 1024
    except OSError:
        pass
    # ru_maxrss is KiB on Linux, bytes on macOS
    peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return peak if platform.system() == "Darwin" else peak * 1024


def _cpu_seconds() -> float:
    # getrusage has microsecond resolution; os.times() is clock-tick granular.
    # Children are excluded: the only child is the fixture server.
    own = resource.getrusage(resource.RUSAGE_SELF)
    return own.ru_utime + own.ru_stime


def machine_descriptor() -> dict[str, object]:
    model = platform.processor() or platform.machine()
    try:
        for line in Path("/proc/cpuinfo").read_text().splitlines():
            if line.startswith("model name"):
                model = line.split(":", 1)[1].strip()
                break
    except OSError:
        pass
    return {
        "cpu_model": model,
        "cpu_count": os.cpu_count() or 1,
        "memory_bytes": psutil.virtual_memory().total,
        "platform": platform.platform(),
        "python": platform.python_version(),
    }


def measure_run(query) -> tuple[float, float, int, int]:
    """Execute ``query`` once; returns (wall ms, cpu ms, peak bytes, record count)."""
    _reset_peak_rss()
    cpu0 = _cpu_seconds()
    t0 = time.perf_counter()
    with HttpBackend() as backend:
        records = execute(query, backend)
    wall = (time.perf_counter() - t0) * 1000.0
    cpu = (_cpu_seconds() - cpu0) * 1000.0
    return wall, cpu, _peak_rss_bytes(), len(records)


def run_benchmark(config: BenchmarkConfig) -> list[BenchmarkRecord]:
    """Run every requested tier; a failing tier is aborted and its partial records kept."""
    out: list[BenchmarkRecord] = []
    for tier in config.tiers:
        root = Path(tempfile.mkdtemp(prefix=f"scrapeql-bench-{tier}-"))
        try:
            site = generate_benchmark_site(tier, config.seed, root)
            with FixtureProcess(site) as server:
                query = from_document(benchmark_query(tier, server.url))
                for i in range(config.warmup_runs):
                    log.info("tier=%s warmup %d", tier, i + 1)
                    execute_warmup(query)
                for i in range(config.runs_per_query):
                    wall, cpu, peak, n = measure_run(query)
                    stamp = datetime.now(timezone.utc).isoformat(timespec="milliseconds")
                    out.append(BenchmarkRecord(tier, i, wall, cpu, peak, n, stamp))
                    log.info("tier=%s run=%d wall_ms=%.1f cpu_ms=%.1f peak=%d records=%d", tier, i, wall, cpu, peak, n)
        except (ScrapeQLError, OSError, RuntimeError) as exc:
            log.error("tier %s aborted: %s", tier, exc)
        finally:
            shutil.rmtree(root, ignore_errors=True)
    return out


def execute_warmup(query) -> None:
    with HttpBackend() as backend:
        execute(query, backend)


# --- statistics and output -------------------------------------------------


def summarize(records: list[BenchmarkRecord], machine: dict | None = None) -> BenchmarkSummary:
    """Per-tier arithmetic mean and sample (n-1) standard deviation of each metric."""
    if not records:
        raise EmptyInput("no benchmark records to summarize")
    groups: dict[str, list[BenchmarkRecord]] = {}
    for rec in records:
        groups.setdefault(rec.tier, []).append(rec)
    tiers = {}
    for tier, recs in groups.items():
        stats = {}
        for metric in METRICS:
            values = [float(getattr(r, metric)) for r in recs]
            if len(values) > 1:
                stats[metric] = MetricStats(statistics.fmean(values), statistics.stdev(values), True)
            else:
                stats[metric] = MetricStats(values[0], 0.0, False)
        tiers[tier] = stats
    return BenchmarkSummary(
        tiers,
        {t: len(r) for t, r in groups.items()},
        machine if machine is not None else machine_descriptor(),
    )


def summary_path(csv_path: str | Path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + ".summary.json")


def emit(records: list[BenchmarkRecord], summary: BenchmarkSummary | None, path: str | Path) -> Path:
    """Write the CSV to ``path`` and the summary JSON next to it."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow([getattr(r, name) for name in CSV_HEADER])
    if summary is not None:
        summary_path(path).write_text(json.dumps(summary.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def read_csv(path: str | Path) -> list[BenchmarkRecord]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [
            BenchmarkRecord(
                row["tier"],
                int(row["run_index"]),
                float(row["wall_time_ms"]),
                float(row["cpu_time_ms"]),
                int(row["peak_memory_bytes"]),
                int(row["records_extracted"]),
                row["timestamp"],
            )
            for row in csv.DictReader(fh)
        ]
