import json
import math

import pytest

from scrapeql.benchmark import (
    CSV_HEADER,
    BenchmarkConfig,
    BenchmarkRecord,
    emit,
    read_csv,
    run_benchmark,
    summarize,
    summary_path,
)
from scrapeql.errors import EmptyInput

from tests.oracle import mean_std

MACHINE = {"cpu_model": "test"}


def rec(tier, i, wall, cpu=1.0, mem=1000, n=5):
    return BenchmarkRecord(tier, i, wall, cpu, mem, n, "2026-01-01T00:00:00.000+00:00")


def test_two_sample_statistics():
    s = summarize([rec("simple", 0, 10.0), rec("simple", 1, 20.0)], MACHINE)
    wall = s.tiers["simple"]["wall_time_ms"]
    mean, std = mean_std([10.0, 20.0])
    assert wall.mean == mean == 15.0
    assert math.isclose(wall.std, std, rel_tol=1e-12) and math.isclose(std, math.sqrt(50), rel_tol=1e-12)
    assert wall.std_defined


def test_single_record_std_is_flagged():
    s = summarize([rec("high", 0, 42.0)], MACHINE)
    wall = s.tiers["high"]["wall_time_ms"]
    assert (wall.mean, wall.std, wall.std_defined) == (42.0, 0.0, False)


def test_empty_input():
    with pytest.raises(EmptyInput):
        summarize([], MACHINE)


def test_groups_by_tier():
    records = [rec("simple", i, 1.0 + i) for i in range(3)] + [rec("medium", i, 10.0 * (i + 1)) for i in range(4)]
    s = summarize(records, MACHINE)
    assert s.runs == {"simple": 3, "medium": 4}
    assert s.tiers["medium"]["wall_time_ms"].mean == mean_std([10.0, 20.0, 30.0, 40.0])[0]


def test_config_validation():
    with pytest.raises(ValueError):
        BenchmarkConfig(runs_per_query=0)
    with pytest.raises(ValueError):
        BenchmarkConfig(tiers=("simple", "huge"))


def test_emit_layout_and_round_trip(tmp_path):
    records = [rec(t, i, 1.0 / (i + 3), 0.1 * i) for t in ("simple", "medium", "high") for i in range(10)]
    path = emit(records, summarize(records, MACHINE), tmp_path / "b.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 31 and lines[0] == ",".join(CSV_HEADER)
    back = read_csv(path)
    assert back == records
    again = emit(back, None, tmp_path / "c.csv")
    assert again.read_bytes() == path.read_bytes()
    summary = json.loads(summary_path(path).read_text())
    assert summary["machine"] == MACHINE and summary["tiers"]["high"]["runs"] == 10


def test_emit_into_missing_directory(tmp_path):
    with pytest.raises(OSError):
        emit([rec("simple", 0, 1.0)], None, tmp_path / "missing" / "b.csv")


def test_summary_path():
    assert summary_path("out/bench.csv").as_posix() == "out/bench.summary.json"


def test_short_real_run(tmp_path):
    records = run_benchmark(BenchmarkConfig(("simple",), runs_per_query=2, warmup_runs=0, output_path=tmp_path / "b.csv"))
    assert [(r.tier, r.run_index) for r in records] == [("simple", 0), ("simple", 1)]
    for r in records:
        assert r.wall_time_ms > 0 and r.cpu_time_ms >= 0 and r.peak_memory_bytes > 0
        assert r.records_extracted == 120
