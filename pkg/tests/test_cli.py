import json
import logging

import pytest

from scrapeql import __version__
from scrapeql.cli import (
    BROWSER_ENDPOINT_ENV,
    EXIT_IO,
    EXIT_NAVIGATION,
    EXIT_OK,
    EXIT_QUERY,
    EXIT_USAGE,
    UsageError,
    main,
    parse_args,
    render_json,
)

from tests.conftest import GOLDEN, QUERIES
from tests.helpers import write_rebased

FOURCHAN = "https://boards.4chan.org"


def test_parse_args_defaults():
    cfg = parse_args(["-q", "q.json5"], environ={})
    assert str(cfg.query_path) == "q.json5"
    assert cfg.output_path is None and cfg.log_level == "warn"
    assert cfg.backend == "static" and cfg.ensure_ascii and not cfg.headless_display


def test_parse_args_full_invocation():
    cfg = parse_args(["-q", "4chan-query.json5", "-o", "4chan-data.json", "-l", "info", "--xvfb"], environ={})
    assert (str(cfg.output_path), cfg.log_level, cfg.headless_display) == ("4chan-data.json", "info", True)


def test_browser_endpoint_from_environment():
    cfg = parse_args(["-q", "q", "--backend", "browser"], environ={BROWSER_ENDPOINT_ENV: "http://wd:4444"})
    assert cfg.browser_endpoint == "http://wd:4444"


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["-o", "x.json"],
        ["-q", "q", "-l", "verbose"],
        ["-q", "q", "--backend", "browser"],
        ["-q", "q", "--max-depth", "0"],
        ["-q", "q", "--delay", "-1"],
        ["-q", "q", "--frobnicate"],
    ],
)
def test_parse_args_usage_errors(argv):
    with pytest.raises(UsageError):
        parse_args(argv, environ={})


def test_main_usage_exit(capsys):
    assert main([]) == EXIT_USAGE
    assert "usage:" in capsys.readouterr().err


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_render_json_format():
    assert render_json([]) == "[]\n"
    assert render_json([{"a": "▶"}]) == '[\n  {\n    "a": "\\u25b6"\n  }\n]\n'
    assert render_json([{"a": "▶"}], ensure_ascii=False) == '[\n  {\n    "a": "▶"\n  }\n]\n'


def test_run_writes_golden_output(serve_site, tmp_path):
    server = serve_site("4chan")
    qpath = write_rebased(tmp_path, "4chan-query.json5", FOURCHAN, server.url)
    out = tmp_path / "4chan-data.json"
    assert main(["-q", str(qpath), "-o", str(out), "-l", "info", "--xvfb"]) == EXIT_OK
    assert out.read_bytes() == (GOLDEN / "4chan-data.json").read_bytes()


def test_stdout_output(serve_site, tmp_path, capsys):
    server = serve_site("4chan")
    qpath = write_rebased(tmp_path, "4chan-query.json5", FOURCHAN, server.url)
    assert main(["-q", str(qpath)]) == EXIT_OK
    assert len(json.loads(capsys.readouterr().out)) == 3


def test_no_ensure_ascii(serve_site, tmp_path):
    server = serve_site("4chan")
    qpath = write_rebased(tmp_path, "4chan-query.json5", FOURCHAN, server.url)
    out = tmp_path / "o.json"
    assert main(["-q", str(qpath), "-o", str(out), "--no-ensure-ascii"]) == EXIT_OK
    assert "▶" in out.read_text(encoding="utf-8")


def test_empty_result_writes_empty_array(serve_site, tmp_path):
    server = serve_site("4chan")
    qpath = tmp_path / "q.json5"
    qpath.write_text(json.dumps({"@url": server.url_for("/pol/catalog"), "@steps": [{"@xpath": "//table", "@fields": {"x": "."}}]}))
    out = tmp_path / "o.json"
    assert main(["-q", str(qpath), "-o", str(out)]) == EXIT_OK
    assert out.read_text() == "[]\n"


def test_xvfb_with_static_backend_is_noted(serve_site, tmp_path, capsys):
    server = serve_site("4chan")
    qpath = write_rebased(tmp_path, "4chan-query.json5", FOURCHAN, server.url)
    main(["-q", str(qpath), "-o", str(tmp_path / "o.json"), "-l", "info", "--xvfb"])
    assert "--xvfb has no effect" in capsys.readouterr().err


def test_missing_query_file(tmp_path):
    assert main(["-q", str(tmp_path / "absent.json5")]) == EXIT_IO


def test_syntax_error_exit(tmp_path):
    assert main(["-q", str(QUERIES / "4chan-query-unquoted.yaml")]) == EXIT_QUERY


def test_schema_error_exit(tmp_path):
    q = tmp_path / "q.json5"
    q.write_text('{"@url": "https://x.test/", "@steps": [{"@xpath": "//a", "@fields": {"x": "."}, "@follw": {}}]}')
    assert main(["-q", str(q)]) == EXIT_QUERY


def test_unsupported_xpath_exit(tmp_path):
    q = tmp_path / "q.json5"
    q.write_text('{"@url": "https://x.test/", "@steps": [{"@xpath": "//a/following::b", "@fields": {"x": "."}}]}')
    assert main(["-q", str(q)]) == EXIT_QUERY


def test_unreachable_root_exit(serve_site, tmp_path):
    server = serve_site("4chan")
    qpath = write_rebased(tmp_path, "4chan-query.json5", FOURCHAN, server.url)
    server.shutdown()
    assert main(["-q", str(qpath), "--timeout", "2"]) == EXIT_NAVIGATION


def test_root_404_exit(serve_site, tmp_path):
    server = serve_site("4chan")
    q = tmp_path / "q.json5"
    q.write_text(json.dumps({"@url": server.url_for("/gone"), "@steps": [{"@xpath": "//a", "@fields": {"x": "."}}]}))
    assert main(["-q", str(q)]) == EXIT_NAVIGATION


def test_unwritable_output_exit(serve_site, tmp_path):
    server = serve_site("4chan")
    qpath = write_rebased(tmp_path, "4chan-query.json5", FOURCHAN, server.url)
    assert main(["-q", str(qpath), "-o", str(tmp_path / "no-dir" / "o.json")]) == EXIT_IO


def test_yaml_format_override(serve_site, tmp_path):
    server = serve_site("4chan")
    qpath = write_rebased(tmp_path, "4chan-query.yaml", FOURCHAN, server.url)
    renamed = qpath.rename(tmp_path / "query.txt")
    out = tmp_path / "o.json"
    assert main(["-q", str(renamed), "--format", "yaml", "-o", str(out)]) == EXIT_OK
    assert out.read_bytes() == (GOLDEN / "4chan-data.json").read_bytes()


def test_bench_usage_error():
    assert main(["bench", "--tiers", "extreme"]) == EXIT_USAGE
    assert main(["bench", "--runs", "0"]) == EXIT_USAGE
