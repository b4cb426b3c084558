import os
from pathlib import Path

import pytest

from scrapeql.backends.fixtures import FixtureSite, serve_fixture

DATA = Path(__file__).parent / "data"
SITES = DATA / "sites"
QUERIES = DATA / "queries"
GOLDEN = DATA / "golden"

_CRITERIA: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    _, outcomes = _CRITERIA.setdefault(number, (title, []))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcomes.append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[number]
        if outcomes and all(o == "passed" for o in outcomes):
            verdict = "PASS"
        elif any(o == "failed" for o in outcomes):
            verdict = "FAIL"
        else:
            verdict = "SKIP"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title} ({len(outcomes)} check(s))")


@pytest.fixture
def serve_site():
    """Factory: serve_site("childcare") -> running FixtureServer, shut down after the test."""
    servers = []

    def _serve(name: str, redirects=None):
        site = FixtureSite.from_directory(SITES / name, redirects=redirects)
        server = serve_fixture(site)
        servers.append(server)
        return server

    yield _serve
    for server in servers:
        server.shutdown()


@pytest.fixture
def webdriver_endpoint():
    """A real WebDriver endpoint when SCRAPEQL_TEST_WEBDRIVER is set, else skip."""
    endpoint = os.environ.get("SCRAPEQL_TEST_WEBDRIVER")
    if not endpoint:
        pytest.skip("set SCRAPEQL_TEST_WEBDRIVER to a running WebDriver endpoint")
    return endpoint


@pytest.fixture(autouse=True)
def _reset_cli_logging():
    """The CLI installs its own stderr handler; undo that between tests."""
    yield
    import logging

    logger = logging.getLogger("scrapeql")
    logger.handlers[:] = []
    logger.propagate = True
    logger.setLevel(logging.NOTSET)
