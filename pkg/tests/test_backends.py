import hashlib
import threading

import httpx
import pytest

from scrapeql.backends import HttpBackend, Page, WebDriverBackend
from scrapeql.backends.fixtures import (
    TIERS,
    FixtureProcess,
    FixtureSite,
    benchmark_query,
    generate_benchmark_site,
    serve_fixture,
)
from scrapeql.errors import (
    AddressInUse,
    BackendClosed,
    BackendUnavailable,
    HttpError,
    MalformedUrl,
    NavigationError,
    NavigationTimeout,
    NetworkError,
)
from scrapeql.executor import execute
from scrapeql.query import from_document
from scrapeql.shape import conforms, output_shape
from scrapeql.xpath import select

from tests.conftest import SITES
from tests.webdriver_stub import WebDriverStub

CATALOG = SITES / "4chan" / "pol" / "catalog.html"


# --- fixture server --------------------------------------------------------


def test_routes_cover_suffixless_paths():
    site = FixtureSite.from_directory(SITES / "pagination")
    assert site.routes["/chain5/page-1"] == "chain5/page-1.html"
    assert site.routes["/chain5/page-1.html"] == "chain5/page-1.html"


def test_missing_root_raises():
    with pytest.raises(FileNotFoundError):
        FixtureSite.from_directory(SITES / "does-not-exist")


def test_served_bytes_equal_file_bytes(serve_site):
    server = serve_site("4chan")
    resp = httpx.get(server.url_for("/pol/catalog"))
    assert resp.status_code == 200
    assert resp.content == CATALOG.read_bytes()
    assert resp.headers["content-type"] == "text/html; charset=utf-8"
    assert server.access_log == [("GET", "/pol/catalog")]


def test_etag_revalidation(serve_site):
    server = serve_site("4chan")
    etag = '"' + hashlib.sha256(CATALOG.read_bytes()).hexdigest()[:32] + '"'
    first = httpx.get(server.url_for("/pol/catalog"))
    assert first.headers["etag"] == etag
    again = httpx.get(server.url_for("/pol/catalog"), headers={"If-None-Match": etag})
    assert again.status_code == 304 and again.content == b""


def test_unknown_path_is_404(serve_site):
    server = serve_site("4chan")
    assert httpx.get(server.url_for("/nope")).status_code == 404


def test_concurrent_gets_return_identical_bytes(serve_site):
    server = serve_site("4chan")
    bodies = []
    lock = threading.Lock()

    def fetch():
        body = httpx.get(server.url_for("/pol/catalog")).content
        with lock:
            bodies.append(body)

    threads = [threading.Thread(target=fetch) for _ in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(bodies) == 16 and set(bodies) == {CATALOG.read_bytes()}
    assert server.requests("/pol/catalog") == 16


def test_shutdown_is_idempotent_and_keeps_log(serve_site):
    server = serve_site("4chan")
    httpx.get(server.url_for("/pol/catalog"))
    server.shutdown()
    server.shutdown()
    assert server.requests() == 1


def test_port_in_use(serve_site):
    server = serve_site("4chan")
    with pytest.raises(AddressInUse):
        serve_fixture(FixtureSite.from_directory(SITES / "4chan", port=server.port))


def test_fixture_process_serves_site():
    with FixtureProcess(FixtureSite.from_directory(SITES / "4chan")) as proc:
        assert httpx.get(proc.url + "/pol/catalog").content == CATALOG.read_bytes()


# --- static backend --------------------------------------------------------


def test_http_backend_fetches_and_parses(serve_site):
    server = serve_site("4chan")
    with HttpBackend() as backend:
        page = backend.navigate(server.url_for("/pol/catalog"))
    assert isinstance(page, Page) and page.status == 200
    assert len(select(page.parse(), "//div[contains(@class, 'thread')]")) == 3


def test_http_backend_follows_redirects(serve_site):
    server = serve_site("4chan", redirects={"/old": "/pol/catalog"})
    with HttpBackend() as backend:
        page = backend.navigate(server.url_for("/old"))
    assert page.final_url == server.url_for("/pol/catalog")


def test_redirect_loop_is_network_error(serve_site):
    server = serve_site("4chan", redirects={"/a": "/b", "/b": "/a"})
    with HttpBackend(max_redirects=3) as backend:
        with pytest.raises(NetworkError):
            backend.navigate(server.url_for("/a"))


def test_http_error_status(serve_site):
    server = serve_site("4chan")
    with HttpBackend() as backend:
        with pytest.raises(HttpError) as info:
            backend.navigate(server.url_for("/missing"))
    assert info.value.status == 404


def test_unreachable_host_is_network_error(serve_site):
    server = serve_site("4chan")
    url = server.url_for("/pol/catalog")
    server.shutdown()
    with HttpBackend(timeout=2) as backend:
        with pytest.raises(NetworkError):
            backend.navigate(url)


def test_relative_url_rejected():
    with HttpBackend() as backend:
        with pytest.raises(MalformedUrl):
            backend.navigate("/pol/catalog")


def test_closed_backend():
    backend = HttpBackend()
    backend.close()
    backend.close()
    with pytest.raises(BackendClosed):
        backend.navigate("http://127.0.0.1:9/")


def test_static_backend_does_not_run_scripts(serve_site):
    server = serve_site("js")
    with HttpBackend() as backend:
        doc = backend.navigate(server.url_for("/inject.html")).parse()
    assert len(select(doc, "//div[@id='static']")) == 1
    assert select(doc, "//div[@id='injected']") == []


# --- WebDriver backend -----------------------------------------------------


@pytest.fixture
def stub():
    s = WebDriverStub()
    yield s
    s.stop()


def test_webdriver_protocol_round_trip(stub, serve_site):
    server = serve_site("4chan")
    backend = WebDriverBackend(stub.url, headless=True, page_load_timeout=7)
    page = backend.navigate(server.url_for("/pol/catalog"))
    assert page.body.decode() == CATALOG.read_text(encoding="utf-8")
    assert page.final_url == server.url_for("/pol/catalog")
    backend.close()
    backend.close()
    caps = stub.capabilities[0]["capabilities"]["alwaysMatch"]
    assert caps["timeouts"] == {"pageLoad": 7000}
    assert "-headless" in caps["moz:firefoxOptions"]["args"]
    methods = [(m, p.rsplit("/", 1)[-1]) for m, p, _ in stub.commands]
    assert methods[0] == ("POST", "session")
    assert methods[-1][0] == "DELETE"
    assert stub.sessions == {}


def test_webdriver_reuses_one_session(stub, serve_site):
    server = serve_site("childcare")
    with WebDriverBackend(stub.url) as backend:
        backend.navigate(server.url_for("/profile/1"))
        backend.navigate(server.url_for("/profile/2"))
    assert len(stub.capabilities) == 1


def test_webdriver_timeout_maps_to_navigation_timeout(stub):
    stub.fail_with = "timeout"
    with WebDriverBackend(stub.url) as backend:
        with pytest.raises(NavigationTimeout):
            backend.navigate("http://127.0.0.1:9/")


def test_webdriver_other_error_is_navigation_error(stub):
    stub.fail_with = "unknown error"
    with WebDriverBackend(stub.url) as backend:
        with pytest.raises(NavigationError):
            backend.navigate("http://127.0.0.1:9/")


def test_webdriver_unreachable_endpoint():
    with WebDriverBackend("http://127.0.0.1:9", connect_timeout=1) as backend:
        with pytest.raises(BackendUnavailable):
            backend.navigate("http://example.test/")


def test_executor_over_webdriver_stub(stub, serve_site):
    from tests.helpers import rebased
    from scrapeql.query import parse_query

    server = serve_site("4chan")
    query = parse_query(rebased("4chan-query.json5", "https://boards.4chan.org", server.url))
    with WebDriverBackend(stub.url) as backend:
        records = execute(query, backend)
    assert [r["link"] for r in records] == [
        "//boards.4chan.org/pol/thread/497716745",
        "//boards.4chan.org/pol/thread/497716315",
        "//boards.4chan.org/pol/thread/497720014",
    ]


def test_real_browser_runs_scripts(webdriver_endpoint, serve_site):
    server = serve_site("js")
    with WebDriverBackend(webdriver_endpoint) as backend:
        doc = backend.navigate(server.url_for("/inject.html")).parse()
    assert len(select(doc, "//div[@id='injected']")) == 1


# --- benchmark site generator ----------------------------------------------


@pytest.mark.parametrize("tier", TIERS)
def test_generator_is_deterministic(tier, tmp_path):
    a = generate_benchmark_site(tier, 7, tmp_path / "a")
    b = generate_benchmark_site(tier, 7, tmp_path / "b")
    c = generate_benchmark_site(tier, 8, tmp_path / "c")
    files = sorted(a.routes.values())
    assert files == sorted(b.routes.values())
    assert all((a.root / f).read_bytes() == (b.root / f).read_bytes() for f in files)
    assert any((a.root / f).read_bytes() != (c.root / f).read_bytes() for f in files if (c.root / f).exists())


def test_simple_tier_is_small(tmp_path):
    site = generate_benchmark_site("simple", 0, tmp_path)
    assert sum(p.stat().st_size for p in tmp_path.rglob("*") if p.is_file()) < 512 * 1024


def test_high_tier_has_pagination_chain(tmp_path):
    site = generate_benchmark_site("high", 0, tmp_path)
    pages = [r for r in site.routes if r.startswith("/board/page-") and r.endswith(".html")]
    assert len(pages) >= 5


def test_unknown_tier():
    with pytest.raises(ValueError):
        generate_benchmark_site("extreme", 0)


@pytest.mark.parametrize("tier", TIERS)
def test_benchmark_queries_run_and_conform(tier, tmp_path):
    site = generate_benchmark_site(tier, 0, tmp_path)
    server = serve_fixture(site)
    try:
        query = from_document(benchmark_query(tier, server.url))
        with HttpBackend() as backend:
            records = execute(query, backend)
    finally:
        server.shutdown()
    assert records
    assert conforms(records, output_shape(query)) == []
