"""Deterministic local web sites for hermetic tests and benchmarks."""

from __future__ import annotations

import errno
import hashlib
import html
import logging
import mimetypes
import multiprocessing
import random
import tempfile
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import unquote, urlsplit

from scrapeql.errors import AddressInUse

log = logging.getLogger(__name__)

TIERS = ("simple", "medium", "high")


@dataclass
class FixtureSite:
    """Static files plus a route table mapping URL paths to them."""

    root: Path
    routes: dict[str, str] = field(default_factory=dict)
    redirects: dict[str, str] = field(default_factory=dict)
    host: str = "127.0.0.1"
    port: int = 0

    @classmethod
    def from_directory(cls, root: str | Path, host: str = "127.0.0.1", port: int = 0, redirects=None) -> FixtureSite:
        """Route every file under ``root`` at its relative path.

        ``.html`` files are also reachable without the suffix, and
        ``index.html`` at its directory path.
        """
        root = Path(root)
        if not root.is_dir():
            raise FileNotFoundError(f"fixture root {root} is not a directory")
        routes: dict[str, str] = {}
        for path in sorted(p for p in root.rglob("*") if p.is_file()):
            rel = path.relative_to(root).as_posix()
            routes["/" + rel] = rel
            if rel.endswith(".html"):
                stem = rel[: -len(".html")]
                routes.setdefault("/" + stem, rel)
                if stem == "index" or stem.endswith("/index"):
                    routes.setdefault("/" + stem[: -len("index")], rel)
        return cls(root, routes, dict(redirects or {}), host, port)

    def read(self, route: str) -> bytes:
        return (self.root / self.routes[route]).read_bytes()


class _Handler(BaseHTTPRequestHandler):
    server: _FixtureHTTPServer
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True

    def do_HEAD(self):
        self._respond(head=True)

    def do_GET(self):
        self._respond(head=False)

    def _respond(self, head: bool):
        site = self.server.site
        path = unquote(urlsplit(self.path).path)
        self.server.record(self.command, path)
        if path in site.redirects:
            self.send_response(302)
            self.send_header("Location", site.redirects[path])
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        if path not in site.routes:
            body = b"<html><body><h1>404 Not Found</h1></body></html>"
            self.send_response(404)
            self.send_header("Content-Type", "text/html; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            if not head:
                self.wfile.write(body)
            return
        rel = site.routes[path]
        body = self.server.content(rel)
        etag = '"' + hashlib.sha256(body).hexdigest()[:32] + '"'
        if self.headers.get("If-None-Match") == etag:
            self.send_response(304)
            self.send_header("ETag", etag)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        ctype = mimetypes.guess_type(rel)[0] or "application/octet-stream"
        if ctype.startswith("text/"):
            ctype += "; charset=utf-8"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("ETag", etag)
        self.end_headers()
        if not head:
            self.wfile.write(body)

    def log_message(self, format, *args):
        log.debug("fixture %s - %s", self.address_string(), format % args)


class _FixtureHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, site: FixtureSite):
        self.site = site
        self.access_log: list[tuple[str, str]] = []
        self._lock = threading.Lock()
        self._cache: dict[str, bytes] = {}
        super().__init__((site.host, site.port), _Handler)

    def record(self, method: str, path: str) -> None:
        with self._lock:
            self.access_log.append((method, path))

    def content(self, rel: str) -> bytes:
        with self._lock:
            body = self._cache.get(rel)
            if body is None:
                body = self._cache[rel] = (self.site.root / rel).read_bytes()
        return body


class FixtureServer:
    """A running fixture site. ``shutdown`` may be called any number of times."""

    def __init__(self, site: FixtureSite):
        self.site = site
        self._final_log: list[tuple[str, str]] = []
        try:
            self._httpd: _FixtureHTTPServer | None = _FixtureHTTPServer(site)
        except OSError as exc:
            if exc.errno == errno.EADDRINUSE:
                raise AddressInUse(f"{site.host}:{site.port} is already in use") from exc
            raise
        self.host, self.port = self._httpd.server_address[:2]
        self._thread = threading.Thread(target=self._httpd.serve_forever, name=f"fixture-{self.port}", daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def url_for(self, path: str) -> str:
        return self.url + path

    @property
    def access_log(self) -> list[tuple[str, str]]:
        if self._httpd is None:
            return list(self._final_log)
        with self._httpd._lock:
            return list(self._httpd.access_log)

    def requests(self, path: str | None = None) -> int:
        """Number of GET requests served, optionally for one path only."""
        return sum(1 for m, p in self.access_log if m == "GET" and (path is None or p == path))

    def clear_log(self) -> None:
        if self._httpd is not None:
            with self._httpd._lock:
                self._httpd.access_log.clear()

    def shutdown(self) -> None:
        httpd, self._httpd = self._httpd, None
        if httpd is None:
            return
        self._final_log = list(httpd.access_log)
        httpd.shutdown()
        httpd.server_close()
        self._thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


def serve_fixture(site: FixtureSite) -> FixtureServer:
    return FixtureServer(site)


def _serve_in_child(site: FixtureSite, conn) -> None:
    server = FixtureServer(site)
    conn.send(server.port)
    conn.recv()  # any message means stop
    server.shutdown()


class FixtureProcess:
    """Serve a site from a separate process so its CPU time is not billed to the caller."""

    def __init__(self, site: FixtureSite):
        ctx = multiprocessing.get_context("spawn")
        self._conn, child = ctx.Pipe()
        self._proc = ctx.Process(target=_serve_in_child, args=(site, child), daemon=True)
        self._proc.start()
        if not self._conn.poll(30):
            self._proc.kill()
            raise RuntimeError("fixture server process did not start")
        self.host = site.host
        self.port = self._conn.recv()

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def shutdown(self) -> None:
        if self._proc is None:
            return
        try:
            self._conn.send("stop")
        except (BrokenPipeError, OSError):
            pass
        self._proc.join(timeout=10)
        if self._proc.is_alive():
            self._proc.kill()
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


# --- benchmark sites -------------------------------------------------------

_WORDS = (
    "alpha amber anchor apple arrow aspen atlas autumn badge basil beacon birch "
    "bison blaze bloom bolt border breeze brook cabin cactus canyon cedar chalk "
    "cider cliff clover cobalt comet coral crane crest delta dune eagle ember "
    "falcon fern fjord flint forest frost garnet glacier granite grove harbor "
    "hazel heron hollow indigo island ivory jasper juniper kelp lagoon lantern "
    "laurel lemon lilac linen lotus maple marble meadow mesa mint moss nectar "
    "oasis onyx orchid otter pebble pine plume prairie quartz quill raven reef "
    "ridge river saffron sage sierra slate sparrow spruce summit thistle tide "
    "timber topaz tulip tundra umber valley velvet willow zephyr"
).split()


def _words(rng: random.Random, n: int) -> str:
    return " ".join(rng.choice(_WORDS) for _ in range(n))


def _page(title: str, body: str) -> str:
    return (
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
        f"<title>{html.escape(title)}</title>\n</head>\n<body>\n{body}</body>\n</html>\n"
    )


def _simple_site(rng: random.Random) -> dict[str, str]:
    items = []
    for i in range(1, 121):
        items.append(
            f'<div class="thread" id="t{i}">\n'
            f'  <a href="/thread/{1000 + i}">#{1000 + i}</a>\n'
            f'  <div class="teaser">{html.escape(_words(rng, 8).capitalize())}</div>\n'
            f'  <div class="meta">R: {rng.randint(0, 400)} / I: {rng.randint(0, 90)}</div>\n'
            f'  <span class="author">{_words(rng, 1)}</span>\n'
            "</div>\n"
        )
    return {"catalog.html": _page("Catalog", "".join(items))}


def _medium_site(rng: random.Random) -> dict[str, str]:
    files: dict[str, str] = {}
    sellers = 12
    for s in range(1, sellers + 1):
        body = (
            f'<div class="seller-card">\n'
            f'  <h2 class="name">{_words(rng, 2).title()}</h2>\n'
            f'  <span class="since">{rng.randint(2001, 2024)}</span>\n'
            f'  <span class="location">{_words(rng, 1).title()}</span>\n'
            "</div>\n"
        )
        files[f"sellers/s{s}.html"] = _page(f"Seller {s}", body)
    items = []
    for i in range(1, 401):
        tags = "".join(f"<li>{t}</li>" for t in rng.sample(_WORDS, rng.randint(2, 4)))
        items.append(
            f'<div class="product" data-sku="P{i:05d}">\n'
            f'  <h3 class="name">{_words(rng, 3).title()}</h3>\n'
            f'  <span class="price">{rng.randint(1, 999)}.{rng.randint(0, 99):02d}</span>\n'
            f'  <span class="rating">{rng.randint(1, 5)}</span>\n'
            f'  <span class="stock">{rng.choice(["in stock", "low", "backorder"])}</span>\n'
            f'  <ul class="tags">{tags}</ul>\n'
            f'  <p class="description">{_words(rng, 60)}</p>\n'
            f'  <a class="seller" href="/sellers/s{rng.randint(1, sellers)}.html">seller</a>\n'
            "</div>\n"
        )
    files["listing.html"] = _page("Listing", "".join(items))
    return files


def _high_site(rng: random.Random) -> dict[str, str]:
    files: dict[str, str] = {}
    pages, per_page = 8, 60
    n = 0
    for p in range(1, pages + 1):
        rows = []
        for _ in range(per_page):
            n += 1
            rows.append(
                f'<div class="entry">\n'
                f'  <a class="title" href="/items/i{n}.html">{_words(rng, 4).title()}</a>\n'
                f'  <span class="score">{rng.randint(0, 10000)}</span>\n'
                f'  <span class="when">{rng.randint(1, 59)} minutes ago</span>\n'
                "</div>\n"
            )
            reviews = "".join(
                f'  <div class="review">\n'
                f'    <span class="who">{_words(rng, 1)}</span>\n'
                f'    <span class="stars">{rng.randint(1, 5)}</span>\n'
                f'    <p>{_words(rng, rng.randint(10, 30))}</p>\n'
                "  </div>\n"
                for _ in range(rng.randint(2, 5))
            )
            body = (
                f'<div class="details">\n'
                f'  <h1>{_words(rng, 4).title()}</h1>\n'
                f'  <span class="maker">{_words(rng, 1).title()}</span>\n'
                f'  <span class="year">{rng.randint(1990, 2024)}</span>\n'
                f'  <p class="summary">{_words(rng, 40)}</p>\n'
                "</div>\n"
                f'<div id="reviews">\n{reviews}</div>\n'
            )
            files[f"items/i{n}.html"] = _page(f"Item {n}", body)
        nav = f'<a rel="next" href="/board/page-{p + 1}.html">next</a>\n' if p < pages else ""
        files[f"board/page-{p}.html"] = _page(f"Board page {p}", "".join(rows) + nav)
    return files


_GENERATORS = {"simple": _simple_site, "medium": _medium_site, "high": _high_site}
_ENTRY = {"simple": "/catalog.html", "medium": "/listing.html", "high": "/board/page-1.html"}


def generate_benchmark_site(tier: str, seed: int, root: str | Path | None = None) -> FixtureSite:
    """Write the seeded site for ``tier`` under ``root`` (a fresh temp dir by default)."""
    if tier not in _GENERATORS:
        raise ValueError(f"unknown tier {tier!r}; expected one of {', '.join(TIERS)}")
    root = Path(root) if root is not None else Path(tempfile.mkdtemp(prefix=f"scrapeql-{tier}-"))
    rng = random.Random(f"{tier}:{seed}")
    for rel, text in _GENERATORS[tier](rng).items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(text.encode("utf-8"))
    return FixtureSite.from_directory(root)


def benchmark_query(tier: str, base_url: str) -> dict:
    """The canonical query document for ``tier``, rooted at ``base_url``."""
    base_url = base_url.rstrip("/")
    if tier == "simple":
        return {
            "@url": base_url + _ENTRY["simple"],
            "@steps": [
                {
                    "@xpath": "//div[contains(@class, 'thread')]",
                    "@fields": {
                        "title": ".//div[contains(@class, 'teaser')]/text()",
                        "link": "./a/@href",
                        "number_of_posts": ".//div[contains(@class, 'meta')]/text()",
                        "author": ".//span[@class='author']/text()",
                    },
                }
            ],
        }
    if tier == "medium":
        return {
            "@url": base_url + _ENTRY["medium"],
            "@steps": [
                {
                    "@xpath": "//div[@class='product']",
                    "@fields": {
                        "sku": "./@data-sku",
                        "name": "./h3/text()",
                        "price": ".//span[@class='price']/text()",
                        "rating": ".//span[@class='rating']/text()",
                        "stock": ".//span[@class='stock']/text()",
                        "tags": ".//ul[@class='tags']/li/text()",
                        "description": "./p[@class='description']/normalize-space()",
                    },
                    "@follow": {
                        "@xpath": "./a[contains(@class, 'seller')]/@href",
                        "@steps": [
                            {
                                "@xpath": "//div[@class='seller-card']",
                                "@name": "seller",
                                "@fields": {
                                    "name": "./h2/text()",
                                    "since": ".//span[@class='since']/text()",
                                    "location": ".//span[@class='location']/text()",
                                },
                            }
                        ],
                    },
                }
            ],
        }
    if tier == "high":
        return {
            "@url": base_url + _ENTRY["high"],
            "@steps": [
                {
                    "@xpath": "//div[@class='entry']",
                    "@pagination": {"@xpath": "//a[@rel='next']/@href", "@limit": 50},
                    "@fields": {
                        "title": "./a[@class='title']/text()",
                        "score": "./span[@class='score']/text()",
                        "age": "./span[@class='when']/text()",
                    },
                    "@follow": {
                        "@xpath": "./a[@class='title']/@href",
                        "@steps": [
                            {
                                "@xpath": "//div[@class='details']",
                                "@name": "details",
                                "@fields": {
                                    "heading": "./h1/text()",
                                    "maker": ".//span[@class='maker']/text()",
                                    "year": ".//span[@class='year']/text()",
                                    "summary": "./p[@class='summary']/normalize-space()",
                                },
                            },
                            {
                                "@xpath": "//div[@id='reviews']/div[@class='review']",
                                "@name": "reviews",
                                "@fields": {
                                    "who": "./span[@class='who']/text()",
                                    "stars": "./span[@class='stars']/text()",
                                    "text": "./p/normalize-space()",
                                },
                            },
                        ],
                    },
                }
            ],
        }
    raise ValueError(f"unknown tier {tier!r}")
