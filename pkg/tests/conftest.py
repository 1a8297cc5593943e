import datetime as dt
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import pytest

from redditfactors.synthetic import write_fixture

FIXTURE_START = dt.date(2018, 6, 1)
FIXTURE_END = dt.date(2018, 11, 30)

_acceptance = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        _acceptance.append((marker.args[0], marker.args[1], rep.outcome, item.name))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome, name in sorted(_acceptance):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number:2d}: {title} ({name})")


# ---------------------------------------------------------------------------
# Mock Pushshift endpoint
# ---------------------------------------------------------------------------


class MockPushshift:
    """Serves ``responder(after, before, size) -> list|dict`` over HTTP and logs requests."""

    def __init__(self, responder, fail_first=0):
        self.responder = responder
        self.requests = []
        self.fail_first = fail_first
        owner = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):
                q = {k: v[0] for k, v in parse_qs(urlparse(self.path).query).items()}
                owner.requests.append(q)
                if owner.fail_first > 0:
                    owner.fail_first -= 1
                    self.send_response(503)
                    self.end_headers()
                    return
                body = json.dumps(owner.responder(int(q["after"]), int(q["before"]), int(q["size"])))
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.end_headers()
                self.wfile.write(body.encode())

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def url(self):
        host, port = self.server.server_address
        return f"http://{host}:{port}/reddit/comment/search"

    def windows(self):
        return [(int(q["after"]), int(q["before"])) for q in self.requests]


@pytest.fixture
def mock_pushshift():
    servers = []

    def start(responder, fail_first=0):
        srv = MockPushshift(responder, fail_first)
        srv.thread.start()
        servers.append(srv)
        return srv

    yield start
    for srv in servers:
        srv.server.shutdown()
        srv.server.server_close()


def dense_responder(per_second=2.0, size_cap_hit=()):
    """Records spread evenly over the window; saturates for windows in ``size_cap_hit``."""

    def respond(after, before, size):
        if (after, before) in size_cap_hit:
            n = size
        else:
            n = min(size, int((before - after) * per_second / 60))
        step = max((before - after) // max(n, 1), 1)
        return {"data": [
            {"id": f"{after}_{i}", "created_utc": after + (i * step) % (before - after),
             "body": f"Comment {i} about TSLA 🚀" if i % 3 == 0 else f"plain comment {i}"}
            for i in range(n)
        ]}

    return respond


# ---------------------------------------------------------------------------
# Synthetic pipeline fixture (built once per session)
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def fixture_config(tmp_path_factory):
    d = tmp_path_factory.mktemp("fixture")
    return write_fixture(d, FIXTURE_START, FIXTURE_END, loadings={"WMT": 20.0}, seed=7)


@pytest.fixture(scope="session")
def fixture_run(fixture_config):
    """One full pipeline run over the synthetic fixture, shared across tests."""
    from redditfactors.pipeline import run_pipeline, validate_config

    config = validate_config(fixture_config)
    result = run_pipeline(config)
    return config, result
