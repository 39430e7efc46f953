"""External scorer adapters: subprocess wire format."""

import sys

import pytest

from labharmony.errors import ParseError
from labharmony.external import ExternalProcessScorer, _parse_scores, _request_lines
from labharmony.types import Triad

# Reads request lines on stdin, answers p = 1.0 for identical test names.
ECHO_SCORER = r"""
import json, sys
for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    req = json.loads(line)
    p = 1.0 if req["left"]["test"] == req["right"]["test"] else 0.25
    print(json.dumps({"pair_id": req["pair_id"], "p": p}))
"""


def test_wire_format_round_trip():
    pairs = [(Triad("a"), Triad("a")), (Triad("a"), Triad("b"))]
    scorer = ExternalProcessScorer([sys.executable, "-c", ECHO_SCORER])
    assert scorer.score_pairs(pairs) == [1.0, 0.25]
    assert scorer.score(Triad("x"), Triad("x")) == 1.0


def test_empty_pairs_no_subprocess():
    scorer = ExternalProcessScorer(["/definitely/not/a/binary"])
    assert scorer.score_pairs([]) == []


def test_failure_exit_code_surfaces():
    scorer = ExternalProcessScorer([sys.executable, "-c", "import sys; sys.exit(3)"])
    with pytest.raises(ParseError):
        scorer.score_pairs([(Triad("a"), Triad("b"))])


def test_missing_response_ids_detected():
    with pytest.raises(ParseError):
        _parse_scores('{"pair_id": 0, "p": 0.5}\n', expected=2)


def test_bad_response_line_detected():
    with pytest.raises(ParseError):
        _parse_scores("not json\n", expected=1)


def test_request_lines_shape():
    lines = _request_lines([(Triad("a", "s", "u"), Triad("b"))]).splitlines()
    import json

    req = json.loads(lines[0])
    assert req["pair_id"] == 0
    assert req["left"] == {"test": "a", "sample": "s", "unit": "u"}
    assert req["right"]["test"] == "b"


def test_http_scorer_against_local_server():
    import json
    import threading
    from http.server import BaseHTTPRequestHandler, HTTPServer

    from labharmony.external import HttpScorer

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            assert self.path == "/score"
            body = self.rfile.read(int(self.headers["Content-Length"]))
            out = []
            for line in body.decode().splitlines():
                req = json.loads(line)
                out.append(json.dumps({"pair_id": req["pair_id"], "p": 0.75}))
            payload = ("\n".join(out) + "\n").encode()
            self.send_response(200)
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, *args):
            pass

    server = HTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        scorer = HttpScorer(f"http://127.0.0.1:{server.server_port}")
        assert scorer.score_pairs([(Triad("a"), Triad("b")),
                                   (Triad("c"), Triad("d"))]) == [0.75, 0.75]
    finally:
        server.shutdown()
