"""Adapters that fetch compatibility scores from an external backend.

Wire format, both transports: request JSON-lines
``{"pair_id": <int>, "left": {triad}, "right": {triad}}`` and response
lines ``{"pair_id": <int>, "p": <float>}``. The subprocess adapter speaks
the format over stdin/stdout; the HTTP adapter POSTs the request body to
``/score`` and reads the response body the same way.
"""

from __future__ import annotations

import json
import subprocess
import urllib.request

from .errors import ParseError
from .types import Triad


def _request_lines(pairs) -> str:
    lines = []
    for i, (left, right) in enumerate(pairs):
        lines.append(json.dumps(
            {"pair_id": i, "left": left.as_dict(), "right": right.as_dict()}
        ))
    return "\n".join(lines) + "\n" if lines else ""


def _parse_scores(text: str, expected: int) -> list[float]:
    scores: dict[int, float] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            scores[int(obj["pair_id"])] = float(obj["p"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"bad scorer response line {line!r}") from exc
    missing = [i for i in range(expected) if i not in scores]
    if missing:
        raise ParseError(f"scorer response missing pair ids {missing[:5]}")
    return [scores[i] for i in range(expected)]


class ExternalProcessScorer:
    """Scores pairs by piping the wire format through a subprocess.

    The command is launched once per call; it must read JSON-lines on
    stdin until EOF and write one response line per request.
    """

    version = "external-process"

    def __init__(self, argv: list[str], timeout: float = 60.0):
        self.argv = list(argv)
        self.timeout = timeout

    def score_pairs(self, pairs) -> list[float]:
        pairs = list(pairs)
        if not pairs:
            return []
        proc = subprocess.run(
            self.argv,
            input=_request_lines(pairs),
            capture_output=True,
            text=True,
            timeout=self.timeout,
        )
        if proc.returncode != 0:
            raise ParseError(
                f"external scorer exited with {proc.returncode}: {proc.stderr[:200]}"
            )
        return _parse_scores(proc.stdout, len(pairs))

    def score(self, query: Triad, candidate: Triad) -> float:
        return self.score_pairs([(query, candidate)])[0]


class HttpScorer:
    """Scores pairs via POST /score on a remote service."""

    version = "external-http"

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def score_pairs(self, pairs) -> list[float]:
        pairs = list(pairs)
        if not pairs:
            return []
        body = _request_lines(pairs).encode("utf-8")
        request = urllib.request.Request(
            self.base_url + "/score",
            data=body,
            headers={"Content-Type": "application/x-ndjson"},
            method="POST",
        )
        with urllib.request.urlopen(request, timeout=self.timeout) as response:
            text = response.read().decode("utf-8")
        return _parse_scores(text, len(pairs))

    def score(self, query: Triad, candidate: Triad) -> float:
        return self.score_pairs([(query, candidate)])[0]
