"""Conformance checks for servers implementing the decode wire protocol.

Any server meant to sit behind :class:`~dstkit.decoders.RemoteBackend` should
pass :func:`run_remote_conformance` unchanged: ids are matched, outputs are
deterministic, and a malformed request neither kills the service nor corrupts
later responses.
"""
from __future__ import annotations

import json
import socket
from dataclasses import dataclass

import requests as _requests

from .decoders import BackendError, DecodeRequest, RemoteBackend, decode_batch


@dataclass
class ConformanceReport:
    endpoint: str
    checks: list[str]

    def __str__(self) -> str:
        return "\n".join(f"ok {name}" for name in self.checks)


def run_remote_conformance(endpoint: str, n_requests: int = 32, max_in_flight: int = 4) -> ConformanceReport:
    """Exercise a live endpoint; raises AssertionError or BackendError on violations."""
    backend = RemoteBackend(endpoint, timeout=60.0, max_in_flight=max_in_flight)
    checks = []

    reqs = [
        DecodeRequest(request_id=f"conf-{i}", input_text=f"[user] conformance probe {i}", max_output_tokens=16)
        for i in range(n_requests)
    ]
    responses = decode_batch(backend, reqs)
    assert [r.request_id for r in responses] == [r.request_id for r in reqs]
    checks.append("id matching")

    again = decode_batch(backend, reqs)
    assert [r.output_text for r in again] == [r.output_text for r in responses], "outputs changed between calls"
    checks.append("determinism")

    _check_error_handling(endpoint)
    probe = decode_batch(backend, reqs[:1])
    assert probe[0].request_id == reqs[0].request_id
    checks.append("error handling (service stays up)")

    return ConformanceReport(endpoint=endpoint, checks=checks)


def _check_error_handling(endpoint: str) -> None:
    """Send one malformed request; the server must answer (an error) without dying."""
    if endpoint.startswith(("http://", "https://")):
        url = endpoint.rstrip("/")
        if not url.endswith("/decode"):
            url += "/decode"
        resp = _requests.post(url, data=b"this is not json", timeout=30.0)
        # Either an HTTP error status or an {"error": ...} body is acceptable.
        if resp.status_code < 400:
            obj = json.loads(resp.text)
            assert "error" in obj, f"malformed request was answered with {resp.text!r:.120}"
        return

    spec = endpoint[len("tcp://") :] if endpoint.startswith("tcp://") else endpoint
    host, _, port = spec.rpartition(":")
    with socket.create_connection((host, int(port)), timeout=30.0) as conn:
        conn.settimeout(30.0)
        conn.sendall(b"this is not json\n")
        line = conn.makefile("r", encoding="utf-8").readline()
        if not line:
            raise BackendError("server closed the connection on a malformed line instead of answering")
        obj = json.loads(line)
        assert "error" in obj, f"malformed line was answered with {line!r:.120}"
