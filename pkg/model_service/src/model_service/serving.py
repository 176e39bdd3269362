"""Greedy decoding behind the line-delimited wire protocol.

Requests are one JSON object per line: {"id", "input", "max_tokens"}; the
reply is {"id", "output"} or, for an unusable request, {"id", "error"} while
the service stays up. Both a raw TCP listener and an HTTP POST /decode
endpoint speak the identical content; pick one with the endpoint string
("host:port" vs "http://host:port").
"""
from __future__ import annotations

import json
import logging
import socketserver
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import torch
from transformers import T5ForConditionalGeneration

from .data import encode_input
from .vocab import WordVocab

logger = logging.getLogger(__name__)


class GreedyDecoder:
    """Deterministic greedy decoding over a trained checkpoint.

    Requests are processed one at a time under a lock, so outputs do not
    depend on arrival order or concurrency.
    """

    def __init__(self, checkpoint: str | Path):
        checkpoint = Path(checkpoint)
        self.vocab = WordVocab.load(checkpoint / "vocab.json")
        self.model = T5ForConditionalGeneration.from_pretrained(checkpoint)
        self.model.eval()
        self.config = json.loads((checkpoint / "service_config.json").read_text(encoding="utf-8"))
        self._lock = threading.Lock()

    def decode_text(self, input_text: str, max_tokens: int = 64) -> str:
        ids = encode_input(self.vocab, input_text, self.config["max_input_tokens"])
        input_ids = torch.tensor([ids], dtype=torch.long)
        with self._lock, torch.no_grad():
            generated = self.model.generate(
                input_ids=input_ids,
                attention_mask=torch.ones_like(input_ids),
                max_new_tokens=max(1, min(max_tokens, self.config["max_output_tokens"])),
                do_sample=False,
                num_beams=1,
            )
        return self.vocab.decode(generated[0].tolist())


def handle_line(decoder: GreedyDecoder, line: str | bytes) -> dict:
    """One request line in, one response object out; never raises."""
    request_id = ""
    try:
        obj = json.loads(line)
        request_id = obj.get("id", "")
        if not isinstance(obj.get("input"), str):
            raise ValueError("request must carry a string 'input' field")
        max_tokens = int(obj.get("max_tokens", 64))
        return {"id": request_id, "output": decoder.decode_text(obj["input"], max_tokens)}
    except Exception as exc:
        logger.warning("bad request (%s): %r", exc, line[:120])
        return {"id": request_id, "error": str(exc)}


class _HttpHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        if self.path != "/decode":
            self.send_error(404, "only POST /decode is served")
            return
        body = self.rfile.read(int(self.headers.get("Content-Length", 0)))
        reply = handle_line(self.server.decoder, body)
        data = (json.dumps(reply, ensure_ascii=False) + "\n").encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


class _TcpHandler(socketserver.StreamRequestHandler):
    def handle(self):
        for line in self.rfile:
            if not line.strip():
                continue
            reply = handle_line(self.server.decoder, line)
            self.wfile.write((json.dumps(reply, ensure_ascii=False) + "\n").encode("utf-8"))
            self.wfile.flush()


class ModelServer:
    """A wire-protocol server bound to one endpoint; use as a context manager in tests."""

    def __init__(self, checkpoint: str | Path, endpoint: str):
        self.decoder = GreedyDecoder(checkpoint)
        self.endpoint = endpoint
        if endpoint.startswith("http://"):
            host, port = _host_port(endpoint[len("http://") :].rstrip("/"))
            self.server = ThreadingHTTPServer((host, port), _HttpHandler)
        else:
            spec = endpoint[len("tcp://") :] if endpoint.startswith("tcp://") else endpoint
            socketserver.ThreadingTCPServer.allow_reuse_address = True
            self.server = socketserver.ThreadingTCPServer(_host_port(spec), _TcpHandler)
            self.server.daemon_threads = True
        self.server.decoder = self.decoder
        self._thread: threading.Thread | None = None

    @property
    def bound_endpoint(self) -> str:
        host, port = self.server.server_address[:2]
        prefix = "http://" if isinstance(self.server, ThreadingHTTPServer) else ""
        return f"{prefix}{host}:{port}"

    def serve_forever(self) -> None:
        logger.info("serving %s", self.bound_endpoint)
        self.server.serve_forever()

    def __enter__(self):
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


def _host_port(spec: str) -> tuple[str, int]:
    host, sep, port = spec.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"cannot parse endpoint {spec!r} (want host:port)")
    return host, int(port)
