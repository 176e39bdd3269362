"""Decoder backends behind one batch contract.

A backend turns encoder input text into output text, deterministically.
Three implementations ship here: a gold oracle (pipeline round-trips), an
extractive heuristic (a cheap non-trivial baseline), and a client for a
remote model service speaking the line-delimited wire protocol:

    request:  {"id": str, "input": str, "max_tokens": int}   one JSON per line
    response: {"id": str, "output": str}                     one JSON per line
              {"id": str, "error": str}                      per-request failure

carried either over a raw TCP socket or as one HTTP POST per request to the
``/decode`` path of a loopback web endpoint.
"""
from __future__ import annotations

import json
import logging
import socket
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

import requests

from .prompting import SegmentTokens
from .schema import Schema

logger = logging.getLogger(__name__)


class BackendError(RuntimeError):
    """A backend failed to produce responses."""


class UnsupportedModeError(BackendError):
    """The backend cannot serve this request shape."""


@dataclass(frozen=True)
class DecodeRequest:
    request_id: str
    input_text: str
    max_output_tokens: int = 64


@dataclass(frozen=True)
class DecodeResponse:
    request_id: str
    output_text: str


class Backend:
    """Batch decoding contract; implementations must be deterministic."""

    def decode(self, requests_: Sequence[DecodeRequest]) -> list[DecodeResponse]:
        raise NotImplementedError


def decode_batch(backend: Backend, requests_: Sequence[DecodeRequest]) -> list[DecodeResponse]:
    """Run a batch through a backend and check the response ids cover the request ids exactly.

    Responses are returned in request order regardless of how the backend
    produced them.
    """
    ids = [r.request_id for r in requests_]
    if len(set(ids)) != len(ids):
        raise BackendError("duplicate request ids within one batch")
    responses = backend.decode(requests_)
    by_id = {r.request_id: r for r in responses}
    if len(by_id) != len(responses) or set(by_id) != set(ids):
        missing = sorted(set(ids) - set(by_id))[:5]
        extra = sorted(set(by_id) - set(ids))[:5]
        raise BackendError(f"response ids do not match request ids (missing={missing}, extra={extra})")
    return [by_id[i] for i in ids]


class OracleBackend(Backend):
    """Replays gold targets keyed by request id; unknown ids decode to "none"."""

    def __init__(self, gold_index: Mapping[str, str]):
        self._index = dict(gold_index)

    def decode(self, requests_: Sequence[DecodeRequest]) -> list[DecodeResponse]:
        out = []
        for req in requests_:
            target = self._index.get(req.request_id)
            if target is None:
                logger.warning("oracle: no gold target for id %r, answering 'none'", req.request_id)
                target = "none"
            out.append(DecodeResponse(req.request_id, target))
        return out


class ExtractiveBackend(Backend):
    """String-matching baseline for independent-mode requests.

    Categorical slots answer with the possible value whose latest
    case-insensitive occurrence appears in the context; non-categorical slots
    match against a gazetteer of values seen in the training split. Ties go to
    the later utterance, then the longer value, then lexicographic order. No
    match decodes to "none".
    """

    def __init__(
        self,
        schema: Schema,
        tokens: SegmentTokens = SegmentTokens(),
        gazetteer: Mapping[tuple[str, str], Sequence[str]] | None = None,
    ):
        self._schema = schema
        self._tokens = tokens
        self._gazetteer = {k: tuple(v) for k, v in (gazetteer or {}).items()}

    def decode(self, requests_: Sequence[DecodeRequest]) -> list[DecodeResponse]:
        return [DecodeResponse(r.request_id, self._decode_one(r)) for r in requests_]

    def _decode_one(self, req: DecodeRequest) -> str:
        utterances, domain, slot = self._split_input(req.input_text)
        slot_def = self._schema.slot(domain, slot)
        if slot_def.is_categorical:
            candidates = slot_def.possible_values
        else:
            candidates = self._gazetteer.get((domain, slot), ())
        best: tuple[int, int, str] | None = None
        for utt_idx, text in enumerate(utterances):
            lowered = text.lower()
            for value in candidates:
                if value.lower() in lowered:
                    rank = (utt_idx, len(value), value)
                    if best is None or rank > best:
                        best = rank
        return best[2] if best else "none"

    def _split_input(self, input_text: str) -> tuple[list[str], str, str]:
        toks = input_text.split()
        positions = [i for i, t in enumerate(toks) if t == self._tokens.domain]
        if not positions:
            raise UnsupportedModeError("extractive backend requires an independent-mode prompt suffix")
        di = positions[-1]
        slot_positions = [i for i in range(di + 1, len(toks)) if toks[i] == self._tokens.slot]
        if not slot_positions:
            raise UnsupportedModeError("prompt suffix lacks a slot segment")
        si = slot_positions[-1]

        utterances: list[str] = []
        current: list[str] | None = None
        for tok in toks[:di]:
            if tok in (self._tokens.user, self._tokens.system):
                if current is not None:
                    utterances.append(" ".join(current))
                current = []
            elif current is not None:
                current.append(tok)
        if current:
            utterances.append(" ".join(current))

        domain = self._resolve_domain(" ".join(toks[di + 1 : si]))
        slot = self._resolve_slot(domain, " ".join(toks[si + 1 :]))
        return utterances, domain, slot

    def _resolve_domain(self, section: str) -> str:
        # The prompt is "<name> <description...>"; recover the name by the
        # longest schema name that prefixes the section.
        best = None
        for dom in self._schema.domains:
            if section == dom.name or section.startswith(dom.name + " "):
                if best is None or len(dom.name) > len(best):
                    best = dom.name
        if best is None:
            raise UnsupportedModeError(f"cannot resolve domain from prompt section {section!r}")
        return best

    def _resolve_slot(self, domain: str, section: str) -> str:
        best = None
        for slot in self._schema.domain(domain).slots:
            if section == slot.name or section.startswith(slot.name + " "):
                if best is None or len(slot.name) > len(best):
                    best = slot.name
        if best is None:
            raise UnsupportedModeError(f"cannot resolve slot from prompt section {section!r}")
        return best


def build_gazetteer(dialogues, schema: Schema) -> dict[tuple[str, str], tuple[str, ...]]:
    """Collect observed values per non-categorical slot from a training corpus.

    Build this from the training split only, never from dev/test.
    """
    seen: dict[tuple[str, str], set[str]] = {}
    for dialogue in dialogues:
        for t in range(1, dialogue.num_user_turns + 1):
            state = dialogue.turns[2 * (t - 1)].gold_state
            for (domain, slot), _ in state.entries.items():
                if schema.has_pair(domain, slot) and not schema.slot(domain, slot).is_categorical:
                    seen.setdefault((domain, slot), set()).update(state.alts(domain, slot))
    return {k: tuple(sorted(v)) for k, v in seen.items()}


class RemoteBackend(Backend):
    """Client for the wire protocol, over TCP ("host:port") or HTTP ("http://...").

    Failures are retried per request/chunk with exponential backoff; after
    ``retries`` attempts the run fails naming the endpoint. At most
    ``max_in_flight`` requests are outstanding at any time.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        max_in_flight: int = 8,
        retries: int = 3,
        backoff: float = 0.2,
    ):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.endpoint = endpoint
        self.timeout = timeout
        self.max_in_flight = max_in_flight
        self.retries = retries
        self.backoff = backoff

    def decode(self, requests_: Sequence[DecodeRequest]) -> list[DecodeResponse]:
        if not requests_:
            return []
        if self.endpoint.startswith(("http://", "https://")):
            return self._decode_http(requests_)
        return self._decode_socket(requests_)

    # -- HTTP transport ------------------------------------------------

    def _decode_http(self, requests_: Sequence[DecodeRequest]) -> list[DecodeResponse]:
        from concurrent.futures import ThreadPoolExecutor

        url = self.endpoint.rstrip("/")
        if not url.endswith("/decode"):
            url += "/decode"
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(lambda r: self._post_one(url, r), requests_))

    def _post_one(self, url: str, req: DecodeRequest) -> DecodeResponse:
        payload = _request_line(req)
        last_error: Exception | None = None
        for attempt in range(self.retries):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = requests.post(
                    url,
                    data=payload.encode("utf-8"),
                    headers={"Content-Type": "application/json"},
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                return _parse_response_line(resp.text, expect_id=req.request_id)
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
                logger.warning("decode attempt %d for %r failed: %s", attempt + 1, req.request_id, exc)
        raise BackendError(
            f"remote backend at {self.endpoint} failed after {self.retries} attempts: {last_error}"
        )

    # -- raw socket transport -------------------------------------------

    def _decode_socket(self, requests_: Sequence[DecodeRequest]) -> list[DecodeResponse]:
        host, port = self._parse_socket_endpoint()
        out: list[DecodeResponse] = []
        for start in range(0, len(requests_), self.max_in_flight):
            chunk = requests_[start : start + self.max_in_flight]
            out.extend(self._socket_chunk(host, port, chunk))
        return out

    def _parse_socket_endpoint(self) -> tuple[str, int]:
        spec = self.endpoint
        if spec.startswith("tcp://"):
            spec = spec[len("tcp://") :]
        host, sep, port = spec.rpartition(":")
        if not sep or not port.isdigit():
            raise BackendError(f"cannot parse socket endpoint {self.endpoint!r} (want host:port)")
        return host, int(port)

    def _socket_chunk(
        self, host: str, port: int, chunk: Sequence[DecodeRequest]
    ) -> list[DecodeResponse]:
        last_error: Exception | None = None
        for attempt in range(self.retries):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with socket.create_connection((host, port), timeout=self.timeout) as conn:
                    conn.settimeout(self.timeout)
                    wire = "".join(_request_line(r) + "\n" for r in chunk)
                    conn.sendall(wire.encode("utf-8"))
                    reader = conn.makefile("r", encoding="utf-8")
                    responses = []
                    for _ in chunk:
                        line = reader.readline()
                        if not line:
                            raise BackendError("connection closed mid-batch")
                        responses.append(_parse_response_line(line))
                    return responses
            except (OSError, BackendError, ValueError) as exc:
                last_error = exc
                logger.warning("socket decode attempt %d failed: %s", attempt + 1, exc)
        raise BackendError(
            f"remote backend at {self.endpoint} failed after {self.retries} attempts: {last_error}"
        )


def _request_line(req: DecodeRequest) -> str:
    return json.dumps(
        {"id": req.request_id, "input": req.input_text, "max_tokens": req.max_output_tokens},
        ensure_ascii=False,
    )


def _parse_response_line(line: str, expect_id: str | None = None) -> DecodeResponse:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"bad response line {line!r:.120}: {exc}") from exc
    if "error" in obj:
        raise ValueError(f"server error for id {obj.get('id')!r}: {obj['error']}")
    if "id" not in obj or "output" not in obj:
        raise ValueError(f"response line missing id/output: {line!r:.120}")
    if expect_id is not None and obj["id"] != expect_id:
        raise ValueError(f"response id {obj['id']!r} does not match request id {expect_id!r}")
    return DecodeResponse(request_id=obj["id"], output_text=obj["output"])
