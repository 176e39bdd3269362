import logging

import pytest

from dstkit.corpus import DialogueState, build_context, gold_state_at
from dstkit.decoders import (
    Backend,
    BackendError,
    DecodeRequest,
    DecodeResponse,
    ExtractiveBackend,
    OracleBackend,
    RemoteBackend,
    UnsupportedModeError,
    build_gazetteer,
    decode_batch,
)
from dstkit.prompting import Mode, expand_examples, serialize_independent, serialize_sequential
from dstkit.schema import DescriptionConfig, DomainDef, Schema, SlotDef

from conftest import FIXTURES
from doubles import HttpDouble, SocketDouble


def _req(i, text="[user] hello world"):
    return DecodeRequest(request_id=f"r{i}", input_text=text)


# -- contract ---------------------------------------------------------------


def test_decode_batch_empty():
    assert decode_batch(OracleBackend({}), []) == []


def test_decode_batch_rejects_duplicate_ids():
    with pytest.raises(BackendError, match="duplicate"):
        decode_batch(OracleBackend({}), [_req(1), _req(1)])


def test_decode_batch_reorders_by_request_id():
    class Shuffled(Backend):
        def decode(self, requests_):
            return [DecodeResponse(r.request_id, r.request_id) for r in reversed(requests_)]

    reqs = [_req(i) for i in range(10)]
    responses = decode_batch(Shuffled(), reqs)
    assert [r.request_id for r in responses] == [r.request_id for r in reqs]


def test_decode_batch_detects_missing_and_extra_ids():
    class Wrong(Backend):
        def decode(self, requests_):
            return [DecodeResponse("unexpected", "x")]

    with pytest.raises(BackendError, match="do not match"):
        decode_batch(Wrong(), [_req(1)])


# -- oracle -----------------------------------------------------------------


def test_oracle_returns_gold(caplog):
    backend = OracleBackend({"r0": "thursday"})
    assert decode_batch(backend, [_req(0)])[0].output_text == "thursday"
    with caplog.at_level(logging.WARNING):
        out = decode_batch(backend, [_req(99)])
    assert out[0].output_text == "none"
    assert "no gold target" in caplog.text


def test_oracle_serves_sequential_targets(schema, dialogues):
    examples = list(expand_examples(dialogues[:2], schema, Mode.SEQUENTIAL))
    backend = OracleBackend({e.key: e.target_text for e in examples})
    responses = decode_batch(backend, [DecodeRequest(e.key, e.input_text) for e in examples])
    assert [r.output_text for r in responses] == [e.target_text for e in examples]


# -- extractive -------------------------------------------------------------


def test_extractive_categorical_substring(schema, dialogue_by_id):
    backend = ExtractiveBackend(schema)
    d = dialogue_by_id["fix-dontcare"]
    ex = serialize_independent(
        build_context(d, 1), schema.domain("restaurant"), schema.slot("restaurant", "area"),
        gold_state_at(d, 1),
    )
    out = backend.decode([DecodeRequest("q", ex.input_text)])
    assert out[0].output_text == "centre"


def test_extractive_no_literal_digit_means_none(schema):
    # "zero stars" contains no digit, so the 0..5 value set cannot match.
    ex = serialize_independent(
        _ctx_for("i want a cheap place with zero stars"),
        schema.domain("hotel"),
        schema.slot("hotel", "stars"),
        DialogueState.empty(),
    )
    out = ExtractiveBackend(schema).decode([DecodeRequest("q", ex.input_text)])
    assert out[0].output_text == "none"


def _ctx_for(*texts):
    from dstkit.corpus import ContextWindow, Speaker

    speakers = [Speaker.USER if i % 2 == 0 else Speaker.SYSTEM for i in range(len(texts))]
    return ContextWindow("d", (len(texts) + 1) // 2, tuple(zip(speakers, texts)))


def test_extractive_later_utterance_wins(schema):
    ex = serialize_independent(
        _ctx_for("someplace in the east", "we have many", "actually the north please"),
        schema.domain("hotel"),
        schema.slot("hotel", "area"),
        DialogueState.empty(),
    )
    out = ExtractiveBackend(schema).decode([DecodeRequest("q", ex.input_text)])
    assert out[0].output_text == "north"


def test_extractive_longer_value_wins_within_utterance():
    schema = Schema(
        domains=(
            DomainDef(
                name="geo",
                slots=(SlotDef(name="region", is_categorical=True, possible_values=("east", "north east")),),
            ),
        )
    )
    ex = serialize_independent(
        _ctx_for("somewhere north east of town"),
        schema.domain("geo"),
        schema.slot("geo", "region"),
        DialogueState.empty(),
    )
    out = ExtractiveBackend(schema).decode([DecodeRequest("q", ex.input_text)])
    assert out[0].output_text == "north east"


def test_extractive_categorical_outputs_stay_in_value_set(schema, dialogues):
    backend = ExtractiveBackend(schema)
    for ex in expand_examples(dialogues[:6], schema, Mode.INDEPENDENT):
        slot = schema.slot(ex.domain, ex.slot)
        out = backend.decode([DecodeRequest(ex.key, ex.input_text)])[0].output_text
        if slot.is_categorical:
            assert out == "none" or out in slot.possible_values
        else:
            assert out == "none"  # no gazetteer given


def test_extractive_gazetteer_for_noncategorical(schema, dialogues):
    gazetteer = build_gazetteer(dialogues, schema)
    backend = ExtractiveBackend(schema, gazetteer=gazetteer)
    ex = serialize_independent(
        _ctx_for("i need a ride to magdalene college at noon"),
        schema.domain("taxi"),
        schema.slot("taxi", "destination"),
        DialogueState.empty(),
    )
    out = backend.decode([DecodeRequest("q", ex.input_text)])
    assert out[0].output_text == "magdalene college"


def test_extractive_resolves_despite_descriptions(schema, dialogue_by_id):
    config = DescriptionConfig(use_domain_desc=True, use_slot_desc=True, use_value_list=True)
    backend = ExtractiveBackend(schema)
    d = dialogue_by_id["fix-hotel-desc"]
    ex = serialize_independent(
        build_context(d, 2), schema.domain("hotel"), schema.slot("hotel", "area"),
        gold_state_at(d, 2), config=config,
    )
    out = backend.decode([DecodeRequest("q", ex.input_text)])
    assert out[0].output_text == "centre"


def test_extractive_rejects_sequential_inputs(schema, dialogues):
    ex = serialize_sequential(build_context(dialogues[0], 1), schema, gold_state_at(dialogues[0], 1))
    with pytest.raises(UnsupportedModeError):
        ExtractiveBackend(schema).decode([DecodeRequest("q", ex.input_text)])


def test_extractive_empty_context_is_none(schema):
    prompt = "[user] hi [domain] hotel [slot] area"
    out = ExtractiveBackend(schema).decode([DecodeRequest("q", prompt)])
    assert out[0].output_text == "none"


def test_build_gazetteer_noncategorical_only(schema, dialogues):
    gazetteer = build_gazetteer(dialogues, schema)
    assert all(not schema.slot(d, s).is_categorical for d, s in gazetteer)
    # alternatives are included as candidates
    assert "London Kings Cross" in gazetteer[("train", "destination")]
    # determinism
    assert gazetteer == build_gazetteer(dialogues, schema)


# -- remote -----------------------------------------------------------------


def test_remote_http_round_trip():
    with HttpDouble() as double:
        backend = RemoteBackend(double.endpoint, max_in_flight=4)
        reqs = [_req(i, f"[user] payload item{i}") for i in range(25)]
        responses = decode_batch(backend, reqs)
        assert [r.output_text for r in responses] == [f"item{i}" for i in range(25)]


def test_remote_http_deterministic():
    with HttpDouble() as double:
        backend = RemoteBackend(double.endpoint)
        reqs = [_req(i, f"[user] stable token{i}") for i in range(5)]
        first = decode_batch(backend, reqs)
        second = decode_batch(backend, reqs)
        assert first == second


def test_remote_http_retries_transient_failures():
    with HttpDouble(fail_first=2) as double:
        backend = RemoteBackend(double.endpoint, retries=3, backoff=0.01)
        out = decode_batch(backend, [_req(0, "[user] retry works")])
        assert out[0].output_text == "works"


def test_remote_http_down_names_endpoint():
    backend = RemoteBackend("http://127.0.0.1:9", timeout=0.2, retries=3, backoff=0.01)
    with pytest.raises(BackendError, match="127.0.0.1:9"):
        backend.decode([_req(0)])


def test_remote_socket_round_trip():
    with SocketDouble() as double:
        backend = RemoteBackend(double.endpoint, max_in_flight=8)
        reqs = [_req(i, f"[user] sock item{i}") for i in range(30)]
        responses = decode_batch(backend, reqs)
        assert [r.output_text for r in responses] == [f"item{i}" for i in range(30)]


def test_remote_socket_stress_bounded_in_flight():
    with SocketDouble() as double:
        backend = RemoteBackend(double.endpoint, max_in_flight=8)
        reqs = [_req(i, f"[user] bulk item{i}") for i in range(1000)]
        responses = decode_batch(backend, reqs)
        assert len(responses) == 1000
        assert all(r.output_text == f"item{i}" for i, r in enumerate(responses))


def test_remote_socket_down_names_endpoint():
    backend = RemoteBackend("127.0.0.1:9", timeout=0.2, retries=3, backoff=0.01)
    with pytest.raises(BackendError, match="127.0.0.1:9"):
        backend.decode([_req(0)])


def test_remote_bad_endpoint_spec():
    backend = RemoteBackend("not-an-endpoint")
    with pytest.raises(BackendError, match="cannot parse"):
        backend.decode([_req(0)])


def test_remote_conformance_suite_against_doubles():
    from dstkit.conformance import run_remote_conformance

    with HttpDouble() as double:
        report = run_remote_conformance(double.endpoint, n_requests=8)
        assert len(report.checks) == 3
    with SocketDouble() as double:
        report = run_remote_conformance(double.endpoint, n_requests=8)
        assert len(report.checks) == 3
