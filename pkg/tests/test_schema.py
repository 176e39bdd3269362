import logging

import pytest

from dstkit.schema import (
    DescriptionConfig,
    DomainDef,
    Schema,
    SchemaError,
    SlotDef,
    filter_domains,
    load_description_table,
    parse_schema,
    resolve_descriptions,
    schema_hash,
)

from conftest import FIXTURES, write_json


def test_parse_fixture_counts(raw_schema):
    assert len(raw_schema.domains) == 8
    assert raw_schema.num_categorical == 11
    assert raw_schema.num_noncategorical == 17
    # every slot is exactly one of the two
    assert raw_schema.num_categorical + raw_schema.num_noncategorical == sum(
        len(d.slots) for d in raw_schema.domains
    )


def test_parse_preserves_order(raw_schema):
    assert [d.name for d in raw_schema.domains[:3]] == ["train", "hotel", "restaurant"]
    assert [s.name for s in raw_schema.domain("train").slots[:3]] == [
        "destination",
        "departure",
        "day",
    ]


def test_missing_description_is_none(tmp_path):
    path = write_json(
        tmp_path / "s.json",
        [{"service_name": "a", "slots": [{"name": "x", "description": ""}]}],
    )
    schema = parse_schema(path)
    assert schema.domain("a").description is None
    assert schema.domain("a").slot("x").description is None


def test_duplicate_domain_names_rejected(tmp_path):
    path = write_json(
        tmp_path / "s.json",
        [{"service_name": "a", "slots": []}, {"service_name": "a", "slots": []}],
    )
    with pytest.raises(SchemaError, match="duplicate domain"):
        parse_schema(path)


def test_duplicate_slot_names_rejected(tmp_path):
    path = write_json(
        tmp_path / "s.json",
        [{"service_name": "a", "slots": [{"name": "x"}, {"name": "x"}]}],
    )
    with pytest.raises(SchemaError, match="duplicate slot"):
        parse_schema(path)


def test_empty_domain_list_rejected(tmp_path):
    path = write_json(tmp_path / "s.json", [])
    with pytest.raises(SchemaError, match="no domains"):
        parse_schema(path)


def test_parse_error_names_offender(tmp_path):
    path = write_json(
        tmp_path / "s.json",
        [{"service_name": "hotel", "slots": [{"description": "nameless"}]}],
    )
    with pytest.raises(SchemaError, match="hotel"):
        parse_schema(path)


def test_noncategorical_value_list_dropped(tmp_path, caplog):
    path = write_json(
        tmp_path / "s.json",
        [{"service_name": "a", "slots": [{"name": "x", "is_categorical": False, "possible_values": ["1"]}]}],
    )
    with caplog.at_level(logging.WARNING):
        schema = parse_schema(path)
    assert schema.domain("a").slot("x").possible_values == ()
    assert "non-categorical" in caplog.text


def test_slotdef_invariants():
    with pytest.raises(SchemaError):
        SlotDef(name="x", is_categorical=False, possible_values=("a",))
    with pytest.raises(SchemaError):
        SlotDef(name="x", is_categorical=True, possible_values=("a", "a"))
    with pytest.raises(SchemaError):
        SlotDef(name="")


def test_filter_domains_default_exclusions(raw_schema):
    filtered = filter_domains(raw_schema, {"police", "hospital"})
    assert len(filtered.domains) == 6
    assert not filtered.has_domain("police")
    assert [d.name for d in filtered.domains] == [
        d.name for d in raw_schema.domains if d.name not in {"police", "hospital"}
    ]


def test_filter_domains_identity_and_idempotence(raw_schema):
    assert filter_domains(raw_schema, set()) == raw_schema
    once = filter_domains(raw_schema, {"police", "hospital"})
    assert filter_domains(once, {"police", "hospital"}) == once


def test_filter_unknown_names_silently_skipped(raw_schema):
    assert filter_domains(raw_schema, {"does-not-exist"}) == raw_schema


def test_filter_to_empty_warns(caplog):
    schema = Schema(domains=(DomainDef(name="a"), DomainDef(name="b")))
    with caplog.at_level(logging.WARNING):
        empty = filter_domains(schema, {"a", "b"})
    assert empty.domains == ()
    assert "removed every domain" in caplog.text


def test_resolve_descriptions_deterministic(raw_schema):
    table = load_description_table(FIXTURES / "multiwoz21_descriptions.tsv")
    cfg = DescriptionConfig(sampling_seed=0)
    first = resolve_descriptions(raw_schema, table, cfg)
    second = resolve_descriptions(raw_schema, table, cfg)
    assert schema_hash(first) == schema_hash(second)
    assert first.slot("train", "day").description in [
        d for (dom, s), cands in table.items() if (dom, s) == ("train", "day") for d in cands
    ]


def test_resolve_descriptions_seed_changes_can_change_choice(raw_schema):
    table = load_description_table(FIXTURES / "multiwoz21_descriptions.tsv")
    picks = {
        seed: resolve_descriptions(raw_schema, table, DescriptionConfig(sampling_seed=seed))
        .slot("hotel", "internet")
        .description
        for seed in range(8)
    }
    assert len(set(picks.values())) > 1


def test_resolve_per_slot_keying_is_stable(raw_schema):
    # Adding an override for an unrelated slot must not move other choices.
    table = load_description_table(FIXTURES / "multiwoz21_descriptions.tsv")
    cfg = DescriptionConfig(sampling_seed=3)
    base = resolve_descriptions(raw_schema, table, cfg)
    bigger = dict(table)
    bigger[("taxi", "leaveat")] = ["when the taxi should pick you up"]
    extended = resolve_descriptions(raw_schema, bigger, cfg)
    for dom, slot in [("train", "day"), ("hotel", "internet"), ("hotel", "pricerange")]:
        assert base.slot(dom, slot).description == extended.slot(dom, slot).description


def test_resolve_descriptions_identity_without_overrides(schema):
    assert resolve_descriptions(schema, None) == schema


def test_resolve_unknown_pair_listed():
    schema = Schema(domains=(DomainDef(name="a", slots=(SlotDef(name="x"),)),))
    with pytest.raises(SchemaError, match=r"\('a', 'nope'\)"):
        resolve_descriptions(schema, {("a", "nope"): ["text"]})


def test_m2m_borrowed_descriptions_cover_all_slots():
    schema = parse_schema(FIXTURES / "m2m_schema.json", provenance="m2m")
    assert all(s.description is None for d in schema.domains for s in d.slots)
    table = load_description_table(FIXTURES / "m2m_descriptions.tsv")
    resolved = resolve_descriptions(schema, table)
    movie = resolved.domain("movie")
    assert movie.description is not None
    assert len(movie.slots) == 5
    assert all(s.description for s in movie.slots)
    assert movie.slot("movie").description == "name of the movie"
    # borrowing never renames slots
    assert [s.name for s in movie.slots] == [s.name for s in schema.domain("movie").slots]


def test_description_table_rejects_bad_rows(tmp_path):
    bad = tmp_path / "t.tsv"
    bad.write_text("a\tb\n", encoding="utf-8")
    with pytest.raises(SchemaError, match="3 tab-separated"):
        load_description_table(bad)
