import json
from pathlib import Path

import pytest

from dstkit import corpus as corpus_mod
from dstkit import schema as schema_mod

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def raw_schema():
    """All 8 fixture domains, police and hospital included."""
    return schema_mod.parse_schema(FIXTURES / "schema.json")


@pytest.fixture(scope="session")
def schema(raw_schema):
    """The working 6-domain schema after the default exclusions."""
    return schema_mod.filter_domains(raw_schema, {"police", "hospital"})


@pytest.fixture(scope="session")
def dialogues(schema):
    return corpus_mod.parse_dialogues(FIXTURES / "dialogues.json", schema)


@pytest.fixture()
def dialogue_by_id(dialogues):
    return {d.dialogue_id: d for d in dialogues}


def load_golden(name: str) -> dict:
    return json.loads((GOLDEN / name).read_text(encoding="utf-8"))


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, ensure_ascii=False, indent=1), encoding="utf-8")
    return path
