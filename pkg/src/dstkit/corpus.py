"""Dialogue corpora: turns, cumulative gold states, context windows, statistics.

Dialogues are parsed from SGD-style JSON (the MultiWOZ 2.2 layout) or imported
from the M2M native format into one in-memory model. Utterance text is kept
verbatim: no lowercasing, no label normalization.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .schema import Schema

logger = logging.getLogger(__name__)


class CorpusError(ValueError):
    """Structurally invalid dialogue input."""


class Speaker(str, Enum):
    USER = "USER"
    SYSTEM = "SYSTEM"


# Reserved target words; gold values must never collide with the absence marker.
NONE_VALUE = "none"
DONTCARE_VALUE = "dontcare"


def _clean_value(value: str, where: str) -> str:
    cleaned = value.strip()
    if not cleaned:
        raise CorpusError(f"{where}: empty slot value")
    if cleaned.lower() == NONE_VALUE:
        raise CorpusError(f"{where}: literal value 'none' clashes with the absence marker")
    return cleaned


@dataclass(frozen=True)
class DialogueState:
    """Mapping (domain, slot) -> value; a pair that is absent means no constraint.

    ``entries`` holds the canonical value (the first annotated alternative).
    ``alternatives`` keeps every annotated variant for evaluation; it does not
    take part in equality. "dontcare" is an ordinary stored value, distinct
    from absence.
    """

    entries: dict[tuple[str, str], str]
    alternatives: dict[tuple[str, str], tuple[str, ...]] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        cleaned = {
            (domain, slot): _clean_value(value, f"({domain}, {slot})")
            for (domain, slot), value in self.entries.items()
        }
        object.__setattr__(self, "entries", cleaned)
        object.__setattr__(self, "alternatives", dict(self.alternatives))

    @classmethod
    def empty(cls) -> "DialogueState":
        return cls({})

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str, str]]) -> "DialogueState":
        return cls({(d, s): v for d, s, v in pairs})

    def get(self, domain: str, slot: str) -> str | None:
        return self.entries.get((domain, slot))

    def alts(self, domain: str, slot: str) -> tuple[str, ...]:
        """All accepted gold variants for the pair; falls back to the canonical value."""
        key = (domain, slot)
        if key in self.alternatives:
            return self.alternatives[key]
        value = self.entries.get(key)
        return (value,) if value is not None else ()

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: tuple[str, str]) -> bool:
        return key in self.entries


@dataclass(frozen=True)
class Turn:
    speaker: Speaker
    text: str
    gold_state: DialogueState | None = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise CorpusError("empty utterance")


@dataclass(frozen=True)
class Dialogue:
    """Turns strictly alternate USER, SYSTEM, ... starting with USER."""

    dialogue_id: str
    turns: tuple[Turn, ...]

    def __post_init__(self) -> None:
        for i, turn in enumerate(self.turns):
            expected = Speaker.USER if i % 2 == 0 else Speaker.SYSTEM
            if turn.speaker is not expected:
                raise CorpusError(
                    f"dialogue {self.dialogue_id!r}: turn {i} is {turn.speaker.value}, "
                    f"expected {expected.value}"
                )
            if expected is Speaker.USER and turn.gold_state is None:
                raise CorpusError(f"dialogue {self.dialogue_id!r}: user turn {i} lacks a gold state")
            if expected is Speaker.SYSTEM and turn.gold_state is not None:
                raise CorpusError(f"dialogue {self.dialogue_id!r}: system turn {i} carries a gold state")

    @property
    def num_user_turns(self) -> int:
        return (len(self.turns) + 1) // 2


@dataclass(frozen=True)
class ContextWindow:
    """Utterances U_1, A_1, ..., A_{t-1}, U_t: everything up to the t-th user turn."""

    dialogue_id: str
    turn_index: int
    utterances: tuple[tuple[Speaker, str], ...]


def build_context(dialogue: Dialogue, t: int) -> ContextWindow:
    """Context window ending at the t-th user utterance (1-based)."""
    if not 1 <= t <= dialogue.num_user_turns:
        raise CorpusError(
            f"dialogue {dialogue.dialogue_id!r}: user-turn index {t} out of range "
            f"1..{dialogue.num_user_turns}"
        )
    cut = dialogue.turns[: 2 * t - 1]
    return ContextWindow(
        dialogue_id=dialogue.dialogue_id,
        turn_index=t,
        utterances=tuple((turn.speaker, turn.text) for turn in cut),
    )


def gold_state_at(dialogue: Dialogue, t: int) -> DialogueState:
    """Annotated cumulative state at the t-th user turn (1-based)."""
    if not 1 <= t <= dialogue.num_user_turns:
        raise CorpusError(
            f"dialogue {dialogue.dialogue_id!r}: user-turn index {t} out of range "
            f"1..{dialogue.num_user_turns}"
        )
    state = dialogue.turns[2 * (t - 1)].gold_state
    assert state is not None
    return state


def _state_from_frames(
    frames: Sequence[Mapping], schema: Schema, where: str
) -> DialogueState:
    entries: dict[tuple[str, str], str] = {}
    alternatives: dict[tuple[str, str], tuple[str, ...]] = {}
    for frame in frames:
        domain = frame.get("service") or frame.get("domain")
        if not domain:
            raise CorpusError(f"{where}: frame without a service name")
        if not schema.has_domain(domain):
            # Excluded or unknown domain: the whole frame is dropped.
            continue
        slot_values = (frame.get("state") or {}).get("slot_values") or {}
        for slot, values in slot_values.items():
            if not schema.has_pair(domain, slot):
                logger.warning("%s: dropping unknown slot (%s, %s)", where, domain, slot)
                continue
            if isinstance(values, str):
                values = [values]
            alts: list[str] = []
            for value in values:
                # MultiWOZ 2.1-style variants packed into one string.
                for alt in str(value).split("|"):
                    alt = _clean_value(alt, f"{where}: ({domain}, {slot})")
                    if alt not in alts:
                        alts.append(alt)
            if not alts:
                continue
            entries[(domain, slot)] = alts[0]
            if len(alts) > 1:
                alternatives[(domain, slot)] = tuple(alts)
    return DialogueState(entries, alternatives)


def _dialogue_files(path: Path) -> list[Path]:
    if path.is_file():
        return [path]
    files = sorted(p for p in path.rglob("*.json") if p.name != "schema.json")
    if not files:
        raise CorpusError(f"{path}: no dialogue JSON files found")
    return files


def parse_dialogues(path: str | Path, schema: Schema) -> list[Dialogue]:
    """Parse SGD-format dialogue JSON; ``path`` may be one file or a directory tree.

    The schema is expected to be domain-filtered already: states referencing
    domains outside it are dropped, unknown slots inside known domains are
    dropped with a warning.
    """
    dialogues: list[Dialogue] = []
    for file in _dialogue_files(Path(path)):
        try:
            raw = json.loads(file.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{file}: not valid JSON: {exc}") from exc
        if not isinstance(raw, list):
            raise CorpusError(f"{file}: expected a top-level list of dialogues")
        for item in raw:
            dialogues.append(_parse_sgd_dialogue(item, schema, file))
    return dialogues


def _parse_sgd_dialogue(item: Mapping, schema: Schema, file: Path) -> Dialogue:
    dialogue_id = item.get("dialogue_id")
    if not dialogue_id:
        raise CorpusError(f"{file}: dialogue without a dialogue_id")
    turns = []
    for i, t in enumerate(item.get("turns", [])):
        speaker_raw = str(t.get("speaker", "")).upper()
        try:
            speaker = Speaker(speaker_raw)
        except ValueError:
            raise CorpusError(f"dialogue {dialogue_id!r}: turn {i} has unknown speaker {speaker_raw!r}")
        text = t.get("utterance", "")
        gold = None
        if speaker is Speaker.USER:
            gold = _state_from_frames(t.get("frames", []), schema, f"dialogue {dialogue_id!r} turn {i}")
        turns.append(Turn(speaker=speaker, text=text, gold_state=gold))
    return Dialogue(dialogue_id=str(dialogue_id), turns=tuple(turns))


def parse_m2m_dialogues(path: str | Path, schema: Schema, domain: str | None = None) -> list[Dialogue]:
    """Import M2M native-format dialogues into the shared in-memory model.

    M2M files are single-domain; each record holds the system response to the
    previous user turn followed by the next user utterance, with the state
    annotated after the user spoke. ``domain`` defaults to the schema's sole
    domain.
    """
    if domain is None:
        if len(schema.domains) != 1:
            raise CorpusError("schema has several domains, pass the M2M domain explicitly")
        domain = schema.domains[0].name

    dialogues = []
    for file in _dialogue_files(Path(path)):
        try:
            raw = json.loads(file.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{file}: not valid JSON: {exc}") from exc
        for item in raw:
            dialogue_id = str(item.get("dialogue_id", ""))
            if not dialogue_id:
                raise CorpusError(f"{file}: dialogue without a dialogue_id")
            turns: list[Turn] = []
            for i, record in enumerate(item.get("turns", [])):
                where = f"dialogue {dialogue_id!r} record {i}"
                sys_text = (record.get("system_utterance") or {}).get("text", "")
                if sys_text.strip():
                    turns.append(Turn(speaker=Speaker.SYSTEM, text=sys_text))
                user_text = (record.get("user_utterance") or {}).get("text", "")
                if not user_text.strip():
                    continue  # closing system turn with no user reply
                entries = {}
                if schema.has_domain(domain):
                    for sv in record.get("dialogue_state", []):
                        slot, value = sv.get("slot"), sv.get("value")
                        if not schema.has_pair(domain, slot):
                            logger.warning("%s: dropping unknown slot (%s, %s)", where, domain, slot)
                            continue
                        entries[(domain, slot)] = _clean_value(str(value), where)
                turns.append(Turn(speaker=Speaker.USER, text=user_text, gold_state=DialogueState(entries)))
            dialogues.append(Dialogue(dialogue_id=dialogue_id, turns=tuple(turns)))
    return dialogues


@dataclass(frozen=True)
class CorpusStats:
    num_dialogues: int
    num_turns: int
    num_user_turns: int
    avg_turns_per_dialogue: float
    avg_tokens_per_turn: float
    tokenizer: str = "whitespace"


def corpus_stats(dialogues: Sequence[Dialogue]) -> CorpusStats:
    """Corpus-level counts; token counts use whitespace splitting."""
    num_dialogues = len(dialogues)
    num_turns = sum(len(d.turns) for d in dialogues)
    num_user = sum(d.num_user_turns for d in dialogues)
    num_tokens = sum(len(turn.text.split()) for d in dialogues for turn in d.turns)
    return CorpusStats(
        num_dialogues=num_dialogues,
        num_turns=num_turns,
        num_user_turns=num_user,
        avg_turns_per_dialogue=num_turns / num_dialogues if num_dialogues else 0.0,
        avg_tokens_per_turn=num_tokens / num_turns if num_turns else 0.0,
    )


def dialogue_to_json(dialogue: Dialogue) -> dict:
    """Debug dump in the SGD shape; parsing then dumping round-trips text byte-exactly."""
    turns = []
    for turn in dialogue.turns:
        obj: dict = {"speaker": turn.speaker.value, "utterance": turn.text}
        if turn.gold_state is not None:
            by_domain: dict[str, dict[str, list[str]]] = {}
            for (domain, slot), _ in turn.gold_state.entries.items():
                by_domain.setdefault(domain, {})[slot] = list(turn.gold_state.alts(domain, slot))
            obj["frames"] = [
                {"service": domain, "state": {"slot_values": slots}}
                for domain, slots in sorted(by_domain.items())
            ]
        turns.append(obj)
    return {"dialogue_id": dialogue.dialogue_id, "turns": turns}
