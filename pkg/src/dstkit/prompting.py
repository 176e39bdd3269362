"""Serialization of dialogue contexts into prompt-augmented encoder inputs.

Two example shapes are supported. Independent decoding produces one example
per (user turn, domain, slot): the context is suffixed with a domain/slot
prompt and the target is that pair's value, or "none". Sequential decoding
produces one example per user turn: the bare context as input and every
active triplet serialized into a single target string.

All joining is single-space, utterances go in verbatim, and the segment
tokens are configurable but must never occur inside corpus text (see
:func:`find_token_collisions`).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence, TextIO

from .corpus import ContextWindow, Dialogue, DialogueState, Speaker, build_context, gold_state_at
from .schema import DescriptionConfig, DomainDef, Schema, SlotDef

NONE_TARGET = "none"


class Mode(str, Enum):
    INDEPENDENT = "independent"
    SEQUENTIAL = "sequential"


@dataclass(frozen=True)
class SegmentTokens:
    """Special tokens marking the start of each input/target segment."""

    user: str = "[user]"
    system: str = "[system]"
    domain: str = "[domain]"
    slot: str = "[slot]"
    value: str = "[value]"

    def __post_init__(self) -> None:
        toks = [self.user, self.system, self.domain, self.slot, self.value]
        if any(not t or any(c.isspace() for c in t) for t in toks):
            raise ValueError(f"segment tokens must be non-empty and whitespace-free: {toks}")
        if len(set(toks)) != len(toks):
            raise ValueError(f"segment tokens must be pairwise distinct: {toks}")

    def all(self) -> tuple[str, ...]:
        return tuple(getattr(self, f.name) for f in fields(self))


@dataclass(frozen=True)
class PromptExample:
    """One serialized training/eval example with its provenance."""

    dialogue_id: str
    turn_index: int
    domain: str | None
    slot: str | None
    input_text: str
    target_text: str
    mode: Mode

    def __post_init__(self) -> None:
        if self.mode is Mode.INDEPENDENT and (self.domain is None or self.slot is None):
            raise ValueError("independent example requires domain and slot")
        if self.mode is Mode.SEQUENTIAL and (self.domain is not None or self.slot is not None):
            raise ValueError("sequential example carries no domain/slot")

    @property
    def key(self) -> str:
        """Stable id used to match decoder responses back to examples."""
        if self.mode is Mode.INDEPENDENT:
            return f"{self.dialogue_id}::{self.turn_index}::{self.domain}::{self.slot}"
        return f"{self.dialogue_id}::{self.turn_index}"


def domain_prompt(domain: DomainDef, config: DescriptionConfig) -> str:
    """Domain name, optionally followed by its description."""
    if config.use_domain_desc and domain.description:
        return f"{domain.name} {domain.description}"
    return domain.name


def slot_prompt(slot: SlotDef, config: DescriptionConfig) -> str:
    """Slot name, optionally followed by its description and value list.

    The value list is appended only for categorical slots, values joined in
    schema order.
    """
    parts = [slot.name]
    if config.use_slot_desc and slot.description:
        parts.append(slot.description)
    if config.use_value_list and slot.is_categorical:
        parts.extend(slot.possible_values)
    return " ".join(parts)


def serialize_context(ctx: ContextWindow, tokens: SegmentTokens) -> str:
    parts: list[str] = []
    for speaker, text in ctx.utterances:
        parts.append(tokens.user if speaker is Speaker.USER else tokens.system)
        parts.append(text)
    return " ".join(parts)


def serialize_independent(
    ctx: ContextWindow,
    domain: DomainDef,
    slot: SlotDef,
    gold: DialogueState,
    tokens: SegmentTokens = SegmentTokens(),
    config: DescriptionConfig = DescriptionConfig(),
) -> PromptExample:
    """Context plus "[domain] ... [slot] ..." prompt suffix; target is the pair's value or "none"."""
    input_text = " ".join(
        [
            serialize_context(ctx, tokens),
            tokens.domain,
            domain_prompt(domain, config),
            tokens.slot,
            slot_prompt(slot, config),
        ]
    )
    value = gold.get(domain.name, slot.name)
    return PromptExample(
        dialogue_id=ctx.dialogue_id,
        turn_index=ctx.turn_index,
        domain=domain.name,
        slot=slot.name,
        input_text=input_text,
        target_text=value if value is not None else NONE_TARGET,
        mode=Mode.INDEPENDENT,
    )


def serialize_sequential(
    ctx: ContextWindow,
    schema: Schema,
    gold: DialogueState,
    tokens: SegmentTokens = SegmentTokens(),
) -> PromptExample:
    """Bare context as input; target lists every active triplet in canonical schema order."""
    parts: list[str] = []
    for domain, slot in schema.pairs():
        value = gold.get(domain.name, slot.name)
        if value is not None:
            parts.extend([tokens.domain, domain.name, tokens.slot, slot.name, tokens.value, value])
    return PromptExample(
        dialogue_id=ctx.dialogue_id,
        turn_index=ctx.turn_index,
        domain=None,
        slot=None,
        input_text=serialize_context(ctx, tokens),
        target_text=" ".join(parts) if parts else NONE_TARGET,
        mode=Mode.SEQUENTIAL,
    )


def parse_sequential(
    output_text: str, schema: Schema, tokens: SegmentTokens = SegmentTokens()
) -> tuple[DialogueState, int]:
    """Best-effort inverse of :func:`serialize_sequential`.

    Returns the parsed state plus a count of malformed segments. Never raises
    on malformed model output: garbage stretches and triplets naming unknown
    (domain, slot) pairs are skipped and counted. Later duplicates of a pair
    overwrite earlier ones.
    """
    text = output_text.strip()
    if not text or text.lower() == NONE_TARGET:
        return DialogueState.empty(), 0

    # Standalone occurrences of the three structural tokens.
    pattern = re.compile(
        r"(?<!\S)(" + "|".join(re.escape(t) for t in (tokens.domain, tokens.slot, tokens.value)) + r")(?!\S)"
    )
    matches = list(pattern.finditer(text))
    malformed = 0
    entries: dict[tuple[str, str], str] = {}

    if not matches:
        return DialogueState.empty(), 1
    if text[: matches[0].start()].strip():
        malformed += 1

    def span(a: int, b: int | None) -> str:
        return text[a : b if b is not None else len(text)].strip()

    i = 0
    while i < len(matches):
        if matches[i].group(1) != tokens.domain:
            malformed += 1
            i += 1
            continue
        if i + 2 >= len(matches) or matches[i + 1].group(1) != tokens.slot or matches[i + 2].group(1) != tokens.value:
            malformed += 1
            i += 1
            continue
        domain = span(matches[i].end(), matches[i + 1].start())
        slot = span(matches[i + 1].end(), matches[i + 2].start())
        value_end = matches[i + 3].start() if i + 3 < len(matches) else None
        value = span(matches[i + 2].end(), value_end)
        if domain and slot and value and schema.has_pair(domain, slot):
            if value.lower() == NONE_TARGET:
                # An explicit "none" states absence; it can retract an earlier triplet.
                entries.pop((domain, slot), None)
            else:
                entries[(domain, slot)] = value
        else:
            malformed += 1
        i += 3

    return DialogueState(entries), malformed


def expand_examples(
    dialogues: Sequence[Dialogue],
    schema: Schema,
    mode: Mode,
    tokens: SegmentTokens = SegmentTokens(),
    config: DescriptionConfig = DescriptionConfig(),
) -> Iterator[PromptExample]:
    """Expand a corpus into a deterministic (dialogue, turn, domain, slot) ordered stream."""
    for dialogue in dialogues:
        for t in range(1, dialogue.num_user_turns + 1):
            ctx = build_context(dialogue, t)
            gold = gold_state_at(dialogue, t)
            if mode is Mode.SEQUENTIAL:
                yield serialize_sequential(ctx, schema, gold, tokens)
            else:
                for domain, slot in schema.pairs():
                    yield serialize_independent(ctx, domain, slot, gold, tokens, config)


def find_token_collisions(
    dialogues: Sequence[Dialogue], tokens: SegmentTokens = SegmentTokens()
) -> list[tuple[str, int, str]]:
    """(dialogue_id, turn position, token) for every utterance containing a segment token.

    Any hit breaks the injectivity of serialization and means the corpus and
    token set cannot be used together.
    """
    hits = []
    for dialogue in dialogues:
        for i, turn in enumerate(dialogue.turns):
            for token in tokens.all():
                if token in turn.text:
                    hits.append((dialogue.dialogue_id, i, token))
    return hits


# Examples file: one JSON object per line, field order fixed.
_EXAMPLE_FIELDS = ("dialogue_id", "turn_index", "domain", "slot", "mode", "input", "target")


def example_to_record(example: PromptExample) -> dict:
    return {
        "dialogue_id": example.dialogue_id,
        "turn_index": example.turn_index,
        "domain": example.domain,
        "slot": example.slot,
        "mode": example.mode.value,
        "input": example.input_text,
        "target": example.target_text,
    }


def write_examples(examples: Iterable[PromptExample], out: TextIO) -> int:
    count = 0
    for example in examples:
        out.write(json.dumps(example_to_record(example), ensure_ascii=False) + "\n")
        count += 1
    return count


def read_examples(path: str | Path) -> list[PromptExample]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad example record: {exc}") from exc
            missing = [k for k in _EXAMPLE_FIELDS if k not in rec]
            if missing:
                raise ValueError(f"{path}:{lineno}: example record missing fields {missing}")
            examples.append(
                PromptExample(
                    dialogue_id=rec["dialogue_id"],
                    turn_index=int(rec["turn_index"]),
                    domain=rec["domain"],
                    slot=rec["slot"],
                    input_text=rec["input"],
                    target_text=rec["target"],
                    mode=Mode(rec["mode"]),
                )
            )
    return examples
