"""Assembling per-request decoder outputs into per-turn dialogue states."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, TextIO

from .corpus import DialogueState
from .prompting import Mode, PromptExample, SegmentTokens, parse_sequential
from .schema import Schema

logger = logging.getLogger(__name__)

NONE_OUTPUT = "none"


class AssemblyError(ValueError):
    """Responses do not line up with the expected (turn, domain, slot) grid."""


@dataclass(frozen=True)
class TurnPrediction:
    dialogue_id: str
    turn_index: int
    state: DialogueState
    malformed_segments: int = 0

    @property
    def turn_id(self) -> tuple[str, int]:
        return (self.dialogue_id, self.turn_index)


def assemble_independent(
    responses: Iterable[tuple[PromptExample, str]], schema: Schema
) -> list[TurnPrediction]:
    """Group one output per (turn, domain, slot) into states; "none" outputs are dropped.

    Every turn that appears must be covered for every schema pair, exactly
    once; gaps and duplicates raise with the offending keys listed.
    """
    grid: dict[tuple[str, int], dict[tuple[str, str], str]] = {}
    order: list[tuple[str, int]] = []
    for example, output in responses:
        if example.mode is not Mode.INDEPENDENT:
            raise AssemblyError(f"example {example.key!r} is not an independent-mode example")
        turn_id = (example.dialogue_id, example.turn_index)
        if turn_id not in grid:
            grid[turn_id] = {}
            order.append(turn_id)
        pair = (example.domain, example.slot)
        if pair in grid[turn_id]:
            raise AssemblyError(f"duplicate response for turn {turn_id} pair {pair}")
        grid[turn_id][pair] = output

    expected = [(d.name, s.name) for d, s in schema.pairs()]
    gaps = [
        (turn_id, pair)
        for turn_id in order
        for pair in expected
        if pair not in grid[turn_id]
    ]
    if gaps:
        shown = ", ".join(f"{t}:{p}" for t, p in gaps[:10])
        raise AssemblyError(f"{len(gaps)} missing (turn, domain, slot) responses: {shown}")

    predictions = []
    for dialogue_id, turn_index in order:
        entries = {}
        for pair, output in grid[(dialogue_id, turn_index)].items():
            value = output.strip()
            if value.lower() == NONE_OUTPUT or not value:
                continue
            entries[pair] = value
        predictions.append(
            TurnPrediction(dialogue_id=dialogue_id, turn_index=turn_index, state=DialogueState(entries))
        )
    return predictions


def assemble_sequential(
    responses: Iterable[tuple[PromptExample, str]],
    schema: Schema,
    tokens: SegmentTokens = SegmentTokens(),
) -> list[TurnPrediction]:
    """Parse one output per user turn into a state; malformed segments are counted, never fatal."""
    predictions = []
    seen = set()
    for example, output in responses:
        if example.mode is not Mode.SEQUENTIAL:
            raise AssemblyError(f"example {example.key!r} is not a sequential-mode example")
        turn_id = (example.dialogue_id, example.turn_index)
        if turn_id in seen:
            raise AssemblyError(f"duplicate response for turn {turn_id}")
        seen.add(turn_id)
        state, malformed = parse_sequential(output, schema, tokens)
        predictions.append(
            TurnPrediction(
                dialogue_id=example.dialogue_id,
                turn_index=example.turn_index,
                state=state,
                malformed_segments=malformed,
            )
        )
    return predictions


# Predictions file: one line per (turn, domain, slot); a row with a null pair
# and value "none" marks a turn whose predicted state is empty, so turn
# coverage survives the round trip. Readers tolerate "none" rows anywhere.


def write_predictions(predictions: Sequence[TurnPrediction], out: TextIO) -> int:
    count = 0
    for pred in predictions:
        rows = [
            {"dialogue_id": pred.dialogue_id, "turn_index": pred.turn_index, "domain": d, "slot": s, "value": v}
            for (d, s), v in pred.state.entries.items()
        ]
        if not rows:
            rows = [
                {
                    "dialogue_id": pred.dialogue_id,
                    "turn_index": pred.turn_index,
                    "domain": None,
                    "slot": None,
                    "value": NONE_OUTPUT,
                }
            ]
        for row in rows:
            out.write(json.dumps(row, ensure_ascii=False) + "\n")
            count += 1
    return count


def read_predictions(path: str | Path) -> list[TurnPrediction]:
    grid: dict[tuple[str, int], dict[tuple[str, str], str]] = {}
    order: list[tuple[str, int]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AssemblyError(f"{path}:{lineno}: bad prediction row: {exc}") from exc
            turn_id = (row["dialogue_id"], int(row["turn_index"]))
            if turn_id not in grid:
                grid[turn_id] = {}
                order.append(turn_id)
            value = str(row.get("value", "")).strip()
            if row.get("domain") is None or row.get("slot") is None:
                continue
            if not value or value.lower() == NONE_OUTPUT:
                continue
            grid[turn_id][(row["domain"], row["slot"])] = value
    return [
        TurnPrediction(dialogue_id=d, turn_index=t, state=DialogueState(dict(grid[(d, t)])))
        for d, t in order
    ]
