"""Reading prompt-example files and turning them into padded tensors.

The examples file is one JSON object per line with the fields
{dialogue_id, turn_index, domain, slot, mode, input, target}; anything else
aborts with the offending line number.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch

from .vocab import PAD_ID, WordVocab

REQUIRED_FIELDS = ("dialogue_id", "turn_index", "domain", "slot", "mode", "input", "target")


class ExamplesError(ValueError):
    """Malformed examples file."""


@dataclass(frozen=True)
class Example:
    key: str
    input_text: str
    target_text: str


def read_examples(path: str | Path) -> list[Example]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExamplesError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            missing = [f for f in REQUIRED_FIELDS if f not in rec]
            if missing:
                raise ExamplesError(f"{path}:{lineno}: missing fields {missing}")
            if rec["domain"] is None:
                key = f"{rec['dialogue_id']}::{rec['turn_index']}"
            else:
                key = f"{rec['dialogue_id']}::{rec['turn_index']}::{rec['domain']}::{rec['slot']}"
            examples.append(Example(key=key, input_text=rec["input"], target_text=rec["target"]))
    if not examples:
        raise ExamplesError(f"{path}: no examples")
    return examples


def encode_input(vocab: WordVocab, text: str, max_input_tokens: int) -> list[int]:
    """Token ids for an encoder input, truncated from the left.

    Keeping the tail preserves the prompt suffix and the most recent turns
    when a context is too long.
    """
    ids = vocab.encode(text)
    if len(ids) > max_input_tokens:
        ids = ids[-max_input_tokens:]
    return ids if ids else vocab.encode("<unk>")


def make_batches(
    examples: list[Example],
    vocab: WordVocab,
    batch_size: int,
    max_input_tokens: int,
    max_output_tokens: int,
    order: list[int] | None = None,
):
    """Yield (input_ids, attention_mask, labels) batches; labels pad with -100."""
    order = order if order is not None else list(range(len(examples)))
    for start in range(0, len(order), batch_size):
        chunk = [examples[i] for i in order[start : start + batch_size]]
        enc = [encode_input(vocab, ex.input_text, max_input_tokens) for ex in chunk]
        dec = [vocab.encode(ex.target_text, add_eos=True)[:max_output_tokens] for ex in chunk]
        in_width = max(len(x) for x in enc)
        out_width = max(len(y) for y in dec)
        input_ids = torch.full((len(chunk), in_width), PAD_ID, dtype=torch.long)
        attention = torch.zeros((len(chunk), in_width), dtype=torch.long)
        labels = torch.full((len(chunk), out_width), -100, dtype=torch.long)
        for row, (x, y) in enumerate(zip(enc, dec)):
            input_ids[row, : len(x)] = torch.tensor(x)
            attention[row, : len(x)] = 1
            labels[row, : len(y)] = torch.tensor(y)
        yield input_ids, attention, labels
