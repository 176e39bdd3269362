"""Word-level vocabulary for the service's self-contained tokenizer.

Tokenization is plain whitespace splitting, matching how the prompt files are
built. The vocabulary is frozen at training time from the training file and
shipped inside the checkpoint; anything unseen maps to the unknown token.
"""
from __future__ import annotations

import json
from collections import Counter
from pathlib import Path
from typing import Iterable

PAD, EOS, UNK = "<pad>", "</s>", "<unk>"
PAD_ID, EOS_ID, UNK_ID = 0, 1, 2


class WordVocab:
    def __init__(self, tokens: list[str]):
        if tokens[:3] != [PAD, EOS, UNK]:
            raise ValueError("vocabulary must start with the three special tokens")
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def build(cls, texts: Iterable[str], min_count: int = 1) -> "WordVocab":
        counts = Counter(tok for text in texts for tok in text.split())
        kept = sorted(
            (t for t, c in counts.items() if c >= min_count),
            key=lambda t: (-counts[t], t),
        )
        return cls([PAD, EOS, UNK] + kept)

    def encode(self, text: str, add_eos: bool = False) -> list[int]:
        ids = [self.index.get(tok, UNK_ID) for tok in text.split()]
        if add_eos:
            ids.append(EOS_ID)
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        words = []
        for i in ids:
            if i == EOS_ID:
                break
            if i == PAD_ID:
                continue
            words.append(self.tokens[i] if 0 <= i < len(self.tokens) else UNK)
        return " ".join(words)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.tokens, ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "WordVocab":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))
