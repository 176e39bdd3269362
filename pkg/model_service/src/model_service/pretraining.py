"""Local pretraining: generic pointer skills over synthetic word sequences.

No pretrained checkpoint hub is reachable from this environment, so the
service can build its own base model. The synthetic corpus teaches two
content-agnostic skills that a downstream prompt-reading model needs:

* marker selection: emit the token following a ``<mark>`` token;
* repeat lookup: several tokens repeat (as function words do in real text);
  emit the token following the repeat occurrence closest to the end of the
  sequence. That is the induction pattern a model needs to read a
  key-to-value table sitting in a prompt suffix: the mentioned key is the
  repeat whose later occurrence is rightmost.

Neither pattern encodes anything about any downstream schema or corpus. The
base vocabulary is the generic pool plus whatever token sources the caller
supplies (typically the training examples file, so downstream text is
representable).
"""
from __future__ import annotations

import json
import random
from pathlib import Path

from .config import TrainConfig
from .data import read_examples
from .training import train
from .vocab import WordVocab

MARK = "<mark>"


def _generic_pool(size: int = 260) -> list[str]:
    return [f"w{i:03d}" for i in range(size)]


def _mark_example(rng: random.Random, pool: list[str], k: int) -> tuple[str, str]:
    words = rng.choices(pool, k=k)
    i = rng.randrange(len(words))
    return " ".join(words[:i] + [MARK] + words[i:]), words[i]


def _lookup_example(rng: random.Random, pool: list[str], k: int) -> tuple[str, str]:
    """Distractor repeats early, the keyed repeat rightmost, its answer right after it."""
    words = rng.sample(pool, k)
    # a few distractor repeats, as function words repeat in real text
    for token in rng.sample(list(words), rng.randint(1, 3)):
        words.insert(rng.randrange(len(words)), token)
    anchor = rng.choice(sorted(set(words)))
    answer = rng.choice([t for t in pool if t not in words])
    counts: dict[str, int] = {}
    for w in words:
        counts[w] = counts.get(w, 0) + 1
    # the keyed occurrence must sit right of every other repeat occurrence
    last_repeat = max(i for i, w in enumerate(words) if counts[w] > 1 or w == anchor)
    insert_at = rng.randrange(last_repeat + 1, len(words) + 1)
    words[insert_at:insert_at] = [anchor, answer]
    return " ".join(words), answer


def build_pretrain_file(
    out_path: str | Path,
    token_sources: list[str | Path] | None = None,
    n_examples: int = 20000,
    seed: int = 0,
) -> Path:
    """Write a synthetic pointer-skills corpus in the examples-file format.

    ``token_sources`` are examples files whose whitespace tokens are folded
    into the word pool, so every downstream token is seen during pretraining
    (as text, never in a task-specific pattern). The file is a difficulty
    ramp (short marker selection, then short lookups, then a long mixture);
    train with a couple of curriculum epochs so the early passes see it in
    order.
    """
    rng = random.Random(seed)
    pool = set(_generic_pool())
    for source in token_sources or []:
        for ex in read_examples(source):
            pool.update(ex.input_text.split())
            pool.update(ex.target_text.split())
    pool.discard(MARK)
    pool = sorted(pool)

    quarter = n_examples // 4
    rows: list[tuple[str, str]] = []
    for _ in range(quarter):
        rows.append(_mark_example(rng, pool, rng.randint(4, 7)))
    for _ in range(quarter):
        rows.append(_lookup_example(rng, pool, rng.randint(4, 6)))
    for _ in range(n_examples - 2 * quarter):
        k = rng.randint(5, 14)
        rows.append(_mark_example(rng, pool, k) if rng.random() < 0.5 else _lookup_example(rng, pool, k))

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        for i, (text, target) in enumerate(rows):
            fh.write(
                json.dumps(
                    {
                        "dialogue_id": f"pretrain-{i:06d}",
                        "turn_index": 1,
                        "domain": "pointer",
                        "slot": "skill",
                        "mode": "independent",
                        "input": text,
                        "target": target,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return out_path


PRETRAIN_CONFIG = TrainConfig(
    base_model="tiny", batch_size=32, learning_rate=1e-3, epochs=12, curriculum_epochs=2
)


def pretrain(
    out_dir: str | Path,
    token_sources: list[str | Path] | None = None,
    n_examples: int = 20000,
    epochs: int = 12,
    seed: int = 0,
    base_model: str = "tiny",
) -> Path:
    """Build a base checkpoint with the pointer-skills corpus."""
    import dataclasses
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        corpus = build_pretrain_file(Path(tmp) / "pretrain.jsonl", token_sources, n_examples, seed)
        config = dataclasses.replace(
            PRETRAIN_CONFIG, base_model=base_model, epochs=epochs, seed=seed
        )
        return train(corpus, config, out_dir)


def _probe_pool(decoder) -> list[str]:
    return [t for t in decoder.vocab.tokens if not t.startswith("<")]


def mark_selection_accuracy(checkpoint: str | Path, n_probes: int = 50, seed: int = 1) -> float:
    """Sanity probe for a pretrained base: accuracy on fresh marker-selection inputs."""
    from .serving import GreedyDecoder

    decoder = GreedyDecoder(checkpoint)
    rng = random.Random(seed)
    pool = _probe_pool(decoder)
    ok = 0
    for _ in range(n_probes):
        text, target = _mark_example(rng, pool, 10)
        ok += decoder.decode_text(text, 3).strip() == target
    return ok / n_probes


def lookup_accuracy(checkpoint: str | Path, n_probes: int = 50, seed: int = 2) -> float:
    """Sanity probe for a pretrained base: accuracy on fresh rare-repeat lookups."""
    from .serving import GreedyDecoder

    decoder = GreedyDecoder(checkpoint)
    rng = random.Random(seed)
    pool = _probe_pool(decoder)
    ok = 0
    for _ in range(n_probes):
        text, target = _lookup_example(rng, pool, 9)
        ok += decoder.decode_text(text, 3).strip() == target
    return ok / n_probes
