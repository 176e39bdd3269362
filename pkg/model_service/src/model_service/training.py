"""Training loop: sequence-to-sequence cross-entropy with decoupled-weight-decay Adam.

Gradients are clipped to unit norm and the learning rate follows a linear
warmup then linear decay; without both, from-scratch runs at this scale
destabilize after the first few epochs. A checkpoint directory holds the
model weights, the frozen vocabulary, the resolved configuration, and a
line-delimited training log of {step, loss} records.
"""
from __future__ import annotations

import json
import logging
import math
import random
from pathlib import Path

import torch
from transformers import T5Config, T5ForConditionalGeneration

from .config import ARCHS, TrainConfig
from .data import make_batches, read_examples
from .vocab import EOS_ID, PAD_ID, WordVocab

logger = logging.getLogger(__name__)

OPTIMIZER_NAME = "adamw (adam with decoupled weight decay)"


def build_model(base_model: str, vocab_size: int) -> T5ForConditionalGeneration:
    arch = ARCHS[base_model]
    config = T5Config(
        vocab_size=vocab_size,
        pad_token_id=PAD_ID,
        eos_token_id=EOS_ID,
        decoder_start_token_id=PAD_ID,
        num_decoder_layers=arch["num_layers"],
        **arch,
    )
    return T5ForConditionalGeneration(config)


def train(
    examples_path: str | Path,
    config: TrainConfig,
    out_dir: str | Path,
    init_from: str | Path | None = None,
) -> Path:
    """Train on an examples file and write a checkpoint directory.

    ``init_from`` continues from an existing checkpoint (its vocabulary is
    reused so the weights stay meaningful); otherwise the model starts from a
    fresh initialization and the vocabulary is built from the training file.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(config.seed)

    examples = read_examples(examples_path)
    if init_from is not None:
        vocab = WordVocab.load(Path(init_from) / "vocab.json")
        model = T5ForConditionalGeneration.from_pretrained(init_from)
    else:
        vocab = WordVocab.build(
            [ex.input_text for ex in examples] + [ex.target_text for ex in examples]
        )
        model = build_model(config.base_model, len(vocab))
    logger.info(
        "training %s model (%d params) on %d examples, vocab %d",
        config.base_model, sum(p.numel() for p in model.parameters()), len(examples), len(vocab),
    )

    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    steps_total = config.epochs * math.ceil(len(examples) / config.batch_size)
    warmup = max(1, int(0.06 * steps_total))
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer,
        lambda s: (s + 1) / warmup if s < warmup else max(0.02, (steps_total - s) / (steps_total - warmup)),
    )
    rng = random.Random(config.seed)
    model.train()
    step = 0
    with open(out_dir / "train_log.jsonl", "w", encoding="utf-8") as log:
        for epoch in range(config.epochs):
            order = list(range(len(examples)))
            if epoch >= config.curriculum_epochs:
                rng.shuffle(order)
            for input_ids, attention, labels in make_batches(
                examples, vocab, config.batch_size,
                config.max_input_tokens, config.max_output_tokens, order,
            ):
                out = model(input_ids=input_ids, attention_mask=attention, labels=labels)
                out.loss.backward()
                torch.nn.utils.clip_grad_norm_(model.parameters(), 1.0)
                optimizer.step()
                scheduler.step()
                optimizer.zero_grad()
                step += 1
                log.write(json.dumps({"step": step, "loss": round(out.loss.item(), 6)}) + "\n")

    model.save_pretrained(out_dir)
    vocab.save(out_dir / "vocab.json")
    (out_dir / "service_config.json").write_text(
        json.dumps(
            {
                "base_model": config.base_model,
                "batch_size": config.batch_size,
                "learning_rate": config.learning_rate,
                "epochs": config.epochs,
                "max_input_tokens": config.max_input_tokens,
                "max_output_tokens": config.max_output_tokens,
                "seed": config.seed,
                "optimizer": OPTIMIZER_NAME,
                "steps": step,
                "init_from": str(init_from) if init_from else None,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return out_dir


def read_train_log(out_dir: str | Path) -> list[dict]:
    lines = (Path(out_dir) / "train_log.jsonl").read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines if line.strip()]
