import json
from pathlib import Path

import pytest

from model_service.config import TrainConfig
from model_service.training import train


def write_examples(path: Path, rows) -> Path:
    lines = []
    for i, (input_text, target) in enumerate(rows):
        lines.append(json.dumps({
            "dialogue_id": f"d{i}",
            "turn_index": 1,
            "domain": "toy",
            "slot": "word",
            "mode": "independent",
            "input": input_text,
            "target": target,
        }))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def copy_task_examples(tmp_path_factory):
    """Tiny echo task: the target is the word after the marker token."""
    rows = []
    words = ["red", "blue", "green", "gold", "grey", "pink", "teal", "plum"]
    for i, w in enumerate(words * 6):
        rows.append((f"[user] item {i % 5} take {w} now [domain] toy [slot] word", w))
    return write_examples(tmp_path_factory.mktemp("toy") / "examples.jsonl", rows)


@pytest.fixture(scope="session")
def toy_checkpoint(copy_task_examples, tmp_path_factory):
    config = TrainConfig(base_model="tiny", batch_size=8, learning_rate=1e-3, epochs=18, seed=0)
    return train(copy_task_examples, config, tmp_path_factory.mktemp("ckpt") / "toy")
