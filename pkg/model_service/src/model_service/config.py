"""Training configuration and per-size presets."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass
class TrainConfig:
    base_model: str = "tiny"
    batch_size: int = 16
    learning_rate: float = 1e-3
    epochs: int = 25
    max_input_tokens: int = 512
    max_output_tokens: int = 64
    seed: int = 0
    # first N epochs keep file order (curriculum corpora put easy examples first)
    curriculum_epochs: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.base_model not in ARCHS:
            raise ValueError(f"unknown base_model {self.base_model!r}, expected one of {sorted(ARCHS)}")


# Transformer dimensions per size tag. "small" and "base" mirror the standard
# published encoder-decoder sizes; "tiny" is a desk-scale configuration that
# trains from scratch on a CPU in minutes.
ARCHS = {
    "tiny": dict(d_model=128, d_kv=32, d_ff=256, num_layers=2, num_heads=4),
    "small": dict(d_model=512, d_kv=64, d_ff=2048, num_layers=6, num_heads=8),
    "base": dict(d_model=768, d_kv=64, d_ff=3072, num_layers=12, num_heads=12),
}

# Hyperparameters per size: small/base follow the fine-tuning recipe the
# pipeline was written for; tiny uses a from-scratch schedule.
PRESETS = {
    "tiny": TrainConfig(base_model="tiny", batch_size=16, learning_rate=1e-3, epochs=25),
    "small": TrainConfig(base_model="small", batch_size=4, learning_rate=5e-5, epochs=3),
    "base": TrainConfig(base_model="base", batch_size=64, learning_rate=5e-4, epochs=2),
}
