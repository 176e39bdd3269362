"""Trainable greedy-decoding model service for prompt-based dialogue state tracking."""

from .config import ARCHS, PRESETS, TrainConfig
from .serving import GreedyDecoder, ModelServer
from .training import train
from .vocab import WordVocab

__version__ = "0.1.0"
