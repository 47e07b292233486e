"""Recurrent baselines sharing the token input, split and training loop of the encoder."""

from .recurrent import RecurrentClassifier, RecurrentConfig, train_baseline

__all__ = ["RecurrentClassifier", "RecurrentConfig", "train_baseline"]
