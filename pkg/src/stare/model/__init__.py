"""Transformer encoder over trajectory tokens with classification and masked-token heads."""

from .config import ModelConfig
from .data import TASKS, LabelError, SequenceDataset, build_dataset, split_indices
from .encoder import EncoderModel, SequenceModel, sinusoidal_table
from .masking import IGNORE, MaskedBatch, mask_batch, mask_each_cell, n_to_mask
from .training import (
    EpochRecord,
    TrainConfig,
    TrainResult,
    classification_accuracy,
    dataset_split,
    eval_masks,
    masked_predictions,
    mlm_accuracy,
    mlm_loss,
    train,
    write_log_csv,
)

__all__ = [
    "ModelConfig", "TASKS", "LabelError", "SequenceDataset", "build_dataset", "split_indices",
    "EncoderModel", "SequenceModel", "sinusoidal_table", "IGNORE", "MaskedBatch", "mask_batch", "mask_each_cell",
    "n_to_mask", "EpochRecord", "TrainConfig", "TrainResult", "classification_accuracy", "dataset_split",
    "eval_masks", "masked_predictions", "mlm_accuracy", "mlm_loss", "train", "write_log_csv",
]
