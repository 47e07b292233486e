"""Glue between trained models and the matrix/projection utilities."""

from __future__ import annotations

import numpy as np

from ..model.data import SequenceDataset
from ..model.encoder import EncoderModel, SequenceModel
from ..model.masking import mask_each_cell
from ..model.training import eval_masks, masked_predictions
from ..traj.vocab import Vocabulary
from .matrices import KINDS, PredictionMatrix, average_predictions, location_matrix


def prediction_matrix(model: SequenceModel, test: SequenceDataset, kind: str,
                      vocab: Vocabulary | None = None, min_count: int = 20, seed: int = 0,
                      masking: str = "each") -> PredictionMatrix:
    """Average prediction matrix of ``model`` on held-out sequences.

    ``agent`` and ``subpop`` need a classifier trained on that label;
    ``location`` needs a masked-modeling encoder and the vocabulary. With
    ``masking="each"`` every cell occurrence is masked once on its own;
    ``"random"`` reuses the fixed draw used for scoring.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown matrix kind {kind!r}; expected one of {KINDS}")
    if kind == "location":
        if vocab is None or not isinstance(model, EncoderModel):
            raise ValueError("location matrices need an encoder model and its vocabulary")
        if masking == "each":
            batch = mask_each_cell(test.tokens, vocab)
        elif masking == "random":
            batch = eval_masks(test.tokens, vocab, model.config.mask_fraction, seed)
        else:
            raise ValueError(f"unknown masking {masking!r}; expected 'each' or 'random'")
        logits = masked_predictions(model, batch)
        return location_matrix(logits, batch.targets, np.arange(1, vocab.n_cells + 1), min_count)
    if test.targets is None:
        raise ValueError(f"{kind} matrices need labelled sequences")
    return average_predictions(model.predict_proba(test.tokens), test.targets, list(test.classes))


def extract_embeddings(model: EncoderModel, dataset: SequenceDataset) -> np.ndarray:
    """f(X)_0 for every sequence, in dataset order."""
    return model.embeddings(dataset.tokens)
