"""LSTM and bidirectional LSTM sequence classifiers over the same token ids."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..model.data import SequenceDataset
from ..model.encoder import PAD, SequenceModel
from ..model.training import TrainConfig, TrainResult, train
from ..nn import Tensor, add_bias, concat, embedding, lstm, matmul, select
from ..nn.checkpoint import load_checkpoint


@dataclass(frozen=True)
class RecurrentConfig:
    vocab_size: int
    n_classes: int
    embedding_dim: int = 128
    hidden_dim: int = 64
    n_stacks: int = 2
    bidirectional: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.vocab_size, self.embedding_dim, self.hidden_dim, self.n_stacks) < 1:
            raise ValueError("recurrent dimensions must be positive")
        if self.n_classes < 2:
            raise ValueError("a classifier needs at least two classes")

    @property
    def model_type(self) -> str:
        return "bilstm" if self.bidirectional else "lstm"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RecurrentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown recurrent config field(s): {sorted(unknown)}")
        return cls(**d)


class RecurrentClassifier(SequenceModel):
    """Stacked (Bi)LSTM; the class logits read the final state of each direction.

    PAD steps leave the recurrent state unchanged, so the forward final state
    is the state after the last real token and the backward one the state
    after the first.
    """

    def __init__(self, config: RecurrentConfig, rng: np.random.Generator | None = None):
        self.config = config
        self.model_type = config.model_type
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        H, E = config.hidden_dim, config.embedding_dim
        bound = 1.0 / math.sqrt(H)
        uni = lambda *shape: Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)  # noqa: E731
        p = {"emb": Tensor(rng.normal(0.0, 1.0, size=(config.vocab_size, E)), requires_grad=True)}
        dirs = self.directions
        for layer in range(config.n_stacks):
            d_in = E if layer == 0 else H * len(dirs)
            for d in dirs:
                p[f"l{layer}.{d}.w_in"] = uni(d_in, 4 * H)
                p[f"l{layer}.{d}.w_rec"] = uni(H, 4 * H)
                p[f"l{layer}.{d}.b"] = uni(4 * H)
        p["head.w"] = uni(H * len(dirs), config.n_classes)
        p["head.b"] = uni(config.n_classes)
        for name, t in p.items():
            t.name = name
        self.params = p

    @property
    def directions(self) -> tuple[str, ...]:
        return ("fwd", "bwd") if self.config.bidirectional else ("fwd",)

    def class_logits(self, tokens: np.ndarray, rng: np.random.Generator | None = None) -> Tensor:
        tokens = np.atleast_2d(np.asarray(tokens))
        if tokens.ndim != 2 or tokens.dtype.kind not in "iu":
            raise ValueError("tokens must be a (batch, length) integer array")
        p = self.params
        valid = tokens != PAD
        x = embedding(p["emb"], tokens)
        for layer in range(self.config.n_stacks):
            outs = [lstm(x, valid, p[f"l{layer}.{d}.w_in"], p[f"l{layer}.{d}.w_rec"], p[f"l{layer}.{d}.b"],
                         reverse=(d == "bwd")) for d in self.directions]
            x = outs[0] if len(outs) == 1 else concat(outs, axis=-1)
        T = tokens.shape[1]
        finals = [select(outs[0], T - 1, axis=1)]
        if self.config.bidirectional:
            finals.append(select(outs[1], 0, axis=1))
        state = finals[0] if len(finals) == 1 else concat(finals, axis=-1)
        return add_bias(matmul(state, p["head.w"]), p["head.b"])

    @classmethod
    def from_checkpoint(cls, path) -> "RecurrentClassifier":
        arrays, meta = load_checkpoint(path)
        if meta.get("model_type") not in ("lstm", "bilstm"):
            raise ValueError(f"{path}: checkpoint holds a {meta.get('model_type')!r} model")
        model = cls(RecurrentConfig.from_dict(meta["config"]))
        model.load_arrays(arrays)
        return model


def train_baseline(config: RecurrentConfig, dataset: SequenceDataset, task: str = "subpop",
                   cfg: TrainConfig | None = None) -> TrainResult:
    """Build and train a recurrent classifier with the shared training loop."""
    cfg = cfg or TrainConfig(seed=config.seed)
    return train(RecurrentClassifier(config), dataset, task, cfg)
