"""Transformer encoder with a classification head and a masked-token decoder."""

from __future__ import annotations

import math

import numpy as np

from ..nn import (
    Tensor,
    add,
    add_bias,
    dropout,
    embedding,
    gather_rows,
    gelu,
    layer_norm,
    matmul,
    reshape,
    scale,
    select,
    softmax,
    transpose,
)
from ..nn.checkpoint import load_checkpoint, save_checkpoint
from .config import ModelConfig

PAD = 0


def sinusoidal_table(n: int, d: int) -> np.ndarray:
    pos = np.arange(n)[:, None]
    div = np.exp(-math.log(10000.0) * np.arange(0, d, 2) / d)
    table = np.zeros((n, d))
    table[:, 0::2] = np.sin(pos * div)
    table[:, 1::2] = np.cos(pos * div[: d // 2])
    return table


class SequenceModel:
    """Shared parameter handling for the encoder and the recurrent baselines."""

    model_type = "base"
    params: dict[str, Tensor]
    config: object

    def parameter_arrays(self) -> dict[str, np.ndarray]:
        return {k: t.data for k, t in self.params.items()}

    def gradients(self) -> dict[str, np.ndarray]:
        return {k: t.grad for k, t in self.params.items() if t.grad is not None}

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.zero_grad()

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(arrays)
        extra = set(arrays) - set(self.params)
        if missing or extra:
            raise KeyError(f"parameter mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, t in self.params.items():
            if arrays[k].shape != t.shape:
                raise ValueError(f"parameter {k!r}: shape {arrays[k].shape}, expected {t.shape}")
            t.data = np.array(arrays[k], dtype=np.float64)

    def n_parameters(self) -> int:
        return int(sum(t.data.size for t in self.params.values()))

    def save(self, path, meta: dict | None = None):
        doc = {"model_type": self.model_type, "config": self.config.to_dict(), **(meta or {})}
        return save_checkpoint(path, self.parameter_arrays(), doc)

    def class_logits(self, tokens: np.ndarray, rng: np.random.Generator | None = None) -> Tensor:
        raise NotImplementedError

    def predict_proba(self, tokens: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """Class probabilities in eval mode."""
        out = []
        for i in range(0, len(tokens), batch_size):
            z = self.class_logits(tokens[i:i + batch_size]).data
            z = np.exp(z - z.max(axis=1, keepdims=True))
            out.append(z / z.sum(axis=1, keepdims=True))
        return np.concatenate(out) if out else np.zeros((0, 0))


class EncoderModel(SequenceModel):
    """Encoder stack f, classifier c on f(X)_0 and bias-free decoder d."""

    model_type = "stare"

    def __init__(self, config: ModelConfig, rng: np.random.Generator | None = None):
        self.config = config
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        K, F, V, s = config.d_model, config.d_ff, config.vocab_size, config.init_std
        normal = lambda *shape: Tensor(rng.normal(0.0, s, size=shape), requires_grad=True)  # noqa: E731
        zeros = lambda n: Tensor(np.zeros(n), requires_grad=True)  # noqa: E731
        ones = lambda n: Tensor(np.ones(n), requires_grad=True)  # noqa: E731

        p: dict[str, Tensor] = {"tok_emb": normal(V, K)}
        if config.positional == "learned":
            p["pos_emb"] = normal(config.max_len, K)
        for i in range(config.n_layers):
            for w in ("wq", "wk", "wv", "wo"):
                p[f"l{i}.{w}"] = normal(K, K)
                p[f"l{i}.b{w[1]}"] = zeros(K)
            p[f"l{i}.w1"], p[f"l{i}.b1"] = normal(K, F), zeros(F)
            p[f"l{i}.w2"], p[f"l{i}.b2"] = normal(F, K), zeros(K)
            p[f"l{i}.ln1_g"], p[f"l{i}.ln1_b"] = ones(K), zeros(K)
            p[f"l{i}.ln2_g"], p[f"l{i}.ln2_b"] = ones(K), zeros(K)
        p["ln_f_g"], p["ln_f_b"] = ones(K), zeros(K)
        if config.n_classes:
            p["cls.w1"], p["cls.b1"] = normal(K, K), zeros(K)
            p["cls.w2"], p["cls.b2"] = normal(K, config.n_classes), zeros(config.n_classes)
        p["dec.w"] = normal(K, V)
        for name, t in p.items():
            t.name = name
        self.params = p
        self._sin = sinusoidal_table(config.max_len, K) if config.positional == "sinusoidal" else None
        self._attn_log: list[np.ndarray] | None = None

    # -- forward ----------------------------------------------------------
    def _check_tokens(self, tokens: np.ndarray) -> np.ndarray:
        tokens = np.asarray(tokens)
        if tokens.ndim == 1:
            tokens = tokens[None]
        if tokens.ndim != 2 or tokens.dtype.kind not in "iu":
            raise ValueError("tokens must be a (batch, length) integer array")
        if tokens.shape[1] > self.config.max_len:
            raise ValueError(f"sequence length {tokens.shape[1]} exceeds max_len={self.config.max_len}")
        if tokens.size and (tokens.min() < 0 or tokens.max() >= self.config.vocab_size):
            bad = tokens[(tokens < 0) | (tokens >= self.config.vocab_size)]
            raise KeyError(f"unknown token id {int(bad[0])} (vocabulary size {self.config.vocab_size})")
        return tokens.astype(np.int64)

    def _attention(self, h: Tensor, i: int, key_mask: np.ndarray, rng) -> Tensor:
        cfg = self.config
        B, L, K = h.shape
        H = cfg.n_heads
        dh = K // H
        p = self.params

        def heads(w: str) -> Tensor:
            z = add_bias(matmul(h, p[f"l{i}.w{w}"]), p[f"l{i}.b{w}"])
            return transpose(reshape(z, (B, L, H, dh)), (0, 2, 1, 3))  # (B, H, L, dh)

        q, k, v = heads("q"), heads("k"), heads("v")
        scores = scale(matmul(q, transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
        probs = softmax(scores, axis=-1, additive_mask=key_mask)
        if self._attn_log is not None:
            self._attn_log.append(probs.data)
        attn = dropout(probs, cfg.dropout, rng)
        ctx = reshape(transpose(matmul(attn, v), (0, 2, 1, 3)), (B, L, K))
        return add_bias(matmul(ctx, p[f"l{i}.wo"]), p[f"l{i}.bo"])

    def _ffn(self, h: Tensor, i: int) -> Tensor:
        p = self.params
        z = gelu(add_bias(matmul(h, p[f"l{i}.w1"]), p[f"l{i}.b1"]))
        return add_bias(matmul(z, p[f"l{i}.w2"]), p[f"l{i}.b2"])

    def encode(self, tokens: np.ndarray, rng: np.random.Generator | None = None) -> Tensor:
        """Per-position encodings (B, L, K); dropout is active only when ``rng`` is given."""
        tokens = self._check_tokens(tokens)
        cfg, p = self.config, self.params
        B, L = tokens.shape
        x = embedding(p["tok_emb"], tokens)
        if self._sin is None:
            # one position index runs across the whole sequence, SEP included
            pos = embedding(p["pos_emb"], np.broadcast_to(np.arange(L), (B, L)))
        else:
            pos = Tensor(np.broadcast_to(self._sin[:L], (B, L, cfg.d_model)))
        x = dropout(add(x, pos), cfg.dropout, rng)
        key_mask = np.where(tokens == PAD, -np.inf, 0.0)[:, None, None, :]

        def ln(t: Tensor, name: str) -> Tensor:
            return layer_norm(t, p[f"{name}_g"], p[f"{name}_b"])

        for i in range(cfg.n_layers):
            if cfg.norm == "pre":
                x = add(x, dropout(self._attention(ln(x, f"l{i}.ln1"), i, key_mask, rng), cfg.dropout, rng))
                x = add(x, dropout(self._ffn(ln(x, f"l{i}.ln2"), i), cfg.dropout, rng))
            else:
                x = ln(add(x, dropout(self._attention(x, i, key_mask, rng), cfg.dropout, rng)), f"l{i}.ln1")
                x = ln(add(x, dropout(self._ffn(x, i), cfg.dropout, rng)), f"l{i}.ln2")
        return ln(x, "ln_f")

    def attention_weights(self, tokens: np.ndarray) -> list[np.ndarray]:
        """Eval-mode attention probabilities, one (B, heads, L, L) array per layer."""
        self._attn_log = []
        try:
            self.encode(tokens)
            return self._attn_log
        finally:
            self._attn_log = None

    def head(self, first: Tensor) -> Tensor:
        """Classifier MLP applied to (B, K) first-position encodings."""
        if not self.config.n_classes:
            raise RuntimeError("model was built without a classifier head (n_classes=0)")
        p = self.params
        z = gelu(add_bias(matmul(first, p["cls.w1"]), p["cls.b1"]))
        return add_bias(matmul(z, p["cls.w2"]), p["cls.b2"])

    def class_logits(self, tokens: np.ndarray, rng: np.random.Generator | None = None) -> Tensor:
        return self.head(select(self.encode(tokens, rng), 0, axis=1))

    def classify(self, tokens: np.ndarray) -> np.ndarray:
        return self.predict_proba(np.atleast_2d(tokens))

    def masked_logits(self, inputs: np.ndarray, positions: np.ndarray,
                      rng: np.random.Generator | None = None) -> Tensor:
        """Decoder logits (M, V) at the (sequence, position) pairs in ``positions``."""
        enc = self.encode(inputs, rng)
        B, L, K = enc.shape
        flat = reshape(enc, (B * L, K))
        picked = gather_rows(flat, positions[:, 0] * L + positions[:, 1])
        return matmul(picked, self.params["dec.w"])

    def embeddings(self, tokens: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """First-position encodings f(X)_0 in eval mode, one row per sequence."""
        out = [select(self.encode(tokens[i:i + batch_size]), 0, axis=1).data
               for i in range(0, len(tokens), batch_size)]
        return np.concatenate(out) if out else np.zeros((0, self.config.d_model))

    @classmethod
    def from_checkpoint(cls, path) -> "EncoderModel":
        arrays, meta = load_checkpoint(path)
        if meta.get("model_type") != cls.model_type:
            raise ValueError(f"{path}: checkpoint holds a {meta.get('model_type')!r} model")
        model = cls(ModelConfig.from_dict(meta["config"]))
        model.load_arrays(arrays)
        return model
