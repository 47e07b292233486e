from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class ModelConfig:
    """Encoder hyperparameters. ``n_classes == 0`` builds a model without a classifier head."""

    vocab_size: int
    max_len: int
    n_classes: int = 0
    d_model: int = 128
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 256
    dropout: float = 0.1
    mask_fraction: float = 0.15
    positional: str = "learned"  # or "sinusoidal"
    norm: str = "pre"  # or "post"
    init_std: float = 0.02
    seed: int = 0

    def __post_init__(self) -> None:
        if self.vocab_size < 2 or self.max_len < 1:
            raise ValueError("vocab_size must be >= 2 and max_len >= 1")
        if min(self.d_model, self.n_heads, self.n_layers, self.d_ff) < 1:
            raise ValueError("model dimensions must be positive")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        if not 0.0 < self.mask_fraction < 1.0:
            raise ValueError("mask_fraction must lie in (0, 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.n_classes < 0:
            raise ValueError("n_classes must be non-negative")
        if self.positional not in ("learned", "sinusoidal"):
            raise ValueError(f"unknown positional encoding {self.positional!r}")
        if self.norm not in ("pre", "post"):
            raise ValueError(f"unknown norm placement {self.norm!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config field(s): {sorted(unknown)}")
        return cls(**d)

    def with_(self, **kw) -> "ModelConfig":
        return replace(self, **kw)
