"""Seeded Adam training loop shared by every sequence model."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from ..nn import AdamState, Tensor, adam_step, cross_entropy
from ..traj.vocab import Vocabulary
from .data import LabelError, SequenceDataset, split_indices
from .encoder import SequenceModel
from .masking import MaskedBatch, mask_batch

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 32
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 50
    train_frac: float = 0.85
    seed: int = 0
    ties: str = "last"  # which epoch to restore when several share the best test accuracy

    def __post_init__(self) -> None:
        if self.epochs < 0 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("epochs must be >= 0, batch_size and patience >= 1")
        if self.ties not in ("first", "last"):
            raise ValueError("ties must be 'first' or 'last'")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training config field(s): {sorted(unknown)}")
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    test_acc: float


@dataclass
class TrainResult:
    model: SequenceModel
    task: str
    log: list[EpochRecord]
    best_epoch: int
    best_test_acc: float
    train_idx: np.ndarray
    test_idx: np.ndarray
    extra: dict = field(default_factory=dict)

    def write_log_csv(self, path) -> None:
        write_log_csv(self.log, path)


def write_log_csv(records: list[EpochRecord], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "test_acc"])
        for r in records:
            w.writerow([r.epoch, repr(float(r.train_loss)), repr(float(r.test_acc))])


def _stream(seed: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, purpose]))


def dataset_split(dataset: SequenceDataset, task: str, cfg: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    """The split every model sees for a dataset, task and seed.

    Classification splits are stratified by class; masked modeling splits
    are stratified by agent.
    """
    if task == "mlm":
        _, strata = np.unique(np.array(dataset.agent_ids), return_inverse=True)
    else:
        strata = dataset.targets
    return split_indices(len(dataset), cfg.seed, cfg.train_frac, strata)


def eval_masks(tokens: np.ndarray, vocab: Vocabulary, fraction: float, seed: int) -> MaskedBatch:
    """The fixed masking used to score masked modeling on held-out sequences."""
    return mask_batch(tokens, vocab, fraction, _stream(seed, 4))


def masked_predictions(model, batch: MaskedBatch, chunk: int = 256) -> np.ndarray:
    """Decoder logits (M, V) for every masked position, evaluated in chunks of sequences."""
    out = []
    for lo in range(0, len(batch.inputs), chunk):
        sel = (batch.positions[:, 0] >= lo) & (batch.positions[:, 0] < lo + chunk)
        pos = batch.positions[sel] - np.array([lo, 0])
        out.append(model.masked_logits(batch.inputs[lo:lo + chunk], pos).data)
    return np.concatenate(out) if out else np.zeros((0, 0))


def mlm_loss(model, batch: MaskedBatch, rng: np.random.Generator | None = None) -> Tensor:
    """Mean cross-entropy of the decoder over the masked positions only."""
    if not batch.n_masked:
        raise ValueError("masked batch has no masked positions")
    return cross_entropy(model.masked_logits(batch.inputs, batch.positions, rng), batch.targets)


def classification_accuracy(model: SequenceModel, data: SequenceDataset) -> float:
    if not len(data):
        return float("nan")
    pred = model.predict_proba(data.tokens).argmax(axis=1)
    return float(np.mean(pred == data.targets))


def mlm_accuracy(model, batch: MaskedBatch) -> float:
    if not batch.n_masked:
        return float("nan")
    return float(np.mean(masked_predictions(model, batch).argmax(axis=1) == batch.targets))


def train(model: SequenceModel, dataset: SequenceDataset, task: str, cfg: TrainConfig = TrainConfig(),
          vocab: Vocabulary | None = None, on_epoch: Callable[[EpochRecord], None] | None = None) -> TrainResult:
    """Fit ``model`` on the training part of ``dataset`` and keep the best-test parameters.

    ``task`` is ``"mlm"`` (needs ``vocab``; the model must provide
    ``masked_logits``) or a classification task. Epoch 0 records the
    untrained model. Training stops early once test accuracy has not improved
    for ``cfg.patience`` epochs. Among epochs tied at the best accuracy the
    latest is restored unless ``cfg.ties`` is ``"first"``.
    """
    if task == "mlm":
        if vocab is None:
            raise ValueError("masked modeling needs the vocabulary")
        if not hasattr(model, "masked_logits"):
            raise TypeError(f"{model.model_type} models do not support masked modeling")
    else:
        if dataset.targets is None:
            raise LabelError(f"task {task!r} needs class labels")
        if len(np.unique(dataset.targets)) < 2:
            raise LabelError("classification dataset has a single class")
        if getattr(model.config, "n_classes", None) != dataset.n_classes:
            raise LabelError(f"model has {model.config.n_classes} classes, dataset {dataset.n_classes}")
    train_idx, test_idx = dataset_split(dataset, task, cfg)
    tr, te = dataset.subset(train_idx), dataset.subset(test_idx)
    shuffle_rng, drop_rng, mask_rng = _stream(cfg.seed, 1), _stream(cfg.seed, 2), _stream(cfg.seed, 3)
    fraction = getattr(model.config, "mask_fraction", 0.15)

    if task == "mlm":
        test_batch = eval_masks(te.tokens, vocab, fraction, cfg.seed)
        train_probe = eval_masks(tr.tokens, vocab, fraction, cfg.seed + 1)

        def batch_loss(idx: np.ndarray, rng) -> Tensor | None:
            mb = mask_batch(tr.tokens[idx], vocab, fraction, mask_rng)
            if not mb.n_masked:
                return None
            return mlm_loss(model, mb, rng)

        def evaluate() -> float:
            return mlm_accuracy(model, test_batch)

        def initial_loss() -> float:
            z = masked_predictions(model, train_probe)
            return cross_entropy(Tensor(z), train_probe.targets).item()
    else:
        def batch_loss(idx: np.ndarray, rng) -> Tensor:
            return cross_entropy(model.class_logits(tr.tokens[idx], rng), tr.targets[idx])

        def evaluate() -> float:
            return classification_accuracy(model, te)

        def initial_loss() -> float:
            logits = np.concatenate([model.class_logits(tr.tokens[i:i + 256]).data
                                     for i in range(0, len(tr), 256)])
            return cross_entropy(Tensor(logits), tr.targets).item()

    records = [EpochRecord(0, initial_loss(), evaluate())]
    if on_epoch:
        on_epoch(records[0])
    best_acc, best_epoch, improved = records[0].test_acc, 0, 0
    best_params = {k: v.copy() for k, v in model.parameter_arrays().items()}
    opt = AdamState()

    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(tr))
        total, count = 0.0, 0
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            model.zero_grad()
            loss = batch_loss(idx, drop_rng)
            if loss is None:
                continue
            loss.backward()
            adam_step(model.parameter_arrays(), model.gradients(), opt, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
            total += loss.item() * len(idx)
            count += len(idx)
        rec = EpochRecord(epoch, total / max(count, 1), evaluate())
        records.append(rec)
        if on_epoch:
            on_epoch(rec)
        log.info("epoch %d train_loss %.4f test_acc %.4f", rec.epoch, rec.train_loss, rec.test_acc)
        tie = rec.test_acc == best_acc and cfg.ties == "last"
        if rec.test_acc > best_acc or tie:
            if rec.test_acc > best_acc:
                improved = epoch
            best_acc, best_epoch = rec.test_acc, epoch
            best_params = {k: v.copy() for k, v in model.parameter_arrays().items()}
        if epoch - improved >= cfg.patience:
            log.info("early stop at epoch %d (best %d)", epoch, best_epoch)
            break
    model.zero_grad()
    model.load_arrays(best_params)
    return TrainResult(model, task, records, best_epoch, best_acc, train_idx, test_idx)
