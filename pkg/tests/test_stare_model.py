import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erf

from stare.model import (
    EncoderModel,
    LabelError,
    ModelConfig,
    TrainConfig,
    build_dataset,
    classification_accuracy,
    mask_batch,
    mask_each_cell,
    mlm_loss,
    split_indices,
    train,
)
from stare.nn import Tensor, cross_entropy, gather_rows, gradcheck, select
from stare.traj import TokenSequence, Vocabulary
from stare.traj.vocab import assemble_ids

TINY_VOCAB = Vocabulary(n_cells=6, n_time_blocks=4, max_loc_len=2, max_time_len=2)  # L = 7, V = 15


def tiny_config(**kw):
    base = dict(vocab_size=TINY_VOCAB.size, max_len=TINY_VOCAB.seq_len, d_model=8, n_heads=1, n_layers=1,
                d_ff=8, dropout=0.0, n_classes=3, init_std=0.3, seed=3)
    return ModelConfig(**{**base, **kw})


def tiny_tokens(rng, n):
    rows = []
    for _ in range(n):
        k = rng.integers(1, 3)
        cells = rng.integers(1, 7, size=k).tolist()
        times = rng.integers(7, 11, size=k).tolist()
        rows.append(assemble_ids(cells, times, TINY_VOCAB))
    return np.array(rows)


# -- config ---------------------------------------------------------------------

def test_config_invariants():
    with pytest.raises(ValueError):
        tiny_config(d_model=10, n_heads=4)
    with pytest.raises(ValueError):
        tiny_config(mask_fraction=1.0)
    with pytest.raises(ValueError):
        ModelConfig.from_dict({**tiny_config().to_dict(), "bogus": 1})
    assert ModelConfig.from_dict(tiny_config().to_dict()) == tiny_config()


# -- encode -----------------------------------------------------------------------

def test_encode_shape_any_length():
    m = EncoderModel(tiny_config())
    for L in range(1, 8):
        toks = np.full((2, L), TINY_VOCAB.bos)
        assert m.encode(toks).shape == (2, L, 8)


def test_encode_rejects_unknown_token_and_long_input():
    m = EncoderModel(tiny_config())
    with pytest.raises(KeyError):
        m.encode(np.array([[1, 99]]))
    with pytest.raises(ValueError):
        m.encode(np.ones((1, 8), dtype=int))


def test_appending_pad_leaves_real_positions_unchanged():
    m = EncoderModel(tiny_config(max_len=12, n_layers=2, n_heads=2))
    toks = tiny_tokens(np.random.default_rng(0), 4)
    longer = np.concatenate([toks, np.zeros((4, 5), dtype=int)], axis=1)
    a = m.encode(toks).data
    b = m.encode(longer).data[:, :7]
    real = toks != 0
    assert np.max(np.abs(a - b)[real]) <= 1e-9


def test_pad_keys_get_exactly_zero_attention():
    cfg = tiny_config(d_model=16, n_heads=4, n_layers=3)
    m = EncoderModel(cfg)
    toks = tiny_tokens(np.random.default_rng(1), 20)
    maps = m.attention_weights(toks)
    assert len(maps) == 3
    pad = (toks == 0)[:, None, None, :]
    for A in maps:
        assert A.shape == (20, 4, 7, 7)
        assert np.all(np.where(np.broadcast_to(pad, A.shape), A, 0.0) == 0.0)
        assert np.allclose(A.sum(axis=-1), 1.0, atol=1e-12)


def _ln(x, eps=1e-5):
    mu = x.mean(-1, keepdims=True)
    return (x - mu) / np.sqrt(((x - mu) ** 2).mean(-1, keepdims=True) + eps)


def test_single_head_matches_manual_arithmetic():
    cfg = ModelConfig(vocab_size=5, max_len=3, d_model=4, n_heads=1, n_layers=1, d_ff=4, dropout=0.0)
    m = EncoderModel(cfg)
    rng = np.random.default_rng(42)
    W = {k: rng.normal(size=t.shape).round(1) for k, t in m.params.items()}
    m.load_arrays(W)
    toks = np.array([1, 3, 2])

    x = W["tok_emb"][toks] + W["pos_emb"][:3]
    h = _ln(x) * W["l0.ln1_g"] + W["l0.ln1_b"]
    q = h @ W["l0.wq"] + W["l0.bq"]
    k = h @ W["l0.wk"] + W["l0.bk"]
    v = h @ W["l0.wv"] + W["l0.bv"]
    s = q @ k.T / 2.0
    a = np.exp(s - s.max(1, keepdims=True))
    a /= a.sum(1, keepdims=True)
    x = x + (a @ v) @ W["l0.wo"] + W["l0.bo"]
    h = _ln(x) * W["l0.ln2_g"] + W["l0.ln2_b"]
    z = h @ W["l0.w1"] + W["l0.b1"]
    z = 0.5 * z * (1 + erf(z / math.sqrt(2)))
    x = x + z @ W["l0.w2"] + W["l0.b2"]
    expect = _ln(x) * W["ln_f_g"] + W["ln_f_b"]
    assert np.allclose(m.encode(toks).data[0], expect, atol=1e-12)
    assert np.allclose(m.attention_weights(toks)[0][0, 0], a, atol=1e-14)


def test_sinusoidal_and_post_norm_variants_run():
    toks = tiny_tokens(np.random.default_rng(2), 3)
    for kw in ({"positional": "sinusoidal"}, {"norm": "post"}):
        m = EncoderModel(tiny_config(**kw))
        assert "pos_emb" not in m.params or kw.get("positional") != "sinusoidal"
        assert np.all(np.isfinite(m.encode(toks).data))


def test_dropout_only_in_training_mode():
    m = EncoderModel(tiny_config(dropout=0.5))
    toks = tiny_tokens(np.random.default_rng(3), 2)
    assert np.array_equal(m.encode(toks).data, m.encode(toks).data)
    assert not np.allclose(m.encode(toks, np.random.default_rng(0)).data, m.encode(toks).data)


# -- classify -----------------------------------------------------------------------

def test_classify_probabilities_sum_to_one():
    m = EncoderModel(tiny_config())
    p = m.classify(tiny_tokens(np.random.default_rng(4), 9))
    assert p.shape == (9, 3)
    assert np.all(np.abs(p.sum(1) - 1) <= 1e-12)


def test_class_gradient_flows_only_through_first_position():
    m = EncoderModel(tiny_config())
    rng = np.random.default_rng(5)
    E = Tensor(rng.normal(size=(4, 7, 8)), requires_grad=True)
    t = np.array([0, 1, 2, 1])
    cross_entropy(m.head(select(E, 0, axis=1)), t).backward()
    assert np.all(E.grad[:, 1:] == 0.0)
    assert np.any(E.grad[:, 0] != 0.0)
    # finite differences on a non-first position agree: zero effect
    base = cross_entropy(m.head(select(E, 0, axis=1)), t).item()
    E.data[2, 4, 3] += 1e-3
    assert cross_entropy(m.head(select(E, 0, axis=1)), t).item() == base


def test_untrained_is_chance_level(s_corpus):
    ds = build_dataset(s_corpus.seqs, "subpop")
    m = EncoderModel(ModelConfig(s_corpus.vocab.size, s_corpus.vocab.seq_len, n_classes=ds.n_classes))
    _, te = split_indices(len(ds), 0, strata=ds.targets)
    acc = classification_accuracy(m, ds.subset(te))
    assert abs(acc - 1 / ds.n_classes) <= 0.05


# -- end-to-end gradient checks --------------------------------------------------

@pytest.mark.parametrize("norm", ["pre", "post"])
def test_end_to_end_gradcheck_classification(norm):
    m = EncoderModel(tiny_config(norm=norm))
    toks = tiny_tokens(np.random.default_rng(6), 3)
    t = np.array([0, 2, 1])
    err = gradcheck(lambda: cross_entropy(m.class_logits(toks), t), list(m.params.values()))
    assert err <= 1e-4


def test_end_to_end_gradcheck_mlm():
    m = EncoderModel(tiny_config(n_classes=0))
    toks = tiny_tokens(np.random.default_rng(7), 3)
    batch = mask_batch(toks, TINY_VOCAB, 0.5, np.random.default_rng(0))
    err = gradcheck(lambda: mlm_loss(m, batch), list(m.params.values()))
    assert err <= 1e-4


# -- masking ----------------------------------------------------------------------------

def test_mask_min_one_and_ceil_rule():
    toks = tiny_tokens(np.random.default_rng(8), 50)
    b = mask_batch(toks, TINY_VOCAB, 1e-9, np.random.default_rng(0))
    assert np.array_equal(np.bincount(b.positions[:, 0], minlength=50), np.ones(50))
    vocab = Vocabulary(n_cells=30, n_time_blocks=4, max_loc_len=20, max_time_len=20)
    seq = np.array([assemble_ids(list(range(1, 21)), [31] * 20, vocab)])
    assert mask_batch(seq, vocab, 0.15, np.random.default_rng(0)).n_masked == 3
    assert mask_batch(seq, vocab, 0.16, np.random.default_rng(0)).n_masked == 4


def test_mask_rate_and_uniformity_monte_carlo():
    # 20 cell tokens at fraction 0.15 -> exactly 3 per sequence; each position hit ~15% of the time
    vocab = Vocabulary(n_cells=30, n_time_blocks=4, max_loc_len=20, max_time_len=20)
    rng = np.random.default_rng(9)
    seq = assemble_ids(rng.integers(1, 31, size=20).tolist(), [31] * 20, vocab)
    toks = np.array([seq] * 100)
    hits = np.zeros(len(seq))
    for _ in range(1000):  # 1e5 sequence draws
        b = mask_batch(toks, vocab, 0.15, rng)
        np.add.at(hits, b.positions[:, 1], 1)
    rate = hits / 1e5
    cells = vocab.cell_mask(np.array(seq))
    assert abs(rate[cells].mean() - 0.15) <= 0.01
    assert np.all(np.abs(rate[cells] - 0.15) <= 0.01)
    assert np.all(rate[~cells] == 0)


def test_mask_each_cell_covers_every_cell_once():
    toks = tiny_tokens(np.random.default_rng(11), 6)
    b = mask_each_cell(toks, TINY_VOCAB)
    cells = TINY_VOCAB.cell_mask(toks)
    assert b.n_masked == cells.sum() == len(b.inputs)
    assert np.array_equal(b.positions[:, 0], np.arange(b.n_masked))
    assert sorted(zip(b.rows.tolist(), b.positions[:, 1].tolist())) == sorted(zip(*map(list, np.nonzero(cells))))
    assert np.all((b.inputs != b.originals).sum(1) == 1)
    assert np.array_equal(b.targets, toks[b.rows, b.positions[:, 1]])


def test_mask_skips_sequences_without_cells(caplog):
    toks = tiny_tokens(np.random.default_rng(10), 3)
    toks[1] = assemble_ids([], [], TINY_VOCAB)
    with caplog.at_level(logging.WARNING):
        b = mask_batch(toks, TINY_VOCAB, 0.5, np.random.default_rng(0))
    assert list(b.rows) == [0, 2]
    assert "without cell tokens" in caplog.text


@st.composite
def token_batches(draw):
    n_cells = draw(st.integers(1, 40))
    n_time = draw(st.integers(1, 20))
    lmax = draw(st.integers(1, 12))
    vocab = Vocabulary(n_cells=n_cells, n_time_blocks=n_time, max_loc_len=lmax, max_time_len=lmax)
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    rows = []
    for _ in range(draw(st.integers(1, 6))):
        k = int(rng.integers(1, lmax + 1))
        rows.append(assemble_ids(rng.integers(1, n_cells + 1, size=k).tolist(),
                                 rng.integers(n_cells + 1, n_cells + n_time + 1, size=k).tolist(), vocab))
    return vocab, np.array(rows), draw(st.floats(0.01, 0.99)), draw(st.integers(0, 2**32 - 1))


@settings(max_examples=10_000, deadline=None)
@given(token_batches())
def test_masking_touches_only_cell_tokens(case):
    vocab, toks, frac, seed = case
    b = mask_batch(toks, vocab, frac, np.random.default_rng(seed))
    r, c = b.positions[:, 0], b.positions[:, 1]
    assert np.all(vocab.cell_mask(b.originals[r, c]))
    changed = b.inputs != b.originals
    assert changed.sum() == b.n_masked
    assert np.all(b.inputs[changed] == vocab.mask)
    n_cells = vocab.cell_mask(toks).sum(axis=1)
    assert np.array_equal(np.bincount(r, minlength=len(toks)), np.maximum(1, np.ceil(frac * n_cells)))


# -- masked loss ----------------------------------------------------------------------

def test_mlm_loss_scalar_oracle():
    m = EncoderModel(tiny_config(n_classes=0))
    toks = tiny_tokens(np.random.default_rng(11), 1)
    b = mask_batch(toks, TINY_VOCAB, 1e-9, np.random.default_rng(0))
    target = int(b.targets[0])
    W = m.params["dec.w"].data
    keep = W[:, target].copy()
    W[:] = 0.0
    W[:, target] = keep
    enc = m.encode(b.inputs).data[b.positions[0, 0], b.positions[0, 1]]
    z = enc @ keep
    V = TINY_VOCAB.size
    expect = -z + math.log(math.exp(z) + (V - 1))
    assert mlm_loss(m, b).item() == pytest.approx(expect, rel=1e-12)
    # scaling the target column moves the loss the way the formula says
    W[:, target] *= 2.0
    assert mlm_loss(m, b).item() == pytest.approx(-2 * z + math.log(math.exp(2 * z) + (V - 1)), rel=1e-12)


def test_mlm_unmasked_positions_get_no_gradient():
    rng = np.random.default_rng(12)
    E = Tensor(rng.normal(size=(3 * 7, 8)), requires_grad=True)
    D = Tensor(rng.normal(size=(8, 15)))
    rows = np.array([1, 9, 16])
    from stare.nn import matmul

    cross_entropy(matmul(gather_rows(E, rows), D), np.array([2, 3, 4])).backward()
    others = np.setdiff1d(np.arange(21), rows)
    assert np.all(E.grad[others] == 0.0)


def test_mlm_init_loss_near_log_vocab(s_corpus):
    v = s_corpus.vocab
    m = EncoderModel(ModelConfig(v.size, v.seq_len))
    toks = np.array([s.tokens for s in s_corpus.seqs[:300]])
    b = mask_batch(toks, v, 0.15, np.random.default_rng(0))
    assert abs(mlm_loss(m, b).item() - math.log(v.size)) <= 0.1 * math.log(v.size)


# -- training ---------------------------------------------------------------------------------

def _toy_dataset(n=60, seed=0):
    rng = np.random.default_rng(seed)
    seqs = []
    for i in range(n):
        lab = i % 3
        cells = [1 + 2 * lab, 2 + 2 * lab][: 1 + rng.integers(0, 2)]
        times = rng.integers(7, 11, size=len(cells)).tolist()
        seqs.append(TokenSequence(f"a{i % 6}", i, assemble_ids(cells, times, TINY_VOCAB), label=lab))
    return seqs


def test_train_is_deterministic_and_learns():
    seqs = _toy_dataset()
    ds = build_dataset(seqs, "subpop")
    cfg = TrainConfig(epochs=15, batch_size=8, lr=3e-3, seed=1)
    r1 = train(EncoderModel(tiny_config(seed=1)), ds, "subpop", cfg)
    r2 = train(EncoderModel(tiny_config(seed=1)), ds, "subpop", cfg)
    assert r1.log == r2.log
    assert r1.best_test_acc == 1.0
    assert r1.log[0].epoch == 0 and len(r1.log) == 16


def test_tied_best_epochs_restore_latest_or_first():
    ds = build_dataset(_toy_dataset(), "subpop")
    base = dict(epochs=15, batch_size=8, lr=3e-3, seed=1)
    last = train(EncoderModel(tiny_config(seed=1)), ds, "subpop", TrainConfig(**base))
    first = train(EncoderModel(tiny_config(seed=1)), ds, "subpop", TrainConfig(**base, ties="first"))
    accs = [r.test_acc for r in last.log]
    top = [r.epoch for r in last.log if r.test_acc == max(accs)]
    assert len(top) > 1
    assert (first.best_epoch, last.best_epoch) == (top[0], top[-1])
    assert first.log == last.log
    assert classification_accuracy(last.model, ds.subset(last.test_idx)) == max(accs)
    with pytest.raises(ValueError):
        TrainConfig(ties="middle")


def test_train_zero_epochs_only_evaluates():
    ds = build_dataset(_toy_dataset(), "subpop")
    m = EncoderModel(tiny_config())
    before = {k: v.copy() for k, v in m.parameter_arrays().items()}
    res = train(m, ds, "subpop", TrainConfig(epochs=0))
    assert len(res.log) == 1 and res.best_epoch == 0
    assert all(np.array_equal(before[k], v) for k, v in m.parameter_arrays().items())


def test_train_mlm_runs_and_logs():
    ds = build_dataset(_toy_dataset(), "mlm")
    res = train(EncoderModel(tiny_config(n_classes=0)), ds, "mlm", TrainConfig(epochs=3, batch_size=8, lr=3e-3),
                vocab=TINY_VOCAB)
    assert len(res.log) == 4
    assert all(0.0 <= r.test_acc <= 1.0 for r in res.log)


def test_single_class_dataset_errors():
    seqs = [TokenSequence(f"a{i}", i, assemble_ids([1], [7], TINY_VOCAB), label=0) for i in range(5)]
    with pytest.raises(LabelError):
        build_dataset(seqs, "subpop")


def test_missing_labels_error():
    seqs = [TokenSequence(f"a{i}", i, assemble_ids([1], [7], TINY_VOCAB)) for i in range(5)]
    with pytest.raises(LabelError):
        build_dataset(seqs, "subpop")


def test_split_is_seeded_stratified_and_disjoint():
    strata = np.repeat(np.arange(5), 20)
    tr, te = split_indices(100, 3, 0.85, strata)
    assert len(np.intersect1d(tr, te)) == 0 and len(tr) + len(te) == 100
    assert np.array_equal(np.bincount(strata[te]), np.full(5, 3))
    assert np.array_equal(te, split_indices(100, 3, 0.85, strata)[1])
    assert not np.array_equal(te, split_indices(100, 4, 0.85, strata)[1])


def test_loss_decreases_first_epochs_on_small_benchmark(s_corpus):
    ds = build_dataset(s_corpus.seqs, "subpop")
    v = s_corpus.vocab
    res = train(EncoderModel(ModelConfig(v.size, v.seq_len, n_classes=ds.n_classes)), ds, "subpop",
                TrainConfig(epochs=5))
    losses = [r.train_loss for r in res.log]
    assert sum(b < a for a, b in zip(losses, losses[1:])) >= 4


# -- checkpoints and embeddings -----------------------------------------------------------

def test_checkpoint_roundtrip_reproduces_metrics(tmp_path):
    ds = build_dataset(_toy_dataset(), "subpop")
    m = EncoderModel(tiny_config())
    res = train(m, ds, "subpop", TrainConfig(epochs=2, batch_size=8, lr=3e-3))
    m.save(tmp_path / "m.npz")
    back = EncoderModel.from_checkpoint(tmp_path / "m.npz")
    te = ds.subset(res.test_idx)
    assert np.array_equal(back.predict_proba(te.tokens), m.predict_proba(te.tokens))
    assert classification_accuracy(back, te) == classification_accuracy(m, te)


def test_embeddings_shape_and_identical_rows():
    m = EncoderModel(tiny_config())
    toks = tiny_tokens(np.random.default_rng(13), 4)
    toks[3] = toks[1]
    E = m.embeddings(toks)
    assert E.shape == (4, 8)
    assert np.array_equal(E[1], E[3])


def _mean_cos(E, pairs):
    N = E / np.linalg.norm(E, axis=1, keepdims=True)
    return np.mean([N[i] @ N[j] for i, j in pairs])


def test_trained_embeddings_group_by_agent(trained, s_corpus):
    fit = trained("stare", "subpop")
    E = fit.result.model.embeddings(fit.dataset.tokens)
    agents = np.array(fit.dataset.agent_ids)
    sub = fit.dataset.targets
    rng = np.random.default_rng(0)
    i, j = rng.integers(0, len(agents), size=(2, 20000))
    same_agent = [(a, b) for a, b in zip(i, j) if a != b and agents[a] == agents[b]]
    cross_sub = [(a, b) for a, b in zip(i, j) if sub[a] != sub[b]]
    assert _mean_cos(E, same_agent) > _mean_cos(E, cross_sub)
