"""Session-wide fixtures: the small simulated benchmark and models trained on it.

Training happens lazily and at most once per (model, task) per session.
"""

import time
from types import SimpleNamespace

import pytest

from stare.baselines import RecurrentClassifier, RecurrentConfig
from stare.model import EncoderModel, ModelConfig, TrainConfig, build_dataset, train
from stare.sim import PRESETS, run_simulation
from stare.traj import tokenize_corpus


@pytest.fixture(scope="session")
def s_sim():
    return run_simulation(PRESETS["S"])


@pytest.fixture(scope="session")
def s_corpus(s_sim):
    vocab, seqs = tokenize_corpus(s_sim.trajectories, labels=s_sim.labels)
    return SimpleNamespace(sim=s_sim, vocab=vocab, seqs=seqs)


@pytest.fixture(scope="session")
def trained(s_corpus):
    cache = {}

    def get(model: str, task: str):
        key = (model, task)
        if key not in cache:
            ds = build_dataset(s_corpus.seqs, task)
            if model == "stare":
                m = EncoderModel(ModelConfig(s_corpus.vocab.size, s_corpus.vocab.seq_len, n_classes=ds.n_classes))
            else:
                m = RecurrentClassifier(RecurrentConfig(s_corpus.vocab.size, ds.n_classes,
                                                        bidirectional=model == "bilstm"))
            t0 = time.perf_counter()
            res = train(m, ds, task, TrainConfig(), vocab=s_corpus.vocab)
            cache[key] = SimpleNamespace(result=res, dataset=ds, test=ds.subset(res.test_idx),
                                         seconds=time.perf_counter() - t0)
        return cache[key]

    return get


def pytest_collection_modifyitems(items):
    for item in items:
        if "trained" in getattr(item, "fixturenames", ()):
            item.add_marker(pytest.mark.slow)
