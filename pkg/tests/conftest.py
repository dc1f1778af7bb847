import pytest

from ligas.corpus import generate_all
from ligas.model import ModelConfig, TrainConfig, init, train
from ligas.tokenizer import build_vocab, tokenize


@pytest.fixture(scope="session")
def synth_corpus():
    return generate_all(n_pairs=30, seed=101)


@pytest.fixture(scope="session")
def trained_model(synth_corpus):
    """One trained toy encoder shared by the attribution/acceptance tests."""
    vocab = build_vocab([s.text for s in synth_corpus], max_size=512)
    cfg = ModelConfig(vocab_size=len(vocab), seed=101)
    examples = [(tokenize(s.text, vocab).token_ids, s.gold) for s in synth_corpus]
    weights, _ = train(
        init(cfg), examples, TrainConfig(lr=2e-3, epochs=12, batch=16, seed=101)
    )
    weights.vocab = vocab
    return weights, vocab
