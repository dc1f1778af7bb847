"""Encoder behavior: init, forward paths, training, weight container."""

import numpy as np
import pytest

import ligas.autodiff as ad
from ligas.autodiff import Tensor
from ligas.errors import DataError, NumericError, UsageError
from ligas.model import (
    CLASSES,
    ModelConfig,
    ModelWeights,
    TrainConfig,
    argmax_class,
    embed,
    forward_from_embeddings,
    init,
    load_weights,
    predict,
    save_weights,
    tensor_shapes,
    train,
)
from ligas.model import _sentence_loss, _wrap
from ligas.tokenizer import Vocabulary, build_vocab, tokenize

SMALL = ModelConfig(vocab_size=40, d_model=16, n_heads=2, n_layers=2,
                    d_ff=24, max_seq_len=12, seed=5)


def test_config_validation():
    with pytest.raises(UsageError, match="divisible"):
        ModelConfig(vocab_size=10, d_model=30, n_heads=4)
    with pytest.raises(UsageError, match="positive"):
        ModelConfig(vocab_size=0)


def test_init_is_seeded_and_shaped():
    w1 = init(SMALL)
    w2 = init(SMALL)
    for name, shape in tensor_shapes(SMALL):
        assert w1.arrays[name].shape == shape
        assert np.array_equal(w1.arrays[name], w2.arrays[name])
    assert np.array_equal(w1.arrays["layer0.ln1.gain"], np.ones(16))
    assert np.array_equal(w1.arrays["layer0.attn.bq"], np.zeros(16))
    bound = 1.0 / np.sqrt(SMALL.d_model)
    assert np.abs(w1.arrays["tok_emb"]).max() <= bound
    different_seed = init(ModelConfig(vocab_size=40, d_model=16, n_heads=2,
                                      n_layers=2, d_ff=24, max_seq_len=12, seed=6))
    assert not np.array_equal(w1.arrays["tok_emb"], different_seed.arrays["tok_emb"])


def test_predict_equals_forward_of_embed_bitwise():
    weights = init(SMALL)
    ids = [2, 7, 9, 11, 3]
    via_predict = predict(weights, ids)
    via_compose = forward_from_embeddings(weights, embed(weights, ids))
    assert np.array_equal(via_predict.logits, via_compose.logits)
    assert np.array_equal(via_predict.probs, via_compose.probs)
    assert via_predict.predicted_class == via_compose.predicted_class


def test_probabilities_are_normalized():
    weights = init(SMALL)
    p = predict(weights, [2, 5, 3])
    assert p.probs.shape == (2,)
    assert abs(p.probs.sum() - 1.0) <= 1e-12
    assert p.predicted_class in CLASSES


def test_argmax_tie_resolves_to_lua():
    assert argmax_class(np.array([0.5, 0.5])) == "LUA"
    assert argmax_class(np.array([0.7, 0.3])) == "LA"
    assert argmax_class(np.array([0.3, 0.7])) == "LUA"


def test_embed_validates_inputs():
    weights = init(SMALL)
    with pytest.raises(DataError, match="empty"):
        embed(weights, [])
    with pytest.raises(DataError, match="max_seq_len"):
        embed(weights, [2] * 13)
    with pytest.raises(DataError, match="out of range"):
        embed(weights, [2, 40, 3])


def test_embedding_gradient_flows_through_encoder():
    weights = init(SMALL)
    e = embed(weights, [2, 7, 9, 3])
    pred = forward_from_embeddings(weights, e)
    ad.backward(ad.pick(pred.logits_tensor, 0))
    g = ad.grad_of(e)
    assert g.shape == e.data.shape
    assert np.abs(g).max() > 0.0


def test_encoder_gradient_matches_finite_differences():
    # full-stack check: d logit / d embeddings vs central differences
    weights = init(SMALL)
    ids = [2, 7, 9, 11, 3]
    base = embed(weights, ids).data

    def value(arr: np.ndarray) -> float:
        pred = forward_from_embeddings(weights, Tensor(arr))
        return float(pred.logits[0])

    e = Tensor(base.copy(), requires_grad=True)
    pred = forward_from_embeddings(weights, e)
    ad.backward(ad.pick(pred.logits_tensor, 0))
    got = ad.grad_of(e)

    eps = 1e-3
    fd = np.zeros_like(base)
    flat, fd_flat = base.reshape(-1), fd.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + eps
        up = value(base)
        flat[i] = saved - eps
        down = value(base)
        flat[i] = saved
        fd_flat[i] = (up - down) / (2.0 * eps)
    scale = np.maximum(1.0, np.maximum(np.abs(got), np.abs(fd)))
    assert float((np.abs(got - fd) / scale).max()) <= 1e-3


def test_weight_gradients_match_finite_differences_on_loss():
    weights = init(SMALL)
    ids = [2, 7, 9, 3]
    wts = _wrap(weights, requires_grad=True)
    loss = _sentence_loss(wts, SMALL, ids, pad_to=len(ids), label_idx=1)
    ad.backward(loss)

    rng = np.random.default_rng(0)
    eps = 1e-4
    for name in ("tok_emb", "head.w", "layer1.ff.w1", "layer0.attn.wq"):
        arr = weights.arrays[name]
        grad = ad.grad_of(wts[name])
        for _ in range(5):
            i = tuple(int(rng.integers(s)) for s in arr.shape)
            saved = arr[i]

            def loss_at(v: float) -> float:
                arr[i] = v
                out = _sentence_loss(_wrap(weights, False), SMALL, ids,
                                     pad_to=len(ids), label_idx=1)
                arr[i] = saved
                return out.item()

            fd = (loss_at(saved + eps) - loss_at(saved - eps)) / (2.0 * eps)
            assert abs(grad[i] - fd) <= 1e-4 * max(1.0, abs(fd), abs(grad[i]))


def test_padding_with_masked_keys_preserves_the_output():
    weights = init(SMALL)
    ids = [2, 7, 9, 3]
    unpadded = _sentence_loss(_wrap(weights, False), SMALL, ids,
                              pad_to=len(ids), label_idx=0).item()
    padded = _sentence_loss(_wrap(weights, False), SMALL, ids,
                            pad_to=len(ids) + 5, label_idx=0).item()
    assert abs(unpadded - padded) <= 1e-9


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_forward_reports_nonfinite_layer():
    weights = init(SMALL)
    weights.arrays["layer1.ff.b2"][0] = np.nan
    with pytest.raises(NumericError, match="layer 1"):
        predict(weights, [2, 7, 3])


def test_training_memorizes_a_tiny_corpus():
    weights = init(SMALL)
    corpus = [
        ([2, 7, 9, 3], "LA"),
        ([2, 9, 7, 3], "LUA"),
        ([2, 11, 9, 3], "LA"),
        ([2, 9, 11, 3], "LUA"),
    ]
    trained, trace = train(weights, corpus, TrainConfig(lr=5e-3, epochs=60, batch=2, seed=1))
    assert trace.final_accuracy == 1.0
    assert trace.epoch_losses[-1] < trace.epoch_losses[0]
    # the input weights are untouched; training returns a new container
    assert np.array_equal(weights.arrays["tok_emb"], init(SMALL).arrays["tok_emb"])


def test_training_is_bit_deterministic():
    corpus = [([2, 7, 9, 3], "LA"), ([2, 9, 7, 3], "LUA"),
              ([2, 11, 3], "LA"), ([2, 5, 3], "LUA")]
    hyper = TrainConfig(lr=1e-3, epochs=3, batch=3, seed=9)
    a, _ = train(init(SMALL), corpus, hyper)
    b, _ = train(init(SMALL), corpus, hyper)
    assert a.checksum() == b.checksum()


def test_training_validates_corpus():
    weights = init(SMALL)
    with pytest.raises(DataError, match="empty"):
        train(weights, [], TrainConfig())
    with pytest.raises(DataError, match="both"):
        train(weights, [([2, 3], "LA")], TrainConfig())
    with pytest.raises(DataError, match="max_seq_len"):
        train(weights, [([2] * 13, "LA"), ([2, 3], "LUA")], TrainConfig())


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_training_divergence_is_a_numeric_error():
    # layer norm squashes most blow-ups; only a step near the float ceiling
    # actually drives activations non-finite
    corpus = [([2, 7, 9, 3], "LA"), ([2, 9, 7, 3], "LUA")]
    with pytest.raises(NumericError, match="epoch"):
        train(init(SMALL), corpus, TrainConfig(lr=1e308, epochs=3, batch=2, seed=0))


def test_save_load_round_trip_is_bit_exact(tmp_path):
    weights = init(SMALL)
    vocab = build_vocab(["the dog barks ."], max_size=40)
    weights.vocab = Vocabulary(vocab.tokens[:40]) if len(vocab) > 40 else vocab
    path = str(tmp_path / "w.bin")
    save_weights(weights, path)
    loaded = load_weights(path)
    assert loaded.config == weights.config
    assert loaded.checksum() == weights.checksum()
    for name in weights.names:
        assert np.array_equal(loaded.arrays[name], weights.arrays[name])
    assert loaded.vocab is not None
    assert loaded.vocab.tokens == weights.vocab.tokens
    # a second save of the loaded weights is byte-identical
    path2 = str(tmp_path / "w2.bin")
    save_weights(loaded, path2)
    assert open(path, "rb").read() == open(path2, "rb").read()


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
    with pytest.raises(DataError, match="magic"):
        load_weights(str(path))


def test_load_rejects_truncation(tmp_path):
    weights = init(SMALL)
    path = tmp_path / "w.bin"
    save_weights(weights, str(path))
    blob = path.read_bytes()
    clipped = tmp_path / "clipped.bin"
    clipped.write_bytes(blob[: len(blob) - 512])
    with pytest.raises(DataError, match="payload|truncated"):
        load_weights(str(clipped))


def test_weights_container_validates_shapes():
    weights = init(SMALL)
    arrays = {n: a.copy() for n, a in weights.arrays.items()}
    arrays["head.b"] = np.zeros(3)
    with pytest.raises(DataError, match="head.b"):
        ModelWeights(SMALL, arrays)
