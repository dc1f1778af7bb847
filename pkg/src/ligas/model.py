"""Small deterministic transformer-encoder binary classifier.

The encoder maps token embeddings to acceptability logits through a stack
of post-norm self-attention blocks, pools the first position, and applies
a linear head. ``forward_from_embeddings`` is the attribution entry point:
it exposes the logits as a differentiable function of the embedding matrix.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import config_digest, stream_rng
from .errors import DataError, NumericError, UsageError
from .tokenizer import PAD_ID, Vocabulary

CLASSES = ("LA", "LUA")
LA, LUA = CLASSES

WEIGHTS_MAGIC = b"LIGASW01"

_MASKED_SCORE = -1e9


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 32
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 64
    max_seq_len: int = 32
    seed: int = 0
    n_classes: int = 2

    def __post_init__(self):
        for name in ("vocab_size", "d_model", "n_heads", "n_layers", "d_ff", "max_seq_len"):
            if getattr(self, name) <= 0:
                raise UsageError(f"ModelConfig.{name} must be positive")
        if self.d_model % self.n_heads != 0:
            raise UsageError(
                f"d_model {self.d_model} is not divisible by n_heads {self.n_heads}"
            )
        if self.n_classes != 2:
            raise UsageError("only binary acceptability classification is supported")
        if not (0 <= self.seed < 2**64):
            raise UsageError("seed must fit in 64 bits")

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "n_layers": self.n_layers,
            "d_ff": self.d_ff,
            "max_seq_len": self.max_seq_len,
            "seed": self.seed,
            "n_classes": self.n_classes,
        }


def tensor_shapes(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Named tensors of the model in their canonical (serialization) order."""
    d, ff = cfg.d_model, cfg.d_ff
    shapes: list[tuple[str, tuple[int, ...]]] = [
        ("tok_emb", (cfg.vocab_size, d)),
        ("pos_emb", (cfg.max_seq_len, d)),
    ]
    for i in range(cfg.n_layers):
        p = f"layer{i}"
        shapes += [
            (f"{p}.attn.wq", (d, d)),
            (f"{p}.attn.bq", (d,)),
            (f"{p}.attn.wk", (d, d)),
            (f"{p}.attn.bk", (d,)),
            (f"{p}.attn.wv", (d, d)),
            (f"{p}.attn.bv", (d,)),
            (f"{p}.attn.wo", (d, d)),
            (f"{p}.attn.bo", (d,)),
            (f"{p}.ln1.gain", (d,)),
            (f"{p}.ln1.bias", (d,)),
            (f"{p}.ff.w1", (d, ff)),
            (f"{p}.ff.b1", (ff,)),
            (f"{p}.ff.w2", (ff, d)),
            (f"{p}.ff.b2", (d,)),
            (f"{p}.ln2.gain", (d,)),
            (f"{p}.ln2.bias", (d,)),
        ]
    shapes += [("head.w", (d, cfg.n_classes)), ("head.b", (cfg.n_classes,))]
    return shapes


class ModelWeights:
    """Config plus the named parameter arrays, optionally with a vocabulary."""

    def __init__(self, config: ModelConfig, arrays: dict[str, np.ndarray],
                 vocab: Vocabulary | None = None):
        expected = tensor_shapes(config)
        if [n for n, _ in expected] != list(arrays.keys()):
            raise DataError("weight tensor names do not match the model configuration")
        for name, shape in expected:
            if arrays[name].shape != shape:
                raise DataError(
                    f"tensor {name} has shape {arrays[name].shape}, expected {shape}"
                )
            if not np.isfinite(arrays[name]).all():
                raise DataError(f"tensor {name} contains non-finite values")
        self.config = config
        self.arrays = arrays
        self.vocab = vocab

    @property
    def names(self) -> list[str]:
        return list(self.arrays.keys())

    def copy(self) -> "ModelWeights":
        return ModelWeights(
            self.config, {n: a.copy() for n, a in self.arrays.items()}, self.vocab
        )

    def checksum(self) -> str:
        h = hashlib.sha256()
        for name, arr in self.arrays.items():
            h.update(name.encode("utf-8"))
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return h.hexdigest()


def init(config: ModelConfig) -> ModelWeights:
    """Seeded initialization: uniform(-s, s) with s = 1/sqrt(d_model) for
    matrices, zeros for biases, identity affine for the layer norms."""
    rng = stream_rng(config.seed, "model-init")
    s = 1.0 / math.sqrt(config.d_model)
    arrays: dict[str, np.ndarray] = {}
    for name, shape in tensor_shapes(config):
        if name.endswith(".gain"):
            arrays[name] = np.ones(shape)
        elif len(shape) == 1:
            arrays[name] = np.zeros(shape)
        else:
            arrays[name] = rng.uniform(-s, s, size=shape)
    return ModelWeights(config, arrays)


@dataclass
class Prediction:
    logits: np.ndarray
    probs: np.ndarray
    predicted_class: str
    logits_tensor: Tensor = field(repr=False, default=None)
    probs_tensor: Tensor = field(repr=False, default=None)

    @property
    def predicted_index(self) -> int:
        return CLASSES.index(self.predicted_class)

    @property
    def predicted_prob(self) -> float:
        return float(self.probs[self.predicted_index])


def argmax_class(probs: np.ndarray, tie_break: str = LUA) -> str:
    """Highest-probability class; an exact tie resolves to ``tie_break``."""
    la, lua = float(probs[0]), float(probs[1])
    if la == lua:
        return tie_break
    return LA if la > lua else LUA


def _wrap(weights: ModelWeights, requires_grad: bool) -> dict[str, Tensor]:
    return {n: Tensor(a, requires_grad=requires_grad) for n, a in weights.arrays.items()}


def _attention(wts: dict[str, Tensor], prefix: str, h: Tensor,
               mask_bias: Tensor | None, n_heads: int) -> Tensor:
    d = h.shape[1]
    dh = d // n_heads
    q = ad.add(ad.matmul(h, wts[f"{prefix}.wq"]), wts[f"{prefix}.bq"])
    k = ad.add(ad.matmul(h, wts[f"{prefix}.wk"]), wts[f"{prefix}.bk"])
    v = ad.add(ad.matmul(h, wts[f"{prefix}.wv"]), wts[f"{prefix}.bv"])
    inv = 1.0 / math.sqrt(dh)
    parts = []
    for head in range(n_heads):
        lo, hi = head * dh, (head + 1) * dh
        qh = ad.slice_cols(q, lo, hi)
        kh = ad.slice_cols(k, lo, hi)
        vh = ad.slice_cols(v, lo, hi)
        scores = ad.scale(ad.matmul(qh, ad.transpose(kh)), inv)
        if mask_bias is not None:
            scores = ad.add(scores, mask_bias)
        parts.append(ad.matmul(ad.softmax(scores, axis=-1), vh))
    ctx = ad.concat_cols(parts)
    return ad.add(ad.matmul(ctx, wts[f"{prefix}.wo"]), wts[f"{prefix}.bo"])


def _encode(wts: dict[str, Tensor], cfg: ModelConfig, e: Tensor,
            mask_bias: Tensor | None = None, check: bool = True) -> Tensor:
    h = e
    for i in range(cfg.n_layers):
        p = f"layer{i}"
        attn_out = _attention(wts, f"{p}.attn", h, mask_bias, cfg.n_heads)
        h = ad.layer_norm(ad.add(h, attn_out), wts[f"{p}.ln1.gain"], wts[f"{p}.ln1.bias"])
        up = ad.gelu(ad.add(ad.matmul(h, wts[f"{p}.ff.w1"]), wts[f"{p}.ff.b1"]))
        ff = ad.add(ad.matmul(up, wts[f"{p}.ff.w2"]), wts[f"{p}.ff.b2"])
        h = ad.layer_norm(ad.add(h, ff), wts[f"{p}.ln2.gain"], wts[f"{p}.ln2.bias"])
        if check:
            ad.check_finite(h, f"encoder layer {i}")
    return h


def _logits(wts: dict[str, Tensor], h: Tensor) -> Tensor:
    pooled = ad.take_row(h, 0)
    return ad.add(ad.matmul(pooled, wts["head.w"]), wts["head.b"])


def embed(weights: ModelWeights, token_ids) -> Tensor:
    """Token + position embeddings as a gradient-tracking leaf tensor."""
    cfg = weights.config
    ids = list(token_ids)
    if not ids:
        raise DataError("embed: empty token sequence")
    if len(ids) > cfg.max_seq_len:
        raise DataError(
            f"embed: sequence of {len(ids)} tokens exceeds max_seq_len {cfg.max_seq_len}"
        )
    for t in ids:
        if not (0 <= t < cfg.vocab_size):
            raise DataError(f"embed: token id {t} out of range [0, {cfg.vocab_size})")
    values = weights.arrays["tok_emb"][ids] + weights.arrays["pos_emb"][: len(ids)]
    return Tensor(values, requires_grad=True)


def forward_from_embeddings(weights: ModelWeights, e: Tensor,
                            tie_break: str = LUA) -> Prediction:
    """Run the encoder stack on an embedding matrix and classify.

    The returned prediction keeps tensor handles to the logits and
    probabilities so callers can differentiate either with respect to ``e``.
    """
    if not np.isfinite(e.data).all():
        raise NumericError("non-finite values in input embeddings")
    wts = _wrap(weights, requires_grad=False)
    h = _encode(wts, weights.config, e)
    logits_t = _logits(wts, h)
    probs_t = ad.softmax(logits_t, axis=-1)
    probs = probs_t.data.reshape(-1).copy()
    return Prediction(
        logits=logits_t.data.reshape(-1).copy(),
        probs=probs,
        predicted_class=argmax_class(probs, tie_break),
        logits_tensor=logits_t,
        probs_tensor=probs_t,
    )


def predict(weights: ModelWeights, token_ids, tie_break: str = LUA) -> Prediction:
    return forward_from_embeddings(weights, embed(weights, token_ids), tie_break)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 30
    batch: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.epochs <= 0 or self.batch <= 0:
            raise UsageError("lr, epochs and batch must all be positive")


@dataclass
class TrainTrace:
    epoch_losses: list[float]
    final_accuracy: float


def _class_index(label) -> int:
    if label in CLASSES:
        return CLASSES.index(label)
    if label in (0, 1):
        return int(label)
    raise DataError(f"unknown class label {label!r}")


def _sentence_loss(wts: dict[str, Tensor], cfg: ModelConfig, ids: list[int],
                   pad_to: int, label_idx: int) -> Tensor:
    n = len(ids)
    padded = ids + [PAD_ID] * (pad_to - n)
    positions = list(range(pad_to))
    emb = ad.add(ad.rows(wts["tok_emb"], padded), ad.rows(wts["pos_emb"], positions))
    mask_bias = None
    if pad_to > n:
        bias = np.zeros(pad_to)
        bias[n:] = _MASKED_SCORE
        mask_bias = Tensor(bias)
    h = _encode(wts, cfg, emb, mask_bias, check=False)
    logits = _logits(wts, h)
    # stable log-sum-exp; the shift constant drops out of the gradient
    m = float(logits.data.max())
    shifted = ad.sub(logits, Tensor(np.full((1, cfg.n_classes), m)))
    lse = ad.add(ad.log(ad.sum_all(ad.exp(shifted))), Tensor([m]))
    return ad.sub(lse, ad.pick(logits, label_idx))


def train(weights: ModelWeights, corpus: list[tuple[list[int], object]],
          hyper: TrainConfig) -> tuple[ModelWeights, TrainTrace]:
    """Adam on cross-entropy; deterministic given the shuffle seed.

    ``corpus`` pairs token-id sequences with LA/LUA labels. Sentences are
    padded to the longest in their batch, with attention to the padded keys
    masked out.
    """
    if not corpus:
        raise DataError("train: empty corpus")
    cfg = weights.config
    examples = [(list(ids), _class_index(label)) for ids, label in corpus]
    labels_present = {y for _, y in examples}
    if labels_present != {0, 1}:
        raise DataError("train: corpus must contain both LA and LUA examples")
    for ids, _ in examples:
        if len(ids) > cfg.max_seq_len:
            raise DataError(
                f"train: sentence of {len(ids)} tokens exceeds max_seq_len {cfg.max_seq_len}"
            )

    arrays = {n: a.copy() for n, a in weights.arrays.items()}
    adam_m = {n: np.zeros_like(a) for n, a in arrays.items()}
    adam_v = {n: np.zeros_like(a) for n, a in arrays.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    rng = stream_rng(hyper.seed, "train-shuffle")
    step = 0
    epoch_losses = []
    for epoch in range(hyper.epochs):
        order = rng.permutation(len(examples))
        loss_sum = 0.0
        for start in range(0, len(order), hyper.batch):
            batch = [examples[i] for i in order[start : start + hyper.batch]]
            pad_to = max(len(ids) for ids, _ in batch)
            wts = {n: Tensor(a, requires_grad=True) for n, a in arrays.items()}
            total = None
            for ids, y in batch:
                loss = _sentence_loss(wts, cfg, ids, pad_to, y)
                total = loss if total is None else ad.add(total, loss)
            batch_loss = ad.scale(total, 1.0 / len(batch))
            value = batch_loss.item()
            if not math.isfinite(value):
                raise NumericError(f"training diverged at epoch {epoch}")
            loss_sum += value * len(batch)
            ad.backward(batch_loss)
            step += 1
            bc1 = 1.0 - beta1**step
            bc2 = 1.0 - beta2**step
            for name, t in wts.items():
                g = ad.grad_of(t)
                m = adam_m[name]
                v = adam_v[name]
                m *= beta1
                m += (1.0 - beta1) * g
                v *= beta2
                v += (1.0 - beta2) * (g * g)
                arrays[name] -= hyper.lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        epoch_losses.append(loss_sum / len(examples))

    trained = ModelWeights(cfg, arrays, weights.vocab)
    correct = sum(
        1 for ids, y in examples if predict(trained, ids).predicted_index == y
    )
    return trained, TrainTrace(epoch_losses, correct / len(examples))


def accuracy(weights: ModelWeights, corpus: list[tuple[list[int], object]]) -> float:
    examples = [(list(ids), _class_index(label)) for ids, label in corpus]
    if not examples:
        raise DataError("accuracy: empty corpus")
    correct = sum(
        1 for ids, y in examples if predict(weights, ids).predicted_index == y
    )
    return correct / len(examples)


# ---------------------------------------------------------------------------
# weight container format
# ---------------------------------------------------------------------------


def save_weights(weights: ModelWeights, path: str) -> None:
    """Write the bit-exact weight container.

    Layout: 8-byte magic, little-endian u64 header length, UTF-8 JSON header
    (config, optional vocabulary, tensor directory with payload offsets),
    then the tensors as little-endian float64 in directory order.
    """
    entries = []
    blobs = []
    offset = 0
    for name, arr in weights.arrays.items():
        blob = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += len(blob)
        blobs.append(blob)
    header: dict = {
        "config": weights.config.to_dict(),
        "config_digest": config_digest(weights.config.to_dict()),
        "tensors": entries,
        "payload_bytes": offset,
    }
    if weights.vocab is not None:
        header["vocab"] = weights.vocab.tokens
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(struct.pack("<Q", len(head)))
        fh.write(head)
        for blob in blobs:
            fh.write(blob)


def load_weights(path: str) -> ModelWeights:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != WEIGHTS_MAGIC:
        raise DataError(f"{path}: bad magic, not a weight container")
    if len(blob) < 16:
        raise DataError(f"{path}: truncated header")
    (head_len,) = struct.unpack("<Q", blob[8:16])
    if len(blob) < 16 + head_len:
        raise DataError(f"{path}: truncated header ({head_len} bytes declared)")
    try:
        header = json.loads(blob[16 : 16 + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: unreadable header: {exc}") from exc
    try:
        cfg = ModelConfig(**header["config"])
        entries = header["tensors"]
        declared = header["payload_bytes"]
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed header: {exc}") from exc
    payload = blob[16 + head_len :]
    if len(payload) != declared:
        raise DataError(
            f"{path}: payload is {len(payload)} bytes, header declares {declared}"
        )
    arrays: dict[str, np.ndarray] = {}
    for entry in entries:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + count * 8
        if end > len(payload):
            raise DataError(f"{path}: tensor {entry['name']} overruns the payload")
        arrays[entry["name"]] = (
            np.frombuffer(payload[start:end], dtype="<f8").astype(np.float64).reshape(shape)
        )
    vocab = Vocabulary(header["vocab"]) if "vocab" in header else None
    return ModelWeights(cfg, arrays, vocab)
