"""Integrated gradients between the classifier output and the embedding layer.

The attribution of token ``i``, dimension ``j`` is

    (x - x')[i, j] * sum_k w_k * dF/de[i, j]  at  e = x' + a_k (x - x')

where F is the chosen class output (logit by default), x the input
embeddings, x' a baseline, and (a_k, w_k) a Riemann-type quadrature rule.
By the completeness property the attributions sum to F(x) - F(x') up to
quadrature error; the residual is reported per sentence as a diagnostic.

Per-token scores are plain sums over embedding dimensions; word scores are
exact sums over each word's subword span (compensated summation throughout,
so the aggregation identities hold bit-for-bit).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DataError, NumericError, UsageError
from .model import CLASSES, ModelWeights, Prediction, embed, forward_from_embeddings
from .tokenizer import PAD_ID, TokenizedSentence

RULES = ("left", "right", "trapezoid")
TARGET_SPACES = ("logit", "probability")
BASELINE_MODES = ("pad_embeddings", "zero")


@dataclass(frozen=True)
class IGConfig:
    steps: int = 64
    rule: str = "trapezoid"
    baseline_mode: str = "pad_embeddings"
    target_class: str | None = None  # None: class predicted for the clean input
    target_space: str = "logit"
    normalize: bool = False  # kept for experiments; off in every shipped report

    def __post_init__(self):
        if self.steps < 1:
            raise UsageError(f"steps must be >= 1, got {self.steps}")
        if self.rule not in RULES:
            raise UsageError(f"unknown quadrature rule {self.rule!r}; expected one of {RULES}")
        if self.baseline_mode not in BASELINE_MODES:
            raise UsageError(f"unknown baseline mode {self.baseline_mode!r}")
        if self.target_class is not None and self.target_class not in CLASSES:
            raise UsageError(f"unknown target class {self.target_class!r}")
        if self.target_space not in TARGET_SPACES:
            raise UsageError(f"unknown target space {self.target_space!r}")

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "rule": self.rule,
            "baseline_mode": self.baseline_mode,
            "target_class": self.target_class or "predicted",
            "target_space": self.target_space,
            "normalize": self.normalize,
        }


def interpolation_points(m: int, rule: str) -> list[tuple[float, float]]:
    """The (alpha_k, weight_k) table for an m-step quadrature rule.

    Weights are produced as consecutive differences of correctly rounded
    cumulative fractions, so their compensated sum is exactly 1.0.
    """
    if m < 1:
        raise UsageError(f"interpolation_points: m must be >= 1, got {m}")
    if rule == "right":
        alphas = [k / m for k in range(1, m + 1)]
        cumulative = [Fraction(k, m) for k in range(1, m + 1)]
    elif rule == "left":
        alphas = [(k - 1) / m for k in range(1, m + 1)]
        cumulative = [Fraction(k, m) for k in range(1, m + 1)]
    elif rule == "trapezoid":
        alphas = [k / m for k in range(0, m + 1)]
        cumulative = [Fraction(2 * k + 1, 2 * m) for k in range(0, m)] + [Fraction(1)]
    else:
        raise UsageError(f"unknown quadrature rule {rule!r}; expected one of {RULES}")
    weights = []
    prev = 0.0
    for c in cumulative:
        value = float(c)
        weights.append(value - prev)
        prev = value
    return list(zip(alphas, weights))


def make_baseline(weights: ModelWeights, token_ids, mode: str) -> Tensor:
    """Reference embeddings the interpolation path starts from.

    ``pad_embeddings`` re-embeds the sentence with every interior token
    replaced by [PAD], keeping the first and last positions (the enclosing
    specials) as in the input; ``zero`` is the all-zeros matrix.
    """
    ids = list(token_ids)
    if mode == "zero":
        return Tensor(np.zeros((len(ids), weights.config.d_model)))
    if mode == "pad_embeddings":
        padded = list(ids)
        for i in range(1, len(padded) - 1):
            padded[i] = PAD_ID
        return Tensor(embed(weights, padded).data)
    raise UsageError(f"unknown baseline mode {mode!r}")


@dataclass
class PathIntegral:
    """Raw quadrature output for one input/baseline pair."""

    attributions: np.ndarray
    output_value: float
    baseline_value: float

    @property
    def total(self) -> float:
        return math.fsum(self.attributions.reshape(-1).tolist())

    @property
    def completeness_gap(self) -> float:
        return abs(self.total - (self.output_value - self.baseline_value))


ValueAndGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


def path_integral(f: ValueAndGrad, x: np.ndarray, baseline: np.ndarray,
                  m: int, rule: str, threads: int = 1) -> PathIntegral:
    """Quadrature core: attributions of ``f`` along the straight path.

    ``f`` maps an embedding array to (scalar output, gradient array).
    Gradient evaluations are independent; with ``threads > 1`` they run in a
    pool, but the weighted reduction always happens in step order so the
    result is bit-identical to the serial one.
    """
    x = np.asarray(x, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    if x.shape != baseline.shape:
        raise DataError(f"input shape {x.shape} != baseline shape {baseline.shape}")
    points = interpolation_points(m, rule)
    diff = x - baseline

    def grad_at(alpha: float) -> np.ndarray:
        _, g = f(baseline + alpha * diff)
        return g

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            grads = list(pool.map(grad_at, [a for a, _ in points]))
    else:
        grads = [grad_at(a) for a, _ in points]

    acc = np.zeros_like(x)
    for k, ((_, w), g) in enumerate(zip(points, grads)):
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient at interpolation step {k}")
        acc += w * g
    out_value, _ = f(x)
    base_value, _ = f(baseline)
    return PathIntegral(diff * acc, out_value, base_value)


@dataclass
class SentenceAttribution:
    sentence: TokenizedSentence
    per_token: np.ndarray = field(repr=False)
    token_scores: list[float]
    word_ligas: list[float]
    sentence_ligas: float
    completeness_gap: float
    prediction: Prediction
    target_class: str
    target_space: str
    output_value: float
    baseline_value: float

    @property
    def words(self) -> list[str]:
        return list(self.sentence.words)


def word_scores(token_scores, alignment) -> list[float]:
    """Exact per-word sums of subword token scores.

    ``alignment`` pairs each word index with its half-open token span;
    special tokens fall outside every span and are excluded here (they still
    count toward the completeness total).
    """
    scores = list(token_scores)
    out: list[float] = []
    for word_index, (lo, hi) in alignment:
        if not (0 <= lo < hi <= len(scores)):
            raise DataError(
                f"word {word_index}: token span [{lo}, {hi}) out of range for "
                f"{len(scores)} tokens"
            )
        out.append(math.fsum(scores[lo:hi]))
    return out


def _target_function(weights: ModelWeights, target_index: int,
                     target_space: str) -> ValueAndGrad:
    def f(e_array: np.ndarray) -> tuple[float, np.ndarray]:
        e = Tensor(e_array, requires_grad=True)
        pred = forward_from_embeddings(weights, e)
        source = pred.probs_tensor if target_space == "probability" else pred.logits_tensor
        out = ad.pick(source, target_index)
        value = out.item()
        ad.backward(out)
        return value, ad.grad_of(e)

    return f


def integrated_gradients(weights: ModelWeights, sentence: TokenizedSentence,
                         cfg: IGConfig, threads: int = 1) -> SentenceAttribution:
    """Attribute one tokenized sentence at the embedding layer."""
    ids = list(sentence.token_ids)
    x = embed(weights, ids)
    prediction = forward_from_embeddings(weights, x)
    target_class = cfg.target_class or prediction.predicted_class
    target_index = CLASSES.index(target_class)
    baseline = make_baseline(weights, ids, cfg.baseline_mode)
    f = _target_function(weights, target_index, cfg.target_space)
    result = path_integral(f, x.data, baseline.data, cfg.steps, cfg.rule, threads)

    token_scores = [math.fsum(row.tolist()) for row in result.attributions]
    if cfg.normalize:
        norm = math.sqrt(math.fsum(s * s for s in token_scores))
        if norm > 0.0:
            token_scores = [s / norm for s in token_scores]
    ligas = word_scores(token_scores, sentence.alignment)
    total = math.fsum(token_scores)
    gap = abs(total - (result.output_value - result.baseline_value))
    return SentenceAttribution(
        sentence=sentence,
        per_token=result.attributions,
        token_scores=token_scores,
        word_ligas=ligas,
        sentence_ligas=math.fsum(ligas),
        completeness_gap=gap,
        prediction=prediction,
        target_class=target_class,
        target_space=cfg.target_space,
        output_value=result.output_value,
        baseline_value=result.baseline_value,
    )


# ---------------------------------------------------------------------------
# attribution report format (JSON lines)
# ---------------------------------------------------------------------------


def attribution_record(sentence_id: str, category: str, gold: str,
                       attribution: SentenceAttribution) -> dict:
    return {
        "id": sentence_id,
        "category": category,
        "gold": gold,
        "predicted": attribution.prediction.predicted_class,
        "prob": attribution.prediction.predicted_prob,
        "sentence_ligas": attribution.sentence_ligas,
        "completeness_gap": attribution.completeness_gap,
        "words": [
            {"text": w, "ligas": s}
            for w, s in zip(attribution.words, attribution.word_ligas)
        ],
    }


def write_attributions_jsonl(path: str, records: Iterable[dict],
                             header: dict | None = None) -> None:
    """One JSON object per line; an optional id-less header object leads."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header is not None:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
        for record in records:
            fh.write(json.dumps(record) + "\n")


def read_attributions_jsonl(path: str) -> tuple[dict, list[dict]]:
    """Returns (header, records); the header is {} when absent."""
    header: dict = {}
    records: list[dict] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{line_no}: expected a JSON object")
            if "id" not in obj:
                if line_no == 1:
                    header = obj
                    continue
                raise DataError(f"{path}:{line_no}: record is missing 'id'")
            missing = [k for k in ("category", "gold", "predicted", "prob",
                                   "sentence_ligas", "completeness_gap", "words")
                       if k not in obj]
            if missing:
                raise DataError(f"{path}:{line_no}: record is missing {missing}")
            records.append(obj)
    return header, records
