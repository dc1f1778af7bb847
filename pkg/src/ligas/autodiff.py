"""Dense float64 tensors with reverse-mode automatic differentiation.

A :class:`Tensor` wraps a numpy array. Primitive operations record
themselves on a :class:`Tape` (one per evaluation) whenever any operand
requires gradients; :func:`backward` replays the tape in reverse to fill
``grad`` on every participating leaf.

Design constraints kept deliberately tight so every backward rule stays
auditable: all arithmetic is float64, broadcasting is limited to
scalar-times-tensor and row-bias addition, tapes are single use, and no
graph is ever reused between evaluations.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericError, ShapeError

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_GELU_CUBIC = 0.044715


class Tensor:
    """Shape-carrying float64 array that can participate in a tape.

    ``grad`` is ``None`` until a backward pass accumulates into it; a leaf
    that never receives gradient reads as zero via :func:`grad_of`.
    """

    __slots__ = ("data", "requires_grad", "grad", "tape")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def grad_of(t: Tensor) -> np.ndarray:
    """Gradient of a tensor after backward; zeros when disconnected."""
    if t.grad is None:
        return np.zeros_like(t.data)
    return t.grad


class Tape:
    """Execution-ordered record of primitive operations for one evaluation.

    Entries append in forward execution order, which is a valid topological
    order by construction. Independently built subgraphs carry separate
    tapes until an operation joins them; the join merges the tapes
    (union-find), which keeps topological order because two tapes can have
    no cross-edges before the op that merges them. A tape is consumed by
    its first backward pass and must then be discarded.
    """

    __slots__ = ("entries", "consumed", "_parent")

    def __init__(self):
        self.entries: list[tuple[Tensor, object]] = []
        self.consumed = False
        self._parent: "Tape | None" = None

    def find(self) -> "Tape":
        root = self
        while root._parent is not None:
            root = root._parent
        node = self
        while node._parent is not None:
            node._parent, node = root, node._parent
        return root


def _bind(out: Tensor, backward_fn, *operands: Tensor) -> Tensor:
    """Attach ``out`` to the operands' (merged) tape and record the rule.

    No operand requiring gradients means nothing is recorded (fast
    inference path).
    """
    tape: Tape | None = None
    track = False
    for op in operands:
        if op.requires_grad:
            track = True
        t = op.tape.find() if op.tape is not None else None
        if t is not None and t is not tape:
            if tape is None:
                tape = t
            else:
                if len(t.entries) > len(tape.entries):
                    tape, t = t, tape
                tape.entries.extend(t.entries)
                t.entries = []
                t._parent = tape
    if not track:
        return out
    if tape is None:
        tape = Tape()
    out.requires_grad = True
    out.tape = tape
    tape.entries.append((out, backward_fn))
    return out


def backward(out: Tensor) -> None:
    """Reverse-mode pass from a scalar output down to every tape leaf.

    Leaves not reachable from ``out`` simply keep ``grad=None`` (read as
    zero). Calling backward twice on the same tape is an error; build a
    fresh evaluation instead.
    """
    if out.data.size != 1:
        raise ShapeError(f"backward needs a scalar output, got shape {out.shape}")
    tape = out.tape.find() if out.tape is not None else None
    if tape is None:
        if out.requires_grad:
            out.grad = np.ones_like(out.data)
            return
        raise ShapeError("output is not connected to any tape leaf")
    if tape.consumed:
        raise ShapeError("tape already consumed; rebuild the evaluation before backward")
    tape.consumed = True
    out.accumulate(np.ones_like(out.data))
    for node, backward_fn in reversed(tape.entries):
        if node.grad is not None:
            backward_fn(node.grad)


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: shapes {a.data.shape} and {b.data.shape} do not agree")
    out = Tensor(a.data @ b.data)
    A, B = a.data, b.data

    def back(g):
        if a.requires_grad:
            a.accumulate(g @ B.T)
        if b.requires_grad:
            b.accumulate(A.T @ g)

    return _bind(out, back, a, b)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; also accepts a 1-D row bias added to each row of a matrix."""
    row_bias = a.data.ndim == 2 and b.data.ndim == 1 and b.data.shape[0] == a.data.shape[1]
    if not row_bias and a.data.shape != b.data.shape:
        raise ShapeError(f"add: shapes {a.data.shape} and {b.data.shape} do not agree")
    out = Tensor(a.data + b.data)

    def back(g):
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(g.sum(axis=0) if row_bias else g)

    return _bind(out, back, a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"sub: shapes {a.data.shape} and {b.data.shape} do not agree")
    out = Tensor(a.data - b.data)

    def back(g):
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(-g)

    return _bind(out, back, a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul: shapes {a.data.shape} and {b.data.shape} do not agree")
    out = Tensor(a.data * b.data)
    A, B = a.data, b.data

    def back(g):
        if a.requires_grad:
            a.accumulate(g * B)
        if b.requires_grad:
            b.accumulate(g * A)

    return _bind(out, back, a, b)


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply by a python scalar (the one permitted scalar broadcast)."""
    c = float(factor)
    out = Tensor(a.data * c)

    def back(g):
        if a.requires_grad:
            a.accumulate(g * c)

    return _bind(out, back, a)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y)

    def back(g):
        if a.requires_grad:
            a.accumulate(g * (1.0 - y * y))

    return _bind(out, back, a)


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    out = Tensor(y)

    def back(g):
        if a.requires_grad:
            a.accumulate(g * y)

    return _bind(out, back, a)


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data))
    A = a.data

    def back(g):
        if a.requires_grad:
            a.accumulate(g / A)

    return _bind(out, back, a)


def gelu(a: Tensor) -> Tensor:
    """GELU via the tanh approximation, with its exact analytic derivative."""
    x = a.data
    inner = _SQRT_2_OVER_PI * (x + _GELU_CUBIC * x**3)
    t = np.tanh(inner)
    out = Tensor(0.5 * x * (1.0 + t))

    def back(g):
        if a.requires_grad:
            d_inner = _SQRT_2_OVER_PI * (1.0 + 3.0 * _GELU_CUBIC * x * x)
            local = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner
            a.accumulate(g * local)

    return _bind(out, back, a)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stabilized softmax along one axis."""
    x = a.data
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y)

    def back(g):
        if a.requires_grad:
            dot = (g * y).sum(axis=axis, keepdims=True)
            a.accumulate(y * (g - dot))

    return _bind(out, back, a)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis to mean 0 / variance 1, then affine."""
    n = a.data.shape[-1]
    if gain.data.shape != (n,) or bias.data.shape != (n,):
        raise ShapeError(
            f"layer_norm: gain/bias shapes {gain.data.shape}/{bias.data.shape} "
            f"do not match last axis {n}"
        )
    x = a.data
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = Tensor(xhat * gain.data + bias.data)
    G = gain.data

    def back(g):
        if gain.requires_grad:
            gain.accumulate((g * xhat).reshape(-1, n).sum(axis=0))
        if bias.requires_grad:
            bias.accumulate(g.reshape(-1, n).sum(axis=0))
        if a.requires_grad:
            dxhat = g * G
            term = dxhat - dxhat.mean(axis=-1, keepdims=True)
            term -= xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
            a.accumulate(term * inv_std)

    return _bind(out, back, a, gain, bias)


def rows(table: Tensor, ids) -> Tensor:
    """Gather rows of a 2-D table; backward scatter-adds into the table."""
    if table.data.ndim != 2:
        raise ShapeError(f"rows: table must be 2-D, got shape {table.data.shape}")
    idx = np.asarray(ids, dtype=np.intp)
    out = Tensor(table.data[idx])

    def back(g):
        if table.requires_grad:
            acc = np.zeros_like(table.data)
            np.add.at(acc, idx, g)
            table.accumulate(acc)

    return _bind(out, back, table)


def slice_cols(a: Tensor, lo: int, hi: int) -> Tensor:
    if a.data.ndim != 2 or not (0 <= lo < hi <= a.data.shape[1]):
        raise ShapeError(f"slice_cols: [{lo}:{hi}] invalid for shape {a.data.shape}")
    out = Tensor(a.data[:, lo:hi].copy())

    def back(g):
        if a.requires_grad:
            acc = np.zeros_like(a.data)
            acc[:, lo:hi] = g
            a.accumulate(acc)

    return _bind(out, back, a)


def concat_cols(parts: list[Tensor]) -> Tensor:
    if not parts:
        raise ShapeError("concat_cols: no operands")
    m = parts[0].data.shape[0]
    for p in parts:
        if p.data.ndim != 2 or p.data.shape[0] != m:
            raise ShapeError(f"concat_cols: row counts differ ({p.data.shape} vs {m} rows)")
    widths = [p.data.shape[1] for p in parts]
    out = Tensor(np.concatenate([p.data for p in parts], axis=1))
    offsets = np.cumsum([0] + widths)

    def back(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                p.accumulate(g[:, lo:hi])

    return _bind(out, back, *parts)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose: expected 2-D, got shape {a.data.shape}")
    out = Tensor(a.data.T.copy())

    def back(g):
        if a.requires_grad:
            a.accumulate(g.T)

    return _bind(out, back, a)


def take_row(a: Tensor, i: int) -> Tensor:
    """Single row of a matrix as a 1-row matrix (used for first-position pooling)."""
    if a.data.ndim != 2 or not (0 <= i < a.data.shape[0]):
        raise ShapeError(f"take_row: row {i} invalid for shape {a.data.shape}")
    out = Tensor(a.data[i : i + 1].copy())

    def back(g):
        if a.requires_grad:
            acc = np.zeros_like(a.data)
            acc[i : i + 1] = g
            a.accumulate(acc)

    return _bind(out, back, a)


def pick(a: Tensor, flat_index: int) -> Tensor:
    """One element, flattened row-major, as a scalar tensor."""
    flat = a.data.reshape(-1)
    if not (0 <= flat_index < flat.size):
        raise ShapeError(f"pick: index {flat_index} invalid for shape {a.data.shape}")
    out = Tensor(flat[flat_index : flat_index + 1].copy())

    def back(g):
        if a.requires_grad:
            acc = np.zeros_like(a.data)
            acc.reshape(-1)[flat_index] = g[0]
            a.accumulate(acc)

    return _bind(out, back, a)


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(np.array([a.data.sum()]))

    def back(g):
        if a.requires_grad:
            a.accumulate(np.full_like(a.data, g[0]))

    return _bind(out, back, a)


def check_finite(t: Tensor, where: str) -> Tensor:
    """Raise :class:`NumericError` naming ``where`` if any entry is non-finite."""
    if not np.isfinite(t.data).all():
        raise NumericError(f"non-finite values in {where}")
    return t
