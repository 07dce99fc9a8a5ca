"""A small reverse-mode autodiff over dense float64 numpy arrays.

Only the operations the matcher needs are provided. Every op checks its
input shapes and refuses to produce non-finite values.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class GraphStateError(RuntimeError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_op", "_consumed")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._op = ""
        self._consumed = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, op={self._op or 'leaf'!r})"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable ``requires_grad`` leaf.

        The recorded graph is released afterwards; a second call on the same
        result raises :class:`GraphStateError`.
        """
        if self._consumed:
            raise GraphStateError("backward() already ran on this graph; run a new forward pass first")
        if self.size != 1:
            raise ShapeError(f"backward: loss must be scalar, got shape {self.shape}")
        if not self.requires_grad:
            raise GraphStateError("backward: loss does not depend on any trainable tensor")

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if node._backward is None:
                if g is not None:
                    node._accumulate(g)
                continue
            if g is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

        for node in order:
            if node._backward is not None:
                node._parents = ()
                node._backward = None
                node._consumed = True

    __matmul__ = lambda self, other: matmul(self, other)  # noqa: E731
    __add__ = lambda self, other: add(self, other)  # noqa: E731
    __mul__ = lambda self, other: hadamard(self, other)  # noqa: E731


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(op: str, data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise FloatingPointError(f"{op}: produced non-finite values")
    out = Tensor(data)
    out._op = op
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _check(cond: bool, op: str, msg: str) -> None:
    if not cond:
        raise ShapeError(f"{op}: {msg}")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check(a.data.ndim == 2 and b.data.ndim == 2, "matmul", f"need 2-D operands, got {a.shape} and {b.shape}")
    _check(a.shape[1] == b.shape[0], "matmul", f"inner dimensions differ: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _result("matmul", ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def add(a, b) -> Tensor:
    """Elementwise sum; ``b`` may also be a bias row broadcast over the rows of ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape == b.shape:
        return _result("add", a.data + b.data, (a, b), lambda g: (g, g))
    bias_ok = a.data.ndim == 2 and b.data.ndim in (1, 2) and b.size == a.shape[1] and (b.data.ndim == 1 or b.shape[0] == 1)
    _check(bias_ok, "add", f"incompatible shapes {a.shape} and {b.shape}")
    bshape = b.shape
    return _result("add", a.data + b.data.reshape(1, -1), (a, b), lambda g: (g, g.sum(axis=0).reshape(bshape)))


def hadamard(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check(a.shape == b.shape, "hadamard", f"shapes differ: {a.shape} vs {b.shape}")
    ad, bd = a.data, b.data
    return _result("hadamard", ad * bd, (a, b), lambda g: (g * bd, g * ad))


def abs_diff(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check(a.shape == b.shape, "abs_diff", f"shapes differ: {a.shape} vs {b.shape}")
    diff = a.data - b.data
    sign = np.sign(diff)
    return _result("abs_diff", np.abs(diff), (a, b), lambda g: (g * sign, -g * sign))


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    return _result("scale", a.data * c, (a,), lambda g: (g * c,))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _result("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = _sigmoid(a.data)
    return _result("sigmoid", s, (a,), lambda g: (g * s * (1.0 - s),))


def identity(a) -> Tensor:
    return as_tensor(a)


def concat(tensors: Sequence, axis: int = 1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    _check(len(ts) > 0, "concat", "nothing to concatenate")
    ndim = ts[0].data.ndim
    _check(all(t.data.ndim == ndim for t in ts), "concat", "operands differ in rank")
    ax = axis % ndim
    for t in ts:
        other = [s for i, s in enumerate(t.shape) if i != ax]
        _check(other == [s for i, s in enumerate(ts[0].shape) if i != ax], "concat", f"shapes {t.shape} and {ts[0].shape} disagree off axis {axis}")
    bounds = np.cumsum([0] + [t.shape[ax] for t in ts])

    def backward(g):
        return tuple(np.take(g, range(bounds[i], bounds[i + 1]), axis=ax) for i in range(len(ts)))

    return _result("concat", np.concatenate([t.data for t in ts], axis=ax), ts, backward)


def mean_rows(a) -> Tensor:
    """Average the rows of an N×M matrix into a 1×M row."""
    a = as_tensor(a)
    _check(a.data.ndim == 2 and a.shape[0] > 0, "mean_rows", f"need a non-empty 2-D input, got {a.shape}")
    n = a.shape[0]
    return _result("mean_rows", a.data.mean(axis=0, keepdims=True), (a,), lambda g: (np.repeat(g / n, n, axis=0),))


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    return _result("sum", np.array(a.data.sum()), (a,), lambda g: (np.full(shape, float(g)),))


def add_n(tensors: Sequence) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    _check(len(ts) > 0, "add_n", "nothing to add")
    shape = ts[0].shape
    _check(all(t.shape == shape for t in ts), "add_n", "shapes differ")
    return _result("add_n", np.sum([t.data for t in ts], axis=0), ts, lambda g: tuple(g for _ in ts))


def conv1d(seq, weight, bias=None) -> Tensor:
    """Same-padded 1-D convolution of an L×E sequence with K×E×F filters -> L×F."""
    seq, weight = as_tensor(seq), as_tensor(weight)
    _check(seq.data.ndim == 2, "conv1d", f"sequence must be L×E, got {seq.shape}")
    _check(weight.data.ndim == 3, "conv1d", f"filters must be K×E×F, got {weight.shape}")
    k, e, f = weight.shape
    _check(k % 2 == 1, "conv1d", f"kernel size must be odd for same padding, got {k}")
    _check(seq.shape[1] == e, "conv1d", f"embedding width {seq.shape[1]} != filter width {e}")
    length = seq.shape[0]
    pad = (k - 1) // 2
    padded = np.zeros((length + 2 * pad, e))
    padded[pad : pad + length] = seq.data
    cols = np.stack([padded[i : i + length] for i in range(k)], axis=1).reshape(length, k * e)
    w2 = weight.data.reshape(k * e, f)
    out = cols @ w2
    parents: list[Tensor] = [seq, weight]
    if bias is not None:
        bias = as_tensor(bias)
        _check(bias.shape == (f,), "conv1d", f"bias must have shape ({f},), got {bias.shape}")
        out = out + bias.data
        parents.append(bias)

    def backward(g):
        dw = (cols.T @ g).reshape(k, e, f)
        dcols = (g @ w2.T).reshape(length, k, e)
        dpad = np.zeros_like(padded)
        for i in range(k):
            dpad[i : i + length] += dcols[:, i, :]
        grads = [dpad[pad : pad + length], dw]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return tuple(grads)

    return _result("conv1d", out, parents, backward)


def maxpool_time(a) -> Tensor:
    """Column-wise max over the time axis of an L×F matrix -> 1×F."""
    a = as_tensor(a)
    _check(a.data.ndim == 2 and a.shape[0] > 0, "maxpool_time", f"need a non-empty L×F input, got {a.shape}")
    idx = np.argmax(a.data, axis=0)
    cols = np.arange(a.shape[1])
    shape = a.shape

    def backward(g):
        out = np.zeros(shape)
        out[idx, cols] = g.reshape(-1)
        return (out,)

    return _result("maxpool_time", a.data[idx, cols].reshape(1, -1), (a,), backward)


def dropout(a, p: float, train_mode: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; the identity in eval mode or when ``p == 0``."""
    a = as_tensor(a)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout: p must be in [0, 1), got {p}")
    if not train_mode or p == 0.0:
        return a
    if rng is None:
        raise ValueError("dropout: train mode needs an rng")
    mask = (rng.random(a.shape) >= p) / (1.0 - p)
    return _result("dropout", a.data * mask, (a,), lambda g: (g * mask,))


def bce_with_logits(logit, target: float) -> Tensor:
    """Binary cross-entropy of ``sigmoid(logit)`` against a 0/1 target, computed stably."""
    logit = as_tensor(logit)
    _check(logit.size == 1, "bce_with_logits", f"expects a single logit, got shape {logit.shape}")
    z = float(logit.data.reshape(-1)[0])
    loss = max(z, 0.0) - z * target + math.log1p(math.exp(-abs(z)))
    p = float(_sigmoid(np.array([z]))[0])
    shape = logit.shape
    return _result("bce", np.array(loss), (logit,), lambda g: (np.full(shape, float(g) * (p - target)),))


def normalize_adjacency(adj: np.ndarray) -> np.ndarray:
    """Renormalized propagation matrix D^-1/2 (A + I) D^-1/2 with D the row sums of A + I."""
    adj = np.asarray(adj, dtype=np.float64)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ShapeError(f"normalize_adjacency: need a square matrix, got {adj.shape}")
    a_tilde = adj + np.eye(adj.shape[0])
    inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    out = a_tilde * inv_sqrt[:, None] * inv_sqrt[None, :]
    # Keep exact symmetry regardless of rounding order.
    return np.triu(out) + np.triu(out, 1).T


def gcn_layer(h, a_norm, w, activation: Callable[[Tensor], Tensor] = relu) -> Tensor:
    """One graph convolution: ``activation(A_norm @ H @ W)``."""
    h, w = as_tensor(h), as_tensor(w)
    a_norm = as_tensor(a_norm)
    _check(a_norm.shape == (h.shape[0], h.shape[0]), "gcn_layer", f"adjacency {a_norm.shape} does not match {h.shape[0]} vertices")
    return activation(matmul(matmul(a_norm, h), w))


# ---------------------------------------------------------------------------
# optimisation


@dataclass
class AdamState:
    beta1: float = 0.8
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


WARMUP_STEPS = 1000
BASE_LR = 1e-3


def lr_schedule(step: int, base_lr: float = BASE_LR, warmup: int = WARMUP_STEPS) -> float:
    """Warm-up ``base_lr * (1 - exp(-7 t / warmup))``, then constant."""
    if step <= 0:
        return 0.0
    if step >= warmup:
        return base_lr
    return base_lr * (1.0 - math.exp(-7.0 * step / warmup))


def clip_global_norm(grads: Iterable[np.ndarray], max_norm: float = 5.0) -> float:
    """Rescale ``grads`` in place so their joint L2 norm is at most ``max_norm``.

    Returns the norm measured before clipping.
    """
    grads = list(grads)
    norm = math.sqrt(math.fsum(float(np.sum(g * g)) for g in grads))
    if norm > max_norm:
        factor = max_norm / norm
        for g in grads:
            g *= factor
    return norm


def l2_decay(params: Mapping[str, Tensor], lam: float = 3e-7) -> None:
    for p in params.values():
        if p.grad is None:
            p.grad = np.zeros_like(p.data)
        p.grad += lam * p.data


def adam_step(params: Mapping[str, Tensor], state: AdamState, lr: float) -> None:
    state.step += 1
    t = state.step
    for name, p in params.items():
        if p.grad is None:
            continue
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m *= state.beta1
        m += (1.0 - state.beta1) * p.grad
        v *= state.beta2
        v += (1.0 - state.beta2) * p.grad * p.grad
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# checkpoints

_MAGIC = b"CIGMPRM\x00"
FORMAT_VERSION = 1


def save_params(path: str | Path, params: Mapping, meta: dict | None = None, binary: bool = True) -> None:
    """Write named parameters (row-major float64) plus a JSON metadata blob.

    The binary layout is bit-exact; the JSON layout stores shortest
    round-trip float reprs.
    """
    arrays = {name: np.array(p.data if isinstance(p, Tensor) else p, dtype=np.float64, order="C") for name, p in params.items()}
    meta = meta or {}
    if binary:
        blob = json.dumps(meta, ensure_ascii=False).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<IQ", FORMAT_VERSION, len(blob)))
            fh.write(blob)
            fh.write(struct.pack("<I", len(arrays)))
            for name, arr in arrays.items():
                raw = name.encode("utf-8")
                fh.write(struct.pack("<I", len(raw)))
                fh.write(raw)
                fh.write(struct.pack("<I", arr.ndim))
                fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
                fh.write(arr.astype("<f8").tobytes(order="C"))
    else:
        doc = {
            "format": "cigmatch-params",
            "version": FORMAT_VERSION,
            "meta": meta,
            "params": [{"name": n, "shape": list(a.shape), "values": a.reshape(-1).tolist()} for n, a in arrays.items()],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)


class CheckpointError(ValueError):
    pass


def load_params(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        head = fh.read(len(_MAGIC))
        if head == _MAGIC:
            try:
                return _load_binary(fh)
            except (struct.error, UnicodeDecodeError, json.JSONDecodeError, ValueError) as exc:
                if isinstance(exc, CheckpointError):
                    raise
                raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from None
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise CheckpointError(f"{path}: not a checkpoint ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != "cigmatch-params":
        raise CheckpointError(f"{path}: unknown checkpoint format")
    if doc.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {doc.get('version')}")
    params = {}
    for p in doc["params"]:
        arr = np.array(p["values"], dtype=np.float64)
        params[p["name"]] = arr.reshape(p["shape"])
    return params, doc.get("meta", {})


def _load_binary(fh) -> tuple[dict[str, np.ndarray], dict]:
    version, meta_len = struct.unpack("<IQ", fh.read(12))
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    meta = json.loads(fh.read(meta_len).decode("utf-8"))
    (count,) = struct.unpack("<I", fh.read(4))
    params = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", fh.read(4))
        name = fh.read(nlen).decode("utf-8")
        (ndim,) = struct.unpack("<I", fh.read(4))
        shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
        n = int(np.prod(shape)) if ndim else 1
        buf = fh.read(8 * n)
        if len(buf) != 8 * n:
            raise CheckpointError(f"truncated data for parameter {name!r}")
        params[name] = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)
    return params, meta
