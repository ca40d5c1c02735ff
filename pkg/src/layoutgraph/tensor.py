"""Dense f64 tensors with reverse-mode differentiation on an explicit tape.

Everything is a 2-D row-major float64 array; scalars are (1, 1). Ops record
their pullbacks on the active tape (``with Tape() as t:``); with no active
tape, ops run in pure inference mode and record nothing. Gradients live on
the tape, not the tensors, so independent tapes can run on separate threads
over shared parameters.
"""

from __future__ import annotations

import contextvars
import json
import struct
from typing import Callable, Optional, Sequence

import numpy as np

BCE_EPS = 1e-7


class ShapeError(ValueError):
    pass


class NonFiniteError(ValueError):
    pass


_ACTIVE_TAPE: contextvars.ContextVar[Optional["Tape"]] = contextvars.ContextVar(
    "layoutgraph_tape", default=None)


class Tensor:
    """Immutable-by-convention 2-D float64 array node."""

    __slots__ = ("data", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("non-finite values rejected at op boundary")
        self.data = arr
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a scalar, got shape {self.shape}")
        return float(self.data[0, 0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


class Tape:
    """Ordered record of primitive ops; creation order is a topological order."""

    def __init__(self) -> None:
        self._records: list[tuple[Tensor, tuple[tuple[Tensor, Callable[[np.ndarray], np.ndarray]], ...]]] = []
        self._grads: dict[int, np.ndarray] = {}
        self._token: Optional[contextvars.Token] = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def record(self, out: Tensor,
               pulls: Sequence[tuple[Tensor, Callable[[np.ndarray], np.ndarray]]]) -> None:
        self._records.append((out, tuple(pulls)))

    def backward(self, out: Tensor) -> None:
        """Accumulate d(out)/d(leaf) for every recorded tensor; out must be scalar."""
        if out.data.size != 1:
            raise ShapeError("backward needs a scalar output")
        self._grads = {id(out): np.ones((1, 1))}
        for node, pulls in reversed(self._records):
            g = self._grads.get(id(node))
            if g is None:
                continue
            for parent, pull in pulls:
                if not parent.requires_grad:
                    continue
                pg = pull(g)
                acc = self._grads.get(id(parent))
                self._grads[id(parent)] = pg if acc is None else acc + pg

    def grad(self, t: Tensor) -> Optional[np.ndarray]:
        return self._grads.get(id(t))


def _active() -> Optional[Tape]:
    return _ACTIVE_TAPE.get()


def _make(out_data: np.ndarray,
          pulls: Sequence[tuple[Tensor, Callable[[np.ndarray], np.ndarray]]]) -> Tensor:
    needs = any(p.requires_grad for p, _ in pulls)
    out = Tensor(out_data, requires_grad=needs)
    tape = _active()
    if tape is not None and needs:
        tape.record(out, pulls)
    return out


# -- arithmetic --------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; also broadcasts a (1, m) bias over (n, m) rows."""
    if a.shape != b.shape and not (b.shape == (1, a.shape[1])):
        raise ShapeError(f"add shapes {a.shape} vs {b.shape}")
    if a.shape == b.shape:
        return _make(a.data + b.data, [(a, lambda g: g), (b, lambda g: g)])
    return _make(a.data + b.data,
                 [(a, lambda g: g), (b, lambda g: g.sum(axis=0, keepdims=True))])


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"sub shapes {a.shape} vs {b.shape}")
    return _make(a.data - b.data, [(a, lambda g: g), (b, lambda g: -g)])


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul shapes {a.shape} vs {b.shape}")
    return _make(a.data * b.data,
                 [(a, lambda g: g * b.data), (b, lambda g: g * a.data)])


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return _make(a.data * s, [(a, lambda g: g * s)])


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} x {b.shape}")
    return _make(a.data @ b.data,
                 [(a, lambda g: g @ b.data.T), (b, lambda g: a.data.T @ g)])


# -- nonlinearities ----------------------------------------------------------

def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), [(a, lambda g: g * mask)])


def sigmoid(a: Tensor) -> Tensor:
    # Split by sign for overflow-free exp; clip so outputs stay strictly
    # inside (0, 1) even where f64 would round to the endpoints.
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = np.clip(out, np.finfo(np.float64).tiny, 1.0 - np.finfo(np.float64).epsneg)
    return _make(out, [(a, lambda g: g * out * (1.0 - out))])


def softmax(a: Tensor) -> Tensor:
    """Row-wise softmax; rows sum to 1."""
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)

    def pull(g: np.ndarray) -> np.ndarray:
        return (g - (g * s).sum(axis=1, keepdims=True)) * s

    return _make(s, [(a, pull)])


# -- structure ---------------------------------------------------------------

def concat(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    if axis not in (0, 1):
        raise ShapeError("concat axis must be 0 or 1")
    if not parts:
        raise ShapeError("concat needs at least one tensor")
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)
    out = np.concatenate([p.data for p in parts], axis=axis)

    def pull_for(k: int) -> Callable[[np.ndarray], np.ndarray]:
        lo, hi = offsets[k], offsets[k + 1]
        if axis == 0:
            return lambda g: g[lo:hi, :]
        return lambda g: g[:, lo:hi]

    return _make(out, [(p, pull_for(k)) for k, p in enumerate(parts)])


def rows(a: Tensor, i0: int, i1: int) -> Tensor:
    n, _ = a.shape

    def pull(g: np.ndarray) -> np.ndarray:
        out = np.zeros_like(a.data)
        out[i0:i1, :] = g
        return out

    return _make(a.data[i0:i1, :].copy(), [(a, pull)])


def cols(a: Tensor, j0: int, j1: int) -> Tensor:
    def pull(g: np.ndarray) -> np.ndarray:
        out = np.zeros_like(a.data)
        out[:, j0:j1] = g
        return out

    return _make(a.data[:, j0:j1].copy(), [(a, pull)])


def mean_rows(a: Tensor) -> Tensor:
    """(n, m) -> (1, m) column means."""
    n = a.shape[0]
    if n == 0:
        raise ShapeError("mean_rows of an empty tensor")
    return _make(a.data.mean(axis=0, keepdims=True),
                 [(a, lambda g: np.repeat(g, n, axis=0) / n)])


def sum_all(a: Tensor) -> Tensor:
    return _make(np.array([[a.data.sum()]]),
                 [(a, lambda g: np.full_like(a.data, g[0, 0]))])


def lookup_rows(table: Tensor, indices: Sequence[int]) -> Tensor:
    """Gather rows of an embedding table; gradients scatter-add back."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError("lookup_rows takes a flat index list")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError(
            f"index out of table range [0, {table.shape[0] - 1}]: {idx.min()}..{idx.max()}")

    def pull(g: np.ndarray) -> np.ndarray:
        out = np.zeros_like(table.data)
        np.add.at(out, idx, g)
        return out

    return _make(table.data[idx, :].copy(), [(table, pull)])


def lookup_row(table: Tensor, index: int) -> Tensor:
    return lookup_rows(table, [index])


# -- losses ------------------------------------------------------------------

def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean over all entries of the squared difference."""
    if a.shape != b.shape:
        raise ShapeError(f"mse shapes {a.shape} vs {b.shape}")
    d = a.data - b.data
    n = d.size
    return _make(np.array([[float((d * d).sum()) / n]]),
                 [(a, lambda g: g[0, 0] * 2.0 * d / n),
                  (b, lambda g: g[0, 0] * -2.0 * d / n)])


def bce(p: Tensor, c: Tensor) -> Tensor:
    """Mean binary cross-entropy; probabilities clamped to [eps, 1-eps]."""
    if p.shape != c.shape:
        raise ShapeError(f"bce shapes {p.shape} vs {c.shape}")
    pc = np.clip(p.data, BCE_EPS, 1.0 - BCE_EPS)
    cv = c.data
    n = pc.size
    val = float((-cv * np.log(pc) - (1.0 - cv) * np.log(1.0 - pc)).sum()) / n
    inside = (p.data > BCE_EPS) & (p.data < 1.0 - BCE_EPS)

    def pull_p(g: np.ndarray) -> np.ndarray:
        return g[0, 0] * inside * (-cv / pc + (1.0 - cv) / (1.0 - pc)) / n

    def pull_c(g: np.ndarray) -> np.ndarray:
        return g[0, 0] * (np.log(1.0 - pc) - np.log(pc)) / n

    return _make(np.array([[val]]), [(p, pull_p), (c, pull_c)])


def cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """Mean negative log-softmax of the true class, numerically stable."""
    lab = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if lab.shape != (n,):
        raise ShapeError(f"labels shape {lab.shape} does not match {n} rows")
    if lab.size and (lab.min() < 0 or lab.max() >= k):
        raise ShapeError("label out of range")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsumexp
    val = float(-logp[np.arange(n), lab].sum()) / n
    probs = np.exp(logp)

    def pull(g: np.ndarray) -> np.ndarray:
        onehot = np.zeros((n, k))
        onehot[np.arange(n), lab] = 1.0
        return g[0, 0] * (probs - onehot) / n

    return _make(np.array([[val]]), [(logits, pull)])


# -- optimizer ---------------------------------------------------------------

class AdamState:
    """First/second moment accumulators keyed like the parameter dict."""

    def __init__(self) -> None:
        self.step = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, lr: float = 1e-3,
              betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
              ) -> dict[str, np.ndarray]:
    """One adaptive-moment update, in place on ``params``; missing grads are zero."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    b1, b2 = betas
    state.step += 1
    t = state.step
    for name in sorted(params):
        p = params[name]
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        elif g.shape != p.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.shape} for {name!r}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        mhat = m / (1.0 - b1 ** t)
        vhat = v / (1.0 - b2 ** t)
        params[name] = p - lr * mhat / (np.sqrt(vhat) + eps)
    return params


# -- checkpoint container ----------------------------------------------------

CHECKPOINT_MAGIC = b"LGCKPT01"


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: Optional[dict] = None) -> None:
    """Versioned container of named f64 arrays; round-trips bit-exactly."""
    names = sorted(arrays)
    header = {
        "version": 1,
        "names": names,
        "shapes": {n: list(arrays[n].shape) for n in names},
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for n in names:
            arr = np.ascontiguousarray(arrays[n], dtype=np.float64)
            f.write(arr.astype("<f8", copy=False).tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a checkpoint file (magic {magic!r})")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode("utf-8"))
        arrays: dict[str, np.ndarray] = {}
        for n in header["names"]:
            shape = tuple(header["shapes"][n])
            count = int(np.prod(shape)) if shape else 1
            buf = f.read(count * 8)
            arrays[n] = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)
    return arrays, header.get("meta", {})
