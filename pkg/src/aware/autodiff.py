"""Dense float64 matrices with a define-by-run reverse-mode tape, plus Adam.

Every op takes :class:`Var` or plain arrays and returns a :class:`Var`. When at
least one input is attached to a :class:`Tape`, the op appends a node holding
its vector-Jacobian product; :func:`backward` walks the tape in reverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, NonFiniteError, ShapeError


class Tape:
    """Append-only record of ops; rebuilt for every forward pass."""

    def __init__(self):
        self.nodes: list[tuple[str, tuple[int | None, ...], Callable]] = []
        self.leaves: dict[str, int] = {}
        self.leaf_shapes: dict[int, tuple[int, int]] = {}

    def __len__(self):
        return len(self.nodes)

    def param(self, name: str, value) -> Var:
        """Register a trainable leaf under ``name``."""
        if name in self.leaves:
            raise ContractError(f"leaf {name!r} registered twice")
        value = _as_matrix(value, "param")
        self.nodes.append(("leaf", (), None))
        idx = len(self.nodes) - 1
        self.leaves[name] = idx
        self.leaf_shapes[idx] = value.shape
        return Var(value, self, idx)

    def _record(self, op: str, value: np.ndarray, inputs, vjp) -> Var:
        ids = tuple(x.index if isinstance(x, Var) and x.tape is self else None for x in inputs)
        self.nodes.append((op, ids, vjp))
        return Var(value, self, len(self.nodes) - 1)


class Var:
    __slots__ = ("value", "tape", "index")

    def __init__(self, value: np.ndarray, tape: Tape | None = None, index: int | None = None):
        self.value = value
        self.tape = tape
        self.index = index

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def tracked(self) -> bool:
        return self.tape is not None

    def __repr__(self):
        return f"Var(shape={self.shape}, tracked={self.tracked})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, other)
        return hadamard(self, other)

    __rmul__ = __mul__

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    @property
    def T(self):
        return transpose(self)


def _as_matrix(x, op: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeError(f"{op}: expected a matrix, got {arr.ndim} dimensions")
    return arr


def _val(x, op: str):
    if isinstance(x, Var):
        return x.value
    if sp.issparse(x):
        return x
    return _as_matrix(x, op)


def _check(value: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(value).all():
        raise NonFiniteError(f"{op} produced a non-finite value")
    return value


def _emit(op: str, value: np.ndarray, inputs, vjp) -> Var:
    _check(value, op)
    tape = None
    for x in inputs:
        if isinstance(x, Var) and x.tape is not None:
            if tape is not None and x.tape is not tape:
                raise ContractError(f"{op}: inputs live on different tapes")
            tape = x.tape
    if tape is None:
        return Var(value)
    return tape._record(op, value, inputs, vjp)


def _tracked(x) -> bool:
    return isinstance(x, Var) and x.tape is not None


# ---------------------------------------------------------------------------
# ops


def matmul(a, b) -> Var:
    av, bv = _val(a, "matmul"), _val(b, "matmul")
    if av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul: {av.shape} @ {bv.shape}")
    out = av @ bv
    if sp.issparse(out):
        out = out.toarray()
    out = np.asarray(out)

    def vjp(g):
        ga = np.asarray(g @ bv.T) if _tracked(a) else None
        gb = np.asarray(av.T @ g) if _tracked(b) else None
        return ga, gb

    return _emit("matmul", out, (a, b), vjp)


def hadamard(a, b) -> Var:
    av, bv = _val(a, "hadamard"), _val(b, "hadamard")
    if av.shape != bv.shape:
        raise ShapeError(f"hadamard: {av.shape} vs {bv.shape}")
    return _emit("hadamard", av * bv, (a, b), lambda g: (g * bv, g * av))


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def add(a, b) -> Var:
    """Entrywise sum; a row or column vector operand is broadcast."""
    av, bv = _val(a, "add"), _val(b, "add")
    try:
        out = av + bv
    except ValueError:
        raise ShapeError(f"add: {av.shape} vs {bv.shape}") from None
    if out.shape != av.shape and out.shape != bv.shape:
        raise ShapeError(f"add: {av.shape} vs {bv.shape}")
    return _emit("add", out, (a, b), lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)))


def scale(a, c: float) -> Var:
    av = _val(a, "scale")
    return _emit("scale", av * c, (a,), lambda g: (g * c,))


def transpose(a) -> Var:
    av = _val(a, "transpose")
    return _emit("transpose", av.T.copy(), (a,), lambda g: (g.T,))


def leaky_relu(x, alpha: float) -> Var:
    """``max(alpha z, z)`` entrywise; the derivative at 0 is taken as 1."""
    if not 0.0 <= alpha <= 1.0:
        raise ContractError(f"leaky_relu slope must lie in [0, 1], got {alpha}")
    xv = _val(x, "leaky_relu")
    if alpha == 1.0:
        return _emit("leaky_relu", xv.copy(), (x,), lambda g: (g,))
    pos = xv >= 0
    slope = np.where(pos, 1.0, alpha)
    return _emit("leaky_relu", np.where(pos, xv, alpha * xv), (x,), lambda g: (g * slope,))


def sigmoid(x) -> Var:
    xv = _val(x, "sigmoid")
    s = _logistic(xv)
    return _emit("sigmoid", s, (x,), lambda g: (g * s * (1.0 - s),))


def _logistic(z: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def masked_column_softmax(z, mask) -> Var:
    """Softmax down each column over the rows where ``mask`` is 1.

    Entries outside the mask are 0; a column with an empty mask is all zero.
    """
    zv = _val(z, "masked_column_softmax")
    mv = np.asarray(_val(mask, "masked_column_softmax")) != 0
    if zv.shape != mv.shape:
        raise ShapeError(f"masked_column_softmax: {zv.shape} vs mask {mv.shape}")
    shifted = np.where(mv, zv, -np.inf)
    colmax = shifted.max(axis=0, keepdims=True)
    colmax = np.where(np.isfinite(colmax), colmax, 0.0)
    e = np.where(mv, np.exp(np.where(mv, zv - colmax, 0.0)), 0.0)
    denom = e.sum(axis=0, keepdims=True)
    s = e / np.where(denom > 0, denom, 1.0)

    def vjp(g):
        return (s * (g - (g * s).sum(axis=0, keepdims=True)),)

    return _emit("masked_column_softmax", s, (z,), vjp)


def edge_softmax(z, dst: np.ndarray, n: int) -> Var:
    """Softmax of per-edge scores ``z`` (shape ``1 x E``) grouped by ``dst``.

    Sparse counterpart of :func:`masked_column_softmax`: edge e plays the role
    of entry ``(src[e], dst[e])`` of the dense score matrix.
    """
    zv = _val(z, "edge_softmax").ravel()
    dst = np.asarray(dst, dtype=np.intp)
    if zv.shape[0] != dst.shape[0]:
        raise ShapeError(f"edge_softmax: {zv.shape[0]} scores for {dst.shape[0]} edges")
    gmax = np.full(n, -np.inf)
    np.maximum.at(gmax, dst, zv)
    e = np.exp(zv - gmax[dst])
    denom = np.bincount(dst, weights=e, minlength=n)
    s = e / denom[dst]

    def vjp(g):
        g = g.ravel()
        seg = np.bincount(dst, weights=g * s, minlength=n)
        return ((s * (g - seg[dst]))[None, :],)

    return _emit("edge_softmax", s[None, :], (z,), vjp)


def scale_columns(x, s) -> Var:
    """Multiply column k of ``x`` by ``s[0, k]``."""
    xv, sv = _val(x, "scale_columns"), _val(s, "scale_columns")
    if sv.shape != (1, xv.shape[1]):
        raise ShapeError(f"scale_columns: {xv.shape} with factors {sv.shape}")
    return _emit("scale_columns", xv * sv, (x, s),
                 lambda g: (g * sv, (g * xv).sum(axis=0, keepdims=True)))


def take_columns(x, idx: np.ndarray) -> Var:
    xv = _val(x, "take_columns")
    idx = np.asarray(idx, dtype=np.intp)
    ncols = xv.shape[1]

    def vjp(g):
        # scatter-add back through a sparse selection matrix
        sel = sp.csr_matrix((np.ones(len(idx)), (idx, np.arange(len(idx)))), shape=(ncols, len(idx)))
        return (np.asarray((sel @ g.T).T),)

    return _emit("take_columns", xv[:, idx], (x,), vjp)


def column_dot(a, b) -> Var:
    """Per-column inner products, returned as a ``1 x n`` row."""
    av, bv = _val(a, "column_dot"), _val(b, "column_dot")
    if av.shape != bv.shape:
        raise ShapeError(f"column_dot: {av.shape} vs {bv.shape}")
    return _emit("column_dot", (av * bv).sum(axis=0, keepdims=True), (a, b), lambda g: (g * bv, g * av))


def row_sum(x) -> Var:
    """``X 1`` as a column vector."""
    xv = _val(x, "row_sum")
    return _emit("row_sum", xv.sum(axis=1, keepdims=True), (x,), lambda g: (np.broadcast_to(g, xv.shape),))


def total(x) -> Var:
    xv = _val(x, "total")
    return _emit("total", np.array([[xv.sum()]]), (x,), lambda g: (np.full(xv.shape, g[0, 0]),))


def vstack(parts) -> Var:
    vals = [_val(p, "vstack") for p in parts]
    if len({v.shape[1] for v in vals}) != 1:
        raise ShapeError("vstack: column counts differ")
    bounds = np.cumsum([0] + [v.shape[0] for v in vals])

    def vjp(g):
        return tuple(g[bounds[k] : bounds[k + 1]] for k in range(len(vals)))

    return _emit("vstack", np.vstack(vals), tuple(parts), vjp)


# ---------------------------------------------------------------------------
# losses (each returns a 1 x 1 mean over the columns)


def logistic_loss(logits, y) -> Var:
    """Mean of ``log(1 + exp(-g y))`` with ``y`` in {-1, +1}."""
    gv = _val(logits, "logistic_loss")
    y = np.asarray(y, dtype=float).reshape(gv.shape)
    if not np.isin(y, (-1.0, 1.0)).all():
        raise ContractError("logistic loss needs labels in {-1, +1}")
    n = gv.size
    margin = gv * y
    loss = np.logaddexp(0.0, -margin).sum() / n
    return _emit("logistic_loss", np.array([[loss]]), (logits,),
                 lambda g: (g[0, 0] * (-y * _logistic(-margin)) / n,))


def cross_entropy(logits, labels) -> Var:
    """Mean softmax cross-entropy; ``logits`` is ``classes x batch``."""
    zv = _val(logits, "cross_entropy")
    labels = np.asarray(labels, dtype=int).ravel()
    n = zv.shape[1]
    if labels.shape[0] != n or (labels < 0).any() or (labels >= zv.shape[0]).any():
        raise ContractError("cross entropy labels must be class indices, one per column")
    zmax = zv.max(axis=0, keepdims=True)
    lse = zmax + np.log(np.exp(zv - zmax).sum(axis=0, keepdims=True))
    logp = zv - lse
    loss = -logp[labels, np.arange(n)].sum() / n

    def vjp(g):
        p = np.exp(logp)
        p[labels, np.arange(n)] -= 1.0
        return (g[0, 0] * p / n,)

    return _emit("cross_entropy", np.array([[loss]]), (logits,), vjp)


def squared_error(pred, y) -> Var:
    pv = _val(pred, "squared_error")
    y = np.asarray(y, dtype=float).reshape(pv.shape)
    diff = pv - y
    n = pv.size
    return _emit("squared_error", np.array([[(diff**2).sum() / n]]), (pred,),
                 lambda g: (g[0, 0] * 2.0 * diff / n,))


# ---------------------------------------------------------------------------


def backward(loss: Var, tape: Tape | None = None) -> dict[str, np.ndarray]:
    """Reverse accumulation from a scalar ``loss``.

    Returns the gradient for every registered leaf; leaves the loss does not
    depend on get zeros.
    """
    if loss.value.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = tape or loss.tape
    if tape is None:
        raise ContractError("loss is not recorded on any tape")
    if loss.tape is not tape:
        raise ContractError("loss was recorded on a different tape")
    grads: dict[int, np.ndarray] = {loss.index: np.ones_like(loss.value)}
    for idx in range(loss.index, -1, -1):
        g = grads.pop(idx, None) if tape.nodes[idx][0] != "leaf" else grads.get(idx)
        if g is None:
            continue
        op, inputs, vjp = tape.nodes[idx]
        if op == "leaf":
            continue
        for src, gi in zip(inputs, vjp(g)):
            if src is None or gi is None:
                continue
            if src in grads:
                grads[src] = grads[src] + gi
            else:
                grads[src] = np.array(gi, dtype=np.float64)
    out = {}
    for name, idx in tape.leaves.items():
        g = grads.get(idx)
        out[name] = np.zeros(tape.leaf_shapes[idx]) if g is None else g
    return out


def finite_diff_check(
    f: Callable[[Mapping[str, Var]], Var],
    params: Mapping[str, np.ndarray],
    h: float = 1e-5,
    max_entries: int | None = None,
    seed: int = 0,
) -> float:
    """Largest relative disagreement between tape gradients and central differences.

    ``f`` maps a dict of :class:`Var` (keyed like ``params``) to a scalar Var.
    With ``max_entries`` only that many randomly chosen entries per parameter
    are compared.
    """
    tape = Tape()
    leaves = {k: tape.param(k, v) for k, v in params.items()}
    grads = backward(f(leaves), tape)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, value in params.items():
        value = _as_matrix(value, "finite_diff_check")
        flat = np.arange(value.size)
        if max_entries is not None and value.size > max_entries:
            flat = rng.choice(value.size, size=max_entries, replace=False)
        for k in flat:
            pos = np.unravel_index(k, value.shape)
            vals = []
            for sign in (1.0, -1.0):
                shifted = {n: _as_matrix(v, "finite_diff_check").copy() for n, v in params.items()}
                shifted[name][pos] += sign * h
                try:
                    out = f({n: Var(v) for n, v in shifted.items()}).value
                except NonFiniteError as exc:
                    raise NonFiniteError(f"{name}{tuple(int(i) for i in pos)}: {exc}") from None
                vals.append(float(out.reshape(-1)[0]))
            g_fd = (vals[0] - vals[1]) / (2 * h)
            g_ad = float(grads[name][pos])
            if not (np.isfinite(g_fd) and np.isfinite(g_ad)):
                raise NonFiniteError(f"{name}{tuple(int(i) for i in pos)}: non-finite gradient")
            err = abs(g_ad - g_fd) / max(1e-8, abs(g_ad) + abs(g_fd))
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)
    step_count: int = 0


def adam_step(
    params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray], state: AdamState
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; inputs are left untouched."""
    t = state.step_count + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_params, m_new, v_new = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"adam: gradient {g.shape} for parameter {name} of shape {p.shape}")
        m = state.first_moment.get(name, np.zeros_like(p))
        v = state.second_moment.get(name, np.zeros_like(p))
        if m.shape != p.shape:
            raise ShapeError(f"adam: moment shape {m.shape} for parameter {name} of shape {p.shape}")
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        new_params[name] = p - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        m_new[name], v_new[name] = m, v
    new_state = AdamState(state.lr, state.beta1, state.beta2, state.eps, m_new, v_new, t)
    return new_params, new_state
