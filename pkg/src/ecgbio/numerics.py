"""Dense-tensor engine with reverse-mode autodiff.

Implements exactly the layer set the classifier needs: conv2d,
depthwise/pointwise convolutions, batch norm, activations, global average
pool, linear, dropout, a GRU layer, softmax and cross entropy, plus the
small arithmetic primitives they are built from.

Conventions:
  - image tensors are NHWC (batch, height, width, channels)
  - storage is float32 by default, reductions accumulate in float64
  - every op is pure; gradients are accumulated by `backward`
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DomainError, ShapeError, UsageError

DEFAULT_DTYPE = np.float32


class Tensor:
    """A dense array plus the links needed for reverse-mode differentiation."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None,
                 dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{tag})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def tensor(data, requires_grad: bool = False, dtype=None, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype, name=name)


def _coerce(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype))


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    g = g.astype(t.data.dtype, copy=False)
    if t.grad is None:
        t.grad = g.copy() if g.base is not None or not g.flags.owndata else g
    else:
        t.grad = t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `g` down to `shape`, undoing numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class GradientTape:
    """Reverse-topological schedule of every node reachable from a root."""

    def __init__(self, root: Tensor):
        if not root.requires_grad or root._backward is None:
            raise UsageError("backward on a detached graph: root records no operations")
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited and p._backward is not None:
                    stack.append((p, False))
        self.order = order  # execution order; traversed in reverse
        self.root = root

    def run(self) -> None:
        self.root.grad = np.ones_like(self.root.data)
        for node in reversed(self.order):
            if node.grad is None:
                continue
            node._backward(node.grad)
            if node is not self.root:
                node.grad = None  # interior grads are spent; free them early


def backward(loss: Tensor) -> GradientTape:
    """Populate `.grad` on every requires_grad tensor reachable from `loss`.

    `loss` must be a scalar. Returns the tape for inspection.
    """
    if loss.size != 1:
        raise DomainError(f"backward root must be scalar, got shape {loss.shape}")
    tape = GradientTape(loss)
    tape.run()
    return tape


# ---------------------------------------------------------------------------
# arithmetic primitives


def add(a: Tensor, b) -> Tensor:
    b = _coerce(b, a)

    def bwd(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), bwd)


def sub(a: Tensor, b) -> Tensor:
    b = _coerce(b, a)

    def bwd(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, -_unbroadcast(g, b.shape))

    return _make(a.data - b.data, (a, b), bwd)


def mul(a: Tensor, b) -> Tensor:
    b = _coerce(b, a)

    def bwd(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def bwd(g):
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ g)

    return _make(a.data @ b.data, (a, b), bwd)


def reshape(t: Tensor, shape) -> Tensor:
    def bwd(g):
        _accum(t, g.reshape(t.shape))

    return _make(t.data.reshape(shape), (t,), bwd)


def transpose(t: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)

    def bwd(g):
        _accum(t, g.transpose(inv))

    return _make(t.data.transpose(axes), (t,), bwd)


def narrow(t: Tensor, axis: int, start: int, size: int) -> Tensor:
    if start < 0 or start + size > t.shape[axis]:
        raise ShapeError(
            f"narrow: [{start}:{start + size}) out of range for axis {axis} of {t.shape}")
    idx = [slice(None)] * t.ndim
    idx[axis] = slice(start, start + size)
    idx = tuple(idx)

    def bwd(g):
        full = np.zeros(t.shape, dtype=g.dtype)
        full[idx] = g
        _accum(t, full)

    return _make(t.data[idx], (t,), bwd)


def sum_all(t: Tensor) -> Tensor:
    def bwd(g):
        _accum(t, np.broadcast_to(g, t.shape))

    total = t.data.sum(dtype=np.float64)
    return _make(np.asarray(total, dtype=t.dtype), (t,), bwd)


def mean_all(t: Tensor) -> Tensor:
    n = t.size

    def bwd(g):
        _accum(t, np.broadcast_to(g / n, t.shape))

    m = t.data.mean(dtype=np.float64)
    return _make(np.asarray(m, dtype=t.dtype), (t,), bwd)


def sum_squares(t: Tensor) -> Tensor:
    """Sum of squared entries, accumulated in float64. Used for L2 penalties."""

    def bwd(g):
        _accum(t, (2.0 * g) * t.data)

    total = np.square(t.data, dtype=np.float64).sum()
    return _make(np.asarray(total, dtype=t.dtype), (t,), bwd)


# ---------------------------------------------------------------------------
# activations


def relu(t: Tensor) -> Tensor:
    out = np.maximum(t.data, 0.0)

    def bwd(g):
        _accum(t, g * (out > 0))

    return _make(out, (t,), bwd)


def leaky_relu(t: Tensor, slope: float = 0.01) -> Tensor:
    mask = t.data > 0
    scale = np.where(mask, 1.0, slope).astype(t.dtype)

    def bwd(g):
        _accum(t, g * scale)

    return _make(t.data * scale, (t,), bwd)


def sigmoid(t: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-t.data))

    def bwd(g):
        _accum(t, g * (y * (1.0 - y)))

    return _make(y, (t,), bwd)


def tanh(t: Tensor) -> Tensor:
    y = np.tanh(t.data)

    def bwd(g):
        _accum(t, g * (1.0 - y * y))

    return _make(y, (t,), bwd)


def softmax(t: Tensor, axis: int = -1) -> Tensor:
    z = t.data - t.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        _accum(t, (g - dot) * y)

    return _make(y, (t,), bwd)


# ---------------------------------------------------------------------------
# layers


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"linear: incompatible shapes {x.shape} and {w.shape}")
    out = matmul(x, w)
    if b is not None:
        if b.shape != (w.shape[1],):
            raise ShapeError(f"linear: bias shape {b.shape} does not match ({w.shape[1]},)")
        out = add(out, b)
    return out


def _conv_out_size(n: int, k: int, stride: int, pad: int) -> int:
    return (n + 2 * pad - k) // stride + 1


def _pad_nhwc(x: np.ndarray, pad: int) -> np.ndarray:
    """Zero-pad the two spatial axes (faster than np.pad for this layout)."""
    if pad == 0:
        return x
    B, H, W, C = x.shape
    out = np.zeros((B, H + 2 * pad, W + 2 * pad, C), dtype=x.dtype)
    out[:, pad:pad + H, pad:pad + W, :] = x
    return out


_COL2IM_INDEX_CACHE: dict[tuple, np.ndarray] = {}


def _col2im_indices(xp_shape, kh, kw, stride, ho, wo):
    key = (xp_shape, kh, kw, stride, ho, wo)
    cached = _COL2IM_INDEX_CACHE.get(key)
    if cached is not None:
        return cached
    B, Hp, Wp, C = xp_shape
    # flat index of xp[b, i*stride + di, j*stride + dj, c] laid out to match
    # the column order produced by the forward im2col
    b_idx = np.arange(B).reshape(B, 1, 1, 1, 1, 1)
    i_idx = (np.arange(ho) * stride).reshape(1, ho, 1, 1, 1, 1)
    j_idx = (np.arange(wo) * stride).reshape(1, 1, wo, 1, 1, 1)
    di = np.arange(kh).reshape(1, 1, 1, kh, 1, 1)
    dj = np.arange(kw).reshape(1, 1, 1, 1, kw, 1)
    c_idx = np.arange(C).reshape(1, 1, 1, 1, 1, C)
    flat = (((b_idx * Hp + i_idx + di) * Wp + j_idx + dj) * C + c_idx)
    flat = np.ascontiguousarray(flat.reshape(-1), dtype=np.int64)
    _COL2IM_INDEX_CACHE[key] = flat
    return flat


def conv2d(x: Tensor, w: Tensor, b: Tensor | None, stride: int = 1, pad: int = 0) -> Tensor:
    """Standard convolution. x: (B,H,W,Cin), w: (kh,kw,Cin,Cout), b: (Cout,)."""
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d: expected 4-d input and kernel, got {x.shape} and {w.shape}")
    B, H, W, Cin = x.shape
    kh, kw, Cin_w, Cout = w.shape
    if Cin != Cin_w:
        raise ShapeError(f"conv2d: input channels {x.shape} do not match kernel {w.shape}")
    xp = _pad_nhwc(x.data, pad)
    ho = _conv_out_size(H, kh, stride, pad)
    wo = _conv_out_size(W, kw, stride, pad)
    # im2col by kernel tap: column order (kh, kw, Cin) to match w's layout
    cols = np.empty((B, ho, wo, kh * kw * Cin), dtype=x.dtype)
    for i in range(kh):
        si = slice(i, i + stride * (ho - 1) + 1, stride)
        for j in range(kw):
            sj = slice(j, j + stride * (wo - 1) + 1, stride)
            tap = (i * kw + j) * Cin
            cols[:, :, :, tap:tap + Cin] = xp[:, si, sj, :]
    cols = cols.reshape(B * ho * wo, kh * kw * Cin)
    w2 = w.data.reshape(kh * kw * Cin, Cout)
    out = cols @ w2
    if b is not None:
        out = out + b.data

    def bwd(g):
        g2 = g.reshape(B * ho * wo, Cout)
        if w.requires_grad:
            _accum(w, (cols.T @ g2).reshape(w.shape))
        if b is not None and b.requires_grad:
            _accum(b, g2.sum(axis=0, dtype=np.float64).astype(b.dtype))
        if x.requires_grad:
            dcols = g2 @ w2.T  # (B*ho*wo, kh*kw*Cin)
            # scatter-add back into the padded input, column order (kh,kw,Cin)
            flat = _col2im_indices(xp.shape, kh, kw, stride, ho, wo)
            # flat was built for (ho,wo,kh,kw,C); dcols rows are (b,ho,wo) x (kh,kw,C)
            dxp = np.bincount(flat, weights=dcols.reshape(-1), minlength=xp.size)
            dxp = dxp.reshape(xp.shape)
            if pad:
                dxp = dxp[:, pad:-pad, pad:-pad, :]
            _accum(x, dxp.astype(x.dtype))

    parents = (x, w) if b is None else (x, w, b)
    return _make(out.reshape(B, ho, wo, Cout), parents, bwd)


def depthwise_conv2d(x: Tensor, w: Tensor, b: Tensor | None, stride: int = 1,
                     pad: int = 0) -> Tensor:
    """Per-channel convolution. x: (B,H,W,C), w: (kh,kw,C), b: (C,)."""
    if x.ndim != 4 or w.ndim != 3:
        raise ShapeError(f"depthwise_conv2d: expected 4-d input and 3-d kernel, "
                         f"got {x.shape} and {w.shape}")
    B, H, W, C = x.shape
    kh, kw, C_w = w.shape
    if C != C_w:
        raise ShapeError(f"depthwise_conv2d: input channels {x.shape} do not match "
                         f"kernel {w.shape}")
    xp = _pad_nhwc(x.data, pad)
    ho = _conv_out_size(H, kh, stride, pad)
    wo = _conv_out_size(W, kw, stride, pad)
    out = np.zeros((B, ho, wo, C), dtype=x.dtype)
    buf = np.empty_like(out)
    for i in range(kh):
        si = slice(i, i + stride * (ho - 1) + 1, stride)
        for j in range(kw):
            sj = slice(j, j + stride * (wo - 1) + 1, stride)
            np.multiply(xp[:, si, sj, :], w.data[i, j], out=buf)
            out += buf
    if b is not None:
        out += b.data

    def bwd(g):
        if w.requires_grad:
            dw = np.empty_like(w.data)
            for i in range(kh):
                si = slice(i, i + stride * (ho - 1) + 1, stride)
                for j in range(kw):
                    sj = slice(j, j + stride * (wo - 1) + 1, stride)
                    dw[i, j] = (g * xp[:, si, sj, :]).sum(axis=(0, 1, 2), dtype=np.float64)
            _accum(w, dw)
        if b is not None and b.requires_grad:
            _accum(b, g.sum(axis=(0, 1, 2), dtype=np.float64).astype(b.dtype))
        if x.requires_grad:
            dxp = np.zeros_like(xp)
            for i in range(kh):
                si = slice(i, i + stride * (ho - 1) + 1, stride)
                for j in range(kw):
                    sj = slice(j, j + stride * (wo - 1) + 1, stride)
                    dxp[:, si, sj, :] += g * w.data[i, j]
            if pad:
                dxp = dxp[:, pad:-pad, pad:-pad, :]
            _accum(x, dxp)

    parents = (x, w) if b is None else (x, w, b)
    return _make(out, parents, bwd)


def pointwise_conv(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """1x1 convolution. x: (B,H,W,Cin), w: (Cin,Cout), b: (Cout,)."""
    if x.ndim != 4 or w.ndim != 2 or x.shape[3] != w.shape[0]:
        raise ShapeError(f"pointwise_conv: incompatible shapes {x.shape} and {w.shape}")
    B, H, W, Cin = x.shape
    Cout = w.shape[1]
    x2 = x.data.reshape(B * H * W, Cin)
    out = x2 @ w.data
    if b is not None:
        out = out + b.data

    def bwd(g):
        g2 = g.reshape(B * H * W, Cout)
        if w.requires_grad:
            _accum(w, x2.T @ g2)
        if b is not None and b.requires_grad:
            _accum(b, g2.sum(axis=0, dtype=np.float64).astype(b.dtype))
        if x.requires_grad:
            _accum(x, (g2 @ w.data.T).reshape(x.shape))

    parents = (x, w) if b is None else (x, w, b)
    return _make(out.reshape(B, H, W, Cout), parents, bwd)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
               running_var: np.ndarray, training: bool, momentum: float = 0.1,
               eps: float = 1e-5) -> Tensor:
    """Per-channel batch normalization over an NHWC tensor.

    Training mode normalizes with batch statistics and updates the running
    buffers in place; evaluation mode reads the buffers and never writes.
    """
    if x.ndim != 4 or x.shape[3] != gamma.shape[0]:
        raise ShapeError(f"batch_norm: input {x.shape} does not match gamma {gamma.shape}")
    n = x.data.shape[0] * x.data.shape[1] * x.data.shape[2]
    if training:
        s1 = x.data.sum(axis=(0, 1, 2), dtype=np.float64)
        s2 = np.square(x.data).sum(axis=(0, 1, 2), dtype=np.float64)
        mu64 = s1 / n
        var64 = np.maximum(s2 / n - mu64 * mu64, 0.0)
        running_mean *= (1.0 - momentum)
        running_mean += momentum * mu64.astype(running_mean.dtype)
        running_var *= (1.0 - momentum)
        running_var += momentum * var64.astype(running_var.dtype)
    else:
        mu64 = running_mean.astype(np.float64)
        var64 = running_var.astype(np.float64)
    inv_std = (1.0 / np.sqrt(var64 + eps)).astype(x.dtype)
    mu = mu64.astype(x.dtype)
    scale = gamma.data * inv_std
    shift = beta.data - mu * scale
    out = x.data * scale
    out += shift

    def xhat():
        h = x.data - mu
        h *= inv_std
        return h

    def bwd(g):
        if gamma.requires_grad or (x.requires_grad and training):
            xh = xhat()
        if gamma.requires_grad:
            _accum(gamma, (g * xh).sum(axis=(0, 1, 2), dtype=np.float64).astype(gamma.dtype))
        if beta.requires_grad:
            _accum(beta, g.sum(axis=(0, 1, 2), dtype=np.float64).astype(beta.dtype))
        if x.requires_grad:
            if training:
                dxhat = g * gamma.data
                m1 = (dxhat.sum(axis=(0, 1, 2), dtype=np.float64) / n).astype(x.dtype)
                m2 = ((dxhat * xh).sum(axis=(0, 1, 2), dtype=np.float64) / n).astype(x.dtype)
                xh *= m2
                dxhat -= m1
                dxhat -= xh
                dxhat *= inv_std
                _accum(x, dxhat)
            else:
                _accum(x, g * scale)

    return _make(out, (x, gamma, beta), bwd)


def global_avg_pool(x: Tensor) -> Tensor:
    """(B,H,W,C) -> (B,C) spatial mean."""
    if x.ndim != 4:
        raise ShapeError(f"global_avg_pool: expected 4-d input, got {x.shape}")
    B, H, W, C = x.shape
    out = x.data.mean(axis=(1, 2), dtype=np.float64).astype(x.dtype)

    def bwd(g):
        _accum(x, np.broadcast_to(g[:, None, None, :] / (H * W), x.shape))

    return _make(out, (x,), bwd)


def dropout(x: Tensor, p: float, rng: np.random.Generator | None,
            training: bool) -> Tensor:
    """Inverted dropout; identity when not training or p == 0."""
    if not 0.0 <= p < 1.0:
        raise DomainError(f"dropout: p must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise DomainError("dropout: training mode with p > 0 requires an rng")
    keep = (rng.random(x.shape, dtype=np.float32) >= p).astype(x.dtype) / (1.0 - p)

    def bwd(g):
        _accum(x, g * keep)

    return _make(x.data * keep, (x,), bwd)


def cross_entropy(probs: Tensor, labels: np.ndarray, weights: np.ndarray | None = None,
                  clamp: float = 1e-12) -> Tensor:
    """Weighted cross entropy from class probabilities.

    loss = sum_i w_{y_i} * (-log p_{i,y_i}) / sum_i w_{y_i}
    Probabilities below `clamp` are clamped (flat region, zero gradient).
    """
    labels = np.asarray(labels)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise ShapeError(f"cross_entropy: probs {probs.shape} vs labels {labels.shape}")
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise DomainError("cross_entropy: label out of range")
    B = probs.shape[0]
    p_true = probs.data[np.arange(B), labels].astype(np.float64)
    clamped = np.maximum(p_true, clamp)
    if weights is None:
        w = np.ones(B, dtype=np.float64)
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (probs.shape[1],):
            raise ShapeError(f"cross_entropy: weights {weights.shape} vs "
                             f"{probs.shape[1]} classes")
        w = weights[labels]
    wsum = w.sum()
    loss = float((w * -np.log(clamped)).sum() / wsum)

    def bwd(g):
        d = np.zeros(probs.shape, dtype=np.float64)
        live = p_true > clamp  # clamped entries sit on the flat part
        d[np.arange(B)[live], labels[live]] = -w[live] / (wsum * clamped[live])
        _accum(probs, (float(g) * d).astype(probs.dtype))

    return _make(np.asarray(loss, dtype=probs.dtype), (probs,), bwd)


def gru_layer(x: Tensor, wx: Tensor, wh: Tensor, bx: Tensor, bh: Tensor,
              steps: int | None = None, return_states: bool = False):
    """Single-direction GRU; returns the final hidden state (B, H).

    Gates are packed [z | r | n] along the last weight axis:
        z = sigmoid(x Wxz + h Whz + ...)     update gate
        r = sigmoid(x Wxr + h Whr + ...)     reset gate
        n = tanh(x Wxn + bxn + r * (h Whn + bhn))
        h' = (1 - z) * h + z * n

    `x` is either (B, T, D), or (B, D) plus `steps=T` for a constant repeated
    sequence; the latter computes the shared input projection once, which is
    exact because every timestep sees the same input.
    """
    D, threeH = wx.shape
    if threeH % 3 != 0 or wh.shape != (threeH // 3, threeH):
        raise ShapeError(f"gru_layer: weight shapes {wx.shape} and {wh.shape} disagree")
    H = threeH // 3
    if steps is None:
        if x.ndim != 3 or x.shape[2] != D:
            raise ShapeError(f"gru_layer: input {x.shape} does not match wx {wx.shape}")
        B, T, _ = x.shape
        flat = reshape(x, (B * T, D))
        xg_all = reshape(linear(flat, wx, bx), (B, T, threeH))

        def xgate(t):
            return reshape(narrow(xg_all, 1, t, 1), (B, threeH))
    else:
        if x.ndim != 2 or x.shape[1] != D:
            raise ShapeError(f"gru_layer: input {x.shape} does not match wx {wx.shape}")
        B, T = x.shape[0], steps
        if T < 1:
            raise DomainError(f"gru_layer: steps must be >= 1, got {steps}")
        xg_const = linear(x, wx, bx)

        def xgate(t):
            return xg_const

    h = tensor(np.zeros((B, H), dtype=x.dtype))
    states = []
    for t in range(T):
        xg = xgate(t)
        hg = linear(h, wh, bh)
        z = sigmoid(add(narrow(xg, 1, 0, H), narrow(hg, 1, 0, H)))
        r = sigmoid(add(narrow(xg, 1, H, H), narrow(hg, 1, H, H)))
        n = tanh(add(narrow(xg, 1, 2 * H, H), mul(r, narrow(hg, 1, 2 * H, H))))
        h = add(mul(sub(tensor(np.ones((), dtype=x.dtype)), z), h), mul(z, n))
        if return_states:
            states.append(h)
    if return_states:
        return h, states
    return h
