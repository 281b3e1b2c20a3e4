"""Causal numpy layers with matching offline and streaming execution.

Every layer is called as ``layer(x, state=None)``.  Without a state the whole
sequence ``x`` (time first) is processed at once with zero history.  With a
state from ``layer.new_state()`` the call consumes the next ``x.shape[0]``
frames (usually one) and advances the state, so feeding frames one by one
reproduces the offline result.

Tensors are laid out time-first: ``(T, F, C)`` for spectral feature maps and
``(T, C)`` for bottleneck sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import DimensionError, StateError

CLN_EPS = 1e-5


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_ch: int
    out_ch: int
    kernel: tuple[int, int] = (1, 1)
    stride: tuple[int, int] = (1, 1)
    dilation: int = 1

    def __post_init__(self):
        if self.kernel[0] not in (1, 2, 5):
            raise DimensionError(f"time kernel must be 1, 2 or 5, got {self.kernel[0]}")
        if self.stride[0] != 1:
            raise DimensionError("temporal stride must be 1")


class ParamSource:
    """Hands out named parameter arrays to layer constructors."""

    def get(self, name: str, shape: tuple[int, ...]) -> np.ndarray:
        raise NotImplementedError


class ShapeRecorder(ParamSource):
    """Records the name and shape of every requested parameter.

    Requesting the same name twice is how weight sharing is expressed; the
    shapes must agree and the tensor is recorded once.
    """

    def __init__(self):
        self.shapes: dict[str, tuple[int, ...]] = {}

    def get(self, name, shape):
        shape = tuple(int(s) for s in shape)
        prev = self.shapes.setdefault(name, shape)
        if prev != shape:
            raise DimensionError(f"{name}: shared tensor requested as {shape} and {prev}")
        return np.zeros(shape)


class DictSource(ParamSource):
    """Serves tensors from a name -> array mapping, cast to the compute dtype."""

    def __init__(self, entries: dict[str, np.ndarray], dtype=np.float64):
        self.entries = entries
        self.dtype = np.dtype(dtype)
        self._cache: dict[str, np.ndarray] = {}

    def get(self, name, shape):
        if name not in self.entries:
            raise KeyError(f"missing weight tensor {name!r}")
        arr = self.entries[name]
        if tuple(arr.shape) != tuple(shape):
            raise DimensionError(f"{name}: expected shape {tuple(shape)}, got {arr.shape}")
        # shared tensors map to one cached copy so every user sees the same array
        if name not in self._cache:
            self._cache[name] = np.asarray(arr, dtype=self.dtype)
        return self._cache[name]


class Layer:
    def new_state(self):
        return None

    def macs_per_frame(self) -> int:
        return 0


def _check_channels(x: np.ndarray, expected: int, who: str) -> None:
    if x.shape[-1] != expected:
        raise DimensionError(f"{who}: expected {expected} input channels, got {x.shape[-1]}")


@dataclass
class ConvState:
    history: np.ndarray | None = None
    pos: int = 0


def encoder_freq_pad(f_in: int, kf: int, stride: int) -> tuple[int, int, int]:
    """Padding that maps ``f_in`` bins to ``f_in // stride`` outputs."""
    f_out = f_in // stride
    total = stride * (f_out - 1) + kf - f_in
    left = total // 2
    return left, total - left, f_out


class CausalConv2d(Layer):
    """Conv over (time, freq) that only sees current and past frames.

    ``kernel`` has shape ``(kt, kf, cin, cout)``.  Time is left-padded with
    ``(kt - 1) * dilation`` zeros; frequency padding is ``pad_f``.
    """

    def __init__(self, kernel, bias, stride_f=1, pad_f=(0, 0), dilation=1):
        self.kernel = kernel
        self.bias = bias
        self.kt, self.kf, self.cin, self.cout = kernel.shape
        self.stride_f = stride_f
        self.pad_f = tuple(pad_f)
        self.dilation = dilation
        self._w = kernel.reshape(-1, self.cout)
        self.spec = LayerSpec("conv", self.cin, self.cout, (self.kt, self.kf), (1, stride_f), dilation)
        self._f_in = None

    @property
    def history(self) -> int:
        return (self.kt - 1) * self.dilation

    def out_bins(self, f_in: int) -> int:
        return (f_in + sum(self.pad_f) - self.kf) // self.stride_f + 1

    def _pad_freq(self, x):
        left, right = self.pad_f
        if not (left or right):
            return x
        out = np.zeros((x.shape[0], x.shape[1] + left + right, x.shape[2]), dtype=x.dtype)
        out[:, left : left + x.shape[1]] = x
        return out

    def _valid(self, xp: np.ndarray, d: int) -> np.ndarray:
        t_out = xp.shape[0] - (self.kt - 1) * d
        f_out = (xp.shape[1] - self.kf) // self.stride_f + 1
        span = self.stride_f * (f_out - 1) + 1
        cols = [xp[i * d : i * d + t_out, j : j + span : self.stride_f]
                for i in range(self.kt) for j in range(self.kf)]
        col = cols[0] if len(cols) == 1 else np.concatenate(cols, axis=-1)
        return col @ self._w + self.bias

    def new_state(self):
        return ConvState()

    def __call__(self, x, state=None):
        _check_channels(x, self.cin, "conv")
        self._f_in = x.shape[1]
        xp = self._pad_freq(x)
        h = self.history
        if state is None:
            if h:
                xp = np.concatenate([np.zeros((h,) + xp.shape[1:], dtype=xp.dtype), xp])
            return self._valid(xp, self.dilation)
        if not h:
            return self._valid(xp, self.dilation)
        if state.history is None:
            state.history = np.zeros((h,) + xp.shape[1:], dtype=xp.dtype)
        elif state.history.shape[1:] != xp.shape[1:]:
            raise StateError(f"conv state holds {state.history.shape[1:]} frames, got {xp.shape[1:]}")
        if xp.shape[0] == 1:
            # ring buffer: slot (pos + k) % h holds the frame k + 1 steps older than the oldest
            d, ring, pos = self.dilation, state.history, state.pos
            taps = np.stack([ring[(pos + i * d) % h] for i in range(self.kt - 1)] + [xp[0]])
            ring[pos] = xp[0]
            state.pos = (pos + 1) % h
            return self._valid(taps, 1)
        ordered = np.concatenate([state.history[state.pos :], state.history[: state.pos], xp])
        state.history = ordered[-h:].copy()
        state.pos = 0
        return self._valid(ordered, self.dilation)

    def macs_per_frame(self, f_in: int | None = None) -> int:
        f_in = self._f_in if f_in is None else f_in
        return self.out_bins(f_in) * self.cout * self.kt * self.kf * self.cin


class Deconv2dFreq(Layer):
    """Transposed conv with frequency stride 2, causal conv in time.

    ``kernel`` has shape ``(kt, kf, cin, cout)``; the full output of
    ``2 * (F - 1) + kf`` bins is cropped at the top edge to ``out_bins``.
    """

    def __init__(self, kernel, bias, out_bins: int, stride_f: int = 2):
        self.kt, self.kf, self.cin, self.cout = kernel.shape
        self.kernel = kernel
        self.bias = bias
        self.out_bins = out_bins
        self.stride_f = stride_f
        self.spec = LayerSpec("deconv", self.cin, self.cout, (self.kt, self.kf), (1, stride_f))
        # rows ordered (time tap, in channel), cols (freq tap, out channel)
        self._w = np.ascontiguousarray(kernel.transpose(0, 2, 1, 3)).reshape(self.kt * self.cin, self.kf * self.cout)
        self._f_in = None

    def full_bins(self, f_in: int) -> int:
        return self.stride_f * (f_in - 1) + self.kf

    def _valid(self, xp):
        t_out = xp.shape[0] - (self.kt - 1)
        f_in = xp.shape[1]
        if self.full_bins(f_in) < self.out_bins:
            raise DimensionError(f"deconv cannot reach {self.out_bins} bins from {f_in}")
        taps = [xp[i : i + t_out] for i in range(self.kt)]
        col = taps[0] if self.kt == 1 else np.concatenate(taps, axis=-1)
        y = (col @ self._w).reshape(t_out, f_in, self.kf, self.cout)
        out = np.zeros((t_out, self.full_bins(f_in), self.cout), dtype=y.dtype)
        s = self.stride_f
        for j in range(self.kf):
            out[:, j : j + s * (f_in - 1) + 1 : s] += y[:, :, j]
        return out[:, : self.out_bins] + self.bias

    def new_state(self):
        return ConvState()

    def __call__(self, x, state=None):
        _check_channels(x, self.cin, "deconv")
        self._f_in = x.shape[1]
        h = self.kt - 1
        if state is None:
            return self._valid(np.concatenate([np.zeros((h,) + x.shape[1:], dtype=x.dtype), x]) if h else x)
        if not h:
            return self._valid(x)
        if state.history is None:
            state.history = np.zeros((h,) + x.shape[1:], dtype=x.dtype)
        elif state.history.shape[1:] != x.shape[1:]:
            raise StateError("deconv state shape does not match the input frame")
        full = np.concatenate([state.history, x])
        state.history = full[-h:]
        return self._valid(full)

    def macs_per_frame(self, f_in: int | None = None) -> int:
        f_in = self._f_in if f_in is None else f_in
        return f_in * self.kt * self.cin * self.kf * self.cout


class CLNState:
    """Running frame count, sum and sum of squares (float64) for one cLN."""

    def __init__(self):
        self.acc = np.zeros(3)

    count = property(lambda self: int(self.acc[0]))
    total = property(lambda self: float(self.acc[1]))
    total_sq = property(lambda self: float(self.acc[2]))


class CumulativeLayerNorm(Layer):
    """Normalizes frame ``t`` with the mean/variance of every entry in frames 0..t.

    ``gain`` and ``bias`` are per channel (last axis).
    """

    def __init__(self, gain, bias, eps=CLN_EPS):
        self.gain = gain
        self.bias = bias
        self.eps = eps

    def new_state(self):
        return CLNState()

    def __call__(self, x, state=None):
        _check_channels(x, self.gain.shape[0], "cLN")
        t = x.shape[0]
        if state is not None and t == 1:
            return self._step(x, state)
        # statistics accumulate in float64 whatever the compute dtype
        flat = x.reshape(t, -1).astype(np.float64)
        per_frame = flat.shape[1]
        s = flat.sum(axis=1)
        sq = np.einsum("ij,ij->i", flat, flat)
        if state is None:
            cs, csq = np.cumsum(s), np.cumsum(sq)
            counts = np.arange(1, t + 1)
        else:
            cs = state.total + np.cumsum(s)
            csq = state.total_sq + np.cumsum(sq)
            counts = state.count + np.arange(1, t + 1)
            state.acc[:] = (state.count + t, cs[-1], csq[-1])
        n = counts * per_frame
        mean = cs / n
        var = np.maximum(csq / n - mean * mean, 0.0)
        shape = (t,) + (1,) * (x.ndim - 1)
        mean = mean.astype(x.dtype).reshape(shape)
        inv = (1.0 / np.sqrt(var + self.eps)).astype(x.dtype).reshape(shape)
        return (x - mean) * inv * self.gain + self.bias

    def _step(self, x, state, slope=None):
        y = np.array(x, order="C")
        if slope is None:
            slope = np.ones_like(self.gain)
        cln_prelu_frame(y.reshape(-1, y.shape[-1]), state.acc, self.gain, self.bias, slope, self.eps)
        return y


class PReLU(Layer):
    def __init__(self, slope):
        self.slope = slope
        # with slopes in [0, 1], prelu(x) == max(x, slope * x)
        self._max_form = bool(np.all((slope >= 0) & (slope <= 1)))

    def __call__(self, x, state=None):
        if self._max_form:
            return np.maximum(x, x * self.slope)
        return np.where(x >= 0, x, x * self.slope)


def cumulative_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Naive per-frame cumulative mean/variance; the O(T^2) reference for cLN."""
    t = x.shape[0]
    means, vars_ = np.empty(t), np.empty(t)
    for i in range(t):
        seen = x[: i + 1].ravel()
        means[i] = seen.mean()
        vars_[i] = seen.var()
    return means, vars_


class ConvBlock(Layer):
    """conv -> cLN -> PReLU."""

    def __init__(self, conv, norm, act):
        self.conv, self.norm, self.act = conv, norm, act

    @classmethod
    def build(cls, src: ParamSource, prefix: str, conv_cls, kernel_shape, **conv_kw):
        cout = kernel_shape[-1]
        conv = conv_cls(src.get(f"{prefix}.conv.kernel", kernel_shape),
                        src.get(f"{prefix}.conv.bias", (cout,)), **conv_kw)
        norm = CumulativeLayerNorm(src.get(f"{prefix}.norm.gain", (cout,)),
                                   src.get(f"{prefix}.norm.bias", (cout,)))
        act = PReLU(src.get(f"{prefix}.act.slope", (cout,)))
        return cls(conv, norm, act)

    def new_state(self):
        return [self.conv.new_state(), self.norm.new_state()]

    def __call__(self, x, state=None):
        cs, ns = state if state is not None else (None, None)
        y = self.conv(x, cs)
        if ns is not None and y.shape[0] == 1:
            return self.norm._step(y, ns, self.act.slope)
        return self.act(self.norm(y, ns))

    def macs_per_frame(self):
        return self.conv.macs_per_frame()


class STCM(Layer):
    """Squeezed temporal conv module over a (T, C) sequence.

    squeeze 1x1 -> cLN -> PReLU -> dilated causal conv (kernel 5) -> cLN ->
    PReLU -> expand 1x1, added to the input.
    """

    KERNEL = 5

    def __init__(self, src: ParamSource, prefix: str, width: int, squeeze: int, dilation: int):
        self.width, self.squeeze, self.dilation = width, squeeze, dilation
        g = src.get
        self.sq_w = g(f"{prefix}.squeeze.kernel", (width, squeeze))
        self.sq_b = g(f"{prefix}.squeeze.bias", (squeeze,))
        self.norm1 = CumulativeLayerNorm(g(f"{prefix}.norm1.gain", (squeeze,)), g(f"{prefix}.norm1.bias", (squeeze,)))
        self.act1 = PReLU(g(f"{prefix}.act1.slope", (squeeze,)))
        self.dconv = CausalConv2d(g(f"{prefix}.dconv.kernel", (self.KERNEL, 1, squeeze, squeeze)),
                                  g(f"{prefix}.dconv.bias", (squeeze,)), dilation=dilation)
        self.norm2 = CumulativeLayerNorm(g(f"{prefix}.norm2.gain", (squeeze,)), g(f"{prefix}.norm2.bias", (squeeze,)))
        self.act2 = PReLU(g(f"{prefix}.act2.slope", (squeeze,)))
        self.ex_w = g(f"{prefix}.expand.kernel", (squeeze, width))
        self.ex_b = g(f"{prefix}.expand.bias", (width,))
        # transposed copies for the single-frame matvec path
        self._sq_t = np.ascontiguousarray(self.sq_w.T)
        self._dc_t = np.ascontiguousarray(self.dconv._w.T)
        self._ex_t = np.ascontiguousarray(self.ex_w.T)
        self._taps = (self.KERNEL - 1) * dilation
        self._offsets = np.arange(self.KERNEL - 1) * dilation

    def new_state(self):
        return [self.norm1.new_state(), self.dconv.new_state(), self.norm2.new_state()]

    def __call__(self, x, state=None):
        _check_channels(x, self.width, "S-TCM")
        if state is not None and x.shape[0] == 1:
            return self._step(x, state)
        s1, sc, s2 = state if state is not None else (None, None, None)
        h = self.act1(self.norm1(x @ self.sq_w + self.sq_b, s1))
        h = self.dconv(h[:, None, :], sc)[:, 0, :]
        h = self.act2(self.norm2(h, s2))
        return x + (h @ self.ex_w + self.ex_b)

    def _step(self, x, state):
        s1, sc, s2 = state
        v = x[0]
        h = self._sq_t @ v + self.sq_b
        h = self.norm1._step(h, s1, self.act1.slope)
        ring = sc.history
        if ring is None:
            ring = sc.history = np.zeros((self._taps, 1, self.squeeze), dtype=x.dtype)
        n = self._taps
        idx = (sc.pos + self._offsets) % n
        taps = np.concatenate([ring[idx, 0].ravel(), h])
        ring[sc.pos, 0] = h
        sc.pos = (sc.pos + 1) % n
        h = self.norm2._step(self._dc_t @ taps + self.dconv.bias, s2, self.act2.slope)
        return (v + (self._ex_t @ h + self.ex_b))[None, :]

    def macs_per_frame(self):
        return 2 * self.width * self.squeeze + self.KERNEL * self.squeeze * self.squeeze


class CAHAM(Layer):
    """Frame-local attention over the outputs of successive S-TCM groups.

    Each group output is mean-pooled to one scalar per frame, a learned
    ``(G, G)`` map turns the pooled vector into scores, and the softmax
    weights mix the groups.  The last group output is added back.
    """

    def __init__(self, src: ParamSource, prefix: str, groups: int):
        self.groups = groups
        self.weight = src.get(f"{prefix}.proj.kernel", (groups, groups))
        self.bias = src.get(f"{prefix}.proj.bias", (groups,))

    def attention(self, outputs: list[np.ndarray]) -> np.ndarray:
        if len(outputs) != self.groups or len(outputs) < 2:
            raise DimensionError(f"cAHAM expects {self.groups} (>= 2) group outputs, got {len(outputs)}")
        shape = outputs[0].shape
        if any(o.shape != shape for o in outputs):
            raise DimensionError("cAHAM group outputs must share one shape")
        t = shape[0]
        pooled = np.stack([o.reshape(t, -1).mean(axis=1) for o in outputs], axis=1)
        scores = pooled @ self.weight.T + self.bias
        scores -= scores.max(axis=1, keepdims=True)
        e = np.exp(scores)
        return e / e.sum(axis=1, keepdims=True)

    def __call__(self, outputs, state=None):
        w = self.attention(outputs)
        bshape = (w.shape[0],) + (1,) * (outputs[0].ndim - 1)
        mix = sum(w[:, g].reshape(bshape) * y for g, y in enumerate(outputs))
        return mix + outputs[-1]

    def macs_per_frame(self, width: int = 0):
        return self.groups * self.groups + self.groups * width


class MaskHead(Layer):
    """Dual-path gain: tanh(conv_a(x)) * sigmoid(conv_b(x)), 1x1 convs to one channel."""

    def __init__(self, src: ParamSource, prefix: str, channels: int):
        self.channels = channels
        self.a_w = src.get(f"{prefix}.tanh.kernel", (channels, 1))
        self.a_b = src.get(f"{prefix}.tanh.bias", (1,))
        self.b_w = src.get(f"{prefix}.sigmoid.kernel", (channels, 1))
        self.b_b = src.get(f"{prefix}.sigmoid.bias", (1,))
        self._bins = None

    def logits(self, x):
        _check_channels(x, self.channels, "mask head")
        return (x @ self.a_w + self.a_b)[..., 0], (x @ self.b_w + self.b_b)[..., 0]

    def __call__(self, x, state=None):
        self._bins = x.shape[1]
        a, b = self.logits(x)
        return np.tanh(a) * sigmoid(b)

    def macs_per_frame(self):
        return 2 * (self._bins or 0) * self.channels


def sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out




@numba.njit(cache=True)
def cln_prelu_frame(h, st, gain, bias, slope, eps):
    """In place: one (F, C) frame through cLN then PReLU.

    ``st`` holds the float64 running count, sum and sum of squares and is
    advanced by this frame.
    """
    s = 0.0
    q = 0.0
    for i in range(h.shape[0]):
        for c in range(h.shape[1]):
            f = np.float64(h[i, c])
            s += f
            q += f * f
    st[0] += 1.0
    st[1] += s
    st[2] += q
    n = st[0] * h.size
    mean = st[1] / n
    var = max(st[2] / n - mean * mean, 0.0)
    inv = 1.0 / math.sqrt(var + eps)
    for i in range(h.shape[0]):
        for c in range(h.shape[1]):
            y = (h[i, c] - mean) * inv * gain[c] + bias[c]
            h[i, c] = y if y >= 0 else slope[c] * y


@numba.njit(cache=True)
def tcm_stack_step(x_in, per_group, sq_w, sq_b, g1, b1, a1, dc_w, dc_b, g2, b2, a2, ex_w, ex_b,
                   dil, stats, rings, pos, eps, outs):
    """One frame of a batch of independent streams through a stack of S-TCMs.

    ``x_in`` is (B, width); stream ``b`` owns ``stats[b]``, ``rings[b]`` and
    ``pos[b]``.  Each group's output is written to ``outs[g]`` (B, width).
    Batching streams that share weights reads every weight matrix once.
    """
    x = x_in.copy()
    nb = x.shape[0]
    nsq = sq_b.shape[1]
    k = 5
    taps = np.empty((nb, k * nsq), dtype=x.dtype)
    for blk in range(sq_w.shape[0]):
        h = np.dot(x, sq_w[blk])
        d = dil[blk]
        hl = (k - 1) * d
        for b in range(nb):
            h[b] += sq_b[blk]
            cln_prelu_frame(h[b : b + 1], stats[b, blk, 0], g1[blk], b1[blk], a1[blk], eps)
            p = pos[b, blk]
            for i in range(k - 1):
                taps[b, i * nsq : (i + 1) * nsq] = rings[b, blk, (p + i * d) % hl]
            taps[b, (k - 1) * nsq :] = h[b]
            rings[b, blk, p] = h[b]
            pos[b, blk] = (p + 1) % hl
        y = np.dot(taps, dc_w[blk])
        for b in range(nb):
            y[b] += dc_b[blk]
            cln_prelu_frame(y[b : b + 1], stats[b, blk, 1], g2[blk], b2[blk], a2[blk], eps)
        x += np.dot(y, ex_w[blk])
        for b in range(nb):
            x[b] += ex_b[blk]
        if (blk + 1) % per_group == 0:
            outs[blk // per_group] = x
