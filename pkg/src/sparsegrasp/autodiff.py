"""Dense float32 tensors with tape-based reverse-mode differentiation.

The layer vocabulary is deliberately small: exactly what the two grasp
architectures need (convolution, transposed convolution, non-affine batch
normalization, ReLU, residual addition, channel concatenation) plus the
regression losses and an Adam optimizer.

Convolutions are lowered either to a GEMM over a channel-major im2col
buffer or, for large stride-1 kernels, to per-frequency channel products.
Both paths are deterministic: the im2col scatter runs tap by tap in a fixed
order and the FFTs are single-threaded.
"""
from __future__ import annotations

import contextlib
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
import scipy.fft as sfft

DTYPE = np.float32


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class Tensor:
    """A float32 array with an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_is_leaf")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=DTYPE, order="C")
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._is_leaf = True

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        _TAPE.backward(self)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __mul__(self, scalar: float) -> "Tensor":
        return scale(self, scalar)

    __rmul__ = __mul__


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class _Record:
    inputs: tuple
    output: Tensor
    backward: BackwardFn


@dataclass
class ComputationTape:
    """Ordered record of executed operations.

    Operations append a record only when at least one input requires a
    gradient. :meth:`backward` replays the records in reverse and then
    clears the tape, so every training step starts from an empty tape.
    """

    records: list = field(default_factory=list)
    enabled: bool = True

    def record(self, inputs: Sequence[Tensor], output: Tensor, backward: BackwardFn) -> Tensor:
        if self.enabled and any(t.requires_grad for t in inputs):
            output.requires_grad = True
            output._is_leaf = False
            self.records.append(_Record(tuple(inputs), output, backward))
        return output

    def backward(self, loss: Tensor) -> None:
        if loss.size != 1:
            raise ShapeError(f"backward() needs a scalar, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.data)
        for rec in reversed(self.records):
            g = rec.output.grad
            if g is None:
                continue
            grads = rec.backward(g)
            for inp, gi in zip(rec.inputs, grads):
                if gi is None or not inp.requires_grad:
                    continue
                gi = np.asarray(gi, dtype=DTYPE)
                inp.grad = gi if inp.grad is None else inp.grad + gi
            # intermediate gradients are not kept once consumed
            if not rec.output._is_leaf:
                rec.output.grad = None
        self.clear()

    def clear(self) -> None:
        self.records.clear()

    def __len__(self) -> int:
        return len(self.records)


_TAPE = ComputationTape()


def get_tape() -> ComputationTape:
    return _TAPE


@contextlib.contextmanager
def no_grad():
    """Disable recording for the duration of the block."""
    prev = _TAPE.enabled
    _TAPE.enabled = False
    try:
        yield
    finally:
        _TAPE.enabled = prev


def _record(inputs, out_data, backward) -> Tensor:
    return _TAPE.record(inputs, Tensor(out_data), backward)


# ---------------------------------------------------------------------------
# convolution kernels (plain numpy, no tape)
# ---------------------------------------------------------------------------

# stride-1 kernels at least this large go through the FFT path
FFT_MIN_KERNEL = 7


def conv_output_size(size: int, k: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - k) // stride + 1


def transposed_output_size(size: int, k: int, stride: int, padding: int, output_padding: int = 0) -> int:
    return (size - 1) * stride - 2 * padding + k + output_padding


def _channel_rows(a: np.ndarray) -> np.ndarray:
    """(N, C, H, W) -> (C, N*H*W)."""
    n, c, h, w = a.shape
    return np.ascontiguousarray(a.transpose(1, 0, 2, 3)).reshape(c, n * h * w)


def _from_channel_rows(a: np.ndarray, n: int, h: int, w: int) -> np.ndarray:
    return np.ascontiguousarray(a.reshape(-1, n, h, w).transpose(1, 0, 2, 3))


class _ConvPlan:
    """Kernels for one convolution geometry: forward, input-gradient, weight-gradient.

    ``x_shape`` is the (N, C, H, W) input of the *forward* convolution and
    ``w_shape`` its (Cout, Cin, kh, kw) weight. A transposed convolution
    uses the same plan with the roles of forward and input-gradient swapped.

    Two lowerings: GEMM over a channel-major im2col buffer, and for large
    stride-1 kernels circular correlation in the frequency domain (single
    precision spectra, sized so no wrap-around reaches the kept outputs). Spectra are
    stored frequency-major, (F0, F1, batch, channels), so the channel sums
    are one batched matrix product.
    """

    def __init__(self, x_shape, w_shape, stride: int, padding: int):
        self.x_shape, self.w_shape = tuple(x_shape), tuple(w_shape)
        self.stride, self.padding = stride, padding
        n, c, h, w = self.x_shape
        _, _, kh, kw = self.w_shape
        self.ho = conv_output_size(h, kh, stride, padding)
        self.wo = conv_output_size(w, kw, stride, padding)
        self.use_fft = stride == 1 and min(kh, kw) >= FFT_MIN_KERNEL
        if self.use_fft:
            hp, wp = h + 2 * padding, w + 2 * padding
            self.fft_shape = (sfft.next_fast_len(hp, real=True), sfft.next_fast_len(wp, real=True))
        # forward-input columns / spectrum and output-gradient spectrum, kept for the weight gradient
        self._cols = self._xf = self._gf = self._wf = None

    # -- frequency domain ----------------------------------------------------
    def _spectrum(self, a):
        """(B, C, h, w) real -> (F0, F1, B, C) complex, zero-padded to the FFT size."""
        f = sfft.rfft2(a.astype(DTYPE, copy=False), s=self.fft_shape)
        return np.ascontiguousarray(f.transpose(2, 3, 0, 1))

    def _kernel_spectrum(self, w):
        if self._wf is None:
            # transform rows first so the zero padding rows cost nothing
            f = sfft.rfft(w.astype(DTYPE, copy=False), n=self.fft_shape[1], axis=-1)
            f = sfft.fft(f, n=self.fft_shape[0], axis=-2)
            self._wf = np.ascontiguousarray(f.transpose(2, 3, 0, 1))
        return self._wf

    def _real(self, f, rows, cols):
        """(F0, F1, B, C) spectrum -> (B, C, rows, cols) real, cropped at the origin."""
        full = sfft.irfft2(np.ascontiguousarray(f.transpose(2, 3, 0, 1)), s=self.fft_shape)
        return full[:, :, rows, cols]

    # -- im2col --------------------------------------------------------------
    def _pad(self, x):
        p = self.padding
        return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x

    def _im2col(self, x):
        n, c, _, _ = x.shape
        _, _, kh, kw = self.w_shape
        s, ho, wo = self.stride, self.ho, self.wo
        xt = self._pad(x).transpose(1, 0, 2, 3)
        cols = np.empty((c, kh, kw, n, ho, wo), dtype=DTYPE)
        hs, ws = (ho - 1) * s + 1, (wo - 1) * s + 1
        for i in range(kh):
            for j in range(kw):
                cols[:, i, j] = xt[:, :, i : i + hs : s, j : j + ws : s]
        return cols.reshape(c * kh * kw, n * ho * wo)

    def _col2im(self, cols):
        n, c, h, w = self.x_shape
        _, _, kh, kw = self.w_shape
        s, p, ho, wo = self.stride, self.padding, self.ho, self.wo
        cols = cols.reshape(c, kh, kw, n, ho, wo)
        # room for taps that land past the padded border when stride does not divide evenly
        out = np.zeros((c, n, max(h + 2 * p, (ho - 1) * s + kh), max(w + 2 * p, (wo - 1) * s + kw)), dtype=DTYPE)
        hs, ws = (ho - 1) * s + 1, (wo - 1) * s + 1
        for i in range(kh):
            for j in range(kw):
                out[:, :, i : i + hs : s, j : j + ws : s] += cols[:, i, j]
        return np.ascontiguousarray(out[:, :, p : p + h, p : p + w].transpose(1, 0, 2, 3))

    # -- kernels -------------------------------------------------------------
    def forward(self, x, w, keep: bool = False):
        """Cross-correlation (N, C, H, W) -> (N, Cout, Ho, Wo)."""
        if self.use_fft:
            xf = self._spectrum(self._pad(x))
            wf = self._kernel_spectrum(w)
            yf = np.matmul(xf, wf.conj().transpose(0, 1, 3, 2))
            if keep:
                self._xf = xf
            out = self._real(yf, slice(0, self.ho), slice(0, self.wo))
            return np.ascontiguousarray(out, dtype=DTYPE)
        cols = self._im2col(x)
        if keep:
            self._cols = cols
        return _from_channel_rows(w.reshape(w.shape[0], -1) @ cols, x.shape[0], self.ho, self.wo)

    def input_grad(self, g, w, keep: bool = False):
        """Adjoint of :meth:`forward` in ``x``: (N, Cout, Ho, Wo) -> (N, C, H, W)."""
        _, _, h, wd = self.x_shape
        if self.use_fft:
            gf = self._spectrum(g)
            if keep:
                self._gf = gf
            xf = np.matmul(gf, self._kernel_spectrum(w))
            p = self.padding
            return np.ascontiguousarray(self._real(xf, slice(p, p + h), slice(p, p + wd)), dtype=DTYPE)
        gcols = w.reshape(w.shape[0], -1).T @ _channel_rows(g)
        return self._col2im(gcols)

    def weight_grad(self, g):
        """Weight gradient from the output gradient ``g``.

        Needs a preceding ``forward(..., keep=True)``; reuses the spectrum of
        ``g`` if ``input_grad(g, keep=True)`` already computed it.
        """
        _, _, kh, kw = self.w_shape
        if self.use_fft:
            if self._xf is None:
                raise RuntimeError("weight_grad needs a forward pass with keep=True")
            gf = self._gf if self._gf is not None else self._spectrum(g)
            # sum over the batch: (F, Cout, N) @ (F, N, C)
            wf = np.matmul(gf.conj().transpose(0, 1, 3, 2), self._xf)
            return np.ascontiguousarray(self._real(wf, slice(0, kh), slice(0, kw)), dtype=DTYPE)
        if self._cols is None:
            raise RuntimeError("weight_grad needs a forward pass with keep=True")
        return (_channel_rows(g) @ self._cols.T).reshape(self.w_shape)


# ---------------------------------------------------------------------------
# differentiable operations
# ---------------------------------------------------------------------------

def _check_bias(bias, channels, what):
    if bias is not None and bias.shape != (channels,):
        raise ShapeError(f"{what}: bias shape {bias.shape} does not match {channels} output channels")


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1,
           padding: int = 0) -> Tensor:
    """2-D cross-correlation of ``x`` (N, Cin, H, W) with ``weight`` (Cout, Cin, kh, kw)."""
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input and weight, got {x.shape} and {weight.shape}")
    if stride < 1 or padding < 0:
        raise ValueError(f"conv2d: invalid stride={stride} / padding={padding}")
    cout, cin, kh, kw = weight.shape
    if x.shape[1] != cin:
        raise ShapeError(f"conv2d: input has {x.shape[1]} channels but weight expects {cin}")
    if x.shape[2] + 2 * padding < kh or x.shape[3] + 2 * padding < kw:
        raise ShapeError(f"conv2d: kernel {kh}x{kw} does not fit padded input {x.shape[2:]}")
    _check_bias(bias, cout, "conv2d")

    need_x, need_w = x.requires_grad, weight.requires_grad
    plan = _ConvPlan(x.shape, weight.shape, stride, padding)
    out = plan.forward(x.data, weight.data, keep=need_w and _TAPE.enabled)
    if bias is not None:
        out += bias.data.reshape(1, -1, 1, 1)
    w_data = weight.data

    def backward(g):
        gx = plan.input_grad(g, w_data, keep=need_w) if need_x else None
        gw = plan.weight_grad(g) if need_w else None
        gb = g.sum(axis=(0, 2, 3)) if bias is not None else None
        return gx, gw, gb

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return _record(inputs, out, backward)


def conv2d_transposed(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1,
                      padding: int = 0, output_padding: int = 0) -> Tensor:
    """Transposed convolution; ``weight`` is (Cin, Cout, kh, kw).

    The forward pass is the input-gradient of :func:`conv2d` with the same
    weight, stride and padding.
    """
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ShapeError(f"conv2d_transposed expects 4-D input and weight, got {x.shape} and {weight.shape}")
    if stride < 1 or padding < 0:
        raise ValueError(f"conv2d_transposed: invalid stride={stride} / padding={padding}")
    if not 0 <= output_padding < stride:
        raise ValueError(f"conv2d_transposed: output_padding={output_padding} must be in [0, stride={stride})")
    cin, cout, kh, kw = weight.shape
    if x.shape[1] != cin:
        raise ShapeError(f"conv2d_transposed: input has {x.shape[1]} channels but weight expects {cin}")
    _check_bias(bias, cout, "conv2d_transposed")
    n, _, h, w = x.shape
    ho = transposed_output_size(h, kh, stride, padding, output_padding)
    wo = transposed_output_size(w, kw, stride, padding, output_padding)
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d_transposed: non-positive output size {ho}x{wo}")

    # the matching forward convolution maps (n, cout, ho, wo) -> (n, cin, h, w)
    plan = _ConvPlan((n, cout, ho, wo), weight.shape, stride, padding)
    if (plan.ho, plan.wo) != (h, w):
        raise ShapeError(f"conv2d_transposed: geometry does not invert to {h}x{w}")
    out = plan.input_grad(x.data, weight.data, keep=weight.requires_grad and _TAPE.enabled)
    if bias is not None:
        out += bias.data.reshape(1, -1, 1, 1)
    need_x, need_w = x.requires_grad, weight.requires_grad
    w_data, x_data = weight.data, x.data

    def backward(g):
        gx = gw = None
        if need_x or need_w:
            gx = plan.forward(g, w_data, keep=need_w)
            if need_w:
                # x is the output gradient of the matching forward convolution
                gw = plan.weight_grad(x_data)
            if not need_x:
                gx = None
        gb = g.sum(axis=(0, 2, 3)) if bias is not None else None
        return gx, gw, gb

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return _record(inputs, out, backward)


class RunningStats:
    """Per-channel running mean/variance store for non-affine batch norm."""

    def __init__(self, channels: int):
        self.mean = np.zeros(channels, dtype=DTYPE)
        self.var = np.ones(channels, dtype=DTYPE)
        self.updates = 0


def batchnorm_nonaffine(x: Tensor, stats: RunningStats, training: bool, momentum: float = 0.1,
                        eps: float = 1e-5) -> Tensor:
    """Normalize each channel to zero mean / unit variance, no scale or shift."""
    n, c, h, w = x.shape
    if stats.mean.shape != (c,):
        raise ShapeError(f"batchnorm: stats for {stats.mean.shape[0]} channels, input has {c}")
    xd = x.data
    if training:
        m = n * h * w
        if m < 2:
            raise ValueError("batchnorm in train mode needs at least 2 values per channel")
        mean = xd.mean(axis=(0, 2, 3), dtype=np.float64).astype(DTYPE)
        xc = xd - mean.reshape(1, c, 1, 1)
        var = (xc * xc).mean(axis=(0, 2, 3), dtype=np.float64).astype(DTYPE)
        stats.mean = ((1 - momentum) * stats.mean + momentum * mean).astype(DTYPE)
        stats.var = ((1 - momentum) * stats.var + momentum * var * (m / (m - 1))).astype(DTYPE)
        stats.updates += 1
    else:
        if stats.updates == 0:
            warnings.warn("batchnorm evaluated before any training update; using mean 0 / var 1",
                          RuntimeWarning, stacklevel=2)
        mean, var = stats.mean, stats.var
        xc = xd - mean.reshape(1, c, 1, 1)
    inv_std = (1.0 / np.sqrt(var + DTYPE(eps))).astype(DTYPE)
    xhat = xc * inv_std.reshape(1, c, 1, 1)

    def backward(g):
        if not training:
            return (g * inv_std.reshape(1, c, 1, 1),)
        gm = g.mean(axis=(0, 2, 3), keepdims=True)
        gxm = (g * xhat).mean(axis=(0, 2, 3), keepdims=True)
        return ((g - gm - xhat * gxm) * inv_std.reshape(1, c, 1, 1),)

    return _record((x,), xhat, backward)


def relu(x: Tensor) -> Tensor:
    pos = x.data > 0
    # np.maximum keeps NaN, so a diverged activation still reaches the loss
    return _record((x,), np.maximum(x.data, DTYPE(0)), lambda g: (g * pos,))


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add: shape mismatch {a.shape} vs {b.shape}")
    return _record((a, b), a.data + b.data, lambda g: (g, g))


residual_add = add


def scale(x: Tensor, factor: float) -> Tensor:
    f = DTYPE(factor)
    return _record((x,), x.data * f, lambda g: (g * f,))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate tensors along ``axis``; all other dimensions must agree."""
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    ref = tensors[0].shape
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or t.shape[:axis] + t.shape[axis + 1:] != ref[:axis] + ref[axis + 1:]:
            raise ShapeError(f"concat: incompatible shapes {ref} and {t.shape} along axis {axis}")
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])
    out = np.concatenate([t.data for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(tensors)))

    return _record(tuple(tensors), out, backward)


def concat_channels(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate (N, C_i, H, W) tensors along the channel axis."""
    if not tensors:
        raise ShapeError("concat_channels needs at least one tensor")
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.shape[0] != ref[0] or t.shape[2:] != ref[2:]:
            raise ShapeError(f"concat_channels: incompatible shapes {ref} and {t.shape}")
    return concat(tensors, axis=1)


def channel_slice(x: Tensor, start: int, stop: int) -> Tensor:
    """Channels ``start:stop`` of an (N, C, H, W) tensor."""
    if not 0 <= start < stop <= x.shape[1]:
        raise ShapeError(f"channel_slice: [{start}:{stop}] out of range for {x.shape[1]} channels")
    out = np.ascontiguousarray(x.data[:, start:stop])

    def backward(g):
        gx = np.zeros(x.shape, dtype=DTYPE)
        gx[:, start:stop] = g
        return (gx,)

    return _record((x,), out, backward)


def _loss_weights(weight, shape):
    """Per-element weights normalized to sum to one (uniform when ``None``)."""
    if weight is None:
        return None
    w = np.broadcast_to(np.asarray(weight, dtype=DTYPE), shape)
    total = w.sum(dtype=np.float64)
    if not np.all(w >= 0) or not np.isfinite(total):
        raise ValueError("loss weights must be finite and non-negative")
    return w / total if total > 0 else np.zeros(shape, DTYPE)


def smooth_l1_loss(pred: Tensor, target: Tensor, beta: float = 1.0, weight=None) -> Tensor:
    """Mean Huber-style loss; quadratic below ``beta``, linear above.

    Args:
        weight: optional non-negative per-element weights (broadcast to the
            prediction shape). The loss becomes the weighted mean; an all-zero
            weight gives a zero loss and zero gradient.
    """
    if pred.shape != target.shape:
        raise ShapeError(f"smooth_l1_loss: shape mismatch {pred.shape} vs {target.shape}")
    if beta <= 0:
        raise ValueError("beta must be positive")
    d = pred.data - target.data
    ad = np.abs(d)
    small = ad < beta
    per = np.where(small, 0.5 * d * d / beta, ad - 0.5 * beta)
    w = _loss_weights(weight, d.shape)
    if w is None:
        w = np.float64(1.0 / d.size)
    loss = np.asarray((per * w).sum(dtype=np.float64), dtype=DTYPE)

    def backward(g):
        dd = np.where(small, d / beta, np.sign(d)) * (w * g)
        return dd, -dd

    return _record((pred, target), loss, backward)


def mse_loss(pred: Tensor, target: Tensor, weight=None) -> Tensor:
    """Mean squared error, optionally weighted per element like :func:`smooth_l1_loss`."""
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: shape mismatch {pred.shape} vs {target.shape}")
    d = pred.data - target.data
    w = _loss_weights(weight, d.shape)
    if w is None:
        w = np.float64(1.0 / d.size)
    loss = np.asarray((d * d * w).sum(dtype=np.float64), dtype=DTYPE)

    def backward(g):
        dd = 2.0 * d * (w * g)
        return dd, -dd

    return _record((pred, target), loss, backward)


LOSSES = {"smoothl1": smooth_l1_loss, "mse": mse_loss}


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray


def adam_step(params: Iterable[Tensor], grads: Iterable[Optional[np.ndarray]], state: dict,
              lr: float = 1e-3, betas: tuple = (0.9, 0.999), eps: float = 1e-8,
              step_count: int = 1) -> None:
    """One in-place Adam update with bias correction.

    ``state`` maps ``id(param)`` to :class:`AdamState`; missing entries are
    created. Parameters with ``requires_grad=False`` or no gradient are left
    untouched.
    """
    b1, b2 = betas
    c1 = 1.0 - b1 ** step_count
    c2 = 1.0 - b2 ** step_count
    for p, g in zip(params, grads):
        if not p.requires_grad or g is None:
            continue
        st = state.get(id(p))
        if st is None:
            st = state[id(p)] = AdamState(np.zeros_like(p.data), np.zeros_like(p.data))
        if st.m.shape != p.shape:
            raise ShapeError(f"adam state shape {st.m.shape} does not match parameter {p.shape}")
        st.m = (b1 * st.m + (1 - b1) * g).astype(DTYPE)
        st.v = (b2 * st.v + (1 - b2) * g * g).astype(DTYPE)
        m_hat = st.m / DTYPE(c1)
        v_hat = st.v / DTYPE(c2)
        p.data = (p.data - DTYPE(lr) * m_hat / (np.sqrt(v_hat) + DTYPE(eps))).astype(DTYPE)


class Adam:
    def __init__(self, params: Iterable[Tensor], lr: float = 1e-3, betas: tuple = (0.9, 0.999),
                 eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.betas, self.eps = lr, betas, eps
        self.state: dict = {}
        self.step_count = 0

    def step(self) -> None:
        self.step_count += 1
        adam_step(self.params, [p.grad for p in self.params], self.state, self.lr, self.betas,
                  self.eps, self.step_count)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
