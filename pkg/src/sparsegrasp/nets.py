"""Sparse-GRConvNet and Sparse-GINNet built from masked convolution layers.

Both networks share a stem (9x9 conv, two stride-2 4x4 convs), a body at
1/4 resolution (five residual or five inception blocks) and a decoder of
transposed convolutions followed by four 2x2 output heads: quality,
cos(2 theta), sin(2 theta) and width. Every batch norm is non-affine.

The full-scale layer widths are reconstructed from the base networks; the
GR-ConvNet variant reproduces its reference 1,900,900 parameter count
exactly when biases and affine batch-norm parameters are included.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .autodiff import (
    DTYPE,
    RunningStats,
    ShapeError,
    Tensor,
    batchnorm_nonaffine,
    channel_slice,
    concat,
    concat_channels,
    conv2d,
    conv2d_transposed,
    conv_output_size,
    no_grad,
    relu,
    residual_add,
    transposed_output_size,
)
from .geometry import GraspPoseImage, fold_angle
from .sparse import ParamCount, ScoredTensor, SparsityConfig, count_active_params, effective_weight, init_scored

HEAD_NAMES = ("quality", "cos2theta", "sin2theta", "width")
REFERENCE_INPUT = 224
REFERENCE_WIDTH_SCALE = 150.0


def default_width_scale(input_size: int) -> float:
    return REFERENCE_WIDTH_SCALE * input_size / REFERENCE_INPUT


# ---------------------------------------------------------------------------
# architecture description
# ---------------------------------------------------------------------------

@dataclass
class StageSpec:
    kind: str  # conv | tconv | residual | inception
    name: str
    channels: int
    kernel: int = 3
    stride: int = 1
    padding: int = 0
    output_padding: int = 0
    norm: bool = True
    # inception only: one tuple of (channels, kernel) convs per branch
    branches: tuple = ()


@dataclass
class ArchitectureSpec:
    name: str
    input_channels: int
    input_size: int
    stages: list
    head_kernel: int = 2
    scale_factor: float = 1.0

    def scaled(self, c: int) -> int:
        return max(1, int(math.floor(c * self.scale_factor + 0.5)))

    def to_dict(self) -> dict:
        d = asdict(self)
        for s in d["stages"]:
            s["branches"] = [list(map(list, b)) for b in s["branches"]]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitectureSpec":
        stages = []
        for s in d["stages"]:
            s = dict(s)
            s["branches"] = tuple(tuple(tuple(c) for c in b) for b in s.get("branches", ()))
            stages.append(StageSpec(**s))
        return cls(**{**d, "stages": stages})

    def spatial_trace(self) -> list:
        """(stage name, output size) for every stage, heads last.

        Raises ShapeError naming the first stage that cannot be applied.
        """
        size, trace = self.input_size, []
        for st in self.stages:
            if st.kind == "conv":
                if size + 2 * st.padding < st.kernel:
                    raise ShapeError(f"{self.name}: stage {st.name!r} kernel {st.kernel} exceeds input {size}")
                size = conv_output_size(size, st.kernel, st.stride, st.padding)
            elif st.kind == "tconv":
                size = transposed_output_size(size, st.kernel, st.stride, st.padding, st.output_padding)
            if size < 1:
                raise ShapeError(f"{self.name}: stage {st.name!r} produces empty output")
            trace.append((st.name, size))
        size = conv_output_size(size, self.head_kernel, 1, 0)
        trace.append(("heads", size))
        return trace

    def validate(self) -> None:
        if self.input_channels < 1:
            raise ValueError("input_channels must be positive")
        channels = self.input_channels
        for st in self.stages:
            if st.kind not in ("conv", "tconv", "residual", "inception"):
                raise ValueError(f"{self.name}: unknown stage kind {st.kind!r} in {st.name!r}")
            if st.kind == "residual" and st.channels != channels:
                raise ShapeError(f"{self.name}: residual stage {st.name!r} needs {channels} channels")
            if st.kind == "inception":
                out = sum(b[-1][0] for b in st.branches)
                if out != st.channels:
                    raise ShapeError(f"{self.name}: inception stage {st.name!r} branches sum to {out}, "
                                     f"declared {st.channels}")
            channels = st.channels
        trace = self.spatial_trace()
        if trace[-1][1] != self.input_size:
            path = " -> ".join(f"{n}:{s}" for n, s in trace)
            changed = [n for (n, s), (_, prev) in zip(trace, [("input", self.input_size)] + trace) if s != prev]
            raise ShapeError(f"{self.name}: output size {trace[-1][1]} != input {self.input_size} "
                             f"(offending stage {changed[-1]!r}; trace {path})")


def _stem(c1, c2, c3):
    return [
        StageSpec("conv", "conv1", c1, kernel=9, stride=1, padding=4),
        StageSpec("conv", "conv2", c2, kernel=4, stride=2, padding=1),
        StageSpec("conv", "conv3", c3, kernel=4, stride=2, padding=1),
    ]


def _decoder(c2, c1):
    return [
        StageSpec("tconv", "conv4", c2, kernel=4, stride=2, padding=1, output_padding=1),
        StageSpec("tconv", "conv5", c1, kernel=4, stride=2, padding=2, output_padding=1),
        StageSpec("tconv", "conv6", c1, kernel=9, stride=1, padding=4, norm=False),
    ]


def grconvnet_spec(input_channels: int = 4, input_size: int = 224, scale_factor: float = 1.0,
                   name: str = "sparse-grconvnet") -> ArchitectureSpec:
    spec = ArchitectureSpec(name, input_channels, input_size, [], scale_factor=scale_factor)
    s = spec.scaled
    body = [StageSpec("residual", f"res{i}", s(128)) for i in range(1, 6)]
    spec.stages = _stem(s(32), s(64), s(128)) + body + _decoder(s(64), s(32))
    return spec


def ginnet_spec(input_channels: int = 4, input_size: int = 224, scale_factor: float = 1.0,
                name: str = "sparse-ginnet") -> ArchitectureSpec:
    spec = ArchitectureSpec(name, input_channels, input_size, [], scale_factor=scale_factor)
    s = spec.scaled
    branches = (
        ((s(32), 1),),
        ((s(32), 1), (s(64), 3)),
        ((s(10), 1), (s(16), 5)),
        ((s(16), 1),),
    )
    out = sum(b[-1][0] for b in branches)
    body = [StageSpec("inception", f"inception{i}", out, branches=branches) for i in range(1, 6)]
    spec.stages = _stem(s(32), s(64), out) + body + _decoder(s(64), s(32))
    return spec


DESK_SCALE = 0.25
DESK_INPUT = 96

ARCHITECTURES = {
    "sparse-grconvnet": lambda **kw: grconvnet_spec(**kw),
    "sparse-ginnet": lambda **kw: ginnet_spec(**kw),
    "desk-grconvnet": lambda **kw: grconvnet_spec(**{"input_size": DESK_INPUT, "scale_factor": DESK_SCALE,
                                                     "name": "desk-grconvnet", **kw}),
    "desk-ginnet": lambda **kw: ginnet_spec(**{"input_size": DESK_INPUT, "scale_factor": DESK_SCALE,
                                               "name": "desk-ginnet", **kw}),
}


def get_architecture(name: str, **overrides) -> ArchitectureSpec:
    try:
        return ARCHITECTURES[name](**overrides)
    except KeyError:
        raise ValueError(f"unknown architecture {name!r}; choose from {sorted(ARCHITECTURES)}") from None


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------

class MaskedConv:
    """Convolution (or transposed convolution) whose weights pass through a top-K mask.

    With ``masked=False`` the stored weights are used directly; that is the
    dense twin used for equivalence checks.
    """

    def __init__(self, name, cin, cout, kernel, stride=1, padding=0, output_padding=0, *,
                 transposed=False, masked=True, config: SparsityConfig, rng: np.random.Generator):
        self.name = name
        self.transposed = transposed
        self.stride, self.padding, self.output_padding = stride, padding, output_padding
        self.masked = masked
        shape = (cin, cout, kernel, kernel) if transposed else (cout, cin, kernel, kernel)
        self.scored: ScoredTensor = init_scored(shape, config, rng, name=name)
        fan_in = int(np.prod(shape[1:]))
        bound = 1.0 / math.sqrt(fan_in)
        self.bias = Tensor(rng.uniform(-bound, bound, size=cout), name=f"{name}.bias")

    @property
    def out_channels(self) -> int:
        return self.scored.shape[1] if self.transposed else self.scored.shape[0]

    def weight(self) -> Tensor:
        return effective_weight(self.scored) if self.masked else self.scored.weights

    def __call__(self, x: Tensor) -> Tensor:
        w = self.weight()
        if self.transposed:
            return conv2d_transposed(x, w, self.bias, self.stride, self.padding, self.output_padding)
        return conv2d(x, w, self.bias, self.stride, self.padding)


class BatchNorm:
    def __init__(self, name: str, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        self.name = name
        self.stats = RunningStats(channels)
        self.momentum, self.eps = momentum, eps
        self.training = True

    def __call__(self, x: Tensor) -> Tensor:
        return batchnorm_nonaffine(x, self.stats, self.training, self.momentum, self.eps)


class Block:
    """Container with conv and batch-norm children."""

    convs: list
    norms: list

    def __call__(self, x: Tensor) -> Tensor:
        raise NotImplementedError


class ConvStage(Block):
    def __init__(self, conv: MaskedConv, norm: Optional[BatchNorm]):
        self.conv, self.norm = conv, norm
        self.convs = [conv]
        self.norms = [norm] if norm else []

    def __call__(self, x):
        x = self.conv(x)
        return relu(self.norm(x)) if self.norm else x


class ResidualBlock(Block):
    def __init__(self, name, channels, make_conv, make_norm):
        self.conv1 = make_conv(f"{name}.conv1", channels, channels, 3, padding=1)
        self.bn1 = make_norm(f"{name}.bn1", channels)
        self.conv2 = make_conv(f"{name}.conv2", channels, channels, 3, padding=1)
        self.bn2 = make_norm(f"{name}.bn2", channels)
        self.convs = [self.conv1, self.conv2]
        self.norms = [self.bn1, self.bn2]

    def __call__(self, x):
        y = relu(self.bn1(self.conv1(x)))
        y = self.bn2(self.conv2(y))
        return residual_add(y, x)


class InceptionBlock(Block):
    """Parallel conv-bn-relu branches of different kernel sizes, concatenated."""

    def __init__(self, name, cin, branches, make_conv, make_norm):
        self.branches = []
        self.convs, self.norms = [], []
        for bi, branch in enumerate(branches):
            layers, c = [], cin
            for li, (cout, k) in enumerate(branch):
                lname = f"{name}.b{bi}.{li}"
                conv = make_conv(lname, c, cout, k, padding=k // 2)
                norm = make_norm(f"{lname}.bn", cout)
                layers.append((conv, norm))
                self.convs.append(conv)
                self.norms.append(norm)
                c = cout
            self.branches.append(layers)

    @property
    def out_channels(self) -> int:
        return sum(layers[-1][0].out_channels for layers in self.branches)

    def __call__(self, x):
        outs = []
        for layers in self.branches:
            y = x
            for conv, norm in layers:
                y = relu(norm(conv(y)))
            outs.append(y)
        return concat_channels(outs)


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

@dataclass
class GraspMaps:
    """Quality, cos 2theta, sin 2theta and normalized width planes.

    Arrays are (N, 1, H, W) for a batch or (H, W) for a single image.
    """

    quality: np.ndarray
    cos2theta: np.ndarray
    sin2theta: np.ndarray
    width: np.ndarray

    def item(self, i: int) -> "GraspMaps":
        return GraspMaps(*(getattr(self, n)[i, 0] for n in HEAD_NAMES))

    def __len__(self) -> int:
        return self.quality.shape[0] if self.quality.ndim == 4 else 1

    def stack(self) -> np.ndarray:
        return np.stack([getattr(self, n) for n in HEAD_NAMES])

    @classmethod
    def from_stack(cls, arr) -> "GraspMaps":
        return cls(*(np.asarray(a) for a in arr))


class GraspNet:
    """A built network; call it on a (N, C, H, W) tensor to get four head tensors."""

    def __init__(self, arch: ArchitectureSpec, sparsity: SparsityConfig, masked: bool = True,
                 bn_momentum: float = 0.1, bn_eps: float = 1e-5):
        arch.validate()
        self.arch, self.sparsity = arch, sparsity
        self.training = True
        rng = np.random.default_rng(sparsity.seed)
        self._norms: list = []

        def make_conv(name, cin, cout, k, stride=1, padding=0, output_padding=0, transposed=False,
                      head=False):
            layer_masked = masked and (sparsity.mask_heads or not head)
            return MaskedConv(name, cin, cout, k, stride, padding, output_padding, transposed=transposed,
                              masked=layer_masked, config=sparsity, rng=rng)

        def make_norm(name, channels):
            bn = BatchNorm(name, channels, bn_momentum, bn_eps)
            self._norms.append(bn)
            return bn

        self.blocks: list[Block] = []
        c = arch.input_channels
        for st in arch.stages:
            if st.kind in ("conv", "tconv"):
                conv = make_conv(st.name, c, st.channels, st.kernel, st.stride, st.padding, st.output_padding,
                                 transposed=st.kind == "tconv")
                norm = make_norm(f"{st.name}.bn", st.channels) if st.norm else None
                self.blocks.append(ConvStage(conv, norm))
            elif st.kind == "residual":
                self.blocks.append(ResidualBlock(st.name, st.channels, make_conv, make_norm))
            else:
                self.blocks.append(InceptionBlock(st.name, c, st.branches, make_conv, make_norm))
            c = st.channels
        self.heads = {n: make_conv(f"head.{n}", c, 1, arch.head_kernel, head=True) for n in HEAD_NAMES}
        self.param_count = count_active_params(self)

    # -- structure -----------------------------------------------------------
    def scored_layers(self) -> list:
        layers = [conv for b in self.blocks for conv in b.convs]
        return layers + list(self.heads.values())

    def batchnorms(self) -> list:
        return list(self._norms)

    def trainable(self) -> list[Tensor]:
        return [layer.scored.scores for layer in self.scored_layers() if layer.masked]

    def unmasked_param_count(self) -> int:
        return sum(layer.bias.size for layer in self.scored_layers())

    def scored(self) -> list[ScoredTensor]:
        return [layer.scored for layer in self.scored_layers()]

    def frozen_digest(self) -> str:
        """SHA-256 of every weight and bias array."""
        h = hashlib.sha256()
        for layer in self.scored_layers():
            h.update(layer.scored.weights.data.tobytes())
            h.update(layer.bias.data.tobytes())
        return h.hexdigest()

    def param_table(self) -> list[tuple]:
        """(layer name, maskable elements, active elements, masked?) per layer."""
        return [(l.name, l.scored.size, l.scored.n_active if l.masked else l.scored.size, l.masked)
                for l in self.scored_layers()]

    # -- mode ----------------------------------------------------------------
    def train(self, mode: bool = True) -> "GraspNet":
        self.training = mode
        for bn in self._norms:
            bn.training = mode
        return self

    def eval(self) -> "GraspNet":
        return self.train(False)

    def set_k(self, k_fraction: float) -> None:
        for layer in self.scored_layers():
            layer.scored.k_fraction = k_fraction
        self.param_count = count_active_params(self)

    # -- computation ---------------------------------------------------------
    def __call__(self, x: Tensor) -> dict:
        if x.data.ndim != 4:
            raise ShapeError(f"expected (N, C, H, W) input, got {x.shape}")
        if x.shape[1] != self.arch.input_channels:
            raise ShapeError(f"{self.arch.name} expects {self.arch.input_channels} input channels, got {x.shape[1]}")
        for block in self.blocks:
            x = block(x)
        # the heads share an input, so they run as one convolution (one im2col)
        heads = list(self.heads.values())
        y = conv2d(x, concat([h.weight() for h in heads]), concat([h.bias for h in heads]))
        return {n: channel_slice(y, i, i + 1) for i, n in enumerate(self.heads)}

    # -- state ---------------------------------------------------------------
    def state_arrays(self) -> dict:
        out = {}
        for layer in self.scored_layers():
            out[f"{layer.name}.weight"] = layer.scored.weights.data
            out[f"{layer.name}.scores"] = layer.scored.scores.data
            out[f"{layer.name}.bias"] = layer.bias.data
        for bn in self._norms:
            out[f"{bn.name}.running_mean"] = bn.stats.mean
            out[f"{bn.name}.running_var"] = bn.stats.var
            out[f"{bn.name}.updates"] = np.array([bn.stats.updates], dtype=DTYPE)
        return out

    def load_state_arrays(self, arrays: dict) -> None:
        expected = self.state_arrays()
        missing = sorted(set(expected) - set(arrays))
        extra = sorted(set(arrays) - set(expected))
        if missing or extra:
            raise ValueError(f"{self.arch.name}: state mismatch (missing {missing[:3]}, unexpected {extra[:3]})")
        for name, ref in expected.items():
            if arrays[name].shape != ref.shape:
                raise ValueError(f"{self.arch.name}: array {name} has shape {arrays[name].shape}, expected {ref.shape}")
        for layer in self.scored_layers():
            layer.scored.weights.data = np.array(arrays[f"{layer.name}.weight"], dtype=DTYPE)
            layer.scored.scores.data = np.array(arrays[f"{layer.name}.scores"], dtype=DTYPE)
            layer.bias.data = np.array(arrays[f"{layer.name}.bias"], dtype=DTYPE)
        for bn in self._norms:
            bn.stats.mean = np.array(arrays[f"{bn.name}.running_mean"], dtype=DTYPE)
            bn.stats.var = np.array(arrays[f"{bn.name}.running_var"], dtype=DTYPE)
            bn.stats.updates = int(arrays[f"{bn.name}.updates"][0])


def build_model(arch: ArchitectureSpec, sparsity: Optional[SparsityConfig] = None, masked: bool = True,
                **kwargs) -> GraspNet:
    return GraspNet(arch, sparsity or SparsityConfig(), masked=masked, **kwargs)


def forward(model: GraspNet, image) -> GraspMaps:
    """Evaluation-mode forward pass returning numpy maps of shape (N, 1, H, W)."""
    data = image.data if isinstance(image, Tensor) else np.asarray(image, dtype=DTYPE)
    if data.ndim == 3:
        data = data[None]
    size = model.arch.input_size
    if data.shape[2:] != (size, size):
        raise ShapeError(f"{model.arch.name} expects {size}x{size} images, got {data.shape[2:]}")
    was_training = model.training
    model.eval()
    try:
        with no_grad():
            out = model(Tensor(data))
    finally:
        model.train(was_training)
    return GraspMaps(*(out[n].data for n in HEAD_NAMES))


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------

# smoothing turns a thin painted strip into a ridge whose height wobbles with
# the pixel staircase by several percent; values this close to the peak count
# as ties
_PLATEAU_RTOL = 0.1
_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def _planes(maps: GraspMaps) -> tuple:
    planes = []
    for n in HEAD_NAMES:
        a = np.asarray(getattr(maps, n), dtype=np.float64)
        a = a.reshape(a.shape[-2:]) if a.ndim > 2 else a
        planes.append(a)
    return tuple(planes)


def _quality_surface(q: np.ndarray, smoothing_sigma: float) -> np.ndarray:
    q = np.clip(q, 0.0, 1.0)
    if smoothing_sigma and smoothing_sigma > 0:
        q = ndimage.gaussian_filter(q, smoothing_sigma, mode="constant")
    return q


def _pose_at(planes, row: int, col: int, width_scale: float, readout_sigma: float = 0.0) -> GraspPoseImage:
    """Pose at one pixel.

    With ``readout_sigma > 0`` the angle and width planes are read as
    quality-weighted Gaussian averages around the pixel instead of the raw
    pixel values. On a binary painted region this returns the painted values
    exactly; on network output it suppresses single-pixel noise.
    """
    q, c, s, w = planes
    qc = np.clip(q, 0.0, 1.0)
    if readout_sigma and readout_sigma > 0 and qc[row, col] > 0:
        r = int(math.ceil(4 * readout_sigma))
        r0, r1 = max(row - r, 0), min(row + r + 1, q.shape[0])
        c0, c1 = max(col - r, 0), min(col + r + 1, q.shape[1])
        yy, xx = np.mgrid[r0:r1, c0:c1]
        g = np.exp(-((yy - row) ** 2 + (xx - col) ** 2) / (2 * readout_sigma ** 2)) * qc[r0:r1, c0:c1]
        g /= g.sum()
        cv = float((g * np.clip(c[r0:r1, c0:c1], -1, 1)).sum())
        sv = float((g * np.clip(s[r0:r1, c0:c1], -1, 1)).sum())
        wv = float((g * np.clip(w[r0:r1, c0:c1], 0, 1)).sum())
    else:
        cv = float(np.clip(c[row, col], -1.0, 1.0))
        sv = float(np.clip(s[row, col], -1.0, 1.0))
        wv = float(np.clip(w[row, col], 0.0, 1.0))
    theta = fold_angle(0.5 * math.atan2(sv, cv))
    return GraspPoseImage(float(col), float(row), theta, wv * width_scale, float(qc[row, col]))


def decode_best_grasp(maps: GraspMaps, smoothing_sigma: float = 2.0,
                      width_scale: float = REFERENCE_WIDTH_SCALE,
                      readout_sigma: Optional[float] = None) -> GraspPoseImage:
    """Pose at the maximum of the (optionally smoothed) quality map.

    When several pixels tie for the maximum (a flat plateau), the tied pixel
    closest to the plateau's centroid wins. With smoothing on, values within
    10% of the maximum count as tied, restricted to the 8-connected blob that
    holds the first maximum, so the winner always scores at least 0.9 of the
    peak and two separate peaks are never averaged. Without smoothing only
    exact ties count. An all-zero quality map yields the image center with
    ``degenerate=True``.

    Args:
        maps: single-image maps.
        smoothing_sigma: Gaussian sigma (px) applied to quality before the argmax; 0 disables.
        width_scale: pixels corresponding to a normalized width of 1.
        readout_sigma: window for the quality-weighted angle/width readout; defaults to
            ``smoothing_sigma``, and 0 reads the raw pixel.
    """
    planes = _planes(maps)
    for p in planes:
        if not np.all(np.isfinite(p)):
            raise ValueError("decode_best_grasp: maps contain non-finite values")
    surf = _quality_surface(planes[0], smoothing_sigma)
    h, w = surf.shape
    peak = surf.max()
    if peak <= 0:
        pose = _pose_at(planes, h // 2, w // 2, width_scale)
        pose.quality, pose.degenerate = 0.0, True
        return pose
    rs = smoothing_sigma if readout_sigma is None else readout_sigma
    rtol = _PLATEAU_RTOL if smoothing_sigma and smoothing_sigma > 0 else 0.0
    blobs, _ = ndimage.label(surf >= peak * (1 - rtol), structure=_EIGHT_CONNECTED)
    ties = np.argwhere(blobs == blobs.flat[np.argmax(surf)])
    if len(ties) == 1:
        row, col = ties[0]
    else:
        # nearest the tie centroid, then higher value, then raster order
        d = np.round(((ties - ties.mean(axis=0)) ** 2).sum(axis=1), 9)
        row, col = ties[np.lexsort((-surf[ties[:, 0], ties[:, 1]], d))[0]]
    return _pose_at(planes, int(row), int(col), width_scale, rs)


def decode_topn_grasps(maps: GraspMaps, n: int = 5, nms_radius: int = 5, smoothing_sigma: float = 2.0,
                       width_scale: float = REFERENCE_WIDTH_SCALE,
                       readout_sigma: Optional[float] = None) -> list[GraspPoseImage]:
    """Up to ``n`` local quality maxima, greedily suppressed within ``nms_radius`` px."""
    if n < 1:
        raise ValueError("n must be at least 1")
    planes = _planes(maps)
    surf = _quality_surface(planes[0], smoothing_sigma)
    size = 2 * nms_radius + 1
    local_max = ndimage.maximum_filter(surf, size=size, mode="constant", cval=-np.inf)
    cand = np.argwhere((surf == local_max) & (surf > 0))
    order = sorted(range(len(cand)), key=lambda i: (-surf[tuple(cand[i])], i))
    kept: list = []
    for i in order:
        r, c = cand[i]
        if all((r - kr) ** 2 + (c - kc) ** 2 > nms_radius ** 2 for kr, kc in kept):
            kept.append((r, c))
            if len(kept) == n:
                break
    rs = smoothing_sigma if readout_sigma is None else readout_sigma
    return [_pose_at(planes, int(r), int(c), width_scale, rs) for r, c in kept]


def dense_twin(model: GraspNet) -> GraspNet:
    """Same weights, biases and batch-norm state, with masking switched off."""
    twin = GraspNet(model.arch, replace(model.sparsity), masked=False)
    twin.load_state_arrays({k: v.copy() for k, v in model.state_arrays().items()})
    return twin.train(model.training)
