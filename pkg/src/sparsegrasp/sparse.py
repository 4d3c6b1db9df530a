"""Edge-PopUp: score-ranked top-K edge selection over frozen random weights.

Every maskable layer owns a :class:`ScoredTensor`. On each forward pass the
top ``floor(k * n)`` scores of that layer select the active edges, and the
layer runs with ``weights * mask``. The backward pass treats the mask as the
identity (straight-through), so every score, active or not, receives
``dL/dW_eff * W``. Weights and biases never change.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .autodiff import DTYPE, Tensor, conv2d, conv2d_transposed, get_tape

K_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)

# slack for products like 0.7 * 10 that land a hair below an integer
_FLOOR_SLACK = 1e-9


@dataclass
class SparsityConfig:
    """How scored layers are initialized and how many edges they keep.

    ``k_fraction`` applies uniformly to every maskable layer unless a layer
    name appears in ``layer_k``.
    """

    k_fraction: float = 0.5
    score_init: str = "abs_kaiming_uniform"
    weight_init: str = "kaiming_uniform"
    seed: int = 0
    mask_heads: bool = True
    layer_k: dict = field(default_factory=dict)

    def __post_init__(self):
        for k in [self.k_fraction, *self.layer_k.values()]:
            if not 0.0 < k <= 1.0:
                raise ValueError(f"k_fraction must lie in (0, 1], got {k}")
        if self.score_init not in _INITS or self.weight_init not in _INITS:
            raise ValueError(f"unknown init; choose from {sorted(_INITS)}")

    def k_for(self, layer_name: str) -> float:
        return self.layer_k.get(layer_name, self.k_fraction)


def num_active(k_fraction: float, n: int) -> int:
    return min(n, math.floor(k_fraction * n + _FLOOR_SLACK))


def _kaiming_bound(shape) -> float:
    fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else int(shape[0])
    return math.sqrt(6.0 / max(fan_in, 1))


def _kaiming_uniform(shape, rng):
    b = _kaiming_bound(shape)
    return rng.uniform(-b, b, size=shape)


def _abs_kaiming_uniform(shape, rng):
    return np.abs(_kaiming_uniform(shape, rng))


def _signed_constant(shape, rng):
    b = _kaiming_bound(shape) / math.sqrt(3.0)
    return np.where(rng.random(shape) < 0.5, -b, b)


_INITS: dict[str, Callable] = {
    "kaiming_uniform": _kaiming_uniform,
    "abs_kaiming_uniform": _abs_kaiming_uniform,
    "signed_constant": _signed_constant,
}


def select_topk(scores: np.ndarray, k_fraction: float) -> np.ndarray:
    """Binary mask keeping the ``floor(k * n)`` largest scores.

    Ties go to the lower flat index.
    """
    flat = np.asarray(scores).reshape(-1)
    keep = num_active(k_fraction, flat.size)
    mask = np.zeros(flat.size, dtype=DTYPE)
    if keep:
        # stable sort of the negated scores keeps equal scores in index order
        order = np.argsort(-flat, kind="stable")
        mask[order[:keep]] = 1.0
    return mask.reshape(np.shape(scores))


class ScoredTensor:
    """Frozen weights, trainable positive scores and the derived mask."""

    def __init__(self, weights: np.ndarray, scores: np.ndarray, k_fraction: float,
                 name: Optional[str] = None):
        weights = np.asarray(weights, dtype=DTYPE)
        scores = np.asarray(scores, dtype=DTYPE)
        if weights.shape != scores.shape:
            raise ValueError(f"weights {weights.shape} and scores {scores.shape} differ in shape")
        if not 0.0 < k_fraction <= 1.0:
            raise ValueError(f"k_fraction must lie in (0, 1], got {k_fraction}")
        self.name = name
        self.weights = Tensor(weights, requires_grad=False, name=f"{name}.weight" if name else None)
        self.scores = Tensor(scores, requires_grad=True, name=f"{name}.scores" if name else None)
        self.k_fraction = float(k_fraction)

    @property
    def shape(self) -> tuple:
        return self.weights.shape

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def mask(self) -> np.ndarray:
        return select_topk(self.scores.data, self.k_fraction)

    @property
    def n_active(self) -> int:
        return num_active(self.k_fraction, self.size)

    def __repr__(self) -> str:
        return f"ScoredTensor({self.name!r}, shape={self.shape}, k={self.k_fraction})"


def init_scored(shape, config: SparsityConfig, rng: Optional[np.random.Generator] = None,
                name: Optional[str] = None) -> ScoredTensor:
    """Draw weights and strictly positive scores for a layer of ``shape``."""
    shape = tuple(int(s) for s in shape)
    if not shape or min(shape) < 1:
        raise ValueError(f"cannot score an empty shape {shape}")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    weights = _INITS[config.weight_init](shape, rng).astype(DTYPE)
    scores = np.abs(_INITS[config.score_init](shape, rng)).astype(DTYPE)
    # a zero draw is shifted to the smallest positive float32
    scores = np.where(scores > 0, scores, np.finfo(DTYPE).tiny).astype(DTYPE)
    return ScoredTensor(weights, scores, config.k_for(name) if name else config.k_fraction, name)


def score_backward(st: ScoredTensor, grad_effective_weight: np.ndarray) -> np.ndarray:
    """Straight-through score gradient: the mask is treated as identity."""
    return grad_effective_weight * st.weights.data


def effective_weight(st: ScoredTensor) -> Tensor:
    """``weights * top-k mask`` as a taped op whose gradient flows to the scores."""
    mask = st.mask
    out = Tensor(st.weights.data * mask)
    return get_tape().record((st.scores,), out, lambda g: (score_backward(st, g),))


_LAYER_OPS = {"conv2d": conv2d, "conv2d_transposed": conv2d_transposed}


def masked_forward(st: ScoredTensor, layer_op, x: Tensor, bias: Optional[Tensor] = None,
                   **kwargs) -> Tensor:
    """Run ``layer_op`` with the masked weights; the bias is never masked."""
    if isinstance(layer_op, str):
        layer_op = _LAYER_OPS[layer_op]
    return layer_op(x, effective_weight(st), bias, **kwargs)


@dataclass
class ParamCount:
    total: int
    active: int
    unmasked: int = 0

    def __iter__(self):
        # unpacks as (total, active)
        return iter((self.total, self.active))


def count_active_params(model) -> ParamCount:
    """Maskable weight elements and how many of them are currently selected.

    ``model`` is anything exposing ``scored_layers()`` yielding objects with
    ``scored`` (a ScoredTensor) and ``masked`` (bool), plus optionally
    ``unmasked_param_count()``.
    """
    total = active = unmasked = 0
    for layer in model.scored_layers():
        st = layer.scored
        if layer.masked:
            total += st.size
            active += st.n_active
        else:
            unmasked += st.size
    if hasattr(model, "unmasked_param_count"):
        unmasked += model.unmasked_param_count()
    return ParamCount(total, active, unmasked)


def weights_digest(scored: Iterable[ScoredTensor]) -> str:
    """SHA-256 over all weight arrays, in order; detects any weight change."""
    h = hashlib.sha256()
    for st in scored:
        h.update(st.weights.data.tobytes())
    return h.hexdigest()
