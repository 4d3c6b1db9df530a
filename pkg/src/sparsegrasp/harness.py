"""Training, evaluation, sweeps, parameter reports and prediction export."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import checkpoint as ckpt
from .autodiff import LOSSES, Adam, Tensor, get_tape, no_grad
from .data import (
    AugmentConfig,
    DatasetError,
    GraspDataset,
    Loader,
    SplitSpec,
    SynthConfig,
    split_indices,
    stack_batch,
    synth_generate,
    validation_split,
    model_input,
    DatasetSample,
)
from .geometry import GraspMatch, is_valid_grasp, pose_to_rectangle
from .nets import (
    ARCHITECTURES,
    HEAD_NAMES,
    ArchitectureSpec,
    GraspMaps,
    GraspNet,
    build_model,
    decode_best_grasp,
    decode_topn_grasps,
    default_width_scale,
    forward,
    get_architecture,
)
from .sparse import K_GRID, SparsityConfig, count_active_params, num_active

log = logging.getLogger(__name__)

DEFAULT_EPOCHS = {"grconvnet": 50, "ginnet": 30}
SPLIT_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
# the angle pair counts as one logical head, so each half gets weight 0.5
HEAD_LOSS_WEIGHTS = {"quality": 1.0, "cos2theta": 0.5, "sin2theta": 0.5, "width": 1.0}


class ConfigError(ValueError):
    """Invalid user configuration (CLI exit code 1)."""


class TrainingError(RuntimeError):
    """A run failed while executing (CLI exit code 2)."""


def default_epochs(arch_name: str) -> int:
    return DEFAULT_EPOCHS["ginnet" if "ginnet" in arch_name else "grconvnet"]


@dataclass
class TrainConfig:
    """Everything that determines a training run."""

    arch: str = "sparse-ginnet"
    k_fraction: float = 0.5
    split: float = 0.9
    batch_size: int = 8
    lr: float = 1e-3
    epochs: Optional[int] = None        # None: 50 for GR-ConvNet variants, 30 for GI-NNet variants
    seed: int = 0
    loss: str = "smoothl1"
    smooth_beta: float = 1.0
    dataset: str = "synthetic"
    data_dir: Optional[str] = None
    synth_count: int = 500              # in-memory synthetic set when no data_dir is given
    smoothing_sigma: float = 2.0
    val_fraction: float = 0.1
    augment: Optional[bool] = None      # None: on for Cornell, off for Jacquard and synthetic
    jaw_ratio: float = 0.5              # predicted rectangle height / width
    mask_heads: bool = True
    masked_regression: bool = True      # angle and width loss only where ground-truth quality > 0

    def __post_init__(self):
        if self.epochs is None:
            self.epochs = default_epochs(self.arch)
        self.validate()

    def validate(self) -> None:
        if self.arch not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.arch!r}; choose from {sorted(ARCHITECTURES)}")
        if not 0.0 < self.k_fraction <= 1.0:
            raise ConfigError(f"k must lie in (0, 1], got {self.k_fraction}")
        if not 0.0 < self.split < 1.0:
            raise ConfigError(f"split must lie in (0, 1), got {self.split}")
        if self.batch_size < 1 or self.epochs < 1 or self.lr <= 0:
            raise ConfigError("batch size, epochs and lr must be positive")
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}; choose from {sorted(LOSSES)}")
        if self.dataset not in ("cornell", "jacquard", "synthetic"):
            raise ConfigError(f"unknown dataset kind {self.dataset!r}")
        if self.dataset != "synthetic" and not self.data_dir:
            raise ConfigError(f"--data-dir is required for the {self.dataset} dataset")

    @property
    def use_augmentation(self) -> bool:
        return self.dataset == "cornell" if self.augment is None else self.augment

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


# ---------------------------------------------------------------------------
# data plumbing
# ---------------------------------------------------------------------------

def load_dataset(config: TrainConfig) -> GraspDataset:
    if config.data_dir:
        try:
            return GraspDataset.from_dir(config.data_dir, config.dataset)
        except DatasetError:
            raise
        except ValueError as e:
            raise ConfigError(str(e)) from e
    arch = get_architecture(config.arch)
    return GraspDataset(synth_generate(config.synth_count, SynthConfig(size=arch.input_size), seed=config.seed),
                        "synthetic")


@dataclass
class Partition:
    """Index bookkeeping: ``fit`` and ``val`` are disjoint parts of ``train``."""

    train: np.ndarray
    test: np.ndarray
    fit: np.ndarray
    val: np.ndarray

    def check(self) -> None:
        if set(self.train.tolist()) & set(self.test.tolist()):
            raise TrainingError("train/test partitions overlap")
        if set(self.fit.tolist()) & set(self.val.tolist()):
            raise TrainingError("fit/validation partitions overlap")


def make_partition(n: int, config: TrainConfig) -> Partition:
    train, test = split_indices(n, SplitSpec(config.split, config.seed))
    fit_pos, val_pos = validation_split(len(train), config.val_fraction, config.seed)
    p = Partition(train, test, train[fit_pos], train[val_pos])
    p.check()
    return p


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    per_image: list
    accuracy: float
    valid_count: int
    test_count: int
    total_params: int
    active_params: int
    wall_clock: float
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def grasp_is_valid(maps: GraspMaps, rects: Sequence, width_scale: float, smoothing_sigma: float = 2.0,
                   jaw_ratio: float = 0.5) -> tuple:
    """Decode the top-1 grasp and score it against ``rects``; returns (match, pose)."""
    pose = decode_best_grasp(maps, smoothing_sigma, width_scale)
    if pose.width <= 0 or not rects:
        return GraspMatch(False, -1, 0.0, math.pi / 2), pose
    pred = pose_to_rectangle(pose, jaw_ratio * pose.width)
    return is_valid_grasp(pred, rects), pose


def predict_maps(model: GraspNet, x: np.ndarray, batch_size: int = 8) -> GraspMaps:
    outs = [forward(model, x[i:i + batch_size]) for i in range(0, len(x), batch_size)]
    return GraspMaps(*(np.concatenate([getattr(o, n) for o in outs]) for n in HEAD_NAMES))


def evaluate_model(model: GraspNet, loader: Loader, smoothing_sigma: float = 2.0, jaw_ratio: float = 0.5,
                   config: Optional[dict] = None) -> EvalReport:
    """Rectangle-metric accuracy of top-1 decoded grasps over every sample of ``loader``."""
    t0 = time.perf_counter()
    per_image = []
    for batch in loader.batches(0):
        maps = predict_maps(model, np.stack([p.x for p in batch]))
        for j, p in enumerate(batch):
            match, pose = grasp_is_valid(maps.item(j), p.rects, loader.width_scale, smoothing_sigma, jaw_ratio)
            per_image.append({
                "index": int(p.index), "name": loader.dataset[p.index].name, "valid": bool(match),
                "iou": float(match.iou), "angle_offset": float(match.angle_offset),
                "x": pose.x, "y": pose.y, "theta": pose.theta, "width": pose.width, "quality": pose.quality,
            })
    valid = sum(r["valid"] for r in per_image)
    n = len(per_image)
    pc = count_active_params(model)
    return EvalReport(per_image, 100.0 * valid / n if n else 0.0, valid, n, pc.total, pc.active,
                      time.perf_counter() - t0, dict(config or {}))


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    model: GraspNet
    history: list
    best_epoch: int
    best_val_accuracy: float
    partition: Partition
    dataset: GraspDataset
    config: TrainConfig
    checkpoint: Optional[Path] = None
    wall_clock: float = 0.0

    @property
    def losses(self) -> list:
        return [h["loss"] for h in self.history]


def compute_loss(out: dict, target: np.ndarray, loss: str = "smoothl1", beta: float = 1.0,
                 masked_regression: bool = True):
    """Weighted sum of the per-head losses.

    Quality is regressed over every pixel. With ``masked_regression`` the
    angle and width heads are regressed only where the ground-truth quality
    is positive, since their targets are undefined elsewhere.
    """
    fn = LOSSES[loss]
    mask = (target[:, 0:1] > 0).astype(np.float64) if masked_regression else None
    total = None
    for i, n in enumerate(HEAD_NAMES):
        t = Tensor(np.ascontiguousarray(target[:, i:i + 1]))
        w = None if n == "quality" else mask
        li = fn(out[n], t, beta, weight=w) if loss == "smoothl1" else fn(out[n], t, weight=w)
        li = li * HEAD_LOSS_WEIGHTS[n]
        total = li if total is None else total + li
    return total


def checkpoint_header(model: GraspNet, config: TrainConfig, extra: Optional[dict] = None) -> dict:
    return {"architecture": model.arch.to_dict(), "config": config.to_dict(), "seed": config.seed,
            **(extra or {})}


def save_model(path, model: GraspNet, config: TrainConfig, extra: Optional[dict] = None) -> Path:
    return ckpt.save_checkpoint(path, model.state_arrays(), checkpoint_header(model, config, extra))


def load_model(path, arch: Optional[str] = None) -> tuple[GraspNet, TrainConfig, dict]:
    """Rebuild the model stored in a checkpoint.

    If ``arch`` is given it must name the architecture the checkpoint was
    trained with.
    """
    header, arrays = ckpt.load_checkpoint(path)
    stored = ArchitectureSpec.from_dict(header["architecture"])
    if arch is not None:
        wanted = get_architecture(arch) if isinstance(arch, str) else arch
        if wanted.to_dict() != stored.to_dict():
            raise ConfigError(f"architecture mismatch: requested {ckpt.describe({'architecture': wanted.to_dict()})}"
                              f", checkpoint holds {ckpt.describe(header)}")
    config = TrainConfig.from_dict(header["config"])
    model = build_model(stored, SparsityConfig(config.k_fraction, seed=config.seed, mask_heads=config.mask_heads))
    try:
        model.load_state_arrays(arrays)
    except ValueError as e:
        raise ConfigError(f"checkpoint {path} does not fit {ckpt.describe(header)}: {e}") from e
    return model.eval(), config, header


def train(config: TrainConfig, dataset: Optional[GraspDataset] = None, out_dir=None,
          progress: Optional[Callable[[dict], None]] = None) -> TrainResult:
    """Train the scores of a sparse grasp network.

    Runs the fixed epoch budget, checks after every epoch that weights and
    biases are unchanged, and keeps the state with the best validation
    accuracy (ties go to the earlier epoch). If ``out_dir`` is given the
    best state is written to ``out_dir/model.ckpt`` and the log to
    ``out_dir/train_log.json``.
    """
    t_start = time.perf_counter()
    dataset = dataset if dataset is not None else load_dataset(config)
    arch = get_architecture(config.arch)
    size, wscale = arch.input_size, default_width_scale(arch.input_size)
    part = make_partition(len(dataset), config)
    if len(part.fit) == 0:
        raise ConfigError(f"split {config.split} leaves no training images out of {len(dataset)}")

    sparsity = SparsityConfig(config.k_fraction, seed=config.seed, mask_heads=config.mask_heads)
    model = build_model(arch, sparsity)
    opt = Adam(model.trainable(), lr=config.lr)
    aug = AugmentConfig() if config.use_augmentation else None
    fit_loader = Loader(dataset.subset(part.fit), size, wscale, config.batch_size, shuffle=True,
                        augment_cfg=aug, seed=config.seed)
    val_loader = Loader(dataset.subset(part.val), size, wscale, config.batch_size) if len(part.val) else None

    digest = model.frozen_digest()
    history, best = [], (-1.0, -1, None)
    tape = get_tape()
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        model.train()
        total, count = 0.0, 0
        for bi, batch in enumerate(fit_loader.batches(epoch)):
            x, target = stack_batch(batch)
            out = model(Tensor(x))
            loss = compute_loss(out, target, config.loss, config.smooth_beta, config.masked_regression)
            value = loss.item()
            if not math.isfinite(value):
                tape.clear()
                names = [fit_loader.dataset[p.index].name for p in batch]
                if out_dir is not None:
                    Path(out_dir).mkdir(parents=True, exist_ok=True)
                    np.savez(Path(out_dir) / "nonfinite_batch.npz", x=x, target=target)
                raise TrainingError(f"non-finite loss {value} at epoch {epoch} batch {bi} (samples {names})")
            tape.backward(loss)
            opt.step()
            opt.zero_grad()
            total += value * len(batch)
            count += len(batch)
        if model.frozen_digest() != digest:
            raise TrainingError(f"frozen weights changed during epoch {epoch}")
        val_acc = evaluate_model(model, val_loader, config.smoothing_sigma, config.jaw_ratio).accuracy \
            if val_loader else float("nan")
        entry = {"epoch": epoch, "loss": total / max(count, 1), "val_accuracy": val_acc,
                 "seconds": time.perf_counter() - t0}
        history.append(entry)
        log.info("epoch %d loss %.5f val %.1f%% (%.1fs)", epoch, entry["loss"], val_acc, entry["seconds"])
        if progress:
            progress(entry)
        score = val_acc if val_loader else -entry["loss"]
        if best[2] is None or score > best[0]:
            best = (score, epoch, {k: v.copy() for k, v in model.state_arrays().items()})

    model.load_state_arrays(best[2])
    model.eval()
    result = TrainResult(model, history, best[1], best[0] if val_loader else float("nan"), part, dataset, config,
                         wall_clock=time.perf_counter() - t_start)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.checkpoint = save_model(out / "model.ckpt", model, config,
                                       {"best_epoch": best[1], "test_indices": part.test.tolist()})
        (out / "train_log.json").write_text(json.dumps({"config": config.to_dict(), "history": history,
                                                        "best_epoch": best[1]}, indent=2))
    return result


def evaluate(model_or_path, dataset: GraspDataset, indices: Optional[Sequence[int]] = None,
             arch: Optional[str] = None, smoothing_sigma: Optional[float] = None,
             batch_size: int = 8) -> EvalReport:
    """Evaluate a model (or checkpoint path) on ``dataset`` (optionally a subset)."""
    if isinstance(model_or_path, GraspNet):
        model, config = model_or_path, None
    else:
        model, config, _ = load_model(model_or_path, arch)
    sigma = smoothing_sigma if smoothing_sigma is not None else (config.smoothing_sigma if config else 2.0)
    jaw = config.jaw_ratio if config else 0.5
    ds = dataset.subset(list(indices)) if indices is not None else dataset
    size = model.arch.input_size
    loader = Loader(ds, size, default_width_scale(size), batch_size)
    return evaluate_model(model, loader, sigma, jaw, config.to_dict() if config else {})


def run_experiment(config: TrainConfig, dataset: Optional[GraspDataset] = None, out_dir=None) -> dict:
    """Train then evaluate on the held-out split; returns a JSON-ready record."""
    res = train(config, dataset, out_dir)
    report = evaluate(res.model, res.dataset, res.partition.test, smoothing_sigma=config.smoothing_sigma)
    return {"config": config.to_dict(), "accuracy": report.accuracy, "valid": report.valid_count,
            "tested": report.test_count, "best_epoch": res.best_epoch, "best_val_accuracy": res.best_val_accuracy,
            "final_loss": res.losses[-1], "initial_loss": res.losses[0],
            "total_params": report.total_params, "active_params": report.active_params,
            "train_seconds": res.wall_clock}


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def split_label(fraction: float) -> str:
    tr = int(round(fraction * 100))
    return f"{tr}-{100 - tr}"


@dataclass
class ExperimentGrid:
    k_values: tuple
    splits: tuple
    cells: dict          # (k, split) -> record (with "accuracy" or "error")

    def accuracy(self, k: float, s: float) -> Optional[float]:
        return self.cells.get((k, s), {}).get("accuracy")

    def matrix(self) -> np.ndarray:
        return np.array([[self.accuracy(k, s) if self.accuracy(k, s) is not None else np.nan
                          for s in self.splits] for k in self.k_values], dtype=float)

    def rows(self) -> list:
        out = []
        for k in self.k_values:
            row = [f"{int(round(k * 100))}"]
            for s in self.splits:
                a = self.accuracy(k, s)
                row.append("failed" if a is None else f"{a:.2f}")
            out.append(row)
        return out

    def header(self) -> list:
        return ["K% of weight"] + [f"({split_label(s)})" for s in self.splits]

    def to_text(self, title: str = "") -> str:
        rows = [self.header()] + self.rows()
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        line = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
        out = [title] if title else []
        out.append(line)
        span = sum(widths[1:]) + 3 * (len(widths) - 2) + 2
        out.append(f"| {'Sparsity':<{widths[0]}} |" + " Accuracy (%) by train-test split".ljust(span) + " |")
        out.append(line)
        for i, r in enumerate(rows):
            out.append("| " + " | ".join(c.rjust(w) for c, w in zip(r, widths)) + " |")
            if i == 0:
                out.append(line)
        out.append(line)
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k_percent"] + [split_label(s) for s in self.splits])
        for k in self.k_values:
            w.writerow([int(round(k * 100))] + ["" if self.accuracy(k, s) is None else f"{self.accuracy(k, s):.2f}"
                                                for s in self.splits])
        return buf.getvalue()


def cell_name(k: float, s: float) -> str:
    return f"k{int(round(k * 100)):02d}_split{split_label(s)}"


def sweep(base: TrainConfig, k_values: Sequence[float] = K_GRID, splits: Sequence[float] = SPLIT_GRID,
          out_dir=None, dataset: Optional[GraspDataset] = None, save_checkpoints: bool = False,
          progress: Optional[Callable[[str, dict], None]] = None) -> ExperimentGrid:
    """Run every (k, split) cell; a failing cell is recorded and the grid continues."""
    dataset = dataset if dataset is not None else load_dataset(base)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        (out / "cells").mkdir(parents=True, exist_ok=True)
    cells = {}
    for k in k_values:
        for s in splits:
            name = cell_name(k, s)
            try:
                cfg = replace(base, k_fraction=k, split=s)
                run_dir = out / "runs" / name if (out is not None and save_checkpoints) else None
                rec = run_experiment(cfg, dataset, run_dir)
            except (TrainingError, ConfigError, DatasetError, ValueError, FloatingPointError) as e:
                log.error("cell %s failed: %s", name, e)
                rec = {"config": replace(base, k_fraction=k, split=s).to_dict(), "error": f"{type(e).__name__}: {e}"}
            cells[(k, s)] = rec
            if out is not None:
                (out / "cells" / f"{name}.json").write_text(json.dumps(rec, indent=2, sort_keys=True))
            if progress:
                progress(name, rec)
    grid = ExperimentGrid(tuple(k_values), tuple(splits), cells)
    if out is not None:
        title = f"{base.arch}: accuracy with varying sparsity values and train-test split ratios ({base.dataset})"
        (out / "table.txt").write_text(grid.to_text(title))
        (out / "table.csv").write_text(grid.to_csv())
    return grid


# ---------------------------------------------------------------------------
# parameter report
# ---------------------------------------------------------------------------

@dataclass
class ParamRow:
    k_fraction: float
    total: int
    active: int


def param_report(arch, k_values: Sequence[float] = K_GRID, mask_heads: bool = True) -> list[ParamRow]:
    """Maskable and active weight counts per K; active is the sum of per-layer floors."""
    spec = get_architecture(arch) if isinstance(arch, str) else arch
    sizes = layer_sizes(spec, mask_heads)
    total = sum(sizes)
    return [ParamRow(k, total, sum(num_active(k, n) for n in sizes)) for k in k_values]


def layer_sizes(spec: ArchitectureSpec, mask_heads: bool = True) -> list[int]:
    model = build_model(spec, SparsityConfig(1.0, mask_heads=mask_heads))
    return [n for _, n, _, masked in model.param_table() if masked]


def format_param_table(arch_name: str, rows: Sequence[ParamRow]) -> str:
    lines = [f"{arch_name}", f"{'K':>5}  {'total':>10}  {'active':>10}"]
    for r in rows:
        lines.append(f"{int(round(r.k_fraction * 100)):>4}%  {r.total:>10,}  {r.active:>10,}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# prediction export
# ---------------------------------------------------------------------------

def load_image_input(path, size: int) -> tuple[np.ndarray, Optional[DatasetSample]]:
    """Network input for an RGB file with an optional ``d.tiff`` depth sibling.

    A Cornell-style ``pcdNNNNr.png`` picks up ``pcdNNNNd.tiff``; without
    depth the depth channel is flat.
    """
    from .data import _read_depth, _read_rgb, apply_view, center_view
    path = Path(path)
    rgb = _read_rgb(path)
    depth_path = path.with_name(path.name[:-5] + "d.tiff") if path.name.endswith("r.png") else None
    depth = _read_depth(depth_path) if depth_path and depth_path.exists() else np.zeros((1,) + rgb.shape[1:],
                                                                                         np.float32)
    sample = DatasetSample(rgb, depth, [], path.stem)
    if sample.size != (size, size):
        sample = apply_view(sample, center_view(sample, size), size)
    return model_input(sample), sample


def predict(checkpoint_path, image_files: Sequence, out_dir, top_n: int = 5,
            smoothing_sigma: Optional[float] = None) -> list[dict]:
    """Write top-N grasps (JSON) and the four raw maps (``.npz``) per readable image."""
    model, config, _ = load_model(checkpoint_path)
    sigma = config.smoothing_sigma if smoothing_sigma is None else smoothing_sigma
    size = model.arch.input_size
    wscale = default_width_scale(size)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for f in image_files:
        try:
            x, _ = load_image_input(f, size)
        except (DatasetError, OSError) as e:
            log.warning("skipping %s: %s", f, e)
            continue
        maps = forward(model, x[None]).item(0)
        grasps = decode_topn_grasps(maps, top_n, smoothing_sigma=sigma, width_scale=wscale)
        stem = Path(f).stem
        np.savez(out / f"{stem}_maps.npz", **{n: getattr(maps, n) for n in HEAD_NAMES})
        rec = {"image": str(f), "grasps": [
            {"x": g.x, "y": g.y, "theta": g.theta, "width": g.width, "quality": g.quality,
             "jaw": config.jaw_ratio * g.width} for g in grasps]}
        (out / f"{stem}_grasps.json").write_text(json.dumps(rec, indent=2))
        records.append(rec)
    return records
