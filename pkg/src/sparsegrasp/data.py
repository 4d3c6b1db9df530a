"""Grasp datasets: Cornell/Jacquard ingestion, target maps, augmentation, synthetic data.

Samples keep RGB in [0, 1] and depth in meters. The network input is built
by :func:`model_input`: per-sample mean-subtracted depth clipped to [-1, 1],
followed by mean-centered RGB, giving four channels ``[depth, r, g, b]``.
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from .autodiff import DTYPE
from .geometry import GraspRectangle, fold_angle
from .nets import GraspMaps

log = logging.getLogger(__name__)

SPLIT_FRACTIONS = (0.1, 0.3, 0.5, 0.7, 0.9)
CORNELL_IMAGES = 885
_FLOOR_SLACK = 1e-9


class DatasetError(RuntimeError):
    """A sample or dataset directory could not be read."""


@dataclass
class DatasetSample:
    rgb: np.ndarray                      # (3, H, W) float32 in [0, 1]
    depth: np.ndarray                    # (1, H, W) float32, meters
    rects: list = field(default_factory=list)
    name: str = ""
    skipped_rects: int = 0

    @property
    def size(self) -> tuple:
        return self.rgb.shape[1:]

    @property
    def usable(self) -> bool:
        return len(self.rects) > 0

    def check(self) -> None:
        """Raise if the sample violates the training-sample invariants."""
        h, w = self.size
        if self.depth.shape != (1, h, w):
            raise DatasetError(f"{self.name}: depth {self.depth.shape} does not match rgb {self.rgb.shape}")
        if not self.rects:
            raise DatasetError(f"{self.name}: no positive grasp rectangles")
        for r in self.rects:
            c = r.corners()
            if c.min() < 0 or c[:, 0].max() > w - 1 or c[:, 1].max() > h - 1:
                raise DatasetError(f"{self.name}: rectangle {r} leaves the image")


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def _read_rgb(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except (OSError, ValueError) as e:
        raise DatasetError(f"cannot read image {path}: {e}") from e
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def _read_depth(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im, dtype=np.float32)
    except (OSError, ValueError) as e:
        raise DatasetError(f"cannot read depth {path}: {e}") from e
    if arr.ndim == 3:
        arr = arr[..., 0]
    return np.nan_to_num(arr, nan=0.0)[None]


def write_depth(path, depth: np.ndarray) -> None:
    Image.fromarray(np.asarray(depth, dtype=np.float32).reshape(depth.shape[-2:]), mode="F").save(path)


def read_pcd_depth(path, shape: tuple = (480, 640)) -> np.ndarray:
    """Depth image from a Cornell ``pcdNNNN.txt`` point cloud (x y z rgb index lines).

    Pixels without a point are filled from their nearest valid neighbor.
    """
    depth = np.zeros(shape, dtype=np.float32)
    with open(path) as f:
        for line in f:
            parts = line.split()
            if len(parts) != 5 or not parts[0][0] in "-0123456789.":
                continue
            idx = int(parts[4])
            r, c = divmod(idx, shape[1])
            if r < shape[0]:
                depth[r, c] = float(parts[2])
    missing = depth == 0
    if missing.all():
        raise DatasetError(f"{path}: no depth points")
    if missing.any():
        _, (ri, ci) = ndimage.distance_transform_edt(missing, return_indices=True)
        depth = depth[ri, ci]
    # the point cloud is in millimeters
    return (depth / 1000.0)[None]


def parse_cornell_rects(path) -> tuple[list, int]:
    """Rectangles from a ``cpos`` file: four "x y" corner lines per rectangle.

    Returns the rectangles and how many malformed ones (non-finite or
    degenerate corners) were skipped.
    """
    try:
        lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    except OSError as e:
        raise DatasetError(f"cannot read annotations {path}: {e}") from e
    rects, skipped = [], 0
    for i in range(0, len(lines) - len(lines) % 4, 4):
        try:
            pts = np.array([[float(v) for v in ln[:2]] for ln in lines[i:i + 4]])
        except ValueError:
            skipped += 1
            continue
        if pts.shape != (4, 2) or not np.all(np.isfinite(pts)):
            skipped += 1
            continue
        r = GraspRectangle.from_corners(pts)
        if r.is_degenerate():
            skipped += 1
            continue
        rects.append(r)
    skipped += (len(lines) % 4 != 0)
    return rects, skipped


def parse_cornell_sample(image_file, depth_file, rect_file) -> DatasetSample:
    """Load one Cornell-layout sample. ``depth_file`` may be a TIFF or a ``.txt`` point cloud."""
    rgb = _read_rgb(Path(image_file))
    depth_file = Path(depth_file)
    depth = read_pcd_depth(depth_file, rgb.shape[1:]) if depth_file.suffix == ".txt" else _read_depth(depth_file)
    rects, skipped = parse_cornell_rects(rect_file)
    name = Path(rect_file).name.replace("cpos.txt", "")
    if skipped:
        log.info("%s: skipped %d malformed rectangles", name, skipped)
    return DatasetSample(rgb, depth, rects, name, skipped)


def parse_jacquard_rects(path) -> tuple[list, int]:
    """Rectangles from ``x;y;theta_degrees;opening;jaw`` lines."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise DatasetError(f"cannot read annotations {path}: {e}") from e
    rects, skipped = [], 0
    for ln in text.splitlines():
        if not ln.strip():
            continue
        try:
            x, y, t, w, h = (float(v) for v in ln.split(";")[:5])
        except ValueError:
            skipped += 1
            continue
        r = GraspRectangle((x, y), fold_angle(math.radians(t)), w, h)
        if r.is_degenerate():
            skipped += 1
            continue
        rects.append(r)
    return rects, skipped


def parse_jacquard_sample(grasp_file, image_file=None, depth_file=None) -> DatasetSample:
    """Load one Jacquard scene; image and depth default to the sibling ``_RGB.png`` / ``_perfect_depth.tiff``."""
    grasp_file = Path(grasp_file)
    stem = str(grasp_file)[: -len("_grasps.txt")]
    image_file = Path(image_file or stem + "_RGB.png")
    depth_file = Path(depth_file or stem + "_perfect_depth.tiff")
    rects, skipped = parse_jacquard_rects(grasp_file)
    return DatasetSample(_read_rgb(image_file), _read_depth(depth_file), rects, Path(stem).name, skipped)


@dataclass(frozen=True)
class SampleRef:
    """Where one sample lives on disk and which parser reads it."""

    kind: str
    files: tuple

    def load(self) -> DatasetSample:
        if self.kind == "jacquard":
            return parse_jacquard_sample(*self.files)
        return parse_cornell_sample(*self.files)


_CPOS = re.compile(r"pcd(\d+)cpos\.txt$")


def discover_cornell(root) -> list[SampleRef]:
    """All ``pcdNNNNcpos.txt`` samples under ``root`` with a readable RGB and depth sibling."""
    refs = []
    for cpos in sorted(Path(root).rglob("pcd*cpos.txt")):
        m = _CPOS.search(cpos.name)
        if not m:
            continue
        base = cpos.parent / f"pcd{m.group(1)}"
        rgb = Path(f"{base}r.png")
        depth = next((p for p in (Path(f"{base}d.tiff"), Path(f"{base}.txt")) if p.exists()), None)
        if rgb.exists() and depth is not None:
            refs.append(SampleRef("cornell", (rgb, depth, cpos)))
        else:
            log.warning("%s: missing image or depth, skipped", cpos)
    return refs


def discover_jacquard(root) -> list[SampleRef]:
    return [SampleRef("jacquard", (p,)) for p in sorted(Path(root).rglob("*_grasps.txt"))]


DISCOVER = {"cornell": discover_cornell, "synthetic": discover_cornell, "jacquard": discover_jacquard}


# ---------------------------------------------------------------------------
# target maps
# ---------------------------------------------------------------------------

def rasterize_maps(rects: Sequence[GraspRectangle], size: tuple, width_scale: float) -> GraspMaps:
    """Paint the center third (along the closing axis) of each rectangle.

    Later rectangles overwrite earlier ones. Pixel ``(row, col)`` is the
    point ``(x=col, y=row)``.
    """
    h, w = size
    q = np.zeros((h, w), dtype=DTYPE)
    cos2, sin2, width = np.zeros_like(q), np.zeros_like(q), np.zeros_like(q)
    ys, xs = np.mgrid[0:h, 0:w]
    for r in rects:
        u, v = r.axes
        dx, dy = xs - r.center[0], ys - r.center[1]
        along, across = dx * u[0] + dy * u[1], dx * v[0] + dy * v[1]
        inside = (np.abs(along) <= r.width / 6.0) & (np.abs(across) <= r.height / 2.0)
        q[inside] = 1.0
        cos2[inside] = math.cos(2 * r.angle)
        sin2[inside] = math.sin(2 * r.angle)
        width[inside] = min(r.width / width_scale, 1.0)
    return GraspMaps(q, cos2, sin2, width)


# ---------------------------------------------------------------------------
# view transforms and augmentation
# ---------------------------------------------------------------------------

@dataclass
class AugmentConfig:
    """Ranges for the random view; ``crop``/``zoom``/``rotate`` switch each op on."""

    crop: bool = True
    zoom: bool = True
    rotate: bool = True
    zoom_range: tuple = (0.5, 1.0)
    crop_jitter: float = 0.1            # fraction of the output size
    max_retries: int = 10


def view_matrix(center, out_size: int, side: float, angle: float = 0.0) -> np.ndarray:
    """2x3 affine taking source ``(x, y)`` to output ``(x, y)``.

    A square of ``side`` source pixels around ``center``, rotated by ``angle``,
    fills the ``out_size`` output.
    """
    s = out_size / side
    c, sn = math.cos(angle), math.sin(angle)
    a = s * np.array([[c, -sn], [sn, c]])
    mid = (out_size - 1) / 2.0
    b = np.array([mid, mid]) - a @ np.asarray(center, dtype=np.float64)
    return np.hstack([a, b[:, None]])


def warp(image: np.ndarray, matrix: np.ndarray, out_size: int, order: int = 1) -> np.ndarray:
    """Resample a (C, H, W) image through the source->output affine ``matrix``."""
    a, b = matrix[:, :2], matrix[:, 2]
    inv = np.linalg.inv(a)
    # ndimage works in (row, col) = (y, x) order
    flip = np.array([[0, 1], [1, 0]])
    m = flip @ inv @ flip
    off = flip @ (-inv @ b)
    out = np.empty((image.shape[0], out_size, out_size), dtype=DTYPE)
    for ch in range(image.shape[0]):
        out[ch] = ndimage.affine_transform(image[ch], m, offset=off, output_shape=(out_size, out_size),
                                           order=order, mode="nearest")
    return out


def _inside(rect: GraspRectangle, size: int) -> bool:
    c = rect.corners()
    return bool(c.min() >= 0 and c.max() <= size - 1)


def apply_view(sample: DatasetSample, matrix: np.ndarray, out_size: int) -> DatasetSample:
    """Warp image and depth; keep only the rectangles that stay fully inside."""
    rects = [r.transformed(matrix) for r in sample.rects]
    rects = [r for r in rects if _inside(r, out_size)]
    return DatasetSample(warp(sample.rgb, matrix, out_size), warp(sample.depth, matrix, out_size),
                         rects, sample.name)


def _grasp_centroid(sample: DatasetSample) -> np.ndarray:
    if sample.rects:
        return np.mean([r.center for r in sample.rects], axis=0)
    h, w = sample.size
    return np.array([(w - 1) / 2.0, (h - 1) / 2.0])


def center_view(sample: DatasetSample, out_size: int) -> np.ndarray:
    """Deterministic evaluation view: a crop around the grasp centroid, no scaling
    unless the image is smaller than the output."""
    h, w = sample.size
    side = float(min(out_size, h, w))
    half = (side - 1) / 2.0
    c = _grasp_centroid(sample)
    c = np.array([np.clip(c[0], half, w - 1 - half), np.clip(c[1], half, h - 1 - half)])
    # keep the sample grid when no scaling is needed so the view is an exact crop
    if side == out_size:
        c = np.floor(c - half) + half
    return view_matrix(c, out_size, side)


def random_view(sample: DatasetSample, out_size: int, cfg: AugmentConfig,
                rng: np.random.Generator) -> np.ndarray:
    h, w = sample.size
    side = float(min(out_size, h, w))
    if cfg.zoom:
        side *= rng.uniform(*cfg.zoom_range)
    c = _grasp_centroid(sample)
    if cfg.crop:
        c = c + rng.uniform(-1, 1, size=2) * cfg.crop_jitter * side
    angle = rng.uniform(-math.pi, math.pi) if cfg.rotate else 0.0
    return view_matrix(c, out_size, side, angle)


def augment(sample: DatasetSample, out_size: int, cfg: AugmentConfig, seed) -> Optional[DatasetSample]:
    """Random crop/zoom/rotate view with at least one surviving rectangle.

    Draws are retried up to ``cfg.max_retries`` times; returns ``None`` if
    every draw dropped all rectangles.
    """
    rng = np.random.default_rng(seed)
    for _ in range(cfg.max_retries):
        out = apply_view(sample, random_view(sample, out_size, cfg, rng), out_size)
        if out.usable:
            return out
    return None


# ---------------------------------------------------------------------------
# network inputs
# ---------------------------------------------------------------------------

def normalize_depth(depth: np.ndarray) -> np.ndarray:
    d = depth - depth.mean()
    return np.clip(d, -1.0, 1.0).astype(DTYPE)


def model_input(sample: DatasetSample) -> np.ndarray:
    """(4, H, W) array: normalized depth then mean-centered RGB."""
    rgb = sample.rgb - sample.rgb.mean()
    return np.concatenate([normalize_depth(sample.depth), rgb]).astype(DTYPE)


def target_stack(sample: DatasetSample, width_scale: float) -> np.ndarray:
    """(4, H, W) ground-truth planes in head order."""
    return rasterize_maps(sample.rects, sample.size, width_scale).stack()


# ---------------------------------------------------------------------------
# synthetic desk-scale data
# ---------------------------------------------------------------------------

@dataclass
class SynthConfig:
    size: int = 96
    length_range: tuple = (30.0, 60.0)
    thickness_range: tuple = (8.0, 16.0)
    ellipse_fraction: float = 0.3
    table_depth: float = 0.7            # meters
    height_range: tuple = (0.02, 0.06)  # object height above the table, meters
    finger_clearance: float = 8.0       # px added to the object thickness
    jaw_ratio: float = 0.5              # rectangle height / width
    spacing: float = 0.75               # rectangle spacing along the object, in heights


def _texture(rng, size: int, sigma: float) -> np.ndarray:
    t = ndimage.gaussian_filter(rng.standard_normal((size, size)), sigma, mode="wrap")
    return t / (np.abs(t).max() + 1e-12)


def synth_sample(rng: np.random.Generator, cfg: SynthConfig, name: str = "") -> DatasetSample:
    """One object (bar or ellipse) on a textured table.

    The object's pose angle is its minor-axis direction, which is also the
    closing direction of every ground-truth rectangle. Rectangles are placed
    along the major axis wherever the object is at least 70% of its full
    thickness.
    """
    n = cfg.size
    length = rng.uniform(*cfg.length_range)
    thick = rng.uniform(*cfg.thickness_range)
    theta = rng.uniform(-math.pi / 2, math.pi / 2)
    ellipse = rng.random() < cfg.ellipse_fraction
    # the object footprint plus grasp clearance must stay inside the image
    reach = 0.5 * math.hypot(length, thick + 2 * cfg.finger_clearance) + 2
    if 2 * reach > n - 1:
        raise ValueError(f"a {length:.0f} px object with its grasp clearance does not fit a {n} px image")
    cx, cy = rng.uniform(reach, n - 1 - reach, size=2)

    u = np.array([math.cos(theta), math.sin(theta)])   # minor axis, closing direction
    v = np.array([-u[1], u[0]])                        # major axis
    ys, xs = np.mgrid[0:n, 0:n].astype(np.float64)
    a = (xs - cx) * u[0] + (ys - cy) * u[1]
    b = (xs - cx) * v[0] + (ys - cy) * v[1]
    if ellipse:
        inside = (a / (thick / 2)) ** 2 + (b / (length / 2)) ** 2 <= 1.0
    else:
        inside = (np.abs(a) <= thick / 2) & (np.abs(b) <= length / 2)

    base = rng.uniform(0.3, 0.7, size=3)
    color = rng.uniform(0.0, 1.0, size=3)
    while np.abs(color - base).max() < 0.25:
        color = rng.uniform(0.0, 1.0, size=3)
    tex = _texture(rng, n, 3.0)
    rgb = np.clip(base[:, None, None] + 0.12 * tex[None] + 0.02 * rng.standard_normal((3, n, n)), 0, 1)
    shade = 0.05 * _texture(rng, n, 2.0)
    rgb = np.where(inside[None], np.clip(color[:, None, None] + shade[None], 0, 1), rgb)

    tilt = rng.uniform(-2e-4, 2e-4, size=2)
    plane = cfg.table_depth + tilt[0] * (xs - n / 2) + tilt[1] * (ys - n / 2)
    height = rng.uniform(*cfg.height_range)
    depth = plane - height * inside + 5e-4 * rng.standard_normal((n, n))

    rects = []
    width = thick + cfg.finger_clearance
    h = width * cfg.jaw_ratio
    step = cfg.spacing * h
    half_span = length / 2 * (math.sqrt(1 - 0.7 ** 2) if ellipse else 1.0) - h / 2
    count = max(int(half_span // step), 0)
    for i in range(-count, count + 1):
        c = np.array([cx, cy]) + i * step * v
        rects.append(GraspRectangle((c[0], c[1]), fold_angle(theta), width, h))
    return DatasetSample(rgb.astype(DTYPE), depth[None].astype(DTYPE), rects, name)


def synth_generate(count: int, cfg: Optional[SynthConfig] = None, seed: int = 0) -> list[DatasetSample]:
    cfg = cfg or SynthConfig()
    return [synth_sample(np.random.default_rng([seed, i]), cfg, f"pcd{i:04d}") for i in range(count)]


def write_cornell_layout(samples: Sequence[DatasetSample], root) -> list[SampleRef]:
    """Write samples as ``pcdNNNNr.png`` / ``pcdNNNNd.tiff`` / ``pcdNNNNcpos.txt``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    refs = []
    for i, s in enumerate(samples):
        base = root / f"pcd{i:04d}"
        rgb8 = np.round(np.clip(s.rgb, 0, 1) * 255).astype(np.uint8).transpose(1, 2, 0)
        Image.fromarray(rgb8, mode="RGB").save(f"{base}r.png")
        write_depth(f"{base}d.tiff", s.depth)
        with open(f"{base}cpos.txt", "w") as f:
            for r in s.rects:
                for x, y in r.corners():
                    f.write(f"{x:.3f} {y:.3f}\n")
        refs.append(SampleRef("cornell", (Path(f"{base}r.png"), Path(f"{base}d.tiff"), Path(f"{base}cpos.txt"))))
    return refs


# ---------------------------------------------------------------------------
# datasets and splits
# ---------------------------------------------------------------------------

class GraspDataset:
    """Indexable collection of samples, loaded lazily from refs or held in memory.

    Read-only after construction.
    """

    def __init__(self, items: Sequence, kind: str = "cornell", cache: bool = True):
        self._items = list(items)
        self.kind = kind
        self._cache: dict = {} if cache else None

    @classmethod
    def from_dir(cls, root, kind: str = "cornell", cache: bool = True) -> "GraspDataset":
        if kind not in DISCOVER:
            raise ValueError(f"unknown dataset kind {kind!r}; choose from {sorted(DISCOVER)}")
        root = Path(root)
        if not root.is_dir():
            raise DatasetError(f"dataset directory {root} does not exist")
        refs = DISCOVER[kind](root)
        if not refs:
            raise DatasetError(f"no {kind} samples found under {root}")
        return cls(refs, kind, cache)

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i: int) -> DatasetSample:
        item = self._items[i]
        if isinstance(item, DatasetSample):
            return item
        if self._cache is not None and i in self._cache:
            return self._cache[i]
        s = item.load()
        if self._cache is not None:
            self._cache[i] = s
        return s

    def subset(self, indices: Sequence[int]) -> "GraspDataset":
        sub = GraspDataset([self._items[i] for i in indices], self.kind, self._cache is not None)
        if self._cache is not None:
            sub._cache = {j: self._cache[i] for j, i in enumerate(indices) if i in self._cache}
        return sub


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.9
    seed: int = 0
    mode: str = "image-wise"

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.mode != "image-wise":
            raise ValueError("only image-wise splits are supported")


def split_counts(n: int, fraction: float) -> tuple[int, int]:
    k = math.floor(fraction * n + _FLOOR_SLACK)
    return k, n - k


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Seeded image-wise partition; the train part comes first in the permutation."""
    perm = np.random.default_rng(spec.seed).permutation(n)
    k, _ = split_counts(n, spec.train_fraction)
    return np.sort(perm[:k]), np.sort(perm[k:])


def split(dataset: GraspDataset, spec: SplitSpec) -> tuple[GraspDataset, GraspDataset]:
    tr, te = split_indices(len(dataset), spec)
    return dataset.subset(tr), dataset.subset(te)


def validation_split(n_train: int, fraction: float = 0.1, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Positions (within the train part) for fitting and for validation."""
    perm = np.random.default_rng([seed, 1]).permutation(n_train)
    n_val = math.floor(fraction * n_train + _FLOOR_SLACK)
    if n_train >= 2:
        n_val = max(n_val, 1)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


# ---------------------------------------------------------------------------
# batching
# ---------------------------------------------------------------------------

@dataclass
class Prepared:
    """A sample in network coordinates."""

    index: int
    x: np.ndarray             # (4, S, S)
    target: np.ndarray        # (4, S, S)
    rects: list


class Loader:
    """Yields mini-batches of prepared samples.

    Shuffling and augmentation draw from generators seeded by
    ``(seed, epoch)`` and ``(seed, epoch, index)``, so the stream depends
    only on those and not on how it is consumed.
    """

    def __init__(self, dataset: GraspDataset, out_size: int, width_scale: float, batch_size: int = 8,
                 shuffle: bool = False, augment_cfg: Optional[AugmentConfig] = None, seed: int = 0):
        self.dataset, self.out_size, self.width_scale = dataset, out_size, width_scale
        self.batch_size, self.shuffle, self.augment_cfg, self.seed = batch_size, shuffle, augment_cfg, seed
        self._fixed: dict = {}

    def prepare(self, i: int, epoch: int = 0) -> Optional[Prepared]:
        if self.augment_cfg is None and i in self._fixed:
            return self._fixed[i]
        s = self.dataset[i]
        if self.augment_cfg is not None:
            v = augment(s, self.out_size, self.augment_cfg, [self.seed, epoch, i])
            if v is None:
                log.warning("%s: augmentation dropped every rectangle, sample skipped", s.name)
                return None
        else:
            v = apply_view(s, center_view(s, self.out_size), self.out_size)
            if not v.usable:
                log.warning("%s: no rectangle inside the evaluation view", s.name)
        if v.usable:
            v.check()
        p = Prepared(i, model_input(v), target_stack(v, self.width_scale), v.rects)
        if self.augment_cfg is None:
            self._fixed[i] = p
        return p

    def order(self, epoch: int) -> np.ndarray:
        n = len(self.dataset)
        return np.random.default_rng([self.seed, epoch]).permutation(n) if self.shuffle else np.arange(n)

    def batches(self, epoch: int = 0) -> Iterator[list]:
        batch: list = []
        for i in self.order(epoch):
            p = self.prepare(int(i), epoch)
            if p is None:
                continue
            batch.append(p)
            if len(batch) == self.batch_size:
                yield batch
                batch = []
        if batch:
            yield batch

    def __len__(self) -> int:
        return math.ceil(len(self.dataset) / self.batch_size)


def stack_batch(batch: Sequence[Prepared]) -> tuple[np.ndarray, np.ndarray]:
    return np.stack([p.x for p in batch]), np.stack([p.target for p in batch])
