"""Grasp poses, oriented rectangles, the rectangle metric and frame transforms.

Pixel coordinates are ``(x, y)`` with ``x`` the column and ``y`` the row.
An angle ``theta`` means the gripper closes along ``(cos theta, sin theta)``
in those coordinates. Grasps are antipodal, so angles are only meaningful
modulo pi and are stored folded into ``(-pi/2, pi/2]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

IOU_THRESHOLD = 0.25
ANGLE_THRESHOLD = math.radians(30.0)


def fold_angle(theta: float) -> float:
    """Map an angle onto its antipodal representative in (-pi/2, pi/2]."""
    t = math.fmod(theta, math.pi)
    if t > math.pi / 2:
        t -= math.pi
    elif t <= -math.pi / 2:
        t += math.pi
    return t


def angle_offset(a: float, b: float) -> float:
    """Smallest difference between two grasp angles, modulo pi, in [0, pi/2]."""
    d = math.fmod(abs(a - b), math.pi)
    return min(d, math.pi - d)


@dataclass
class GraspPoseImage:
    x: float
    y: float
    theta: float
    width: float
    quality: float
    degenerate: bool = False


@dataclass
class GraspPoseRobot:
    position: np.ndarray
    theta: float
    width: float
    quality: float


@dataclass
class GraspRectangle:
    """Oriented rectangle; ``width`` runs along the closing direction."""

    center: tuple
    angle: float
    width: float
    height: float

    def __post_init__(self):
        self.center = (float(self.center[0]), float(self.center[1]))

    @property
    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.array([c, s]), np.array([-s, c])

    def corners(self) -> np.ndarray:
        """Four (x, y) corners starting at (-w/2, -h/2) in the rectangle frame."""
        u, v = self.axes
        hw, hh = self.width / 2.0, self.height / 2.0
        c = np.asarray(self.center)
        return np.stack([c - hw * u - hh * v, c + hw * u - hh * v, c + hw * u + hh * v, c - hw * u + hh * v])

    @property
    def area(self) -> float:
        return self.width * self.height

    def is_degenerate(self) -> bool:
        return not (self.width > 0 and self.height > 0 and np.all(np.isfinite(self.corners())))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Boolean mask of which (x, y) points fall inside (boundary included)."""
        u, v = self.axes
        d = np.asarray(pts, dtype=np.float64) - np.asarray(self.center)
        return (np.abs(d @ u) <= self.width / 2.0) & (np.abs(d @ v) <= self.height / 2.0)

    @classmethod
    def from_corners(cls, pts) -> "GraspRectangle":
        """Recover a rectangle from four ordered corners.

        The first edge (p0 -> p1) is the closing direction.
        """
        p = np.asarray(pts, dtype=np.float64).reshape(4, 2)
        center = p.mean(axis=0)
        e01, e12 = p[1] - p[0], p[2] - p[1]
        angle = fold_angle(math.atan2(e01[1], e01[0]))
        return cls((center[0], center[1]), angle, float(np.hypot(*e01)), float(np.hypot(*e12)))

    def transformed(self, matrix: np.ndarray) -> "GraspRectangle":
        """Apply a 2x3 affine map (x, y) -> A @ (x, y) + b to the corners."""
        m = np.asarray(matrix, dtype=np.float64)
        pts = self.corners() @ m[:, :2].T + m[:, 2]
        return GraspRectangle.from_corners(pts)


def pose_to_rectangle(pose: GraspPoseImage, jaw_size: float) -> GraspRectangle:
    if jaw_size <= 0:
        raise ValueError("jaw_size must be positive")
    return GraspRectangle((pose.x, pose.y), pose.theta, pose.width, jaw_size)


# ---------------------------------------------------------------------------
# polygon clipping
# ---------------------------------------------------------------------------

def polygon_area(poly: Sequence) -> float:
    """Signed shoelace area (positive for counter-clockwise in x-right/y-up terms)."""
    if len(poly) < 3:
        return 0.0
    p = np.asarray(poly, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def clip_polygon(subject: Sequence, clip: Sequence) -> list:
    """Sutherland-Hodgman clipping of ``subject`` by the convex, CCW polygon ``clip``."""
    output = [tuple(p) for p in subject]
    clip = [tuple(p) for p in clip]
    for i in range(len(clip)):
        if not output:
            break
        a, b = clip[i - 1], clip[i]
        ex, ey = b[0] - a[0], b[1] - a[1]

        def side(p):
            return ex * (p[1] - a[1]) - ey * (p[0] - a[0])

        inp, output = output, []
        s = inp[-1]
        ss = side(s)
        for e in inp:
            se = side(e)
            if se >= 0:
                if ss < 0:
                    t = ss / (ss - se)
                    output.append((s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])))
                output.append(e)
            elif ss >= 0:
                t = ss / (ss - se)
                output.append((s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])))
            s, ss = e, se
    return output


def _ccw(pts: np.ndarray) -> np.ndarray:
    return pts if polygon_area(pts) >= 0 else pts[::-1]


def rect_iou(a: GraspRectangle, b: GraspRectangle) -> float:
    """Intersection over union of two oriented rectangles."""
    if a.is_degenerate() or b.is_degenerate():
        raise ValueError("rect_iou: degenerate rectangle")
    # clip the lexicographically smaller one so iou(a, b) == iou(b, a) exactly
    pa, pb = _ccw(a.corners()), _ccw(b.corners())
    if (a.center, a.angle, a.width, a.height) > (b.center, b.angle, b.width, b.height):
        pa, pb = pb, pa
    inter = abs(polygon_area(clip_polygon(pa, pb)))
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


@dataclass
class GraspMatch:
    valid: bool
    index: int = -1
    iou: float = 0.0
    angle_offset: float = math.pi / 2

    def __bool__(self) -> bool:
        return self.valid


def is_valid_grasp(pred: GraspRectangle, ground_truths: Sequence[GraspRectangle],
                   iou_threshold: float = IOU_THRESHOLD,
                   angle_threshold: float = ANGLE_THRESHOLD) -> GraspMatch:
    """Rectangle metric: some truth has IoU above and angle offset below threshold.

    The returned match is the first satisfying truth, or otherwise the truth
    with the highest IoU (for diagnostics).
    """
    if not ground_truths:
        raise ValueError("is_valid_grasp needs at least one ground-truth rectangle")
    best = GraspMatch(False)
    for i, gt in enumerate(ground_truths):
        off = angle_offset(pred.angle, gt.angle)
        iou = rect_iou(pred, gt)
        if iou > iou_threshold and off < angle_threshold:
            return GraspMatch(True, i, iou, off)
        if best.index < 0 or iou > best.iou:
            best = GraspMatch(False, i, iou, off)
    return best


# ---------------------------------------------------------------------------
# image -> camera -> robot
# ---------------------------------------------------------------------------

@dataclass
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


@dataclass
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        r = self.rotation
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6) or abs(np.linalg.det(r) - 1.0) > 1e-6:
            raise ValueError("rotation must be orthonormal with determinant +1")

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    @property
    def yaw(self) -> float:
        return math.atan2(self.rotation[1, 0], self.rotation[0, 0])


@dataclass
class CameraGrasp:
    """Grasp deprojected into the camera frame (metres)."""

    point: np.ndarray
    theta: float
    width: float
    quality: float


def image_to_camera(pose: GraspPoseImage, depth: float, intr: CameraIntrinsics) -> CameraGrasp:
    """Pinhole deprojection of the grasp center; width scales by depth / focal length."""
    if not depth > 0:
        raise ValueError(f"non-positive depth {depth} at grasp center (missing depth reading?)")
    x = (pose.x - intr.cx) * depth / intr.fx
    y = (pose.y - intr.cy) * depth / intr.fy
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    width = pose.width * depth * math.hypot(c / intr.fx, s / intr.fy)
    return CameraGrasp(np.array([x, y, depth]), pose.theta, width, pose.quality)


def camera_to_robot(grasp: CameraGrasp, transform: RigidTransform, approach_offset: float = 0.0,
                    gripper_max: Optional[float] = None) -> GraspPoseRobot:
    """Move a camera-frame grasp into the robot base frame.

    ``approach_offset`` is subtracted from the robot-frame z; ``gripper_max``
    caps the opening width.
    """
    p = transform.rotation @ grasp.point + transform.translation
    p[2] -= approach_offset
    width = grasp.width if gripper_max is None else min(grasp.width, gripper_max)
    return GraspPoseRobot(p, fold_angle(grasp.theta + transform.yaw), width, grasp.quality)


def robot_to_camera(grasp: GraspPoseRobot, transform: RigidTransform,
                    approach_offset: float = 0.0) -> CameraGrasp:
    p = np.array(grasp.position, dtype=np.float64)
    p[2] += approach_offset
    inv = transform.inverse()
    return CameraGrasp(inv.rotation @ p + inv.translation, fold_angle(grasp.theta - transform.yaw),
                       grasp.width, grasp.quality)


def image_to_robot(pose: GraspPoseImage, depth: float, intr: CameraIntrinsics,
                   transform: RigidTransform, **kwargs) -> GraspPoseRobot:
    return camera_to_robot(image_to_camera(pose, depth, intr), transform, **kwargs)


@dataclass
class Calibration:
    intrinsics: CameraIntrinsics
    transform: RigidTransform
    extras: dict = field(default_factory=dict)


def load_calibration(path) -> Calibration:
    """Read a ``key=value`` calibration file.

    Required keys: ``fx fy cx cy``, ``rotation`` (9 numbers, row-major) and
    ``translation`` (3 numbers, metres). Numbers may be separated by commas
    or spaces; ``#`` starts a comment. Other numeric keys (for example
    ``approach_offset`` or ``gripper_max``) land in ``extras``.
    """
    values: dict[str, list[float]] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = [float(v) for v in val.replace(",", " ").split()]
    missing = [k for k in ("fx", "fy", "cx", "cy", "rotation", "translation") if k not in values]
    if missing:
        raise ValueError(f"{path}: missing keys {missing}")
    intr = CameraIntrinsics(*(values.pop(k)[0] for k in ("fx", "fy", "cx", "cy")))
    rot, trans = values.pop("rotation"), values.pop("translation")
    if len(rot) != 9 or len(trans) != 3:
        raise ValueError(f"{path}: rotation needs 9 numbers and translation 3")
    extras = {k: (v[0] if len(v) == 1 else v) for k, v in values.items()}
    return Calibration(intr, RigidTransform(np.array(rot).reshape(3, 3), trans), extras)
