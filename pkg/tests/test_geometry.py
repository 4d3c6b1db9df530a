import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsegrasp.geometry import (
    ANGLE_THRESHOLD,
    IOU_THRESHOLD,
    CameraGrasp,
    CameraIntrinsics,
    GraspPoseImage,
    GraspPoseRobot,
    GraspRectangle,
    RigidTransform,
    angle_offset,
    camera_to_robot,
    clip_polygon,
    fold_angle,
    image_to_camera,
    image_to_robot,
    is_valid_grasp,
    load_calibration,
    polygon_area,
    pose_to_rectangle,
    rect_iou,
    robot_to_camera,
)


def raster_iou(a: GraspRectangle, b: GraspRectangle, step: float = 0.1) -> float:
    """IoU by point sampling on a ``step`` grid over the joint bounding box."""
    pts = np.vstack([a.corners(), b.corners()])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    xs = np.arange(lo[0] + step / 2, hi[0], step)
    ys = np.arange(lo[1] + step / 2, hi[1], step)
    gx, gy = np.meshgrid(xs, ys)
    p = np.stack([gx.ravel(), gy.ravel()], axis=1)
    ia, ib = a.contains(p), b.contains(p)
    union = np.count_nonzero(ia | ib)
    return np.count_nonzero(ia & ib) / union if union else 0.0


def random_rect(rng, span=40.0):
    return GraspRectangle(tuple(rng.uniform(0, span, 2)), rng.uniform(-math.pi, math.pi),
                          rng.uniform(4, 30), rng.uniform(3, 20))


def random_rotation(rng):
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([[1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                     [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                     [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)]])


# -- angles ------------------------------------------------------------------

def test_angle_offset_examples():
    assert angle_offset(0, math.pi) == pytest.approx(0, abs=1e-12)
    assert angle_offset(0, math.pi / 6) == pytest.approx(math.pi / 6)
    assert angle_offset(-math.pi / 2 + 0.01, math.pi / 2 - 0.01) == pytest.approx(0.02)


@settings(max_examples=300)
@given(st.floats(-10, 10), st.floats(-10, 10), st.integers(-3, 3))
def test_angle_offset_is_pseudometric(a, b, k):
    d = angle_offset(a, b)
    assert 0 <= d <= math.pi / 2 + 1e-12
    assert d == pytest.approx(angle_offset(b, a), abs=1e-12)
    assert angle_offset(a, a + k * math.pi) == pytest.approx(0, abs=1e-9)


@settings(max_examples=300)
@given(st.floats(-20, 20))
def test_fold_angle_range(theta):
    t = fold_angle(theta)
    assert -math.pi / 2 < t <= math.pi / 2
    assert angle_offset(t, theta) == pytest.approx(0, abs=1e-9)


# -- rectangles --------------------------------------------------------------

def test_pose_to_rectangle_axis_aligned():
    r = pose_to_rectangle(GraspPoseImage(5, 5, 0.0, 20, 1.0), 10)
    np.testing.assert_allclose(r.corners(), [[-5, 0], [15, 0], [15, 10], [-5, 10]], atol=1e-12)
    r90 = pose_to_rectangle(GraspPoseImage(5, 5, math.pi / 2, 20, 1.0), 10)
    ext = r90.corners().max(axis=0) - r90.corners().min(axis=0)
    np.testing.assert_allclose(ext, [10, 20], atol=1e-9)
    with pytest.raises(ValueError):
        pose_to_rectangle(GraspPoseImage(5, 5, 0.0, 20, 1.0), 0)


def test_corners_match_rotation_matrix_oracle(rng):
    for _ in range(50):
        r = random_rect(rng)
        c, s = math.cos(r.angle), math.sin(r.angle)
        rot = np.array([[c, -s], [s, c]])
        local = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]]) * [r.width / 2, r.height / 2]
        np.testing.assert_allclose(r.corners(), local @ rot.T + r.center, atol=1e-9)


def test_from_corners_round_trip(rng):
    for _ in range(100):
        r = random_rect(rng)
        back = GraspRectangle.from_corners(r.corners())
        np.testing.assert_allclose(back.center, r.center, atol=1e-9)
        assert angle_offset(back.angle, r.angle) < 1e-9
        assert back.width == pytest.approx(r.width) and back.height == pytest.approx(r.height)


def test_iou_examples():
    a = GraspRectangle((5, 5), 0.0, 10, 10)
    assert rect_iou(a, a) == pytest.approx(1.0, abs=1e-9)
    assert rect_iou(a, GraspRectangle((50, 50), 0.3, 10, 10)) == 0.0
    assert rect_iou(a, GraspRectangle((10, 5), 0.0, 10, 10)) == pytest.approx(50 / 150)
    with pytest.raises(ValueError):
        rect_iou(a, GraspRectangle((0, 0), 0.0, 0.0, 3))


def test_iou_containment():
    big = GraspRectangle((0, 0), 0.4, 30, 20)
    small = GraspRectangle((1, -1), 1.1, 6, 4)
    assert rect_iou(big, small) == pytest.approx(small.area / big.area, abs=1e-6)


def test_iou_matches_raster_oracle(rng):
    worst = 0.0
    for _ in range(150):
        a = random_rect(rng, 20)
        b = random_rect(rng, 20)
        worst = max(worst, abs(rect_iou(a, b) - raster_iou(a, b)))
    assert worst < 0.02


@settings(max_examples=200)
@given(st.tuples(*[st.floats(-20, 20)] * 2), st.floats(-4, 4), st.floats(1, 30), st.floats(1, 30),
       st.tuples(*[st.floats(-20, 20)] * 2), st.floats(-4, 4), st.floats(1, 30), st.floats(1, 30))
def test_iou_symmetric_and_bounded(c1, a1, w1, h1, c2, a2, w2, h2):
    a, b = GraspRectangle(c1, a1, w1, h1), GraspRectangle(c2, a2, w2, h2)
    v = rect_iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == rect_iou(b, a)


def test_clip_polygon_and_area():
    sq = [(0, 0), (2, 0), (2, 2), (0, 2)]
    assert polygon_area(sq) == 4
    assert polygon_area(sq[::-1]) == -4
    inter = clip_polygon(sq, [(1, 1), (3, 1), (3, 3), (1, 3)])
    assert abs(polygon_area(inter)) == pytest.approx(1.0)
    assert clip_polygon(sq, [(5, 5), (6, 5), (6, 6), (5, 6)]) == []


# -- rectangle metric --------------------------------------------------------

def _offset_pair(iou_target, angle_deg):
    """Two equal rectangles, same center, the second rotated; then slid to hit an IoU."""
    gt = GraspRectangle((0, 0), 0.0, 20, 10)
    lo, hi = 0.0, 20.0
    for _ in range(100):
        mid = (lo + hi) / 2
        p = GraspRectangle((mid, 0), math.radians(angle_deg), 20, 10)
        if rect_iou(p, gt) > iou_target:
            lo = mid
        else:
            hi = mid
    return GraspRectangle(((lo + hi) / 2, 0), math.radians(angle_deg), 20, 10), gt


def test_metric_thresholds():
    assert IOU_THRESHOLD == 0.25 and ANGLE_THRESHOLD == pytest.approx(math.radians(30))
    p, gt = _offset_pair(0.26, 29.0)
    assert rect_iou(p, gt) == pytest.approx(0.26, abs=1e-6)
    assert is_valid_grasp(p, [gt])
    p, gt = _offset_pair(0.24, 0.0)
    assert not is_valid_grasp(p, [gt])
    p, gt = _offset_pair(0.6, 31.0)
    assert not is_valid_grasp(p, [gt])
    gt = GraspRectangle((3, 4), 0.2, 20, 10)
    assert is_valid_grasp(gt, [GraspRectangle((50, 50), 0, 5, 5), gt]).index == 1
    with pytest.raises(ValueError):
        is_valid_grasp(gt, [])


def test_metric_matches_two_condition_scan(rng):
    for _ in range(100):
        pred = random_rect(rng, 15)
        gts = [random_rect(rng, 15) for _ in range(int(rng.integers(1, 5)))]
        literal = any(rect_iou(pred, g) > 0.25 and angle_offset(pred.angle, g.angle) < math.pi / 6 for g in gts)
        assert bool(is_valid_grasp(pred, gts)) == literal


def test_metric_invariant_under_rigid_motion(rng):
    for _ in range(100):
        pred = random_rect(rng, 15)
        gts = [random_rect(rng, 15) for _ in range(3)]
        phi = rng.uniform(-math.pi, math.pi)
        c, s = math.cos(phi), math.sin(phi)
        m = np.array([[c, -s, rng.uniform(-50, 50)], [s, c, rng.uniform(-50, 50)]])
        moved = is_valid_grasp(pred.transformed(m), [g.transformed(m) for g in gts])
        assert bool(moved) == bool(is_valid_grasp(pred, gts))


# -- frames ------------------------------------------------------------------

def test_image_to_camera_examples():
    intr = CameraIntrinsics(500, 500, 320, 240)
    g = image_to_camera(GraspPoseImage(320, 240, 0.0, 50, 1.0), 1.0, intr)
    np.testing.assert_allclose(g.point, [0, 0, 1])
    g = image_to_camera(GraspPoseImage(820, 240, 0.0, 50, 1.0), 1.0, intr)
    np.testing.assert_allclose(g.point, [1, 0, 1])
    assert g.width == pytest.approx(0.1)
    with pytest.raises(ValueError):
        image_to_camera(GraspPoseImage(1, 1, 0, 1, 1), 0.0, intr)


def test_camera_to_robot_examples():
    g = CameraGrasp(np.array([0.1, 0.2, 0.7]), 0.3, 0.05, 0.9)
    same = camera_to_robot(g, RigidTransform.identity())
    np.testing.assert_array_equal(same.position, g.point)
    assert same.theta == g.theta and same.width == g.width
    shifted = camera_to_robot(g, RigidTransform(np.eye(3), [1.0, -2.0, 0.5]))
    np.testing.assert_allclose(shifted.position, [1.1, -1.8, 1.2])
    assert shifted.theta == g.theta
    capped = camera_to_robot(g, RigidTransform.identity(), approach_offset=0.02, gripper_max=0.04)
    assert capped.width == 0.04 and capped.position[2] == pytest.approx(0.68)


def test_transform_chain_matches_homogeneous_oracle(rng):
    for _ in range(200):
        intr = CameraIntrinsics(*rng.uniform(300, 900, 2), *rng.uniform(100, 400, 2))
        tf = RigidTransform(random_rotation(rng), rng.uniform(-1, 1, 3))
        pose = GraspPoseImage(*rng.uniform(0, 640, 2), rng.uniform(-1.5, 1.5), rng.uniform(5, 80), 0.5)
        d = rng.uniform(0.3, 2.0)
        ray = np.linalg.inv(intr.matrix()) @ np.array([pose.x, pose.y, 1.0]) * d
        oracle = (tf.matrix() @ np.append(ray, 1.0))[:3]
        got = image_to_robot(pose, d, intr, tf)
        np.testing.assert_allclose(got.position, oracle, atol=1e-9)


def test_transform_round_trip(rng):
    for _ in range(100):
        tf = RigidTransform(random_rotation(rng), rng.uniform(-1, 1, 3))
        g = CameraGrasp(rng.uniform(-1, 1, 3), rng.uniform(-1.5, 1.5), 0.05, 1.0)
        back = robot_to_camera(camera_to_robot(g, tf, approach_offset=0.03), tf, approach_offset=0.03)
        np.testing.assert_allclose(back.point, g.point, atol=1e-9)
        assert angle_offset(back.theta, g.theta) < 1e-9


def test_identity_is_exact_fixed_point(rng):
    pose = GraspPoseImage(100.0, 80.0, 0.4, 30.0, 0.9)
    intr = CameraIntrinsics(600, 600, 100, 80)
    g = image_to_camera(pose, 0.8, intr)
    r = camera_to_robot(g, RigidTransform.identity())
    np.testing.assert_array_equal(r.position, g.point)
    assert r.theta == g.theta


def test_rigid_transform_validation():
    with pytest.raises(ValueError):
        RigidTransform(np.diag([1, 1, -1]), np.zeros(3))
    with pytest.raises(ValueError):
        RigidTransform(np.eye(3) * 2, np.zeros(3))


def test_load_calibration(tmp_path):
    f = tmp_path / "cam.cfg"
    f.write_text("# camera\nfx = 610\nfy=612\ncx=320 \ncy=240\nrotation = 1 0 0, 0 1 0, 0 0 1\n"
                 "translation = 0.1 0.2 0.3\napproach_offset = 0.02\n")
    cal = load_calibration(f)
    assert cal.intrinsics.fy == 612
    np.testing.assert_array_equal(cal.transform.translation, [0.1, 0.2, 0.3])
    assert cal.extras == {"approach_offset": 0.02}
    f.write_text("fx=1\n")
    with pytest.raises(ValueError):
        load_calibration(f)
