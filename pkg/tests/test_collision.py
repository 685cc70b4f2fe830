import numpy as np
import pytest

from graspcascade.collision import (Capsule, OrientedBox, VerticalCylinder,
                                    capsule_box_distance,
                                    capsule_capsule_distance,
                                    capsule_cylinder_distance,
                                    capsule_halfspace_distance,
                                    point_box_distance,
                                    point_cylinder_distance,
                                    segment_segment_distance)


# -------- independent point-distance formulas for the sampling oracle


def oracle_point_cylinder(p, center, radius, height):
    radial = max(np.hypot(p[0] - center[0], p[1] - center[1]) - radius, 0.0)
    axial = max(abs(p[2] - center[2]) - height / 2, 0.0)
    return np.hypot(radial, axial)


def oracle_point_box(p, center, half, rotation):
    local = rotation.T @ (np.asarray(p) - center)
    return float(np.linalg.norm(np.maximum(np.abs(local) - half, 0.0)))


def sampled_segment_distance(point_fn, a, b, coarse=2001, refinements=4):
    """Dense point sampling along the segment with windowed refinement."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    lo, hi = 0.0, 1.0
    best_t = 0.0
    for _ in range(refinements):
        ts = np.linspace(lo, hi, coarse)
        pts = a[None, :] + ts[:, None] * (b - a)[None, :]
        ds = np.array([point_fn(p) for p in pts])
        k = int(np.argmin(ds))
        best_t = ts[k]
        span = (hi - lo) / (coarse - 1)
        lo = max(0.0, best_t - span)
        hi = min(1.0, best_t + span)
    return float(point_fn(a + best_t * (b - a)))


def random_capsule(rng, span=0.5):
    a = rng.uniform(-span, span, 3)
    return Capsule(a, a + rng.uniform(-0.3, 0.3, 3), rng.uniform(0.005, 0.05))


def rotation_z(yaw):
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def test_capsule_cylinder_matches_sampling_oracle():
    rng = np.random.default_rng(42)
    cyl = VerticalCylinder(np.array([0.1, -0.05, 0.1]), 0.04, 0.12)
    for _ in range(60):
        cap = random_capsule(rng)
        analytic = capsule_cylinder_distance(cap, cyl)
        sampled = sampled_segment_distance(
            lambda p: oracle_point_cylinder(p, cyl.center, cyl.radius, cyl.height),
            cap.a, cap.b) - cap.radius
        assert abs(analytic - sampled) < 1e-6


def test_capsule_box_matches_sampling_oracle():
    rng = np.random.default_rng(43)
    box = OrientedBox(np.array([0.0, 0.1, 0.05]), np.array([0.03, 0.01, 0.04]),
                      rotation_z(0.4))
    for _ in range(60):
        cap = random_capsule(rng, span=0.3)
        analytic = capsule_box_distance(cap, box)
        sampled = sampled_segment_distance(
            lambda p: oracle_point_box(p, box.center, box.half_extents, box.rotation),
            cap.a, cap.b) - cap.radius
        assert abs(analytic - sampled) < 1e-6


def test_grazing_configurations_near_exact_touch():
    # capsule tangent to the cylinder wall; sweep through exact touching
    cyl = VerticalCylinder(np.zeros(3), 0.05, 0.2)
    r = 0.01
    for delta in (-1e-4, -1e-6, 0.0, 1e-6, 1e-4):
        x = 0.05 + r + delta
        cap = Capsule(np.array([x, -0.1, 0.0]), np.array([x, 0.1, 0.02]), r)
        analytic = capsule_cylinder_distance(cap, cyl)
        sampled = sampled_segment_distance(
            lambda p: oracle_point_cylinder(p, cyl.center, cyl.radius, cyl.height),
            cap.a, cap.b) - cap.radius
        assert abs(analytic - sampled) < 1e-6
        assert abs(analytic - delta) < 1e-6


def test_grazing_box_corner_region():
    box = OrientedBox(np.zeros(3), np.array([0.02, 0.02, 0.02]), rotation_z(0.7))
    r = 0.005
    for delta in (-5e-5, 0.0, 5e-5, 1e-3):
        # diagonal approach toward one rotated corner
        corner_dir = box.rotation @ (np.ones(3) / np.sqrt(3))
        start = box.center + corner_dir * (np.sqrt(3) * 0.02 + r + delta)
        cap = Capsule(start, start + np.array([0.1, 0.05, 0.08]), r)
        analytic = capsule_box_distance(cap, box)
        sampled = sampled_segment_distance(
            lambda p: oracle_point_box(p, box.center, box.half_extents, box.rotation),
            cap.a, cap.b) - cap.radius
        assert abs(analytic - sampled) < 1e-6
        assert abs(analytic - delta) < 1e-6


def test_segment_segment_known_cases():
    # parallel unit-separated segments
    d = segment_segment_distance(np.zeros(3), np.array([1.0, 0, 0]),
                                 np.array([0.0, 1.0, 0]), np.array([1.0, 1.0, 0]))
    assert abs(d - 1.0) < 1e-12
    # crossing skew segments
    d = segment_segment_distance(np.array([-1.0, 0, 0]), np.array([1.0, 0, 0]),
                                 np.array([0.0, -1.0, 0.5]), np.array([0.0, 1.0, 0.5]))
    assert abs(d - 0.5) < 1e-12
    # endpoint-to-endpoint
    d = segment_segment_distance(np.zeros(3), np.array([1.0, 0, 0]),
                                 np.array([2.0, 0, 0]), np.array([3.0, 0, 0]))
    assert abs(d - 1.0) < 1e-12


def test_capsule_capsule_penetration_sign():
    c1 = Capsule(np.zeros(3), np.array([1.0, 0, 0]), 0.1)
    c2 = Capsule(np.array([0.5, 0.15, 0]), np.array([0.5, 1.0, 0]), 0.1)
    assert capsule_capsule_distance(c1, c2) < 0
    c3 = Capsule(np.array([0.5, 0.25, 0]), np.array([0.5, 1.0, 0]), 0.1)
    assert capsule_capsule_distance(c1, c3) > 0


def test_halfspace_distance():
    cap = Capsule(np.array([0.0, 0.0, 0.05]), np.array([0.0, 0.0, 0.2]), 0.03)
    assert abs(capsule_halfspace_distance(cap, 0.0) - 0.02) < 1e-12
    assert capsule_halfspace_distance(cap, 0.03) < 0


def test_point_distances_inside_are_zero():
    cyl = VerticalCylinder(np.zeros(3), 0.05, 0.2)
    assert point_cylinder_distance((0.01, 0.01, 0.05), cyl) == 0.0
    box = OrientedBox(np.zeros(3), np.array([0.05, 0.05, 0.05]), np.eye(3))
    assert point_box_distance((0.01, -0.02, 0.03), box) == 0.0
