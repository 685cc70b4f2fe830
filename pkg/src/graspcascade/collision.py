"""Analytic distance tests between the collision primitives of the scene.

Robot links are capsules; the cup is a vertical cylinder body plus an
oriented-box handle; the table is the half-space z <= 0. Distances to the
convex solids (cylinder, box) are minimized over the capsule segment by
golden-section search, which is exact here because distance-to-a-convex-set
is convex along a line segment. Internals are scalar math: these run in the
innermost loop of every environment step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import hypot, sqrt

import numpy as np

_INV_PHI = (sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Capsule:
    a: np.ndarray
    b: np.ndarray
    radius: float


@dataclass(frozen=True)
class VerticalCylinder:
    center: np.ndarray      # center of the axis segment
    radius: float
    height: float

    @property
    def bound(self) -> float:
        return hypot(self.radius, 0.5 * self.height)


@dataclass(frozen=True)
class OrientedBox:
    center: np.ndarray
    half_extents: np.ndarray
    rotation: np.ndarray    # 3x3, box -> world

    @property
    def bound(self) -> float:
        h = self.half_extents
        return sqrt(float(h[0]) ** 2 + float(h[1]) ** 2 + float(h[2]) ** 2)


def segment_segment_distance(p1, q1, p2, q2) -> float:
    """Closest distance between segments [p1,q1] and [p2,q2]."""
    d1x, d1y, d1z = q1[0] - p1[0], q1[1] - p1[1], q1[2] - p1[2]
    d2x, d2y, d2z = q2[0] - p2[0], q2[1] - p2[1], q2[2] - p2[2]
    rx, ry, rz = p1[0] - p2[0], p1[1] - p2[1], p1[2] - p2[2]
    a = d1x * d1x + d1y * d1y + d1z * d1z
    e = d2x * d2x + d2y * d2y + d2z * d2z
    f = d2x * rx + d2y * ry + d2z * rz
    if a < 1e-18 and e < 1e-18:
        return sqrt(rx * rx + ry * ry + rz * rz)
    if a < 1e-18:
        s, t = 0.0, min(1.0, max(0.0, f / e))
    else:
        c = d1x * rx + d1y * ry + d1z * rz
        if e < 1e-18:
            t, s = 0.0, min(1.0, max(0.0, -c / a))
        else:
            b = d1x * d2x + d1y * d2y + d1z * d2z
            denom = a * e - b * b
            s = min(1.0, max(0.0, (b * f - c * e) / denom)) if denom > 1e-18 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(1.0, max(0.0, -c / a))
            elif t > 1.0:
                t = 1.0
                s = min(1.0, max(0.0, (b - c) / a))
    cx = rx + d1x * s - d2x * t
    cy = ry + d1y * s - d2y * t
    cz = rz + d1z * s - d2z * t
    return sqrt(cx * cx + cy * cy + cz * cz)


def point_cylinder_distance(p, cyl: VerticalCylinder) -> float:
    """Distance from a point to the solid cylinder (0 inside)."""
    c = cyl.center
    radial = hypot(p[0] - c[0], p[1] - c[1]) - cyl.radius
    axial = abs(p[2] - c[2]) - 0.5 * cyl.height
    if radial <= 0.0 and axial <= 0.0:
        return 0.0
    return hypot(max(radial, 0.0), max(axial, 0.0))


def point_box_distance(p, box: OrientedBox) -> float:
    """Distance from a point to the solid oriented box (0 inside)."""
    R = box.rotation
    c = box.center
    h = box.half_extents
    wx, wy, wz = p[0] - c[0], p[1] - c[1], p[2] - c[2]
    # world -> box frame via R^T
    dx = abs(R[0][0] * wx + R[1][0] * wy + R[2][0] * wz) - h[0]
    dy = abs(R[0][1] * wx + R[1][1] * wy + R[2][1] * wz) - h[1]
    dz = abs(R[0][2] * wx + R[1][2] * wy + R[2][2] * wz) - h[2]
    dx = dx if dx > 0.0 else 0.0
    dy = dy if dy > 0.0 else 0.0
    dz = dz if dz > 0.0 else 0.0
    return sqrt(dx * dx + dy * dy + dz * dz)


def _min_over_segment(fn, a, b, tol=1e-10) -> float:
    """Golden-section minimum of fn(point) over segment [a, b].

    Valid for distance to a convex set, which is convex along the segment.
    """
    ax, ay, az = float(a[0]), float(a[1]), float(a[2])
    dx, dy, dz = float(b[0]) - ax, float(b[1]) - ay, float(b[2]) - az

    def at(t):
        return fn((ax + t * dx, ay + t * dy, az + t * dz))

    lo, hi = 0.0, 1.0
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = at(x1), at(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = at(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = at(x2)
    return min(f1, f2)


def _segment_far_bound(a, b, center, reach) -> bool:
    """True when the segment is provably farther than `reach` from center."""
    mx = 0.5 * (a[0] + b[0]) - center[0]
    my = 0.5 * (a[1] + b[1]) - center[1]
    mz = 0.5 * (a[2] + b[2]) - center[2]
    hx, hy, hz = 0.5 * (b[0] - a[0]), 0.5 * (b[1] - a[1]), 0.5 * (b[2] - a[2])
    half_len = sqrt(hx * hx + hy * hy + hz * hz)
    return sqrt(mx * mx + my * my + mz * mz) - half_len > reach


def segment_cylinder_distance(a, b, cyl: VerticalCylinder) -> float:
    return _min_over_segment(lambda p: point_cylinder_distance(p, cyl), a, b)


def segment_box_distance(a, b, box: OrientedBox) -> float:
    return _min_over_segment(lambda p: point_box_distance(p, box), a, b)


def capsule_capsule_distance(c1: Capsule, c2: Capsule) -> float:
    """Surface separation; negative means penetration."""
    return segment_segment_distance(c1.a, c1.b, c2.a, c2.b) - c1.radius - c2.radius


def capsule_cylinder_distance(c: Capsule, cyl: VerticalCylinder) -> float:
    return segment_cylinder_distance(c.a, c.b, cyl) - c.radius


def capsule_box_distance(c: Capsule, box: OrientedBox) -> float:
    return segment_box_distance(c.a, c.b, box) - c.radius


def capsule_clear_of(c: Capsule, center, bound, margin: float = 0.0) -> bool:
    """Broad phase: provably separated from a solid bounded by `bound`."""
    return _segment_far_bound(c.a, c.b, center, bound + c.radius + margin)


def capsule_halfspace_distance(c: Capsule, z_top: float) -> float:
    """Separation from the solid half-space z <= z_top."""
    return min(float(c.a[2]), float(c.b[2])) - z_top - c.radius
