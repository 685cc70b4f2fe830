"""Quaternion and rigid-pose math shared by the simulator and controllers.

Quaternions are stored (w, x, y, z), unit norm, canonicalized to w >= 0.
Orientation errors are exchanged as axis-angle 3-vectors (axis * angle).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QUAT_NORM_TOL = 1e-9


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n < 1e-12:
        raise ValueError("cannot normalize near-zero quaternion")
    q = q / n
    # canonical sign: q and -q encode the same rotation
    if q[0] < 0.0:
        q = -q
    return q


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector v by quaternion q (q v q*)."""
    w = q[0]
    u = q[1:]
    # Rodrigues form, cheaper than building the matrix
    return v + 2.0 * np.cross(u, np.cross(u, v) + w * v)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        return np.array([1.0, 0.0, 0.0, 0.0])
    half = 0.5 * angle
    q = np.empty(4)
    q[0] = np.cos(half)
    q[1:] = np.sin(half) * (axis / n)
    return quat_normalize(q)


def quat_to_axis_angle(q: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle, radians) of a unit quaternion."""
    q = quat_normalize(q)
    w = min(1.0, max(-1.0, float(q[0])))
    s = np.linalg.norm(q[1:])
    if s < 1e-12:
        return np.zeros(3)
    angle = 2.0 * np.arctan2(s, w)
    return (q[1:] / s) * angle


def quat_from_two_vectors(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Shortest-arc rotation taking direction a to direction b."""
    a = np.asarray(a, float) / np.linalg.norm(a)
    b = np.asarray(b, float) / np.linalg.norm(b)
    c = float(np.dot(a, b))
    if c < -1.0 + 1e-12:
        # antiparallel: rotate pi about any axis orthogonal to a
        axis = np.cross(a, np.array([1.0, 0.0, 0.0]))
        if np.linalg.norm(axis) < 1e-6:
            axis = np.cross(a, np.array([0.0, 1.0, 0.0]))
        return quat_from_axis_angle(axis, np.pi)
    v = np.cross(a, b)
    q = np.empty(4)
    q[0] = 1.0 + c
    q[1:] = v
    return quat_normalize(q)


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (w,x,y,z) of a proper rotation matrix."""
    t = float(np.trace(R))
    if t > 0.0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s,
                      (R[1, 0] - R[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(R[i, i] - R[j, j] - R[k, k] + 1.0) * 2.0
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    return quat_normalize(q)


def quat_angle_between(a: np.ndarray, b: np.ndarray) -> float:
    """Absolute rotation angle between two orientations, radians."""
    rel = quat_mul(quat_normalize(b), quat_conj(quat_normalize(a)))
    # atan2 form stays accurate near identity where arccos loses digits
    return 2.0 * float(np.arctan2(np.linalg.norm(rel[1:]), abs(rel[0])))


@dataclass(frozen=True)
class Pose:
    """Rigid transform: position p (m) and unit quaternion q (w,x,y,z)."""

    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(3)
        q = np.asarray(self.q, dtype=float).reshape(4)
        n = np.linalg.norm(q)
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"quaternion norm {n} too far from 1")
        q = q / n
        if q[0] < 0.0:
            q = -q
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @classmethod
    def _wrap(cls, p, q) -> "Pose":
        """Trusted fast constructor for already-normalized components."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "p", np.asarray(p, dtype=float))
        qa = np.asarray(q, dtype=float)
        if qa[0] < 0.0:
            qa = -qa
        object.__setattr__(obj, "q", qa)
        return obj

    def compose(self, other: "Pose") -> "Pose":
        """self then other (other expressed in self's frame)."""
        return Pose(self.p + quat_rotate(self.q, other.p),
                    quat_mul(self.q, other.q))

    def inverse(self) -> "Pose":
        qi = quat_conj(self.q)
        return Pose(-quat_rotate(qi, self.p), qi)

    def transform_point(self, v: np.ndarray) -> np.ndarray:
        return self.p + quat_rotate(self.q, np.asarray(v, dtype=float))

    def rotate_vector(self, v: np.ndarray) -> np.ndarray:
        return quat_rotate(self.q, np.asarray(v, dtype=float))

    def as_dict(self) -> dict:
        return {"p": [float(x) for x in self.p], "q": [float(x) for x in self.q]}

    @staticmethod
    def from_dict(d: dict) -> "Pose":
        return Pose(np.asarray(d["p"], float), np.asarray(d["q"], float))


def pose_error(current: Pose, target: Pose) -> tuple[np.ndarray, np.ndarray]:
    """World-frame twist (dp, dphi) carrying current onto target.

    dphi is the axis-angle of the relative rotation q_target * q_current^-1.
    """
    dp = target.p - current.p
    dphi = quat_to_axis_angle(quat_mul(target.q, quat_conj(current.q)))
    return dp, dphi
