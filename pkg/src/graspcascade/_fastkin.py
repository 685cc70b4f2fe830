"""Scalar-math kinematics core.

Tight loops (training rollouts, IK iteration) spend most of their time in
forward kinematics; plain float arithmetic here is roughly an order of
magnitude faster than small-array numpy. Everything returns plain tuples
(px, py, pz, qw, qx, qy, qz); the public kinematics module wraps them.
"""

from __future__ import annotations

from math import cos, sin, sqrt


def qmul(aw, ax, ay, az, bw, bx, by, bz):
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def qrot(w, x, y, z, vx, vy, vz):
    """Rotate vector v by unit quaternion q."""
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return (
        vx + w * tx + (y * tz - z * ty),
        vy + w * ty + (z * tx - x * tz),
        vz + w * tz + (x * ty - y * tx),
    )


def compose(p, q, p2, q2):
    """Compose two transforms given as (p tuple, q tuple)."""
    rx, ry, rz = qrot(q[0], q[1], q[2], q[3], p2[0], p2[1], p2[2])
    return (p[0] + rx, p[1] + ry, p[2] + rz), qmul(q[0], q[1], q[2], q[3],
                                                   q2[0], q2[1], q2[2], q2[3])


def axis_angle_quat(ax, ay, az, angle):
    half = 0.5 * angle
    s = sin(half)
    return (cos(half), s * ax, s * ay, s * az)


def qnormalize(w, x, y, z):
    n = sqrt(w * w + x * x + y * y + z * z)
    if w < 0.0:
        n = -n
    return (w / n, x / n, y / n, z / n)


def fk_poses(compiled, angles):
    """World poses of 6 arm joints, finger frame, and TCP.

    `compiled` is the tuple layout produced by kinematics._compile_chain;
    `angles` is any indexable of 7 floats.
    """
    (joint_data, grip_origin, finger_axis, grip_lo, grip_span,
     w_open, w_span, ee_origin) = compiled
    p = (0.0, 0.0, 0.0)
    q = (1.0, 0.0, 0.0, 0.0)
    out = []
    for i, (op, oq, ax, ay, az) in enumerate(joint_data):
        p, q = compose(p, q, op, oq)
        q = qmul(*q, *axis_angle_quat(ax, ay, az, angles[i]))
        out.append((p, q))
    mp, mq = compose(p, q, grip_origin[0], grip_origin[1])
    mq = qnormalize(*mq)
    frac = (angles[6] - grip_lo) / grip_span
    half_open = 0.5 * (w_open + frac * w_span)
    fp, fq = compose(mp, mq, (finger_axis[0] * half_open,
                              finger_axis[1] * half_open,
                              finger_axis[2] * half_open), (1.0, 0.0, 0.0, 0.0))
    out.append((fp, fq))
    out.append(compose(mp, mq, ee_origin[0], ee_origin[1]))
    return out


def jacobian_cols(compiled, joint_poses, p_ee):
    """Columns (linear 3, angular 3) of the geometric Jacobian."""
    joint_data = compiled[0]
    ex, ey, ez = p_ee
    cols = []
    for (pose, (_, _, ax, ay, az)) in zip(joint_poses, joint_data):
        (px, py, pz), q = pose
        zx, zy, zz = qrot(q[0], q[1], q[2], q[3], ax, ay, az)
        rx, ry, rz = ex - px, ey - py, ez - pz
        cols.append((zy * rz - zz * ry,
                     zz * rx - zx * rz,
                     zx * ry - zy * rx,
                     zx, zy, zz))
    return cols
