"""Serial-arm kinematics: forward kinematics, geometric Jacobian, and
clamped damped-least-squares differential inverse kinematics.

The arm is exactly six revolute joints; the gripper is one extra angle
parameter that maps linearly onto finger opening width (prismatic-equivalent)
and does not enter the Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _fastkin
from .configio import load_versioned_yaml
from .errors import ConfigError, InputError
from .transforms import Pose, pose_error

CHAIN_FORMAT_VERSION = 1
N_ARM_JOINTS = 6
N_JOINTS = 7  # 6 arm + 1 gripper


@dataclass(frozen=True)
class RevoluteJoint:
    name: str
    axis: np.ndarray          # unit rotation axis in the joint's own frame
    origin: Pose              # fixed parent-frame -> joint-frame transform
    limit_lo: float
    limit_hi: float
    max_speed: float          # rad/s

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(axis)
        if abs(n - 1.0) > 1e-9:
            raise ConfigError(f"joint {self.name}: axis norm {n} != 1")
        if not self.limit_lo < self.limit_hi:
            raise ConfigError(f"joint {self.name}: limit_lo must be < limit_hi")
        if self.max_speed <= 0:
            raise ConfigError(f"joint {self.name}: max_speed must be positive")
        object.__setattr__(self, "axis", axis)


@dataclass(frozen=True)
class GripperSpec:
    """One angle parameter in [limit_lo, limit_hi] maps linearly onto the
    opening width [width_open, width_closed] of a parallel two-finger hand."""

    origin: Pose              # last arm joint frame -> hand mount frame
    finger_axis: np.ndarray   # direction the fingers separate along (mount frame)
    limit_lo: float           # angle at fully open
    limit_hi: float           # angle at fully closed
    width_open: float         # m
    width_closed: float       # m
    max_speed: float          # rad/s
    finger_length: float = 0.06

    def __post_init__(self):
        axis = np.asarray(self.finger_axis, dtype=float).reshape(3)
        n = np.linalg.norm(axis)
        if abs(n - 1.0) > 1e-9:
            raise ConfigError(f"gripper finger_axis norm {n} != 1")
        if not self.limit_lo < self.limit_hi:
            raise ConfigError("gripper: limit_lo must be < limit_hi")
        object.__setattr__(self, "finger_axis", axis)

    def closure_fraction(self, angle: float) -> float:
        """0 = fully open, 1 = fully closed."""
        return (angle - self.limit_lo) / (self.limit_hi - self.limit_lo)

    def opening_width(self, angle: float) -> float:
        f = self.closure_fraction(angle)
        return self.width_open + f * (self.width_closed - self.width_open)


@dataclass(frozen=True)
class KinematicChain:
    joints: tuple[RevoluteJoint, ...]
    gripper: GripperSpec
    ee_origin: Pose           # hand mount frame -> tool center point
    home: np.ndarray = field(default_factory=lambda: np.zeros(N_JOINTS))
    name: str = "chain"

    def __post_init__(self):
        if len(self.joints) != N_ARM_JOINTS:
            raise ConfigError(f"chain needs exactly {N_ARM_JOINTS} arm joints, "
                              f"got {len(self.joints)}")
        home = np.asarray(self.home, dtype=float).reshape(N_JOINTS)
        lo, hi = self.limits_lo, self.limits_hi
        if np.any(home < lo) or np.any(home > hi):
            raise ConfigError("home configuration violates joint limits")
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "home", home)

    @property
    def limits_lo(self) -> np.ndarray:
        return np.array([j.limit_lo for j in self.joints] + [self.gripper.limit_lo])

    @property
    def limits_hi(self) -> np.ndarray:
        return np.array([j.limit_hi for j in self.joints] + [self.gripper.limit_hi])

    @property
    def max_speeds(self) -> np.ndarray:
        return np.array([j.max_speed for j in self.joints] + [self.gripper.max_speed])

    def home_state(self) -> "JointState":
        return JointState(self.home.copy(), np.zeros(N_JOINTS))

    def clip_angles(self, angles: np.ndarray) -> np.ndarray:
        return np.clip(angles, self.limits_lo, self.limits_hi)

    @property
    def compiled(self):
        """Scalar-tuple layout consumed by the _fastkin core (cached)."""
        cached = self.__dict__.get("_compiled")
        if cached is None:
            g = self.gripper
            cached = (
                tuple((tuple(j.origin.p), tuple(j.origin.q), *j.axis)
                      for j in self.joints),
                (tuple(g.origin.p), tuple(g.origin.q)),
                tuple(g.finger_axis),
                g.limit_lo,
                g.limit_hi - g.limit_lo,
                g.width_open,
                g.width_closed - g.width_open,
                (tuple(self.ee_origin.p), tuple(self.ee_origin.q)),
            )
            object.__setattr__(self, "_compiled", cached)
        return cached


@dataclass(frozen=True)
class JointState:
    angles: np.ndarray        # 7: six arm joints + gripper parameter, rad
    velocities: np.ndarray    # 7, rad/s

    def __post_init__(self):
        object.__setattr__(self, "angles", np.asarray(self.angles, float).reshape(N_JOINTS))
        object.__setattr__(self, "velocities",
                           np.asarray(self.velocities, float).reshape(N_JOINTS))

    def with_angles(self, angles: np.ndarray, velocities: np.ndarray | None = None):
        return JointState(angles, self.velocities if velocities is None else velocities)


@dataclass(frozen=True)
class TwistDelta:
    dp: np.ndarray            # m
    dphi: np.ndarray          # axis-angle increment, rad

    def __post_init__(self):
        object.__setattr__(self, "dp", np.asarray(self.dp, float).reshape(3))
        object.__setattr__(self, "dphi", np.asarray(self.dphi, float).reshape(3))


@dataclass(frozen=True)
class IkConfig:
    damping: float = 0.01         # DLS lambda; bounded step near singularities
    clamp_linear: float = 0.02    # m per iteration
    clamp_angular: float = 0.05   # rad per iteration
    max_joint_step: float = 0.3   # rad per iteration, tames near-singular gain


def validate_state(chain: KinematicChain, state: JointState) -> None:
    a = state.angles
    if not np.all(np.isfinite(a)):
        raise InputError("joint angles contain non-finite values")
    lo, hi = chain.limits_lo, chain.limits_hi
    if np.any(a < lo - 1e-9) or np.any(a > hi + 1e-9):
        bad = np.where((a < lo - 1e-9) | (a > hi + 1e-9))[0]
        raise InputError(f"joint angle(s) {bad.tolist()} outside limits")


def fk_raw(chain: KinematicChain, angles) -> list[tuple]:
    """Unvalidated fast path: list of 8 ((px,py,pz), (qw,qx,qy,qz)) tuples."""
    return _fastkin.fk_poses(chain.compiled, angles)


def forward_kinematics(chain: KinematicChain, state: JointState) -> list[Pose]:
    """World poses of the 6 arm joints, the gripper finger frame, and the TCP.

    The finger frame translates along the gripper's finger axis by half the
    current opening width, so observations reflect the hand's opening state.
    """
    validate_state(chain, state)
    return [Pose._wrap(p, q) for p, q in fk_raw(chain, state.angles)]


def _jacobian_from_raw(chain: KinematicChain, raw: list[tuple]) -> np.ndarray:
    cols = _fastkin.jacobian_cols(chain.compiled, raw[:N_ARM_JOINTS], raw[-1][0])
    return np.array(cols).T


def jacobian(chain: KinematicChain, state: JointState) -> np.ndarray:
    """6x6 geometric Jacobian of the TCP w.r.t. the six arm joints.

    Rows 0-2: linear velocity, rows 3-5: angular velocity (world frame).
    """
    validate_state(chain, state)
    return _jacobian_from_raw(chain, fk_raw(chain, state.angles))


def _scale_to_norm(v: np.ndarray, cap: float) -> np.ndarray:
    n = np.linalg.norm(v)
    # tolerant compare keeps the clamp exactly idempotent under rounding
    if n > cap * (1.0 + 1e-12):
        return v * (cap / n)
    return v


def clamp_delta_q(raw: TwistDelta, config: IkConfig) -> TwistDelta:
    """Scale dp / dphi down to the configured norms, preserving direction."""
    return TwistDelta(_scale_to_norm(raw.dp, config.clamp_linear),
                      _scale_to_norm(raw.dphi, config.clamp_angular))


def ik_step(chain: KinematicChain, state: JointState, target: Pose,
            config: IkConfig = IkConfig()) -> np.ndarray:
    """One damped-least-squares step toward a target TCP pose.

    Returns the arm joint increment (6,). The pose error is clamped before
    inversion so one step never commands a large twist. Joints that the raw
    step would push past a limit are pinned at the limit and the remaining
    twist is re-solved over the free joints, so limit contact degrades the
    step instead of silently truncating it.
    """
    if not (np.all(np.isfinite(target.p)) and np.all(np.isfinite(target.q))):
        raise InputError("target pose is not finite")
    validate_state(chain, state)
    raw = fk_raw(chain, state.angles)
    tcp = Pose._wrap(*raw[-1])
    dp, dphi = pose_error(tcp, target)
    delta = clamp_delta_q(TwistDelta(dp, dphi), config)
    dq = np.concatenate([delta.dp, delta.dphi])
    J = _jacobian_from_raw(chain, raw)

    arm = state.angles[:N_ARM_JOINTS]
    lo = chain.limits_lo[:N_ARM_JOINTS]
    hi = chain.limits_hi[:N_ARM_JOINTS]
    lam2 = config.damping ** 2
    free = np.ones(N_ARM_JOINTS, dtype=bool)
    dtheta = np.zeros(N_ARM_JOINTS)
    for _ in range(N_ARM_JOINTS):
        Jf = J[:, free]
        A = Jf @ Jf.T + lam2 * np.eye(6)
        step = np.zeros(N_ARM_JOINTS)
        step[free] = Jf.T @ np.linalg.solve(A, dq)
        step = _scale_to_norm(step, config.max_joint_step)
        cand = arm + dtheta + step
        over = ((cand > hi) | (cand < lo)) & free
        if not over.any():
            dtheta += step
            break
        pinned = np.where(over, np.clip(cand, lo, hi) - (arm + dtheta), 0.0)
        dtheta += pinned
        dq = dq - J[:, over] @ pinned[over]
        free &= ~over
        if not free.any():
            break
    return np.clip(arm + dtheta, lo, hi) - arm


def apply_ik_step(chain: KinematicChain, state: JointState, target: Pose,
                  config: IkConfig = IkConfig()) -> JointState:
    dtheta = ik_step(chain, state, target, config)
    angles = state.angles.copy()
    angles[:N_ARM_JOINTS] += dtheta
    return state.with_angles(chain.clip_angles(angles))


def _pose_from_doc(doc: dict) -> Pose:
    return Pose(np.asarray(doc.get("p", [0, 0, 0]), float),
                np.asarray(doc.get("q", [1, 0, 0, 0]), float))


def load_chain(path) -> KinematicChain:
    doc = load_versioned_yaml(path, CHAIN_FORMAT_VERSION, "chain")
    try:
        joints = tuple(
            RevoluteJoint(
                name=j.get("name", f"j{i + 1}"),
                axis=np.asarray(j["axis"], float),
                origin=_pose_from_doc(j.get("origin", {})),
                limit_lo=float(j["limits"][0]),
                limit_hi=float(j["limits"][1]),
                max_speed=float(j.get("max_speed", 1.5)),
            )
            for i, j in enumerate(doc["joints"])
        )
        g = doc["gripper"]
        gripper = GripperSpec(
            origin=_pose_from_doc(g.get("origin", {})),
            finger_axis=np.asarray(g.get("finger_axis", [1, 0, 0]), float),
            limit_lo=float(g["angle_range"][0]),
            limit_hi=float(g["angle_range"][1]),
            width_open=float(g["width_range"][0]),
            width_closed=float(g["width_range"][1]),
            max_speed=float(g.get("max_speed", 1.0)),
            finger_length=float(g.get("finger_length", 0.06)),
        )
        ee_origin = _pose_from_doc(doc.get("end_effector", {}).get("origin", {}))
        home = np.asarray(doc.get("home", np.zeros(N_JOINTS)), float)
        return KinematicChain(joints=joints, gripper=gripper, ee_origin=ee_origin,
                              home=home, name=doc.get("name", "chain"))
    except (KeyError, TypeError, IndexError) as e:
        raise ConfigError(f"chain file {path}: missing or malformed field ({e})") from e
