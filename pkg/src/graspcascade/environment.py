"""The simulated grasping world.

A cup with a handle stands on a table; the grasp point sits on the handle
with a predetermined approach direction attached to the object. Episodes
run reset -> step* -> terminal, where terminal is exactly one of success,
collision, timeout or drift-away. States are values and stepping is a pure
transition, so environments replay deterministically and may run in
parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from ._fastkin import qrot
from .collision import (Capsule, OrientedBox, VerticalCylinder,
                        capsule_box_distance, capsule_capsule_distance,
                        capsule_clear_of, capsule_cylinder_distance,
                        capsule_halfspace_distance, segment_segment_distance)
from .configio import load_versioned_yaml
from .errors import ConfigError, InputError, SetupError
from .kinematics import JointState, KinematicChain, N_JOINTS, fk_raw
from .rewards import EventTag, RewardEvent
from .tasks import ALL_TASKS, TaskId
from .transforms import Pose, quat_to_matrix

SCENE_FORMAT_VERSION = 1
OBS_DIM = 63              # 9 entities x (position 3 + quaternion 4)
ACTION_DIM = 7


class TaskStatus(str, Enum):
    SUCCESS = "success"
    IN_PROGRESS = "in_progress"
    VIOLATED = "violated"


class TerminalCause(str, Enum):
    SUCCESS = "success"
    COLLISION = "collision"
    TIMEOUT = "timeout"
    DRIFT_AWAY = "drift_away"


@dataclass(frozen=True)
class Thresholds:
    align: float = math.radians(10.0)      # approach-axis cone
    corridor_radius: float = 0.02          # distance to the grasp ray, m
    near_distance: float = 0.01            # Task-2 arrival distance, m
    closure_fraction: float = 0.70         # gripper closed past this = grasped
    drift_distance: float = 1.0            # hand-object separation aborting, m
    hysteresis: float = math.radians(10.0)  # extra cone before Task 2 is violated


@dataclass(frozen=True)
class SceneConfig:
    name: str
    body_radius: float
    body_height: float
    handle_center: np.ndarray        # object frame
    handle_half_extents: np.ndarray
    grasp_point_local: np.ndarray
    grasp_direction_local: np.ndarray
    grasp_lateral_local: np.ndarray  # finger-separation hint for controllers
    sample_x: tuple
    sample_y: tuple
    sample_yaw: tuple
    thresholds: Thresholds
    max_steps: int = 400
    dt: float = 0.05
    permitted_contact_radius: float = 0.06
    table_z: float = 0.0
    link_radii: dict | None = None

    def __post_init__(self):
        for name in ("handle_center", "handle_half_extents", "grasp_point_local",
                     "grasp_direction_local", "grasp_lateral_local"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), float))
        n = np.linalg.norm(self.grasp_direction_local)
        if abs(n - 1.0) > 1e-6:
            raise ConfigError("grasp_direction must be a unit vector")
        object.__setattr__(self, "grasp_direction_local",
                           self.grasp_direction_local / n)


_DEFAULT_LINK_RADII = {
    "base": 0.050, "upper": 0.045, "forearm": 0.040, "wrist1": 0.035,
    "wrist2": 0.035, "hand": 0.030, "palm": 0.015, "finger": 0.008,
}


def load_scene(path) -> SceneConfig:
    doc = load_versioned_yaml(path, SCENE_FORMAT_VERSION, "scene")
    try:
        obj = doc["object"]
        samp = doc["sampling"]
        th = doc.get("thresholds", {})
        ep = doc.get("episode", {})
        col = doc.get("collision", {})
        thresholds = Thresholds(
            align=math.radians(float(th.get("align_deg", 10.0))),
            corridor_radius=float(th.get("corridor_radius", 0.02)),
            near_distance=float(th.get("near_distance", 0.01)),
            closure_fraction=float(th.get("closure_fraction", 0.70)),
            drift_distance=float(th.get("drift_distance", 1.0)),
            hysteresis=math.radians(float(th.get("hysteresis_deg", 10.0))),
        )
        return SceneConfig(
            name=doc.get("name", "scene"),
            body_radius=float(obj["body"]["radius"]),
            body_height=float(obj["body"]["height"]),
            handle_center=obj["handle"]["center"],
            handle_half_extents=obj["handle"]["half_extents"],
            grasp_point_local=obj["grasp_point"],
            grasp_direction_local=obj["grasp_direction"],
            grasp_lateral_local=obj.get("grasp_lateral", [0.0, 1.0, 0.0]),
            sample_x=tuple(samp["x"]),
            sample_y=tuple(samp["y"]),
            sample_yaw=tuple(samp.get("yaw", (0.0, 0.0))),
            thresholds=thresholds,
            max_steps=int(ep.get("max_steps", 400)),
            dt=float(ep.get("dt", 0.05)),
            permitted_contact_radius=float(col.get("permitted_contact_radius", 0.06)),
            table_z=float(doc.get("table", {}).get("z", 0.0)),
            link_radii={**_DEFAULT_LINK_RADII, **col.get("link_radii", {})},
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"scene file {path}: missing or malformed field ({e})") from e


@dataclass(frozen=True)
class WorldState:
    joint_state: JointState
    object_pose: Pose
    grasp_point: np.ndarray          # world, rigidly attached to the object
    grasp_direction: np.ndarray      # world, unit
    step_count: int = 0
    active_task: TaskId = TaskId.TASK1
    final_task: TaskId = TaskId.TASK3
    terminal: TerminalCause | None = None


@dataclass(frozen=True)
class StepOutcome:
    state: WorldState
    observation: np.ndarray
    events: tuple
    task_transition: TaskId | None
    terminal: TerminalCause | None


@dataclass(frozen=True)
class TaskMetrics:
    align_angle: float        # approach axis vs grasp direction, rad
    ray_distance: float       # radial distance to the grasp-direction line, m
    along_ray: float          # arc length before the grasp point (> 0: approach side)
    point_distance: float     # TCP to grasp point, m
    closure: float            # gripper closure fraction
    object_distance: float    # TCP to object body center, m


# normalization scales for the potential-based approach rewards: one unit of
# event magnitude per degree of alignment / centimeter of distance improved,
# so a typical approach sweep accumulates a few units of shaping in total
_ALIGN_NORM = math.pi / 180.0
_DIST_NORM = 0.01


class GraspEnv:
    """Reset/step/observe world with task predicates and collision checks."""

    def __init__(self, chain: KinematicChain, scene: SceneConfig):
        self.chain = chain
        self.scene = scene
        self._radii = dict(scene.link_radii or _DEFAULT_LINK_RADII)
        g = chain.gripper
        self._finger_len = g.finger_length
        self._palm_half = 0.5 * g.width_open + 0.01

    # ------------------------------------------------------------ reset

    def sample_object_pose(self, rng: np.random.Generator) -> Pose:
        s = self.scene
        x = rng.uniform(*s.sample_x)
        y = rng.uniform(*s.sample_y)
        yaw = rng.uniform(*s.sample_yaw)
        q = np.array([math.cos(yaw / 2), 0.0, 0.0, math.sin(yaw / 2)])
        return Pose(np.array([x, y, s.table_z]), q)

    def _initial_state(self, object_pose: Pose, start_task: TaskId,
                       final_task: TaskId) -> WorldState:
        gp = object_pose.transform_point(self.scene.grasp_point_local)
        gd = object_pose.rotate_vector(self.scene.grasp_direction_local)
        return WorldState(self.chain.home_state(), object_pose, gp, gd,
                          step_count=0, active_task=start_task,
                          final_task=final_task, terminal=None)

    def reset(self, rng: np.random.Generator | int, start_task: TaskId = TaskId.TASK1,
              final_task: TaskId = TaskId.TASK3, prior_policies: dict | None = None,
              max_retries: int = 20) -> WorldState:
        """New episode. Starting beyond Task 1 rolls the prior-task policies
        to completion; rollouts that fail are resampled up to max_retries."""
        if isinstance(rng, (int, np.integer)):
            rng = np.random.default_rng(int(rng))
        if start_task is not TaskId.TASK1 and not prior_policies:
            raise SetupError(f"starting at {start_task.name} needs prior policies")
        for _ in range(max_retries):
            state = self._initial_state(self.sample_object_pose(rng),
                                        TaskId.TASK1, final_task)
            if start_task is TaskId.TASK1:
                return state
            state, ok = self._roll_priors(state, start_task, prior_policies)
            if ok:
                return state
        raise SetupError(f"prior policies failed to set up {start_task.name} "
                         f"within {max_retries} attempts")

    def _roll_priors(self, state: WorldState, start_task: TaskId, policies: dict):
        for policy in {id(p): p for p in policies.values()}.values():
            policy.begin_episode()
        budget = self.scene.max_steps * (start_task - 1)
        for _ in range(budget):
            if state.active_task >= start_task:
                return replace(state, step_count=0), True
            policy = policies.get(state.active_task)
            if policy is None:
                raise SetupError(f"no prior policy for {state.active_task.name}")
            outcome = self.step(state, policy.act(self, state))
            if outcome.terminal is not None:
                return state, False
            state = outcome.state
        return state, state.active_task >= start_task

    # ------------------------------------------------------------ metrics

    def _tcp(self, state: WorldState):
        raw = fk_raw(self.chain, state.joint_state.angles)
        return raw, raw[-1]

    def metrics(self, state: WorldState, raw=None) -> TaskMetrics:
        if raw is None:
            raw = fk_raw(self.chain, state.joint_state.angles)
        (px, py, pz), q = raw[-1]
        zx, zy, zz = qrot(q[0], q[1], q[2], q[3], 0.0, 0.0, 1.0)
        gd = state.grasp_direction
        dot = zx * gd[0] + zy * gd[1] + zz * gd[2]
        align = math.acos(max(-1.0, min(1.0, dot)))
        gp = state.grasp_point
        rx, ry, rz = px - gp[0], py - gp[1], pz - gp[2]
        along = -(rx * gd[0] + ry * gd[1] + rz * gd[2])
        ox, oy, oz = rx + along * gd[0], ry + along * gd[1], rz + along * gd[2]
        ray_dist = math.sqrt(ox * ox + oy * oy + oz * oz)
        point_dist = math.sqrt(rx * rx + ry * ry + rz * rz)
        closure = self.chain.gripper.closure_fraction(state.joint_state.angles[6])
        oc = state.object_pose.p
        ocz = oc[2] + 0.5 * self.scene.body_height
        od = math.sqrt((px - oc[0]) ** 2 + (py - oc[1]) ** 2 + (pz - ocz) ** 2)
        return TaskMetrics(align, ray_dist, along, point_dist, closure, od)

    # ------------------------------------------------------------ predicates

    def task_predicate(self, state: WorldState, task: TaskId,
                       metrics: TaskMetrics | None = None) -> TaskStatus:
        th = self.scene.thresholds
        m = metrics if metrics is not None else self.metrics(state)
        aligned = m.align_angle < th.align
        on_ray = m.ray_distance < th.corridor_radius \
            and m.along_ray >= -th.near_distance
        if task is TaskId.TASK1:
            return TaskStatus.SUCCESS if (aligned and on_ray) else TaskStatus.IN_PROGRESS
        if task is TaskId.TASK2:
            if aligned and on_ray and m.point_distance < th.near_distance:
                return TaskStatus.SUCCESS
            if m.align_angle > th.align + th.hysteresis:
                return TaskStatus.VIOLATED
            return TaskStatus.IN_PROGRESS
        if task is TaskId.TASK3:
            if m.point_distance < th.near_distance and m.closure >= th.closure_fraction:
                return TaskStatus.SUCCESS
            return TaskStatus.IN_PROGRESS
        raise InputError(f"unknown task {task!r}")

    def task_statuses(self, state: WorldState) -> dict:
        m = self.metrics(state)
        return {t: self.task_predicate(state, t, m) for t in ALL_TASKS}

    # ------------------------------------------------------------ collision

    def _robot_capsules(self, state: WorldState, raw=None) -> dict:
        if raw is None:
            raw = fk_raw(self.chain, state.joint_state.angles)
        r = self._radii
        pts = [np.asarray(p, float) for p, _ in raw]
        mq = raw[-1][1]
        ee = pts[7]
        zax = np.array(qrot(mq[0], mq[1], mq[2], mq[3], 0.0, 0.0, 1.0))
        xax = np.array(qrot(mq[0], mq[1], mq[2], mq[3], 1.0, 0.0, 0.0))
        mount = ee - zax * float(self.chain.ee_origin.p[2])
        half_open = 0.5 * self.chain.gripper.opening_width(state.joint_state.angles[6])
        caps = {
            "base": Capsule(np.zeros(3), pts[0], r["base"]),
            "upper": Capsule(pts[1], pts[2], r["upper"]),
            "forearm": Capsule(pts[2], pts[3], r["forearm"]),
            "wrist1": Capsule(pts[3], pts[4], r["wrist1"]),
            "wrist2": Capsule(pts[4], pts[5], r["wrist2"]),
            "hand": Capsule(pts[5], mount, r["hand"]),
            "palm": Capsule(mount - xax * self._palm_half,
                            mount + xax * self._palm_half, r["palm"]),
        }
        for name, side in (("finger_l", 1.0), ("finger_r", -1.0)):
            base = mount + xax * (side * half_open)
            caps[name] = Capsule(base, base + zax * self._finger_len, r["finger"])
        return caps

    def _object_solids(self, state: WorldState):
        s = self.scene
        c = state.object_pose.p
        body = VerticalCylinder(np.array([c[0], c[1], c[2] + 0.5 * s.body_height]),
                                s.body_radius, s.body_height)
        handle = OrientedBox(state.object_pose.transform_point(s.handle_center),
                             s.handle_half_extents.copy(),
                             quat_to_matrix(state.object_pose.q))
        return body, handle

    # non-adjacent link pairs checked for self collision
    _SELF_PAIRS = (("base", "wrist1"), ("base", "wrist2"), ("base", "hand"),
                   ("base", "palm"), ("base", "finger_l"), ("base", "finger_r"),
                   ("upper", "wrist2"), ("upper", "hand"), ("upper", "palm"),
                   ("upper", "finger_l"), ("upper", "finger_r"),
                   ("forearm", "hand"), ("forearm", "palm"),
                   ("forearm", "finger_l"), ("forearm", "finger_r"))

    def check_collision(self, state: WorldState, raw=None) -> frozenset:
        """Pairs in contact. Finger/palm contact with the handle is permitted
        while the hand is closing at the grasp point in Task 3."""
        caps = self._robot_capsules(state, raw)
        body, handle = self._object_solids(state)
        m = self.metrics(state, raw)
        closure_zone = (state.active_task is TaskId.TASK3
                        and m.point_distance < self.scene.permitted_contact_radius)
        out = set()
        for name, cap in caps.items():
            if name != "base" and capsule_halfspace_distance(cap, self.scene.table_z) < 0:
                out.add((name, "table"))
            if not capsule_clear_of(cap, body.center, body.bound) \
                    and capsule_cylinder_distance(cap, body) < 0:
                out.add((name, "object"))
            skip_handle = closure_zone and name in ("palm", "finger_l", "finger_r")
            if not skip_handle and not capsule_clear_of(cap, handle.center, handle.bound) \
                    and capsule_box_distance(cap, handle) < 0:
                out.add((name, "handle"))
        for a, b in self._SELF_PAIRS:
            if capsule_capsule_distance(caps[a], caps[b]) < 0:
                out.add((a, b))
        return frozenset(out)

    # ------------------------------------------------------------ observe

    def observe(self, state: WorldState, raw=None) -> np.ndarray:
        """63-dim vector: pose (p, q) of the 6 arm joints, the gripper finger
        frame, the end-effector, and the target object, in that order."""
        if raw is None:
            raw = fk_raw(self.chain, state.joint_state.angles)
        obs = np.empty(OBS_DIM)
        i = 0
        for (px, py, pz), (qw, qx, qy, qz) in raw:
            if qw < 0.0:
                qw, qx, qy, qz = -qw, -qx, -qy, -qz
            obs[i:i + 7] = (px, py, pz, qw, qx, qy, qz)
            i += 7
        obs[56:59] = state.object_pose.p
        obs[59:63] = state.object_pose.q
        return obs

    # ------------------------------------------------------------ step

    def step(self, state: WorldState, action: np.ndarray,
             dt: float | None = None) -> StepOutcome:
        """Integrate one velocity command: clip to per-joint speed caps and
        joint limits, evaluate events and termination. Deterministic."""
        if state.terminal is not None:
            raise InputError("episode is terminal; reset the environment")
        action = np.asarray(action, float).reshape(ACTION_DIM)
        if not np.all(np.isfinite(action)):
            raise InputError("action contains non-finite values")
        dt = self.scene.dt if dt is None else dt

        prev_raw = fk_raw(self.chain, state.joint_state.angles)
        prev_m = self.metrics(state, prev_raw)
        prev_t1 = self.task_predicate(state, TaskId.TASK1, prev_m)

        caps = self.chain.max_speeds
        v = np.clip(action, -caps, caps)
        angles = self.chain.clip_angles(state.joint_state.angles + v * dt)
        new = replace(state, joint_state=JointState(angles, v),
                      step_count=state.step_count + 1)

        raw = fk_raw(self.chain, angles)
        m = self.metrics(new, raw)
        th = self.scene.thresholds
        events = []
        task = state.active_task
        if task is TaskId.TASK1:
            events.append(RewardEvent(EventTag.DIRECTION_APPROACH,
                                      (prev_m.align_angle - m.align_angle) / _ALIGN_NORM))
            events.append(RewardEvent(EventTag.POSITION_APPROACH,
                                      (prev_m.ray_distance - m.ray_distance) / _DIST_NORM))
        elif task is TaskId.TASK2:
            events.append(RewardEvent(EventTag.GRASP_POINT_APPROACH,
                                      (prev_m.point_distance - m.point_distance) / _DIST_NORM))
            if m.align_angle > th.align + th.hysteresis:
                events.append(RewardEvent(EventTag.MISALIGNED_DURING_TASK2))

        # task completions, possibly chaining through several tasks
        transition = None
        terminal = None
        active = task
        while True:
            status = self.task_predicate(new, active, m)
            if status is not TaskStatus.SUCCESS:
                break
            if active is TaskId.TASK1 and prev_t1 is not TaskStatus.SUCCESS:
                events.append(RewardEvent(EventTag.REACHED_DIRECTION))
            if active is TaskId.TASK3:
                events.append(RewardEvent(EventTag.HAND_CLOSED_AT_GRASP_POINT))
            events.append(RewardEvent(EventTag.TASK_SUCCESS, 1.0, active))
            transition = active
            if active is new.final_task:
                terminal = TerminalCause.SUCCESS
                break
            active = active.successor
        new = replace(new, active_task=active)

        if terminal is None:
            pairs = self.check_collision(new, raw)
            if pairs:
                events.append(RewardEvent(EventTag.COLLISION))
                terminal = TerminalCause.COLLISION
            elif m.object_distance > th.drift_distance:
                events.append(RewardEvent(EventTag.DRIFT_AWAY))
                terminal = TerminalCause.DRIFT_AWAY
            elif new.step_count >= self.scene.max_steps:
                events.append(RewardEvent(EventTag.STEP_LIMIT))
                terminal = TerminalCause.TIMEOUT

        new = replace(new, terminal=terminal)
        return StepOutcome(state=new, observation=self.observe(new, raw),
                           events=tuple(events), task_transition=transition,
                           terminal=terminal)


def load_default_env(chain_path=None, scene_path=None) -> GraspEnv:
    from .kinematics import load_chain
    presets = Path(__file__).parent / "presets"
    chain = load_chain(chain_path or presets / "chain_generic6r.yaml")
    scene = load_scene(scene_path or presets / "scene_cup_default.yaml")
    return GraspEnv(chain, scene)
