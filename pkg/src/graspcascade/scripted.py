"""IK-driven oracle controllers.

These solve the three tasks directly with differential IK. They generate
synthetic demonstrations, provide reset priors for later-task training
before learned policies exist, and anchor tests: if the scripted solver
cannot complete a task under the configured thresholds, the scene is
miswired, not the learner.
"""

from __future__ import annotations

import numpy as np

from .environment import GraspEnv, WorldState
from .kinematics import IkConfig, N_ARM_JOINTS, ik_step
from .tasks import TaskId
from .transforms import Pose, matrix_to_quat


def grasp_orientation(state: WorldState, lateral_local: np.ndarray) -> Pose:
    """Tool orientation with the approach axis along the grasp direction and
    the finger-separation axis along the object's lateral hint."""
    z = state.grasp_direction
    lat = state.object_pose.rotate_vector(lateral_local)
    x = lat - np.dot(lat, z) * z
    n = np.linalg.norm(x)
    if n < 1e-9:
        ref = np.array([1.0, 0.0, 0.0])
        x = ref - np.dot(ref, z) * z
        n = np.linalg.norm(x)
    x = x / n
    y = np.cross(z, x)
    R = np.column_stack([x, y, z])
    return Pose(np.zeros(3), matrix_to_quat(R))


class ScriptedGraspController:
    """Completes whatever the state's active task is.

    pace in (0, 1] scales the per-step IK clamps (and the closing speed), so
    a low pace imitates a careful human operator; noise adds Gaussian jitter
    to the commanded joint velocities.
    """

    def __init__(self, env: GraspEnv, standoff: float = 0.13, pace: float = 1.0,
                 noise: float = 0.0, rng: np.random.Generator | None = None):
        self.env = env
        self.standoff = standoff
        self.pace = float(pace)
        self.noise = float(noise)
        self.rng = rng
        base = IkConfig()
        self.ik_config = IkConfig(
            damping=base.damping,
            clamp_linear=base.clamp_linear * self.pace,
            clamp_angular=base.clamp_angular * self.pace,
            max_joint_step=base.max_joint_step,
        )

    def begin_episode(self) -> None:
        pass

    def target_pose(self, state: WorldState) -> Pose:
        orient = grasp_orientation(state, self.env.scene.grasp_lateral_local)
        if state.active_task is TaskId.TASK1:
            p = state.grasp_point - self.standoff * state.grasp_direction
        else:
            p = state.grasp_point
        return Pose(p, orient.q)

    def act(self, env: GraspEnv, state: WorldState) -> np.ndarray:
        dt = env.scene.dt
        dtheta = ik_step(env.chain, state.joint_state,
                         self.target_pose(state), self.ik_config)
        action = np.zeros(7)
        action[:N_ARM_JOINTS] = dtheta / dt
        if state.active_task is TaskId.TASK3:
            m = env.metrics(state)
            if m.closure < env.scene.thresholds.closure_fraction + 0.05:
                action[6] = env.chain.gripper.max_speed * self.pace
        if self.noise > 0.0 and self.rng is not None:
            action[:N_ARM_JOINTS] += self.rng.normal(0.0, self.noise, N_ARM_JOINTS)
        return action


def scripted_priors(env: GraspEnv, **kwargs) -> dict:
    """Prior-policy table mapping every task to the scripted controller."""
    ctrl = ScriptedGraspController(env, **kwargs)
    return {t: ctrl for t in TaskId}


def record_scripted_demos(env: GraspEnv, n_episodes: int, rng, scene_hash: str,
                          chain_hash: str, pace: float = 0.28,
                          noise: float = 0.08, pace_jitter: float = 0.35,
                          recorder_id: str = "scripted-oracle"):
    """Teleoperation stand-in: n full-grasp episodes from the paced solver.

    Pace varies per episode and velocities carry Gaussian jitter, imitating
    operator variability; the wider state/action support matters for
    adversarial imitation. Only successful grasps are kept; failed attempts
    are discarded and resampled.
    """
    from .demonstrations import EpisodeRecorder
    from .environment import TerminalCause

    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    recorder = EpisodeRecorder(scene_hash, chain_hash, recorder_id)
    kept = 0
    attempts = 0
    while kept < n_episodes:
        attempts += 1
        if attempts > n_episodes * 10:
            raise RuntimeError("scripted demo recording keeps failing; "
                               "check scene/threshold configuration")
        episode_pace = pace * float(rng.uniform(1.0 - pace_jitter,
                                                1.0 + pace_jitter))
        ctrl = ScriptedGraspController(env, pace=episode_pace, noise=noise,
                                       rng=rng)
        state = env.reset(rng)
        recorder.begin_episode(state, env.observe(state))
        terminal = None
        while terminal is None:
            action = ctrl.act(env, state)
            out = env.step(state, action)
            recorder.record_step(state, action, out)
            state = out.state
            terminal = out.terminal
        if terminal is TerminalCause.SUCCESS:
            kept += 1
        else:
            recorder._episodes.pop()  # drop the failed attempt
    return recorder.dataset()
