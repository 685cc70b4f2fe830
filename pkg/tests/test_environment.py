import math

import numpy as np
import pytest

from graspcascade.environment import (ACTION_DIM, GraspEnv, OBS_DIM, StepOutcome,
                                      TaskStatus, TerminalCause, load_default_env,
                                      load_scene)
from graspcascade.configio import preset_path
from graspcascade.errors import InputError, SetupError
from graspcascade.kinematics import JointState
from graspcascade.rewards import EventTag
from graspcascade.scripted import ScriptedGraspController, grasp_orientation, scripted_priors
from graspcascade.tasks import TaskId
from graspcascade.transforms import Pose

from dataclasses import replace

from harness import run_ik_to_convergence


@pytest.fixture(scope="module")
def env():
    return load_default_env()


def state_with_tcp_at(env, target: Pose, base_state=None, rng_seed=7):
    """Construct a WorldState whose arm realizes the given TCP pose."""
    base = base_state if base_state is not None else env.reset(rng_seed)
    rng = np.random.default_rng(123)
    ok, _, _, joint = run_ik_to_convergence(env.chain, target, restart_rng=rng,
                                            pos_tol=2e-4, ang_tol=math.radians(0.2))
    assert ok, "IK setup for the test fixture failed"
    return replace(base, joint_state=joint)


def aligned_pose(env, state, height):
    q = grasp_orientation(state, env.scene.grasp_lateral_local).q
    return Pose(state.grasp_point - height * state.grasp_direction, q)


# ------------------------------------------------------------------- reset


def test_reset_deterministic_under_fixed_seed(env):
    a = env.reset(42)
    b = env.reset(42)
    assert np.array_equal(a.joint_state.angles, b.joint_state.angles)
    assert np.array_equal(a.object_pose.p, b.object_pose.p)
    assert np.array_equal(a.object_pose.q, b.object_pose.q)
    assert np.array_equal(a.grasp_point, b.grasp_point)
    assert a.active_task is TaskId.TASK1 and a.step_count == 0


def test_reset_task2_start_satisfies_task1(env):
    priors = scripted_priors(env)
    state = env.reset(3, start_task=TaskId.TASK2, prior_policies=priors)
    assert state.active_task is TaskId.TASK2
    assert state.step_count == 0
    assert env.task_predicate(state, TaskId.TASK1) is TaskStatus.SUCCESS


def test_reset_task3_start_at_grasp_point_gripper_open(env):
    priors = scripted_priors(env)
    state = env.reset(4, start_task=TaskId.TASK3, prior_policies=priors)
    m = env.metrics(state)
    th = env.scene.thresholds
    assert state.active_task is TaskId.TASK3
    assert m.point_distance < th.near_distance
    assert m.align_angle < th.align
    assert m.closure < th.closure_fraction


def test_reset_later_task_requires_priors(env):
    with pytest.raises(SetupError):
        env.reset(5, start_task=TaskId.TASK2)


# ------------------------------------------------------------------- step


def test_zero_action_keeps_pose_increments_count(env):
    state = env.reset(0)
    out = env.step(state, np.zeros(ACTION_DIM))
    assert np.array_equal(out.state.joint_state.angles, state.joint_state.angles)
    assert out.state.step_count == state.step_count + 1
    assert out.terminal is None


def test_step_rejects_non_finite_action(env):
    state = env.reset(0)
    bad = np.zeros(ACTION_DIM)
    bad[2] = np.nan
    with pytest.raises(InputError):
        env.step(state, bad)


def test_step_rejects_terminal_state(env):
    state = env.reset(0)
    state = replace(state, terminal=TerminalCause.TIMEOUT)
    with pytest.raises(InputError):
        env.step(state, np.zeros(ACTION_DIM))


def test_driving_into_object_collides(env):
    state = env.reset(11)
    # park the hand right beside the cup body, then push into it
    obj = state.object_pose.p
    q = grasp_orientation(state, env.scene.grasp_lateral_local).q
    side = Pose(np.array([obj[0], obj[1] + 0.13, obj[2] + 0.05]), q)
    state = state_with_tcp_at(env, side, base_state=state)
    assert not env.check_collision(state)
    terminal = None
    for _ in range(60):
        # drive straight at the cup's axis
        from graspcascade.kinematics import ik_step
        target = Pose(np.array([obj[0], obj[1], obj[2] + 0.05]), q)
        dtheta = ik_step(env.chain, state.joint_state, target)
        action = np.zeros(ACTION_DIM)
        action[:6] = dtheta / env.scene.dt
        out = env.step(state, action)
        state = out.state
        if out.terminal is not None:
            terminal = out.terminal
            tags = {e.tag for e in out.events}
            assert EventTag.COLLISION in tags
            break
    assert terminal is TerminalCause.COLLISION


def test_step_limit_terminates_with_timeout(env):
    state = env.reset(1)
    state = replace(state, step_count=env.scene.max_steps - 1)
    out = env.step(state, np.zeros(ACTION_DIM))
    assert out.terminal is TerminalCause.TIMEOUT
    assert EventTag.STEP_LIMIT in {e.tag for e in out.events}


def test_drift_away_terminates(env):
    state = env.reset(1)
    # fake an object a meter away from the hand
    far = replace(state, object_pose=Pose(np.array([-1.2, 0.0, 0.0]),
                                          np.array([1.0, 0, 0, 0])))
    out = env.step(far, np.zeros(ACTION_DIM))
    assert out.terminal is TerminalCause.DRIFT_AWAY
    assert EventTag.DRIFT_AWAY in {e.tag for e in out.events}


def test_step_deterministic_bitwise(env):
    state = env.reset(9)
    rng = np.random.default_rng(17)
    action = rng.normal(0, 0.5, ACTION_DIM)
    a = env.step(state, action)
    b = env.step(state, action)
    assert np.array_equal(a.observation, b.observation)
    assert a.events == b.events
    assert a.terminal == b.terminal


# ------------------------------------------------------------------- observe


def test_observation_length_and_target_block(env):
    state = env.reset(2)
    obs = env.observe(state)
    assert obs.shape == (OBS_DIM,)
    np.testing.assert_array_equal(obs[56:59], state.object_pose.p)
    np.testing.assert_array_equal(obs[59:63], state.object_pose.q)


def test_observation_quaternion_blocks_unit_norm(env):
    rng = np.random.default_rng(33)
    state = env.reset(12)
    lo, hi = env.chain.limits_lo, env.chain.limits_hi
    for _ in range(50):
        m = np.minimum(0.05, 0.4 * (hi - lo))
        js = JointState(rng.uniform(lo + m, hi - m), np.zeros(7))
        obs = env.observe(replace(state, joint_state=js))
        for k in range(9):
            q = obs[7 * k + 3: 7 * k + 7]
            assert abs(np.linalg.norm(q) - 1.0) < 1e-9


def test_gripper_only_change_localized_in_observation(env):
    state = env.reset(6)
    a = state.joint_state.angles.copy()
    b = a.copy()
    b[6] = 0.5
    obs_a = env.observe(replace(state, joint_state=JointState(a, np.zeros(7))))
    obs_b = env.observe(replace(state, joint_state=JointState(b, np.zeros(7))))
    diff = np.flatnonzero(obs_a != obs_b)
    assert len(diff) > 0
    # gripper entity is the 7th block: indices 42..48
    assert set(diff).issubset(set(range(42, 49)))


# ------------------------------------------------------------------- predicates


def test_aligned_far_is_task1_success_task2_in_progress(env):
    state = env.reset(21)
    state = state_with_tcp_at(env, aligned_pose(env, state, 0.15),
                              base_state=state)
    assert env.task_predicate(state, TaskId.TASK1) is TaskStatus.SUCCESS
    assert env.task_predicate(state, TaskId.TASK2) is TaskStatus.IN_PROGRESS


def test_at_grasp_point_open_is_task2_success_task3_in_progress(env):
    state = env.reset(22)
    state = state_with_tcp_at(env, aligned_pose(env, state, 0.0),
                              base_state=state)
    assert env.task_predicate(state, TaskId.TASK2) is TaskStatus.SUCCESS
    assert env.task_predicate(state, TaskId.TASK3) is TaskStatus.IN_PROGRESS


def test_misaligned_double_threshold_violates_task2(env):
    state = env.reset(23)
    state = state_with_tcp_at(env, aligned_pose(env, state, 0.10),
                              base_state=state)
    a = state.joint_state.angles.copy()
    a[4] += 2.5 * env.scene.thresholds.align  # tilt the wrist well past hysteresis
    tilted = replace(state, joint_state=JointState(a, np.zeros(7)),
                     active_task=TaskId.TASK2)
    assert env.task_predicate(tilted, TaskId.TASK2) is TaskStatus.VIOLATED


def test_task2_success_implies_task1_constraint(env):
    # monotone consistency on constructed states around the grasp point
    rng = np.random.default_rng(55)
    checked = 0
    for seed in range(40):
        state = env.reset(seed)
        state = state_with_tcp_at(env, aligned_pose(env, state, 0.0),
                                  base_state=state)
        a = state.joint_state.angles.copy()
        a[:6] += rng.normal(0, 0.01, 6)
        probe = replace(state, joint_state=JointState(
            env.chain.clip_angles(a), np.zeros(7)))
        if env.task_predicate(probe, TaskId.TASK2) is TaskStatus.SUCCESS:
            m = env.metrics(probe)
            assert m.align_angle < env.scene.thresholds.align
            assert m.ray_distance < env.scene.thresholds.corridor_radius
            checked += 1
    assert checked > 5


# ------------------------------------------------------------------- collision


def test_home_far_object_no_collision(env):
    state = env.reset(31)
    assert env.check_collision(state) == frozenset()


def test_tcp_inside_object_collides(env):
    state = env.reset(32)
    obj = state.object_pose.p
    q = grasp_orientation(state, env.scene.grasp_lateral_local).q
    inside = Pose(np.array([obj[0], obj[1], obj[2] + 0.05]), q)
    state = state_with_tcp_at(env, inside, base_state=state)
    pairs = env.check_collision(state)
    assert any(b == "object" for _, b in pairs)


def test_closure_zone_permits_handle_contact(env):
    priors = scripted_priors(env)
    state = env.reset(33, start_task=TaskId.TASK3, prior_policies=priors)
    # close the fingers through the handle: permitted during Task-3 closure
    a = state.joint_state.angles.copy()
    a[6] = env.chain.gripper.limit_hi
    closed = replace(state, joint_state=JointState(a, np.zeros(7)))
    pairs = env.check_collision(closed)
    assert not any(b == "handle" for _, b in pairs)
    # the same configuration outside Task 3 is a real collision check
    closed_t2 = replace(closed, active_task=TaskId.TASK2)
    pairs_t2 = env.check_collision(closed_t2)
    assert any(b == "handle" for a_, b in pairs_t2)


# ------------------------------------------------------------------- episodes


def run_episode(env, state, policy):
    while True:
        out = env.step(state, policy(state))
        state = out.state
        if out.terminal is not None:
            return out


def test_scripted_solver_completes_full_grasp(env):
    ctrl = ScriptedGraspController(env)
    rng = np.random.default_rng(77)
    for _ in range(5):
        state = env.reset(rng)
        out = run_episode(env, state, lambda s: ctrl.act(env, s))
        assert out.terminal is TerminalCause.SUCCESS
        assert out.state.active_task is TaskId.TASK3


def test_scripted_solver_completes_single_tasks(env):
    priors = scripted_priors(env)
    ctrl = ScriptedGraspController(env)
    for task, seed in ((TaskId.TASK1, 41), (TaskId.TASK2, 42), (TaskId.TASK3, 43)):
        state = env.reset(seed, start_task=task,
                          final_task=task,
                          prior_policies=priors if task > TaskId.TASK1 else None)
        out = run_episode(env, state, lambda s: ctrl.act(env, s))
        assert out.terminal is TerminalCause.SUCCESS
        assert out.task_transition is task


def test_every_episode_ends_in_exactly_one_cause(env):
    rng = np.random.default_rng(88)
    causes = set()
    for ep in range(8):
        state = env.reset(rng)
        scale = rng.uniform(0.1, 1.5)
        out = run_episode(
            env, state, lambda s: rng.normal(0, scale, ACTION_DIM))
        assert out.terminal in (TerminalCause.SUCCESS, TerminalCause.COLLISION,
                                TerminalCause.TIMEOUT, TerminalCause.DRIFT_AWAY)
        causes.add(out.terminal)
    assert len(causes) >= 1


def test_states_stay_within_limits_and_finite(env):
    rng = np.random.default_rng(89)
    state = env.reset(rng)
    lo, hi = env.chain.limits_lo, env.chain.limits_hi
    for _ in range(200):
        out = env.step(state, rng.normal(0, 2.0, ACTION_DIM))
        a = out.state.joint_state.angles
        assert np.all(np.isfinite(a))
        assert np.all(a >= lo - 1e-12) and np.all(a <= hi + 1e-12)
        if out.terminal is not None:
            state = env.reset(rng)
        else:
            state = out.state


def test_scene_file_version_checked(tmp_path):
    p = tmp_path / "scene.yaml"
    p.write_text("format_version: 7\nobject: {}\n")
    with pytest.raises(Exception):
        load_scene(p)
