"""Acceptance suite: every criterion at its stated tolerance, one printed
pass/fail line per criterion.

The end-to-end training criteria live in test_acceptance_e2e.py (session
scale: three full training runs); everything here runs in seconds.
"""

import math
import time

import numpy as np
import pytest
import torch

from graspcascade.configio import preset_path, sha256_file
from graspcascade.environment import GraspEnv, load_scene
from graspcascade.kinematics import load_chain, forward_kinematics, jacobian
from graspcascade.learning.cascade import (CascadeConfig, CascadeState,
                                           TrainingMetrics, cascade_step)
from graspcascade.learning.gae import TrajectoryBatch, compute_gae
from graspcascade.rewards import (EpisodeOutcome, EventTag, Phase, RewardConfig,
                                  RewardEvent, RewardSchedule, advance_schedule,
                                  score_events)
from graspcascade.tasks import TaskId

from harness import (brute_force_gae, discounted_return,
                     finite_difference_jacobian, random_joint_state,
                     run_ik_to_convergence)


def report(name: str, ok: bool, detail: str = ""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


# ------------------------------------------------------------------ GAE


def test_gae_oracle_1000_episodes():
    rng = np.random.default_rng(12345)
    t0 = time.time()
    worst = 0.0
    for _ in range(1000):
        T = int(rng.integers(1, 51))
        gamma = float(rng.choice([0.9, 0.99]))
        lam = float(rng.choice([0.0, 0.5, 0.95, 1.0]))
        rewards = rng.normal(size=T)
        values = rng.normal(size=T)
        terminal = bool(rng.random() < 0.7)
        bootstrap = 0.0 if terminal else float(rng.normal())
        batch = TrajectoryBatch(
            observations=np.zeros((T, 1)), actions=np.zeros((T, 1)),
            log_probs=np.zeros(T), values=values, rewards=rewards,
            episode_starts=np.r_[True, np.zeros(T - 1, bool)],
            task_ids=np.ones(T, int), bootstrap_values=np.array([bootstrap]))
        adv, _ = compute_gae(batch, gamma, lam)
        expected = brute_force_gae(rewards, values, gamma, lam, bootstrap)
        worst = max(worst, float(np.max(np.abs(adv - expected))))
    elapsed = time.time() - t0
    report("GAE matches brute-force summation on 1000 episodes",
           worst < 1e-10 and elapsed < 10.0,
           f"worst |diff| {worst:.2e}, {elapsed:.1f}s")


# ------------------------------------------------------------- step reward


def test_step_reward_decomposition():
    cfg = RewardConfig.default()
    with_step = RewardSchedule(config=cfg)
    for p in (Phase.IMITATION_PLUS_RL, Phase.RL_OPTIMIZE):
        with_step = with_step.with_phase(TaskId.TASK1, p)
    without = RewardSchedule(config=cfg).with_phase(
        TaskId.TASK1, Phase.IMITATION_PLUS_RL)
    rng = np.random.default_rng(99)
    tags = [EventTag.DIRECTION_APPROACH, EventTag.POSITION_APPROACH,
            EventTag.REACHED_DIRECTION, EventTag.COLLISION, EventTag.DRIFT_AWAY]
    worst = 0.0
    for _ in range(100):
        T = int(rng.integers(1, 80))
        gamma = float(rng.choice([0.9, 0.99]))
        episode = []
        for _ in range(T):
            idx = rng.choice(len(tags), size=rng.integers(0, 3), replace=False)
            episode.append(tuple(RewardEvent(tags[i], rng.normal()) for i in idx))
        lhs = discounted_return(
            [score_events(e, TaskId.TASK1, with_step) for e in episode], gamma)
        rhs = discounted_return(
            [score_events(e, TaskId.TASK1, without) for e in episode], gamma) \
            + cfg.step_reward * sum(gamma ** k for k in range(T))
        worst = max(worst, abs(lhs - rhs))
    report("step-reward decomposition exact on 100 random trajectories",
           worst < 1e-12, f"worst |diff| {worst:.2e}")


# ---------------------------------------------------------- next-task reward


def test_next_task_reward_earlier_completion_wins():
    seg2 = [0.4] * 25 + [20.0]
    u2 = float(sum(seg2))

    def total(t_end1: int, gamma: float) -> float:
        rewards = [0.0] * (t_end1 - 1) + [20.0 + u2] + seg2
        return discounted_return(rewards, gamma)

    ok = True
    detail = []
    for gamma in (0.9, 0.99, 0.999):
        early, late = total(40, gamma), total(60, gamma)
        ok &= early > late
        detail.append(f"g={gamma}: {early:.3f} > {late:.3f}")
    report("earlier Task-1 completion strictly increases the discounted total",
           ok, "; ".join(detail))


# ------------------------------------------------------------------- IK


def test_ik_and_jacobian():
    chain = load_chain(preset_path("chain_generic6r.yaml"))
    rng = np.random.default_rng(2024)
    restart = np.random.default_rng(2025)
    t0 = time.time()
    solved = 0
    for _ in range(100):
        goal = random_joint_state(chain, rng, margin=0.25)
        target = forward_kinematics(chain, goal)[-1]
        ok, _, _, _ = run_ik_to_convergence(chain, target, restart_rng=restart)
        solved += ok
    jac_rng = np.random.default_rng(4242)
    worst = 0.0
    for _ in range(1000):
        st = random_joint_state(chain, jac_rng)
        diff = np.max(np.abs(jacobian(chain, st)
                             - finite_difference_jacobian(chain, st, h=1e-7)))
        worst = max(worst, float(diff))
    elapsed = time.time() - t0
    report("IK >= 99/100 targets to < 1 mm / < 0.5 deg; Jacobian vs FD < 1e-6",
           solved >= 99 and worst < 1e-6 and elapsed < 30.0,
           f"{solved}/100 solved, worst Jacobian |diff| {worst:.2e}, {elapsed:.1f}s")


# ------------------------------------------------------------ gradients


def test_gradient_checks():
    from test_learning import (param_arrays, random_sequences, relative_error,
                               tiny_policy)
    from graspcascade.learning.gail import discriminator_loss
    from graspcascade.learning.networks import Discriminator
    from graspcascade.learning.ppo import PPOConfig, ppo_loss
    from harness import numerical_gradient

    net = tiny_policy(seed=3)
    rng = np.random.default_rng(7)
    seqs = random_sequences(net, rng)
    loss, _ = ppo_loss(net, seqs, PPOConfig())
    net.zero_grad()
    loss.backward()
    analytic = [p.grad.clone().numpy() for p in net.parameters()]

    def f():
        val, _ = ppo_loss(net, seqs, PPOConfig())
        return float(val.detach())

    policy_err = max(relative_error(a, n) for a, n in
                     zip(analytic, numerical_gradient(f, param_arrays(net), h=1e-5)))

    torch.manual_seed(2)
    disc = Discriminator(obs_dim=5, act_dim=2, hidden_size=8)
    demo = (rng.normal(size=(6, 5)), rng.normal(size=(6, 2)))
    pol = (rng.normal(size=(7, 5)), rng.normal(size=(7, 2)))
    dloss = discriminator_loss(disc, demo[0], demo[1], pol[0], pol[1])
    disc.zero_grad()
    dloss.backward()
    danalytic = [p.grad.clone().numpy() for p in disc.parameters()]

    def g():
        with torch.no_grad():
            return float(discriminator_loss(disc, demo[0], demo[1],
                                            pol[0], pol[1]))

    disc_err = max(relative_error(a, n) for a, n in
                   zip(danalytic,
                       numerical_gradient(g, [p.detach().numpy()
                                              for p in disc.parameters()],
                                          h=1e-5)))
    report("policy+value and discriminator gradients match finite differences",
           policy_err < 1e-4 and disc_err < 1e-4,
           f"policy rel err {policy_err:.2e}, discriminator rel err {disc_err:.2e}")


# ---------------------------------------------------------- state machines


def _metric(rate=0.0, full=True, ep_len=100.0):
    return TrainingMetrics(success_rate=rate, window_full=full,
                           mean_episode_length=ep_len, env_steps=0)


def _drive_cascade(config, seq):
    s = CascadeState(config=config)
    trace = []
    for m in seq:
        s = cascade_step(s, m)
        trace.append((int(s.training_task), int(s.phase(s.training_task)),
                      s.done))
    return trace


CASCADE_TRACES = [
    # (config kwargs, metric sequence, expected (task, phase, done) trace)
    (dict(plateau_patience=2, plateau_eps=1.0),
     [_metric(0.1), _metric(0.4), _metric(0.9), _metric(ep_len=50.0),
      _metric(ep_len=50.5)],
     [(1, 0, False), (1, 1, False), (1, 2, False), (1, 2, False), (2, 0, False)]),
    (dict(plateau_patience=3, plateau_eps=2.0),
     [_metric(1.0, full=False), _metric(1.0, full=False), _metric(0.5),
      _metric(0.95), _metric(ep_len=80.0), _metric(ep_len=81.0),
      _metric(ep_len=79.5)],
     [(1, 0, False), (1, 0, False), (1, 1, False), (1, 2, False),
      (1, 2, False), (1, 2, False), (2, 0, False)]),
    (dict(plateau_patience=2, plateau_eps=1.0, p_il=0.1),
     [_metric(0.15), _metric(0.05), _metric(0.85), _metric(ep_len=10.0),
      _metric(ep_len=10.1), _metric(0.5), _metric(0.9), _metric(ep_len=9.0),
      _metric(ep_len=9.1), _metric(0.4), _metric(0.8), _metric(ep_len=8.0),
      _metric(ep_len=8.1), _metric(ep_len=7.0), _metric(ep_len=7.2)],
     [(1, 1, False), (1, 1, False), (1, 2, False), (1, 2, False), (2, 0, False),
      (2, 1, False), (2, 2, False), (2, 2, False), (3, 0, False), (3, 1, False),
      (3, 2, False), (3, 2, False), (3, 3, False), (3, 3, False), (3, 3, True)]),
    (dict(plateau_patience=4, plateau_eps=2.0),
     [_metric(0.9), _metric(0.9), _metric(ep_len=120.0), _metric(ep_len=119.5),
      _metric(ep_len=119.8), _metric(ep_len=120.3)],
     [(1, 1, False), (1, 2, False), (1, 2, False), (1, 2, False), (1, 2, False),
      (2, 0, False)]),
    (dict(plateau_patience=3, plateau_eps=2.0),
     [_metric(0.9), _metric(0.9), _metric(ep_len=150.0), _metric(ep_len=140.0),
      _metric(ep_len=130.0), _metric(ep_len=120.0)],
     [(1, 1, False), (1, 2, False), (1, 2, False), (1, 2, False), (1, 2, False),
      (1, 2, False)]),
]


def test_cascade_scripted_traces():
    ok = True
    for i, (kw, seq, expected) in enumerate(CASCADE_TRACES):
        trace = _drive_cascade(CascadeConfig(**kw), seq)
        if trace != expected:
            ok = False
            print(f"  trace {i}: got {trace}, expected {expected}")
    report(f"cascade reproduces {len(CASCADE_TRACES)} scripted traces exactly", ok)


def _sched(config=None, task=TaskId.TASK1, phase=Phase.IMITATION_PLUS_RL):
    from dataclasses import replace as dc
    cfg = config or dc(RewardConfig.default(), window=4, p_opt=0.75,
                       task2_collision_raise_steps=1000)
    s = RewardSchedule(config=cfg, training_task=task)
    for p in (Phase.IMITATION_PLUS_RL, Phase.RL_OPTIMIZE, Phase.WHOLE_MOTION):
        if phase >= p:
            s = s.with_phase(task, p)
    return s


SCHEDULE_TRACES = [
    # outcomes (task, success, steps) -> expected (phase idx, collision stage)
    (TaskId.TASK1,
     [(TaskId.TASK1, False, 100), (TaskId.TASK1, True, 100),
      (TaskId.TASK1, True, 100), (TaskId.TASK1, True, 100),
      (TaskId.TASK1, True, 100)],
     [(1, 0), (1, 0), (1, 0), (2, 0), (2, 0)]),
    (TaskId.TASK2,
     [(TaskId.TASK2, False, 300), (TaskId.TASK2, False, 300),
      (TaskId.TASK2, False, 300), (TaskId.TASK2, False, 300),
      (TaskId.TASK2, True, 300), (TaskId.TASK2, False, 300)],
     [(1, 0), (1, 0), (1, 0), (1, 1), (1, 2), (1, 2)]),
    (TaskId.TASK2,
     [(TaskId.TASK2, True, 100), (TaskId.TASK2, False, 100),
      (TaskId.TASK2, False, 2000), (TaskId.TASK2, False, 100)],
     [(1, 2), (1, 2), (1, 2), (1, 2)]),
    (TaskId.TASK1,
     [(TaskId.TASK1, True, 50), (TaskId.TASK1, True, 50),
      (TaskId.TASK1, False, 50), (TaskId.TASK1, True, 50),
      (TaskId.TASK1, True, 50), (TaskId.TASK1, True, 50)],
     [(1, 0), (1, 0), (1, 0), (2, 0), (2, 0), (2, 0)]),
    (TaskId.TASK1,
     [(TaskId.TASK1, False, 50)] * 6,
     [(1, 0)] * 6),
]


def test_schedule_scripted_traces():
    ok = True
    for i, (task, outcomes, expected) in enumerate(SCHEDULE_TRACES):
        s = _sched(task=task)
        got = []
        for t, success, steps in outcomes:
            s = advance_schedule(s, EpisodeOutcome(t, success, steps))
            got.append((int(s.phase(task)), int(s.collision_stage)))
        if got != expected:
            ok = False
            print(f"  schedule trace {i}: got {got}, expected {expected}")
    report(f"schedule reproduces {len(SCHEDULE_TRACES)} scripted traces exactly",
           ok)


# ------------------------------------------------------------------ demos


def test_demo_round_trip_and_replay(tmp_path):
    from graspcascade.demonstrations import load, replay, save
    from graspcascade.scripted import record_scripted_demos

    scene_p = preset_path("scene_cup_toy.yaml")
    chain_p = preset_path("chain_generic6r.yaml")
    env = GraspEnv(load_chain(chain_p), load_scene(scene_p))
    sh, chh = sha256_file(scene_p), sha256_file(chain_p)
    demos = record_scripted_demos(env, 5, 77, sh, chh, pace=0.5, noise=0.03)
    path = tmp_path / "d.jsonl"
    save(demos, path)
    loaded = load(path, sh, chh)
    bitwise = all(
        np.array_equal(a.observation, b.observation)
        and np.array_equal(a.action, b.action)
        for la, lb in zip(loaded.episodes, demos.episodes)
        for a, b in zip(la.steps, lb.steps))
    replay_ok = True
    for ep in loaded.episodes:
        observations, terminal = replay(env, ep)
        replay_ok &= terminal is ep.terminal
        for t in range(1, len(ep.steps)):
            replay_ok &= bool(np.array_equal(observations[t - 1],
                                             ep.steps[t].observation))
    report("demonstration save/load bitwise; record-then-replay bitwise",
           bitwise and replay_ok)
