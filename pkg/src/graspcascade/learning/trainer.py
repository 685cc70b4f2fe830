"""Training orchestration: rollouts, updates, schedule/cascade bookkeeping,
metrics logging, checkpoints, and evaluation.

Three modes: the full task cascade, GAIL-only on undivided episodes, and
RL-only with the combined task rewards. Single-process rollouts; runs are
bit-reproducible for a fixed seed (torch threads pinned to 1).
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from ..demonstrations import DemonstrationSet
from ..environment import GraspEnv, TerminalCause
from ..errors import ConfigError, InputError
from ..rewards import (EpisodeOutcome, EventTag, Phase, RewardConfig,
                       RewardSchedule, advance_schedule, next_task_reward,
                       score_events)
from ..tasks import ALL_TASKS, TaskId
from .cascade import CascadeConfig, CascadeState, TrainingMetrics, cascade_step
from .gae import TrajectoryBatch, compute_gae, normalize_advantages
from .gail import GailConfig, blended_reward, discriminator_update, gail_reward
from .networks import Discriminator, RecurrentPolicy
from .ppo import EpisodeSequence, PPOConfig, policy_update

CHECKPOINT_VERSION = 1

MODES = ("cascade", "gail_only", "rl_only")


@dataclass(frozen=True)
class TrainerConfig:
    mode: str = "cascade"
    seed: int = 0
    max_env_steps: int = 300_000
    rollout_steps: int = 1024
    hidden_size: int = 64
    num_layers: int = 1
    gamma: float = 0.99
    lam: float = 0.95
    ppo: PPOConfig = field(default_factory=PPOConfig)
    gail: GailConfig = field(default_factory=GailConfig)
    cascade: CascadeConfig = field(default_factory=CascadeConfig)
    eval_every: int = 0
    eval_episodes: int = 20
    checkpoint_every: int = 50
    torch_threads: int = 1
    log_std_init: float = -1.6    # exploration std ~ demonstration action scale
    reward_scale: float = 0.1     # training-only scaling; keeps value targets O(10)
    reset_reuse: int = 3          # episodes per prior-policy reset rollout
    # reference-state initialization: during the imitation phases this
    # fraction of episodes starts from a state sampled along a demonstration
    # (reconstructed by exact replay), which puts rollouts inside the
    # discriminator's demo-like region from the first iteration and cuts the
    # discovery phase by an order of magnitude
    ref_init_prob: float = 0.5
    # initialize each next task's network from the previous task's trained
    # weights: task i+1 must keep satisfying task i's constraint, so the
    # transferred policy already holds it and imitation only learns the delta
    warm_start_next_task: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")


class NetPolicy:
    """Adapter exposing a trained network as a reset-prior policy."""

    def __init__(self, env: GraspEnv, net: RecurrentPolicy,
                 deterministic: bool = True, on_step=None):
        self.env = env
        self.net = net
        self.deterministic = deterministic
        self.on_step = on_step
        self._hidden = None

    def begin_episode(self):
        self._hidden = self.net.initial_hidden()

    def act(self, env, state):
        if self._hidden is None:
            self._hidden = self.net.initial_hidden()
        obs = env.observe(state)
        action, _, _, self._hidden = self.net.step(
            obs, self._hidden, deterministic=self.deterministic)
        if self.on_step is not None:
            self.on_step()
        return action


@dataclass
class _Rollout:
    """One completed episode of training data.

    `actions` holds the sampled commands (what the log-probs describe);
    `executed` holds the speed-clipped commands the simulator applied,
    which is what demonstrations store and the discriminator sees.
    """

    observations: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    executed: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    values: list = field(default_factory=list)
    env_rewards: list = field(default_factory=list)
    tasks: list = field(default_factory=list)       # acting task per step
    completions: dict = field(default_factory=dict)  # task -> step index
    terminal: TerminalCause | None = None

    def __len__(self):
        return len(self.actions)

    @property
    def success(self) -> bool:
        return self.terminal is TerminalCause.SUCCESS


class Trainer:
    def __init__(self, env: GraspEnv, demos: DemonstrationSet | None,
                 config: TrainerConfig, reward_config: RewardConfig,
                 out_dir, scene_hash: str = "", chain_hash: str = ""):
        if config.mode in ("cascade", "gail_only") and (demos is None or len(demos) == 0):
            raise ConfigError(f"mode {config.mode} requires demonstrations")
        torch.set_num_threads(config.torch_threads)
        self.env = env
        self.config = config
        self.reward_config = reward_config
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.scene_hash = scene_hash
        self.chain_hash = chain_hash

        self.rng = np.random.default_rng(config.seed)
        torch.manual_seed(config.seed)
        self.torch_gen = torch.Generator().manual_seed(config.seed)

        obs_dim, act_dim = 63, 7
        def new_net():
            return RecurrentPolicy(obs_dim, act_dim, config.hidden_size,
                                   config.num_layers,
                                   log_std_init=config.log_std_init)
        if config.mode == "cascade":
            self.nets = {t: new_net() for t in ALL_TASKS}
            self.discs = {t: Discriminator(obs_dim, act_dim, config.hidden_size)
                          for t in ALL_TASKS}
        else:
            net = new_net()
            self.nets = {t: net for t in ALL_TASKS}
            disc = Discriminator(obs_dim, act_dim, config.hidden_size)
            self.discs = {t: disc for t in ALL_TASKS}
        self.optimizers = {id(n): torch.optim.Adam(n.parameters(),
                                                   lr=config.ppo.learning_rate)
                           for n in set(self.nets.values())}
        self.disc_optimizers = {id(d): torch.optim.Adam(d.parameters(),
                                                        lr=config.gail.learning_rate)
                                for d in set(self.discs.values())}

        self.schedule = RewardSchedule(config=reward_config)
        self.cascade = CascadeState(config=config.cascade,
                                    gail_mix=config.cascade.mix_initial)
        self.env_steps = 0
        self.iteration = 0
        self._reset_cache = None
        self._phase_entry_steps = 0
        self.demo_segments = self._index_demos(demos) if demos is not None else {}
        self._ref_states = self._demo_reference_states(demos) \
            if demos is not None and config.ref_init_prob > 0 else {}
        self._metrics_fh = open(self.out_dir / "metrics.jsonl", "a")

    # ------------------------------------------------------------ demos

    def _index_demos(self, demos: DemonstrationSet) -> dict:
        """(obs, act) arrays per task, plus the full undivided set."""
        per_task = {t: ([], []) for t in ALL_TASKS}
        for ep in demos.episodes:
            for s in ep.steps:
                per_task[s.task][0].append(s.observation)
                per_task[s.task][1].append(s.action)
        out = {}
        all_obs, all_act = [], []
        for t, (o, a) in per_task.items():
            if o:
                out[t] = (np.asarray(o), np.asarray(a))
                all_obs.extend(o)
                all_act.extend(a)
        out["all"] = (np.asarray(all_obs), np.asarray(all_act))
        return out

    def _demo_batch(self, task: TaskId):
        if self.config.mode == "gail_only":
            return self.demo_segments["all"]
        if task not in self.demo_segments:
            raise ConfigError(f"no demonstration data for {task.name}")
        return self.demo_segments[task]

    def _demo_reference_states(self, demos: DemonstrationSet,
                               stride: int = 3) -> dict:
        """World states along the demonstrations, keyed by active task,
        reconstructed by exact replay (the replay steps count as env steps)."""
        from dataclasses import replace as dc_replace

        from ..kinematics import JointState

        by_task = {t: [] for t in ALL_TASKS}
        for ep in demos.episodes:
            state = self.env._initial_state(ep.initial.object_pose,
                                            TaskId.TASK1, TaskId.TASK3)
            state = dc_replace(state, joint_state=JointState(
                ep.initial.joint_angles.copy(), np.zeros(7)))
            for t, step in enumerate(ep.steps):
                if t % stride == 0 and state.terminal is None:
                    by_task[state.active_task].append(state)
                if state.terminal is not None:
                    break
                out = self.env.step(state, step.action)
                self.env_steps += 1
                state = out.state
        return by_task

    def _ref_state(self, task: TaskId | None, final_task: TaskId):
        from dataclasses import replace as dc_replace

        if task is None:
            pool = [s for states in self._ref_states.values() for s in states]
        else:
            pool = self._ref_states.get(task)
        if not pool:
            return None
        state = pool[int(self.rng.integers(0, len(pool)))]
        return dc_replace(state, step_count=0, final_task=final_task,
                          terminal=None)

    # ------------------------------------------------------------ rollouts

    def _prior_policies(self, task: TaskId) -> dict | None:
        if task is TaskId.TASK1:
            return None
        def bump():
            self.env_steps += 1
        return {t: NetPolicy(self.env, self.nets[t], on_step=bump)
                for t in ALL_TASKS if t < task}

    def _reset_for(self, start_task: TaskId, final_task: TaskId,
                   single_net: bool):
        """Reset with prior-task policies; the produced start state is reused
        for a few episodes since prior rollouts cost real environment steps."""
        from ..errors import SetupError

        if start_task is TaskId.TASK1 or single_net:
            return self.env.reset(self.rng, start_task=TaskId.TASK1,
                                  final_task=final_task)
        cache = self._reset_cache
        if cache is not None and cache[0] == (start_task, final_task) \
                and cache[2] < self.config.reset_reuse:
            self._reset_cache = (cache[0], cache[1], cache[2] + 1)
            return cache[1]
        try:
            state = self.env.reset(self.rng, start_task=start_task,
                                   prior_policies=self._prior_policies(start_task),
                                   final_task=final_task)
            self._reset_cache = ((start_task, final_task), state, 1)
            return state
        except SetupError:
            # prior nets flaked on this sample: run the episode from the
            # top instead; earlier segments are skipped by the updates
            return self.env.reset(self.rng, start_task=TaskId.TASK1,
                                  final_task=final_task)

    def _collect(self, start_task: TaskId, final_task: TaskId,
                 single_net: bool, use_ref_init: bool = False) -> list:
        """Complete episodes totalling at least rollout_steps steps."""
        rollouts = []
        steps = 0
        while steps < self.config.rollout_steps:
            state = None
            if use_ref_init and self.rng.random() < self.config.ref_init_prob:
                state = self._ref_state(None if single_net else start_task,
                                        final_task)
            if state is None:
                state = self._reset_for(start_task, final_task, single_net)
            ro = _Rollout()
            hiddens = {t: self.nets[t].initial_hidden() for t in ALL_TASKS}
            obs = self.env.observe(state)
            while True:
                task = state.active_task
                net = self.nets[task]
                action, logp, value, hiddens[task] = net.step(
                    obs, hiddens[task], generator=self.torch_gen)
                out = self.env.step(state, action)
                ro.observations.append(obs)
                ro.actions.append(action.copy())
                ro.executed.append(out.state.joint_state.velocities.copy())
                ro.log_probs.append(logp)
                ro.values.append(value)
                ro.tasks.append(task)
                ro.env_rewards.append(score_events(out.events, task, self.schedule))
                if out.task_transition is not None:
                    ro.completions[out.task_transition] = len(ro) - 1
                obs = out.observation
                state = out.state
                steps += 1
                self.env_steps += 1
                if out.terminal is not None:
                    ro.terminal = out.terminal
                    break
            rollouts.append(ro)
        return rollouts

    # ------------------------------------------------------------ updates

    def _apply_gail(self, rollouts: list, task: TaskId, phase: Phase) -> dict:
        """Discriminator update + blended rewards; returns diagnostics."""
        disc = self.discs[task]
        opt = self.disc_optimizers[id(disc)]
        obs = np.concatenate([np.asarray(r.observations) for r in rollouts])
        act = np.concatenate([np.asarray(r.executed) for r in rollouts])
        diag = discriminator_update(disc, opt, self._demo_batch(task),
                                    (obs, act), self.config.gail, self.rng)
        rewards = gail_reward(disc, obs, act, self.config.gail.reward_ceiling)
        if self.config.gail.center_reward:
            rewards = np.maximum(rewards - np.log(2.0), 0.0)
        i = 0
        for r in rollouts:
            for t in range(len(r)):
                r.env_rewards[t] = blended_reward(r.env_rewards[t], rewards[i],
                                                  phase, self.cascade.gail_mix)
                i += 1
        if phase is Phase.IMITATION_PLUS_RL:
            for g in opt.param_groups:
                g["lr"] *= self.config.gail.lr_decay
        return diag

    def _inject_next_task_rewards(self, rollouts: list) -> None:
        for r in rollouts:
            segments = {}
            for t, reward in zip(r.tasks, r.env_rewards):
                segments[t] = segments.get(t, 0.0) + reward
            for task, step_idx in r.completions.items():
                bonus = next_task_reward(task, segments, self.schedule)
                if bonus != 0.0:
                    r.env_rewards[step_idx] += bonus

    def _ppo_update(self, rollouts: list, only_task: TaskId | None,
                    precision_phase: bool = False) -> dict:
        ppo_cfg = self.config.ppo
        if precision_phase:
            from dataclasses import replace as dc_replace
            ppo_cfg = dc_replace(ppo_cfg,
                                 entropy_coef=ppo_cfg.entropy_coef_optimize)
        adv_all = []
        per_rollout = []
        for r in rollouts:
            batch = TrajectoryBatch(
                observations=np.asarray(r.observations),
                actions=np.asarray(r.actions),
                log_probs=np.asarray(r.log_probs),
                values=np.asarray(r.values),
                rewards=np.asarray(r.env_rewards, float) * self.config.reward_scale,
                episode_starts=np.r_[True, np.zeros(len(r) - 1, bool)],
                task_ids=np.asarray([int(t) for t in r.tasks]),
                bootstrap_values=np.zeros(1),
            )
            adv, targets = compute_gae(batch, self.config.gamma, self.config.lam)
            per_rollout.append((r, adv, targets))
            adv_all.append(adv)
        flat = np.concatenate(adv_all)
        mean, std = flat.mean(), flat.std() + 1e-8

        seqs_by_net: dict = {}
        for r, adv, targets in per_rollout:
            adv = (adv - mean) / std
            tasks_arr = np.asarray([int(t) for t in r.tasks])
            # split the episode into contiguous per-task segments
            boundaries = np.flatnonzero(np.r_[True, tasks_arr[1:] != tasks_arr[:-1]])
            boundaries = np.append(boundaries, len(tasks_arr))
            for s, e in zip(boundaries[:-1], boundaries[1:]):
                task = TaskId(int(tasks_arr[s]))
                if only_task is not None and task is not only_task:
                    continue
                net = self.nets[task]
                seqs_by_net.setdefault(id(net), (net, []))[1].append(
                    EpisodeSequence(
                        observations=np.asarray(r.observations[s:e]),
                        actions=np.asarray(r.actions[s:e]),
                        old_log_probs=np.asarray(r.log_probs[s:e]),
                        advantages=adv[s:e],
                        value_targets=targets[s:e]))
        diag = {}
        for net, seqs in seqs_by_net.values():
            out = policy_update(net, self.optimizers[id(net)], seqs,
                                ppo_cfg, shuffle_rng=self.rng)
            diag.update(out)
        return diag

    # ------------------------------------------------------------ iterations

    def _train_iteration_cascade(self) -> dict:
        task = self.cascade.training_task
        phase = self.cascade.phase(task)
        whole = phase is Phase.WHOLE_MOTION
        start = TaskId.TASK1 if whole else task
        final = TaskId.TASK3 if whole else task
        rollouts = self._collect(
            start, final, single_net=False,
            use_ref_init=phase in (Phase.IMITATION, Phase.IMITATION_PLUS_RL,
                                   Phase.RL_OPTIMIZE))
        env_returns = [float(sum(r.env_rewards)) for r in rollouts]

        diag = {}
        if phase in (Phase.IMITATION, Phase.IMITATION_PLUS_RL):
            diag.update(self._apply_gail(rollouts, task, phase))
        if whole:
            self._inject_next_task_rewards(rollouts)
        diag.update(self._ppo_update(
            rollouts, None if whole else task,
            precision_phase=phase in (Phase.RL_OPTIMIZE, Phase.WHOLE_MOTION)))

        outcome_task = TaskId.TASK3 if whole else task
        for r in rollouts:
            self.schedule = advance_schedule(
                self.schedule, EpisodeOutcome(outcome_task, r.success, len(r)))
        metrics = TrainingMetrics(
            success_rate=self.schedule.success_rate(outcome_task),
            window_full=self.schedule.window_full(outcome_task),
            mean_episode_length=float(np.mean([len(r) for r in rollouts])),
            env_steps=self.env_steps,
            phase_env_steps=self.env_steps - self._phase_entry_steps)
        prev_task = self.cascade.training_task
        prev_phase = phase
        self.cascade = cascade_step(self.cascade, metrics)
        now_phase = self.cascade.phase(self.cascade.training_task)
        if self.cascade.training_task != prev_task or now_phase != prev_phase:
            self._phase_entry_steps = self.env_steps
        # mirror cascade decisions into the reward schedule
        for t in ALL_TASKS:
            if self.cascade.phase(t) > self.schedule.phase(t):
                self.schedule = self.schedule.with_phase(t, self.cascade.phase(t))
        if self.cascade.training_task != prev_task:
            self.schedule = self.schedule.with_training_task(
                self.cascade.training_task)
            if self.config.warm_start_next_task:
                self.nets[self.cascade.training_task].load_state_dict(
                    self.nets[prev_task].state_dict())
        return self._log_line(env_returns, rollouts, task, phase, diag, metrics)

    def _train_iteration_flat(self) -> dict:
        """gail_only / rl_only: one network, undivided full episodes."""
        rollouts = self._collect(TaskId.TASK1, TaskId.TASK3, single_net=True,
                                 use_ref_init=self.config.mode == "gail_only")
        env_returns = [float(sum(r.env_rewards)) for r in rollouts]
        diag = {}
        if self.config.mode == "gail_only":
            # the environment return is logged but never trained on
            diag.update(self._apply_gail(rollouts, TaskId.TASK1, Phase.IMITATION))
        diag.update(self._ppo_update(rollouts, None))
        metrics = TrainingMetrics(
            success_rate=float(np.mean([r.success for r in rollouts])),
            window_full=True,
            mean_episode_length=float(np.mean([len(r) for r in rollouts])),
            env_steps=self.env_steps)
        return self._log_line(env_returns, rollouts, TaskId.TASK1,
                              Phase.IMITATION if self.config.mode == "gail_only"
                              else Phase.IMITATION_PLUS_RL, diag, metrics)

    def _log_line(self, env_returns, rollouts, task, phase, diag, metrics) -> dict:
        line = {
            "iteration": self.iteration,
            "env_steps": self.env_steps,
            "mode": self.config.mode,
            "task": int(task),
            "phase": phase.name,
            "gail_mix": self.cascade.gail_mix,
            "success_rate": metrics.success_rate,
            "mean_return": float(np.mean(env_returns)),
            "mean_episode_length": metrics.mean_episode_length,
            "episodes": len(rollouts),
            **{k: v for k, v in diag.items() if isinstance(v, (int, float, bool))},
        }
        self._metrics_fh.write(json.dumps(line) + "\n")
        self._metrics_fh.flush()
        return line

    # ------------------------------------------------------------ driver

    def run(self, progress: bool = False) -> dict:
        t0 = time.time()
        while self.env_steps < self.config.max_env_steps:
            if self.config.mode == "cascade" and self.cascade.done:
                break
            self.iteration += 1
            if self.config.mode == "cascade":
                line = self._train_iteration_cascade()
            else:
                line = self._train_iteration_flat()
            if progress:
                print(f"[{line['env_steps']:>8}] it {line['iteration']:>4} "
                      f"task {line['task']} {line['phase']:<17} "
                      f"succ {line['success_rate']:.2f} "
                      f"len {line['mean_episode_length']:6.1f} "
                      f"ret {line['mean_return']:8.2f}", flush=True)
            if self.config.eval_every and \
                    self.iteration % self.config.eval_every == 0:
                report = self.evaluate(self.config.eval_episodes,
                                       seed=self.config.seed + 10_000)
                self._metrics_fh.write(json.dumps(
                    {"iteration": self.iteration, "eval": report}) + "\n")
                self._metrics_fh.flush()
            if self.config.checkpoint_every and \
                    self.iteration % self.config.checkpoint_every == 0:
                self.save_checkpoint(self.out_dir / "checkpoint.pt")
        self.save_checkpoint(self.out_dir / "checkpoint.pt")
        summary = {
            "iterations": self.iteration,
            "env_steps": self.env_steps,
            "wall_seconds": time.time() - t0,
            "cascade_done": self.cascade.done,
            "final_eval": self.evaluate(self.config.eval_episodes,
                                        seed=self.config.seed + 20_000),
        }
        (self.out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
        return summary

    # ------------------------------------------------------------ evaluation

    def evaluate(self, n_episodes: int, seed: int) -> dict:
        return evaluate_policy(self.env, self.nets, n_episodes, seed,
                               self.reward_config)

    # ------------------------------------------------------------ checkpoints

    def save_checkpoint(self, path) -> None:
        nets = {}
        for t in ALL_TASKS:
            nets[int(t)] = self.nets[t].state_dict()
        payload = {
            "format_version": CHECKPOINT_VERSION,
            "mode": self.config.mode,
            "iteration": self.iteration,
            "env_steps": self.env_steps,
            "hidden_size": self.config.hidden_size,
            "num_layers": self.config.num_layers,
            "single_net": self.config.mode != "cascade",
            "nets": nets,
            "discs": {int(t): self.discs[t].state_dict() for t in ALL_TASKS},
            "cascade": {
                "training_task": int(self.cascade.training_task),
                "phases": [int(p) for p in self.cascade.phases],
                "frozen": list(self.cascade.frozen),
                "gail_mix": self.cascade.gail_mix,
                "iteration": self.cascade.iteration,
                "len_history": list(self.cascade.len_history),
                "done": self.cascade.done,
            },
            "schedule": {
                "phases": [int(p) for p in self.schedule.phases],
                "training_task": int(self.schedule.training_task),
                "windows": [list(w) for w in self.schedule.windows],
                "env_steps": self.schedule.env_steps,
                "collision_stage": int(self.schedule.collision_stage),
                "task2_succeeded": self.schedule.task2_succeeded,
            },
            "numpy_rng": self.rng.bit_generator.state,
            "torch_rng": torch.get_rng_state(),
            "torch_gen": self.torch_gen.get_state(),
            "optimizers": {k: o.state_dict() for k, o in
                           zip(("a", "b", "c"),
                               [self.optimizers[id(n)] for n in
                                dict.fromkeys(self.nets.values())])},
            "disc_optimizers": {k: o.state_dict() for k, o in
                                zip(("a", "b", "c"),
                                    [self.disc_optimizers[id(d)] for d in
                                     dict.fromkeys(self.discs.values())])},
            "scene_hash": self.scene_hash,
            "chain_hash": self.chain_hash,
        }
        torch.save(payload, path)

    def load_checkpoint(self, path) -> None:
        payload = torch.load(path, weights_only=False)
        if payload.get("format_version") != CHECKPOINT_VERSION:
            raise ConfigError(f"checkpoint version {payload.get('format_version')}"
                              f" unsupported")
        if self.scene_hash and payload.get("scene_hash") \
                and payload["scene_hash"] != self.scene_hash:
            from ..errors import HashMismatchError
            raise HashMismatchError("checkpoint was trained on a different scene")
        if self.chain_hash and payload.get("chain_hash") \
                and payload["chain_hash"] != self.chain_hash:
            from ..errors import HashMismatchError
            raise HashMismatchError("checkpoint was trained on a different chain")
        for t in ALL_TASKS:
            self.nets[t].load_state_dict(payload["nets"][int(t)])
            self.discs[t].load_state_dict(payload["discs"][int(t)])
        c = payload["cascade"]
        self.cascade = CascadeState(
            config=self.config.cascade,
            training_task=TaskId(c["training_task"]),
            phases=tuple(Phase(p) for p in c["phases"]),
            frozen=tuple(c["frozen"]),
            gail_mix=c["gail_mix"],
            iteration=c["iteration"],
            len_history=tuple(c["len_history"]),
            done=c["done"])
        s = payload["schedule"]
        self.schedule = RewardSchedule(
            config=self.reward_config,
            phases=tuple(Phase(p) for p in s["phases"]),
            training_task=TaskId(s["training_task"]),
            windows=tuple(tuple(w) for w in s["windows"]),
            env_steps=s["env_steps"],
            collision_stage=type(self.schedule.collision_stage)(s["collision_stage"]),
            task2_succeeded=s["task2_succeeded"])
        self.iteration = payload["iteration"]
        self.env_steps = payload["env_steps"]
        self.rng.bit_generator.state = payload["numpy_rng"]
        torch.set_rng_state(payload["torch_rng"])
        self.torch_gen.set_state(payload["torch_gen"])
        opts = [self.optimizers[id(n)] for n in dict.fromkeys(self.nets.values())]
        for key, opt in zip(("a", "b", "c"), opts):
            if key in payload["optimizers"]:
                opt.load_state_dict(payload["optimizers"][key])
        dopts = [self.disc_optimizers[id(d)]
                 for d in dict.fromkeys(self.discs.values())]
        for key, opt in zip(("a", "b", "c"), dopts):
            if key in payload.get("disc_optimizers", {}):
                opt.load_state_dict(payload["disc_optimizers"][key])


def evaluate_policy(env: GraspEnv, nets: dict, n_episodes: int, seed: int,
                    reward_config: RewardConfig | None = None) -> dict:
    """Deterministic held-out evaluation of the chained per-task policies."""
    rng = np.random.default_rng(seed)
    reached = {t: 0 for t in ALL_TASKS}
    lengths = []
    returns = []
    schedule = RewardSchedule(config=reward_config or RewardConfig.default())
    for _ in range(n_episodes):
        state = env.reset(rng)
        hiddens = {t: nets[t].initial_hidden() for t in ALL_TASKS}
        obs = env.observe(state)
        ep_return = 0.0
        steps = 0
        seen = set()
        while True:
            task = state.active_task
            action, _, _, hiddens[task] = nets[task].step(
                obs, hiddens[task], deterministic=True)
            out = env.step(state, action)
            ep_return += score_events(out.events, task, schedule)
            if out.task_transition is not None:
                for t in ALL_TASKS:
                    if t <= out.task_transition:
                        seen.add(t)
            obs = out.observation
            state = out.state
            steps += 1
            if out.terminal is not None:
                break
        for t in seen:
            reached[t] += 1
        lengths.append(steps)
        returns.append(ep_return)
    n = max(1, n_episodes)
    return {
        "episodes": n_episodes,
        "task_success_rate": {int(t): reached[t] / n for t in ALL_TASKS},
        "task3_success_rate": reached[TaskId.TASK3] / n,
        "mean_episode_length": float(np.mean(lengths)) if lengths else 0.0,
        "mean_return": float(np.mean(returns)) if returns else 0.0,
    }


def load_policies_for_eval(checkpoint_path, env: GraspEnv,
                           scene_hash: str = "", chain_hash: str = "") -> dict:
    """Rebuild the per-task networks from a checkpoint for evaluation."""
    payload = torch.load(checkpoint_path, weights_only=False)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ConfigError("unsupported checkpoint version")
    from ..errors import HashMismatchError
    if scene_hash and payload.get("scene_hash") \
            and payload["scene_hash"] != scene_hash:
        raise HashMismatchError("checkpoint was trained on a different scene")
    if chain_hash and payload.get("chain_hash") \
            and payload["chain_hash"] != chain_hash:
        raise HashMismatchError("checkpoint was trained on a different chain")
    nets = {}
    shared = None
    for t in ALL_TASKS:
        if payload.get("single_net") and shared is not None:
            nets[t] = shared
            continue
        net = RecurrentPolicy(63, 7, payload["hidden_size"], payload["num_layers"])
        net.load_state_dict(payload["nets"][int(t)])
        net.eval()
        nets[t] = net
        shared = net
    return nets
