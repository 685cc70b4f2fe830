"""The task-cascade controller.

Drives the staged flow: per task, adversarial imitation first, then blended
imitation + reinforcement, then reinforcement with the step penalty; a task
advances (freezing its network) when its mean episode length plateaus, and
after the last task every network unfreezes for joint whole-motion
optimization with next-task rewards instead of step penalties.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import InputError
from ..rewards import Phase
from ..tasks import ALL_TASKS, TaskId


@dataclass(frozen=True)
class CascadeConfig:
    p_il: float = 0.3             # success rate starting the RL blend
    p_opt: float = 0.8            # success rate starting RL-optimize
    plateau_eps: float = 2.0      # steps; episode-length band counted as flat
    plateau_patience: int = 50    # iterations the band must hold
    mix_initial: float = 1.0
    mix_decay: float = 0.95
    # a phase also ends after spending this many environment steps in it,
    # mirroring the fixed step milestones the full-scale experiments used;
    # infinite by default so rate thresholds alone govern
    max_phase_steps: float = float("inf")
    # minimum success rate before a plateau may advance to the next task
    advance_rate: float = 0.0


@dataclass(frozen=True)
class TrainingMetrics:
    success_rate: float
    window_full: bool
    mean_episode_length: float
    env_steps: int
    phase_env_steps: int = 0      # steps spent in the current phase


@dataclass(frozen=True)
class CascadeState:
    config: CascadeConfig = CascadeConfig()
    training_task: TaskId = TaskId.TASK1
    phases: tuple = (Phase.IMITATION,) * 3
    frozen: tuple = (False, False, False)
    gail_mix: float = 1.0
    iteration: int = 0
    len_history: tuple = ()
    done: bool = False

    def phase(self, task: TaskId) -> Phase:
        return self.phases[task - 1]

    def is_frozen(self, task: TaskId) -> bool:
        return self.frozen[task - 1]

    @property
    def whole_motion(self) -> bool:
        return self.phase(self.training_task) is Phase.WHOLE_MOTION

    def _set_phase(self, task: TaskId, phase: Phase) -> "CascadeState":
        if phase < self.phase(task):
            raise InputError(f"cascade phase for {task.name} cannot regress")
        return replace(self, phases=tuple(
            phase if t == task else p for t, p in zip(ALL_TASKS, self.phases)))


def _plateaued(history: tuple, config: CascadeConfig) -> bool:
    if len(history) < config.plateau_patience:
        return False
    recent = history[-config.plateau_patience:]
    return max(recent) - min(recent) < config.plateau_eps


def cascade_step(state: CascadeState, metrics: TrainingMetrics) -> CascadeState:
    """Fold one training iteration's metrics into the cascade.

    Deterministic; fires at most one transition per call so the phase
    sequence of every task is a prefix of the canonical order.
    """
    if metrics.success_rate < 0.0 or metrics.success_rate > 1.0:
        raise InputError(f"success rate {metrics.success_rate} out of range")
    if metrics.mean_episode_length < 0.0:
        raise InputError("negative mean episode length")
    if state.done:
        return state

    task = state.training_task
    phase = state.phase(task)
    cfg = state.config
    out = replace(state, iteration=state.iteration + 1)

    if phase is Phase.IMITATION_PLUS_RL:
        out = replace(out, gail_mix=out.gail_mix * cfg.mix_decay)

    if phase in (Phase.RL_OPTIMIZE, Phase.WHOLE_MOTION):
        out = replace(out, len_history=out.len_history
                      + (float(metrics.mean_episode_length),))

    budget_up = metrics.phase_env_steps >= cfg.max_phase_steps
    if phase is Phase.IMITATION:
        if (metrics.window_full and metrics.success_rate >= cfg.p_il) or budget_up:
            out = out._set_phase(task, Phase.IMITATION_PLUS_RL)
    elif phase is Phase.IMITATION_PLUS_RL:
        if (metrics.window_full and metrics.success_rate >= cfg.p_opt) or budget_up:
            out = out._set_phase(task, Phase.RL_OPTIMIZE)
            out = replace(out, len_history=())
    elif phase is Phase.RL_OPTIMIZE:
        if _plateaued(out.len_history, cfg) \
                and metrics.success_rate >= cfg.advance_rate:
            nxt = task.successor
            if nxt is not None:
                frozen = tuple(True if t == task else f
                               for t, f in zip(ALL_TASKS, out.frozen))
                out = replace(out, training_task=nxt, frozen=frozen,
                              len_history=(), gail_mix=cfg.mix_initial)
            else:
                for t in ALL_TASKS:
                    out = out._set_phase(t, Phase.WHOLE_MOTION)
                out = replace(out, frozen=(False, False, False), len_history=())
    elif phase is Phase.WHOLE_MOTION:
        if _plateaued(out.len_history, cfg):
            out = replace(out, done=True)
    return out
