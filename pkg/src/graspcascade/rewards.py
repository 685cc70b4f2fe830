"""Event-to-reward mapping and the adaptive schedule that re-weights it.

Rewards are emitted as tagged events by the environment; this module turns
them into scalars. The schedule advances each task through the phases
Imitation -> Imitation+RL -> RL-optimize -> whole-motion, activates the
per-step penalty in the optimize phase, stages the Task-2 collision penalty,
and supplies the next-task reward used for whole-motion optimization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from pathlib import Path

from .configio import load_versioned_yaml
from .errors import ConfigError, InputError
from .tasks import ALL_TASKS, TaskId

REWARD_FORMAT_VERSION = 1


class EventTag(str, Enum):
    DIRECTION_APPROACH = "direction_approach"
    POSITION_APPROACH = "position_approach"
    REACHED_DIRECTION = "reached_direction"
    GRASP_POINT_APPROACH = "grasp_point_approach"
    MISALIGNED_DURING_TASK2 = "misaligned_during_task2"
    HAND_CLOSED_AT_GRASP_POINT = "hand_closed_at_grasp_point"
    STEP_LIMIT = "step_limit"
    COLLISION = "collision"
    DRIFT_AWAY = "drift_away"
    TASK_SUCCESS = "task_success"


@dataclass(frozen=True)
class RewardEvent:
    tag: EventTag
    magnitude: float = 1.0
    task: TaskId | None = None     # which task completed, for TASK_SUCCESS

    def as_dict(self) -> dict:
        d = {"tag": self.tag.value, "magnitude": self.magnitude}
        if self.task is not None:
            d["task"] = int(self.task)
        return d

    @staticmethod
    def from_dict(d: dict) -> "RewardEvent":
        return RewardEvent(EventTag(d["tag"]), float(d.get("magnitude", 1.0)),
                           TaskId(d["task"]) if "task" in d else None)


class Phase(IntEnum):
    IMITATION = 0
    IMITATION_PLUS_RL = 1
    RL_OPTIMIZE = 2
    WHOLE_MOTION = 3


class CollisionStage(IntEnum):
    WARMUP = 0      # reduced penalty while reaching is still being learned
    RAISED = 1      # full penalty once enough steps have elapsed
    FINAL = 2       # hardened penalty after the first Task-2 success


@dataclass(frozen=True)
class RewardConfig:
    weights: dict
    task_success: dict            # TaskId -> weight; Task 3 carries the grasp reward
    step_reward: float = -0.05
    task2_collision: tuple = (-5.0, -20.0, -40.0)   # warmup / raised / final
    task2_collision_raise_steps: int = 200_000
    window: int = 50
    p_opt: float = 0.8
    p_il: float = 0.3

    @staticmethod
    def default() -> "RewardConfig":
        return load_reward_config(_default_path())

    def weight_for(self, tag: EventTag, task: TaskId,
                   stage: CollisionStage) -> float:
        if tag is EventTag.COLLISION and task is TaskId.TASK2:
            return self.task2_collision[stage]
        return self.weights[tag]


def _default_path():
    return Path(__file__).parent / "presets" / "rewards_default.yaml"


def load_reward_config(path) -> RewardConfig:
    doc = load_versioned_yaml(path, REWARD_FORMAT_VERSION, "reward")
    try:
        w = doc["weights"]
        weights = {
            EventTag.DIRECTION_APPROACH: float(w["direction_approach"]),
            EventTag.POSITION_APPROACH: float(w["position_approach"]),
            EventTag.REACHED_DIRECTION: float(w["reached_direction"]),
            EventTag.GRASP_POINT_APPROACH: float(w["grasp_point_approach"]),
            EventTag.MISALIGNED_DURING_TASK2: float(w["misaligned_during_task2"]),
            EventTag.HAND_CLOSED_AT_GRASP_POINT: float(w["hand_closed_at_grasp_point"]),
            EventTag.STEP_LIMIT: float(w["step_limit"]),
            EventTag.COLLISION: float(w["collision"]),
            EventTag.DRIFT_AWAY: float(w["drift_away"]),
        }
        ts = doc["task_success"]
        task_success = {TaskId.TASK1: float(ts["task1"]),
                        TaskId.TASK2: float(ts["task2"]),
                        TaskId.TASK3: float(ts["task3"])}
        t2 = doc["task2_collision"]
        sched = doc.get("schedule", {})
        return RewardConfig(
            weights=weights,
            task_success=task_success,
            step_reward=float(doc.get("step_reward", -0.05)),
            task2_collision=(float(t2["warmup"]), float(t2["raised"]),
                             float(t2["after_success"])),
            task2_collision_raise_steps=int(t2.get("raise_after_env_steps", 200_000)),
            window=int(sched.get("window", 50)),
            p_opt=float(sched.get("p_opt", 0.8)),
            p_il=float(sched.get("p_il", 0.3)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"reward file {path}: missing or malformed field ({e})") from e


@dataclass(frozen=True)
class RewardSchedule:
    """Phase state machine; a value object updated functionally.

    Phases only ever advance. The success window is a per-task ring of the
    most recent episode outcomes; transitions read the rate over a full
    window so a lucky early episode cannot fire them.
    """

    config: RewardConfig
    phases: tuple = (Phase.IMITATION,) * 3
    training_task: TaskId = TaskId.TASK1
    windows: tuple = ((), (), ())
    env_steps: int = 0
    collision_stage: CollisionStage = CollisionStage.WARMUP
    task2_succeeded: bool = False

    def phase(self, task: TaskId) -> Phase:
        return self.phases[task - 1]

    def success_rate(self, task: TaskId) -> float:
        w = self.windows[task - 1]
        return sum(w) / len(w) if w else 0.0

    def window_full(self, task: TaskId) -> bool:
        return len(self.windows[task - 1]) >= self.config.window

    def with_phase(self, task: TaskId, phase: Phase) -> "RewardSchedule":
        if phase < self.phase(task):
            raise InputError(f"phase for {task.name} cannot regress "
                             f"({self.phase(task).name} -> {phase.name})")
        phases = tuple(phase if t == task else p
                       for t, p in zip(ALL_TASKS, self.phases))
        return replace(self, phases=phases)

    def with_training_task(self, task: TaskId) -> "RewardSchedule":
        return replace(self, training_task=task)


@dataclass(frozen=True)
class EpisodeOutcome:
    task: TaskId          # the task this episode was training
    success: bool
    env_steps: int        # steps the episode consumed


def score_events(events, task: TaskId, schedule: RewardSchedule) -> float:
    """Scalar reward for one step's events under the active weights.

    The per-step penalty is added whenever the acting task is in its
    RL-optimize phase; whole-motion stops it again.
    """
    cfg = schedule.config
    phase = schedule.phase(task)
    total = 0.0
    for ev in events:
        if ev.tag is EventTag.TASK_SUCCESS:
            if ev.task is None:
                raise InputError("TASK_SUCCESS event without a task id")
            total += cfg.task_success[ev.task] * ev.magnitude
        else:
            total += cfg.weight_for(ev.tag, task, schedule.collision_stage) * ev.magnitude
    if phase is Phase.RL_OPTIMIZE:
        total += cfg.step_reward
    return total


def advance_schedule(schedule: RewardSchedule, outcome: EpisodeOutcome) -> RewardSchedule:
    """Fold one finished episode into the schedule state.

    Fires, each exactly once: the RL-optimize transition when the windowed
    success rate reaches p_opt, the Task-2 collision raise after the step
    budget, and the Task-2 collision hardening on first success.
    """
    if outcome.task != schedule.training_task \
            and schedule.phase(outcome.task) is not Phase.WHOLE_MOTION:
        raise InputError(f"outcome for {outcome.task.name} while training "
                         f"{schedule.training_task.name}")
    cfg = schedule.config
    idx = outcome.task - 1
    window = (schedule.windows[idx] + (bool(outcome.success),))[-cfg.window:]
    windows = tuple(window if i == idx else w
                    for i, w in enumerate(schedule.windows))
    env_steps = schedule.env_steps + int(outcome.env_steps)

    stage = schedule.collision_stage
    task2_succeeded = schedule.task2_succeeded
    if stage is CollisionStage.WARMUP and env_steps >= cfg.task2_collision_raise_steps:
        stage = CollisionStage.RAISED
    if outcome.task is TaskId.TASK2 and outcome.success and not task2_succeeded:
        task2_succeeded = True
        stage = CollisionStage.FINAL

    out = replace(schedule, windows=windows, env_steps=env_steps,
                  collision_stage=stage, task2_succeeded=task2_succeeded)
    if (out.phase(outcome.task) is Phase.IMITATION_PLUS_RL
            and out.window_full(outcome.task)
            and out.success_rate(outcome.task) >= cfg.p_opt):
        out = out.with_phase(outcome.task, Phase.RL_OPTIMIZE)
    return out


def next_task_reward(completed: TaskId, returns: dict,
                     schedule: RewardSchedule) -> float:
    """U(successor of completed task), emitted at the completion step.

    Zero when there is no successor. Only meaningful in the whole-motion
    phase, where the per-step penalty has stopped and episode returns of the
    following segment are available from the finished episode.
    """
    if schedule.phase(completed) is not Phase.WHOLE_MOTION:
        raise InputError("next-task reward applies only in the whole-motion phase")
    nxt = completed.successor
    if nxt is None:
        return 0.0
    return float(returns.get(nxt, 0.0))


class RewardTraceWriter:
    """Line-per-step audit log: step index, task, events, scalar reward."""

    def __init__(self, path):
        self._fh = open(path, "w")

    def write(self, step: int, task: TaskId, events, reward: float) -> None:
        self._fh.write(json.dumps({
            "step": step,
            "task": int(task),
            "events": [e.as_dict() for e in events],
            "reward": reward,
        }) + "\n")

    def close(self) -> None:
        self._fh.flush()
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
