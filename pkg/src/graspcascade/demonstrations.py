"""Recording, storage, validation and replay of teleoperation episodes.

Demonstration sets are line-delimited JSON: one header record, then per
episode a start record (with the exact initial world state), step records,
and an end record. Floats go through repr so numeric payloads round-trip
bit-exactly; the header pins the scene/chain file hashes so a set can never
silently train against a different world.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .environment import (ACTION_DIM, GraspEnv, OBS_DIM, StepOutcome,
                          TerminalCause, WorldState)
from .errors import (CorruptEpisodeError, DataError, DimensionError,
                     HashMismatchError, InputError, TruncatedFileError,
                     VersionError)
from .rewards import RewardEvent, RewardSchedule, score_events
from .tasks import TaskId
from .transforms import Pose

DEMO_FORMAT_VERSION = 1


@dataclass(frozen=True)
class DemoStep:
    observation: np.ndarray       # 63
    action: np.ndarray            # 7, post-clipping command actually applied
    task: TaskId
    events: tuple = ()

    def __post_init__(self):
        obs = np.asarray(self.observation, float)
        act = np.asarray(self.action, float)
        object.__setattr__(self, "observation", obs)
        object.__setattr__(self, "action", act)


@dataclass(frozen=True)
class InitialConditions:
    joint_angles: np.ndarray
    object_pose: Pose

    def as_dict(self) -> dict:
        return {"joint_angles": list(map(float, self.joint_angles)),
                "object_pose": self.object_pose.as_dict()}

    @staticmethod
    def from_dict(d: dict) -> "InitialConditions":
        return InitialConditions(np.asarray(d["joint_angles"], float),
                                 Pose.from_dict(d["object_pose"]))


@dataclass(frozen=True)
class Episode:
    steps: tuple                   # DemoStep records
    terminal: TerminalCause
    initial: InitialConditions

    def __post_init__(self):
        if len(self.steps) < 1:
            raise CorruptEpisodeError("episode has no steps")
        last = None
        for s in self.steps:
            if last is not None and s.task < last:
                raise CorruptEpisodeError("task ids must be non-decreasing")
            last = s.task

    def __len__(self):
        return len(self.steps)

    def task_boundaries(self) -> list:
        """Contiguous (task, start, end) ranges; end is exclusive."""
        out = []
        start = 0
        for i in range(1, len(self.steps) + 1):
            if i == len(self.steps) or self.steps[i].task != self.steps[start].task:
                out.append((self.steps[start].task, start, i))
                start = i
        return out


@dataclass(frozen=True)
class DemoMetadata:
    recorder: str
    scene_hash: str
    chain_hash: str
    created: float
    format_version: int = DEMO_FORMAT_VERSION


@dataclass(frozen=True)
class DemonstrationSet:
    episodes: tuple
    metadata: DemoMetadata

    def __len__(self):
        return len(self.episodes)


def validate_set(demo: DemonstrationSet, scene_hash: str | None = None,
                 chain_hash: str | None = None) -> None:
    """The one validation path: applied to loaded and freshly recorded sets."""
    if demo.metadata.format_version != DEMO_FORMAT_VERSION:
        raise VersionError(f"demo format_version {demo.metadata.format_version}, "
                           f"expected {DEMO_FORMAT_VERSION}")
    if scene_hash is not None and demo.metadata.scene_hash != scene_hash:
        raise HashMismatchError("scene hash does not match the training scene")
    if chain_hash is not None and demo.metadata.chain_hash != chain_hash:
        raise HashMismatchError("chain hash does not match the training chain")
    for e_idx, ep in enumerate(demo.episodes):
        for s_idx, s in enumerate(ep.steps):
            if s.observation.shape != (OBS_DIM,):
                raise DimensionError(
                    f"episode {e_idx} step {s_idx}: observation dim "
                    f"{s.observation.shape[0]}, expected {OBS_DIM}")
            if s.action.shape != (ACTION_DIM,):
                raise DimensionError(
                    f"episode {e_idx} step {s_idx}: action dim "
                    f"{s.action.shape[0]}, expected {ACTION_DIM}")


class EpisodeRecorder:
    """Appends live steps; an episode closes on terminal or explicit stop."""

    def __init__(self, scene_hash: str, chain_hash: str, recorder: str = "scripted"):
        self.metadata = DemoMetadata(recorder, scene_hash, chain_hash,
                                     created=time.time())
        self._episodes: list = []
        self._steps: list | None = None
        self._initial: InitialConditions | None = None
        self._pending_obs: np.ndarray | None = None

    @property
    def open(self) -> bool:
        return self._steps is not None

    def begin_episode(self, state: WorldState, observation: np.ndarray) -> None:
        if self.open:
            raise InputError("an episode is already open")
        self._initial = InitialConditions(state.joint_state.angles.copy(),
                                          state.object_pose)
        self._steps = []
        self._pending_obs = np.asarray(observation, float)

    def record_step(self, state: WorldState, action: np.ndarray,
                    outcome: StepOutcome) -> None:
        """Stores the pre-step observation and the clipped command actually
        applied (not the raw operator input); a terminal outcome closes the
        episode with its cause."""
        if not self.open:
            raise InputError("recording on a closed episode")
        self._steps.append(DemoStep(
            observation=self._pending_obs,
            action=np.asarray(outcome.state.joint_state.velocities, float),
            task=state.active_task,
            events=outcome.events))
        self._pending_obs = outcome.observation
        if outcome.terminal is not None:
            self.end_episode(outcome.terminal)

    def end_episode(self, terminal: TerminalCause) -> None:
        if not self.open:
            raise InputError("no open episode to close")
        if self._steps:
            self._episodes.append(Episode(tuple(self._steps), terminal,
                                          self._initial))
        self._steps = None
        self._initial = None

    def dataset(self) -> DemonstrationSet:
        return DemonstrationSet(tuple(self._episodes), self.metadata)


def save(demo: DemonstrationSet, path) -> None:
    path = Path(path)
    with open(path, "w") as fh:
        m = demo.metadata
        fh.write(json.dumps({
            "kind": "header", "format_version": m.format_version,
            "recorder": m.recorder, "scene_hash": m.scene_hash,
            "chain_hash": m.chain_hash, "created": m.created,
            "episodes": len(demo.episodes),
        }) + "\n")
        for i, ep in enumerate(demo.episodes):
            fh.write(json.dumps({"kind": "episode_start", "episode": i,
                                 "initial": ep.initial.as_dict()}) + "\n")
            for t, s in enumerate(ep.steps):
                fh.write(json.dumps({
                    "kind": "step", "episode": i, "t": t,
                    "task": int(s.task),
                    "observation": list(map(float, s.observation)),
                    "action": list(map(float, s.action)),
                    "events": [e.as_dict() for e in s.events],
                }) + "\n")
            fh.write(json.dumps({"kind": "episode_end", "episode": i,
                                 "steps": len(ep.steps),
                                 "terminal": ep.terminal.value}) + "\n")


def load(path, scene_hash: str | None = None,
         chain_hash: str | None = None) -> DemonstrationSet:
    path = Path(path)
    if not path.exists():
        raise DataError(f"demonstration file not found: {path}")
    metadata = None
    episodes = []
    initial = None
    steps: list = []
    declared = None
    open_episode = False
    for line_no, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise TruncatedFileError(f"{path}:{line_no}: bad record ({e})") from e
        kind = rec.get("kind")
        if kind == "header":
            if rec.get("format_version") != DEMO_FORMAT_VERSION:
                raise VersionError(
                    f"demo format_version {rec.get('format_version')!r}, "
                    f"expected {DEMO_FORMAT_VERSION}")
            metadata = DemoMetadata(rec["recorder"], rec["scene_hash"],
                                    rec["chain_hash"], rec["created"])
            declared = rec.get("episodes")
        elif kind == "episode_start":
            initial = InitialConditions.from_dict(rec["initial"])
            steps = []
            open_episode = True
        elif kind == "step":
            steps.append(DemoStep(
                observation=np.asarray(rec["observation"], float),
                action=np.asarray(rec["action"], float),
                task=TaskId(rec["task"]),
                events=tuple(RewardEvent.from_dict(d) for d in rec.get("events", ()))))
        elif kind == "episode_end":
            if not open_episode:
                raise CorruptEpisodeError(f"{path}:{line_no}: end without start")
            if rec.get("steps") != len(steps):
                raise TruncatedFileError(
                    f"{path}:{line_no}: episode {rec.get('episode')} declares "
                    f"{rec.get('steps')} steps, found {len(steps)}")
            episodes.append(Episode(tuple(steps),
                                    TerminalCause(rec["terminal"]), initial))
            open_episode = False
        else:
            raise DataError(f"{path}:{line_no}: unknown record kind {kind!r}")
    if metadata is None:
        raise TruncatedFileError(f"{path}: missing header record")
    if open_episode:
        raise TruncatedFileError(f"{path}: last episode has no end record")
    if declared is not None and declared != len(episodes):
        raise TruncatedFileError(f"{path}: header declares {declared} episodes, "
                                 f"found {len(episodes)}")
    demo = DemonstrationSet(tuple(episodes), metadata)
    validate_set(demo, scene_hash, chain_hash)
    return demo


def replay(env: GraspEnv, episode: Episode):
    """Re-run a recorded action sequence from the recorded initial state.

    Returns the per-step observations; in the deterministic simulator these
    reproduce the recording bit-exactly.
    """
    from .kinematics import JointState

    state = env._initial_state(episode.initial.object_pose,
                               TaskId.TASK1, TaskId.TASK3)
    state = replace(state, joint_state=JointState(
        episode.initial.joint_angles.copy(), np.zeros(ACTION_DIM)))
    observations = []
    terminal = None
    for s in episode.steps:
        out = env.step(state, s.action)
        observations.append(out.observation)
        state = out.state
        terminal = out.terminal
        if terminal is not None:
            break
    return observations, terminal


def segment_by_task(episode: Episode, schedule: RewardSchedule) -> list:
    """(task, (start, end), U) ranges with U re-scored under the given
    schedule snapshot; events are re-derived data, not trusted blindly."""
    out = []
    for task, start, end in episode.task_boundaries():
        u = 0.0
        for s in episode.steps[start:end]:
            u += score_events(s.events, task, schedule)
        out.append((task, (start, end), u))
    return out
