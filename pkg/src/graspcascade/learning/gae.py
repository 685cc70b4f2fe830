"""Generalized advantage estimation over flat trajectory batches.

Advantages are exponentially weighted sums of one-step TD residuals,
A(s_t) = sum_k (lambda*gamma)^k * delta_{t+k}, truncated at episode ends.
The value target is A(s_t) + V(s_t).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError


@dataclass
class TrajectoryBatch:
    """Per-step arrays with episode boundaries.

    episode_starts[t] marks the first step of each episode fragment;
    bootstrap_values holds V(s_end) per fragment, zero where the fragment
    ended in a terminal state.
    """

    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    episode_starts: np.ndarray
    task_ids: np.ndarray
    bootstrap_values: np.ndarray

    def __post_init__(self):
        T = len(self.rewards)
        if T == 0:
            raise InputError("empty trajectory batch")
        if not self.episode_starts[0]:
            raise InputError("batch must begin at an episode start")
        n_eps = int(np.sum(self.episode_starts))
        if len(self.bootstrap_values) != n_eps:
            raise InputError(f"{n_eps} episodes but "
                             f"{len(self.bootstrap_values)} bootstrap values")

    def episode_slices(self) -> list:
        starts = np.flatnonzero(self.episode_starts)
        ends = np.append(starts[1:], len(self.rewards))
        return [(int(s), int(e)) for s, e in zip(starts, ends)]


def compute_gae(batch: TrajectoryBatch, gamma: float, lam: float):
    """Returns (advantages, value_targets), both shaped like rewards."""
    if not 0.0 < gamma <= 1.0:
        raise InputError(f"gamma must be in (0, 1], got {gamma}")
    if not 0.0 <= lam <= 1.0:
        raise InputError(f"lambda must be in [0, 1], got {lam}")
    values = np.asarray(batch.values, float)
    rewards = np.asarray(batch.rewards, float)
    adv = np.zeros_like(rewards)
    for ep_idx, (s, e) in enumerate(batch.episode_slices()):
        nxt = float(batch.bootstrap_values[ep_idx])
        running = 0.0
        for t in range(e - 1, s - 1, -1):
            delta = rewards[t] + gamma * nxt - values[t]
            running = delta + gamma * lam * running
            adv[t] = running
            nxt = values[t]
    return adv, adv + values


def normalize_advantages(adv: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    return (adv - adv.mean()) / (adv.std() + eps)
