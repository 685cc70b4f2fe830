"""Adversarial imitation: discriminator training and its reward.

The discriminator is a binary classifier, demonstrations labelled 1 and
policy rollouts 0. Its confusion supplies the imitation reward
-ln(1 - sigmoid(logit)) = softplus(logit), clipped to a ceiling; the blend
with the environment reward follows the task's learning phase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import InputError
from ..rewards import Phase
from .networks import Discriminator


@dataclass(frozen=True)
class GailConfig:
    learning_rate: float = 1e-3
    reward_ceiling: float = 10.0
    mix_initial: float = 1.0
    mix_decay: float = 0.95       # per iteration once Imitation+RL begins
    lr_decay: float = 0.95        # discriminator step-size decay, same cadence
    updates_per_iteration: int = 2
    batch_size: int = 256
    # subtract ln 2 (the indifference value) and floor at zero before
    # blending: merely surviving at D = 0.5 earns nothing (no loiter
    # farming), and nothing is ever negative (no ending the episode early
    # to cut losses); only demonstration-like behavior pays
    center_reward: bool = True
    # skip updates while the discriminator already separates this well; an
    # over-confident discriminator flattens the reward landscape and invites
    # degenerate episode-length exploits in both directions
    max_accuracy: float = 0.9


def gail_reward(disc: Discriminator, obs: np.ndarray, act: np.ndarray,
                ceiling: float = 10.0) -> np.ndarray:
    """softplus(logit), clipped: high when the pair looks demonstration-like."""
    with torch.no_grad():
        o = torch.as_tensor(np.atleast_2d(obs), dtype=torch.float64)
        a = torch.as_tensor(np.atleast_2d(act), dtype=torch.float64)
        r = F.softplus(disc(o, a))
    return np.minimum(r.numpy(), ceiling)


def blended_reward(env_reward: float, gail_r: float, phase: Phase,
                   gail_mix: float) -> float:
    """Imitation: GAIL only; Imitation+RL: decayed mix plus environment;
    RL-optimize and whole-motion: environment only."""
    if phase is Phase.IMITATION:
        return float(gail_r)
    if phase is Phase.IMITATION_PLUS_RL:
        return float(gail_mix * gail_r + env_reward)
    if phase in (Phase.RL_OPTIMIZE, Phase.WHOLE_MOTION):
        return float(env_reward)
    raise InputError(f"unknown phase {phase!r}")


def discriminator_loss(disc: Discriminator, demo_obs, demo_act,
                       policy_obs, policy_act) -> torch.Tensor:
    demo_logit = disc(torch.as_tensor(demo_obs, dtype=torch.float64),
                      torch.as_tensor(demo_act, dtype=torch.float64))
    pol_logit = disc(torch.as_tensor(policy_obs, dtype=torch.float64),
                     torch.as_tensor(policy_act, dtype=torch.float64))
    demo_loss = F.binary_cross_entropy_with_logits(
        demo_logit, torch.ones_like(demo_logit))
    pol_loss = F.binary_cross_entropy_with_logits(
        pol_logit, torch.zeros_like(pol_logit))
    return demo_loss + pol_loss


def _accuracy(disc: Discriminator, demo, policy) -> float:
    with torch.no_grad():
        d = disc(torch.as_tensor(demo[0], dtype=torch.float64),
                 torch.as_tensor(demo[1], dtype=torch.float64))
        p = disc(torch.as_tensor(policy[0], dtype=torch.float64),
                 torch.as_tensor(policy[1], dtype=torch.float64))
    return 0.5 * (float((d > 0).double().mean()) + float((p <= 0).double().mean()))


def discriminator_update(disc: Discriminator, optimizer: torch.optim.Optimizer,
                         demo_batch, policy_batch, config: GailConfig,
                         rng: np.random.Generator | None = None) -> dict:
    """One pass of minibatch updates; non-finite loss aborts with no change.

    Updates are skipped entirely while the discriminator's balanced accuracy
    on the full batches already exceeds config.max_accuracy.
    """
    demo_obs, demo_act = demo_batch
    pol_obs, pol_act = policy_batch
    if len(demo_obs) == 0 or len(pol_obs) == 0:
        raise InputError("discriminator update needs non-empty batches")
    acc_before = _accuracy(disc, demo_batch, policy_batch)
    if acc_before > config.max_accuracy:
        return {"disc_loss": float("nan"), "disc_accuracy": acc_before,
                "disc_skipped": True, "aborted": False}
    n = config.batch_size
    diags = []
    for _ in range(config.updates_per_iteration):
        if rng is not None:
            di = rng.integers(0, len(demo_obs), size=min(n, len(demo_obs)))
            pi = rng.integers(0, len(pol_obs), size=min(n, len(pol_obs)))
        else:
            di = np.arange(min(n, len(demo_obs)))
            pi = np.arange(min(n, len(pol_obs)))
        loss = discriminator_loss(disc, demo_obs[di], demo_act[di],
                                  pol_obs[pi], pol_act[pi])
        if not torch.isfinite(loss):
            return {"disc_loss": float("nan"), "aborted": True}
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        diags.append(float(loss.detach()))
    return {"disc_loss": float(np.mean(diags)),
            "disc_accuracy": _accuracy(disc, demo_batch, policy_batch),
            "disc_skipped": False, "aborted": False}
