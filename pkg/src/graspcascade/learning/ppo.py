"""Clipped-surrogate policy updates over recurrent episode sequences.

Episodes are replayed through the LSTM from a zero hidden state (hidden is
reset at episode boundaries, so truncation coincides with episode ends),
log-probs are recomputed against the stored actions, and the clipped
surrogate, value regression and entropy bonus are ascended with Adam under
a global gradient-norm clip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..errors import InputError
from .networks import RecurrentPolicy


@dataclass(frozen=True)
class PPOConfig:
    clip_ratio: float = 0.2
    epochs: int = 4
    minibatch_steps: int = 256
    entropy_coef: float = 0.01
    # the optimize/whole-motion phases refine precision: no entropy floor, so
    # the policy may anneal its exploration noise where accuracy pays
    entropy_coef_optimize: float = 0.0
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    learning_rate: float = 3e-4
    kl_target: float = 0.1       # parachute against destructive updates


@dataclass
class EpisodeSequence:
    """One episode (or per-task segment) with training targets attached."""

    observations: np.ndarray    # (T, obs_dim)
    actions: np.ndarray         # (T, act_dim)
    old_log_probs: np.ndarray   # (T,)
    advantages: np.ndarray      # (T,)
    value_targets: np.ndarray   # (T,)

    def __len__(self):
        return len(self.old_log_probs)


def _stack_padded(seqs: list, attr: str, width: int | None = None) -> torch.Tensor:
    T = max(len(s) for s in seqs)
    B = len(seqs)
    if width is None:
        out = torch.zeros(T, B, dtype=torch.float64)
    else:
        out = torch.zeros(T, B, width, dtype=torch.float64)
    for b, s in enumerate(seqs):
        arr = torch.as_tensor(getattr(s, attr), dtype=torch.float64)
        out[:len(s), b] = arr
    return out


def ppo_loss(net: RecurrentPolicy, seqs: list, config: PPOConfig):
    """Total loss and diagnostics for a set of episode sequences."""
    obs = _stack_padded(seqs, "observations", net.obs_dim)
    act = _stack_padded(seqs, "actions", net.act_dim)
    old_logp = _stack_padded(seqs, "old_log_probs")
    adv = _stack_padded(seqs, "advantages")
    targets = _stack_padded(seqs, "value_targets")
    mask = torch.zeros(obs.shape[0], obs.shape[1], dtype=torch.float64)
    for b, s in enumerate(seqs):
        mask[:len(s), b] = 1.0
    n = mask.sum()

    mu, value, _ = net(obs)
    logp = net.log_prob(mu, act)
    ratio = torch.exp(logp - old_logp)
    clipped = torch.clamp(ratio, 1.0 - config.clip_ratio, 1.0 + config.clip_ratio)
    surrogate = torch.minimum(ratio * adv, clipped * adv)
    policy_loss = -(surrogate * mask).sum() / n
    value_loss = (((value - targets) ** 2) * mask).sum() / n
    entropy = net.entropy()
    loss = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy

    with torch.no_grad():
        kl = ((old_logp - logp) * mask).sum() / n
        clip_frac = ((torch.abs(ratio - 1.0) > config.clip_ratio).double() * mask).sum() / n
    diag = {
        "policy_loss": float(policy_loss.detach()),
        "value_loss": float(value_loss.detach()),
        "entropy": float(entropy.detach()),
        "approx_kl": float(kl),
        "clip_fraction": float(clip_frac),
    }
    return loss, diag


def policy_update(net: RecurrentPolicy, optimizer: torch.optim.Optimizer,
                  seqs: list, config: PPOConfig,
                  shuffle_rng: np.random.Generator | None = None) -> dict:
    """Multi-epoch minibatched update. Advantages must already be normalized
    per batch. A non-finite loss aborts before any parameter change."""
    if not seqs:
        raise InputError("empty sequence batch")
    order = np.arange(len(seqs))
    diags = []
    aborted = False
    stop = False
    for _ in range(config.epochs):
        if stop:
            break
        if shuffle_rng is not None:
            shuffle_rng.shuffle(order)
        start = 0
        while start < len(order):
            take, steps = 0, 0
            while start + take < len(order) and steps < config.minibatch_steps:
                steps += len(seqs[order[start + take]])
                take += 1
            batch = [seqs[order[start + i]] for i in range(take)]
            start += take
            loss, diag = ppo_loss(net, batch, config)
            if not torch.isfinite(loss):
                diag["aborted"] = True
                diags.append(diag)
                aborted = True
                continue
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(net.parameters(), config.max_grad_norm)
            optimizer.step()
            diags.append(diag)
            if abs(diag["approx_kl"]) > config.kl_target:
                stop = True
                break
    out = {k: float(np.mean([d[k] for d in diags])) for k in diags[0]
           if k != "aborted"}
    out["aborted"] = aborted
    out["kl_stopped"] = stop
    return out
