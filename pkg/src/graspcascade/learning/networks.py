"""Policy and discriminator networks.

One recurrent policy network per task: stacked LSTM core, a diagonal
Gaussian action head (means + learned log-stds) and a scalar value head
off the same trunk. Hidden state is reset at episode starts. Everything
runs in float64: training is CPU-bound at these sizes anyway and the
gradient checks need the precision.
"""

from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn

LOG_2PI = math.log(2.0 * math.pi)


class RecurrentPolicy(nn.Module):
    def __init__(self, obs_dim: int = 63, act_dim: int = 7,
                 hidden_size: int = 64, num_layers: int = 1,
                 log_std_init: float = -0.7):
        super().__init__()
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.hidden_size = hidden_size
        self.num_layers = num_layers
        self.lstm = nn.LSTM(obs_dim, hidden_size, num_layers)
        self.mu_head = nn.Linear(hidden_size, act_dim)
        self.log_std = nn.Parameter(torch.full((act_dim,), log_std_init))
        self.value_head = nn.Linear(hidden_size, 1)
        self.double()

    def initial_hidden(self, batch: int = 1):
        h = torch.zeros(self.num_layers, batch, self.hidden_size, dtype=torch.float64)
        return (h, h.clone())

    def forward(self, obs_seq: torch.Tensor, hidden=None):
        """obs_seq: (T, B, obs_dim) -> (mu (T,B,A), value (T,B), hidden')."""
        if hidden is None:
            hidden = self.initial_hidden(obs_seq.shape[1])
        core, hidden = self.lstm(obs_seq, hidden)
        mu = self.mu_head(core)
        value = self.value_head(core).squeeze(-1)
        return mu, value, hidden

    def log_prob(self, mu: torch.Tensor, actions: torch.Tensor) -> torch.Tensor:
        std = torch.exp(self.log_std)
        z = (actions - mu) / std
        return -0.5 * (z * z + LOG_2PI).sum(-1) - self.log_std.sum()

    def entropy(self) -> torch.Tensor:
        return (self.log_std + 0.5 * (LOG_2PI + 1.0)).sum()

    @torch.no_grad()
    def step(self, obs: np.ndarray, hidden, generator: torch.Generator | None = None,
             deterministic: bool = False):
        """Single-step rollout: returns (action, log_prob, value, hidden')."""
        x = torch.as_tensor(obs, dtype=torch.float64).reshape(1, 1, self.obs_dim)
        mu, value, hidden = self.forward(x, hidden)
        mu = mu[0, 0]
        if deterministic:
            action = mu
        else:
            noise = torch.randn(self.act_dim, dtype=torch.float64, generator=generator)
            action = mu + noise * torch.exp(self.log_std)
        logp = self.log_prob(mu, action)
        return (action.numpy(), float(logp), float(value[0, 0]), hidden)


class Discriminator(nn.Module):
    """Maps (observation, action) to a real logit: positive = demo-like."""

    def __init__(self, obs_dim: int = 63, act_dim: int = 7, hidden_size: int = 64):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(obs_dim + act_dim, hidden_size),
            nn.Tanh(),
            nn.Linear(hidden_size, hidden_size),
            nn.Tanh(),
            nn.Linear(hidden_size, 1),
        )
        self.double()

    def forward(self, obs: torch.Tensor, act: torch.Tensor) -> torch.Tensor:
        return self.net(torch.cat([obs, act], dim=-1)).squeeze(-1)
