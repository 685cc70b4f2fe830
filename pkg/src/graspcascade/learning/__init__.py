from .gae import TrajectoryBatch, compute_gae
from .networks import Discriminator, RecurrentPolicy
from .ppo import PPOConfig, policy_update
from .gail import GailConfig, blended_reward, discriminator_update, gail_reward
from .cascade import CascadeConfig, CascadeState, TrainingMetrics, cascade_step

__all__ = [
    "TrajectoryBatch", "compute_gae", "Discriminator", "RecurrentPolicy",
    "PPOConfig", "policy_update", "GailConfig", "blended_reward",
    "discriminator_update", "gail_reward", "CascadeConfig", "CascadeState",
    "TrainingMetrics", "cascade_step",
]
