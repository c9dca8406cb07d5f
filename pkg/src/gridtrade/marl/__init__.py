"""Desk-scale recurrent multi-agent PPO with centralized critics."""

from .autodiff import Tensor
from .nets import CriticNet, DiagGaussian, LSTMCell, Linear, PolicyNet, policy_forward
from .ppo import (
    Adam,
    GradCheckReport,
    RolloutBuffer,
    Sgd,
    actor_loss,
    compute_gae,
    critic_loss,
    gradient_check,
    importance_ratio,
    normalize_advantages,
    sgd_update,
)
from .train import Hyperparams, TrainResult, train

__all__ = [
    "Adam",
    "CriticNet",
    "DiagGaussian",
    "GradCheckReport",
    "Hyperparams",
    "LSTMCell",
    "Linear",
    "PolicyNet",
    "RolloutBuffer",
    "Sgd",
    "Tensor",
    "TrainResult",
    "actor_loss",
    "compute_gae",
    "critic_loss",
    "gradient_check",
    "importance_ratio",
    "normalize_advantages",
    "policy_forward",
    "sgd_update",
    "train",
]
