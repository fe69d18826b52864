"""Training package initialization"""

from .losses import (
    LossReport,
    TrainConfig,
    bc_loss,
    bellman_target,
    critic_loss,
    magnitude_loss,
    policy_loss,
    soft_state_value,
)
from .trainer import CQLTrainer, EpochLog, train_epoch

__all__ = [
    'LossReport',
    'TrainConfig',
    'bc_loss',
    'bellman_target',
    'critic_loss',
    'magnitude_loss',
    'policy_loss',
    'soft_state_value',
    'CQLTrainer',
    'EpochLog',
    'train_epoch',
]
