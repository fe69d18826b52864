"""Tensor engine package initialization"""

from .tensor import Tensor, no_grad, set_debug_checks
from .nn import Module, Linear, Conv2d, LayerNorm, MLP, TransformerEncoderLayer
from .optim import Adam, AdamState, adam_step, cosine_lr, soft_update
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    'Tensor',
    'no_grad',
    'set_debug_checks',
    'Module',
    'Linear',
    'Conv2d',
    'LayerNorm',
    'MLP',
    'TransformerEncoderLayer',
    'Adam',
    'AdamState',
    'adam_step',
    'cosine_lr',
    'soft_update',
    'save_checkpoint',
    'load_checkpoint',
]
