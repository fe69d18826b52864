"""Adam with per-epoch cosine annealing, and Polyak target updates"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from ..core.exceptions import InvalidConfig, ShapeMismatch
from .tensor import Tensor


def cosine_lr(base_lr: float, epoch: float, total_epochs: int, floor_ratio: float = 0.01) -> float:
    """lr(t) = floor + 0.5 * (base - floor) * (1 + cos(pi * t / T)), with t clipped to [0, T]"""
    floor = floor_ratio * base_lr
    t = min(max(epoch, 0.0), float(total_epochs))
    return floor + 0.5 * (base_lr - floor) * (1.0 + math.cos(math.pi * t / total_epochs))


@dataclass
class AdamState:
    base_lr: float
    total_epochs: int
    floor_ratio: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    epoch: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.base_lr <= 0:
            raise InvalidConfig(f"Learning rate must be positive, got {self.base_lr}")
        if self.total_epochs < 1:
            raise InvalidConfig(f"Schedule length must be >= 1 epoch, got {self.total_epochs}")

    @property
    def lr(self) -> float:
        return cosine_lr(self.base_lr, self.epoch, self.total_epochs, self.floor_ratio)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState) -> List[np.ndarray]:
    """One bias-corrected Adam update at the state's scheduled learning rate"""
    if len(params) != len(grads):
        raise ShapeMismatch(f"{len(params)} parameters but {len(grads)} gradients")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(state.m) != len(params):
        raise ShapeMismatch("Optimizer state does not match the parameter list")

    state.step += 1
    lr = state.lr
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step

    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape or state.m[i].shape != p.shape:
            raise ShapeMismatch(f"Parameter {i}: shape {p.shape}, gradient {g.shape}")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        updated.append(p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return updated


class Adam:
    """Adam over a fixed list of parameter tensors; missing gradients count as zero"""

    def __init__(self, params: Sequence[Tensor], lr: float, total_epochs: int, floor_ratio: float = 0.01):
        self.params = list(params)
        self.state = AdamState(base_lr=lr, total_epochs=total_epochs, floor_ratio=floor_ratio)

    @property
    def lr(self) -> float:
        return self.state.lr

    def set_epoch(self, epoch: int) -> None:
        self.state.epoch = epoch

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        for p, value in zip(self.params, adam_step([p.data for p in self.params], grads, self.state)):
            p.data = value

    def state_dict(self, prefix: str) -> Dict[str, np.ndarray]:
        arrays = {f"{prefix}.step": np.asarray(self.state.step), f"{prefix}.epoch": np.asarray(self.state.epoch)}
        for i, (m, v) in enumerate(zip(self.state.m, self.state.v)):
            arrays[f"{prefix}.m.{i}"] = m
            arrays[f"{prefix}.v.{i}"] = v
        return arrays

    def load_state_dict(self, arrays: Dict[str, np.ndarray], prefix: str) -> None:
        self.state.step = int(arrays[f"{prefix}.step"])
        self.state.epoch = int(arrays[f"{prefix}.epoch"])
        if f"{prefix}.m.0" in arrays:
            self.state.m = [np.array(arrays[f"{prefix}.m.{i}"]) for i in range(len(self.params))]
            self.state.v = [np.array(arrays[f"{prefix}.v.{i}"]) for i in range(len(self.params))]
        else:
            self.state.m, self.state.v = [], []


def soft_update(target_params: Sequence[Tensor], online_params: Sequence[Tensor], tau_soft: float) -> None:
    """target <- (1 - tau) * target + tau * online, in place"""
    if len(target_params) != len(online_params):
        raise ShapeMismatch(f"{len(target_params)} target tensors but {len(online_params)} online tensors")
    for target, online in zip(target_params, online_params):
        if target.shape != online.shape:
            raise ShapeMismatch(f"Target shape {target.shape} does not match online shape {online.shape}")
        target.data = (1.0 - tau_soft) * target.data + tau_soft * online.data
