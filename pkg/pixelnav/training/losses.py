"""Conservative critic, entropy-regularised policy, behaviour-cloning and magnitude losses"""

from dataclasses import asdict, dataclass, fields
from typing import Dict, Sequence, Tuple

import numpy as np

from ..core.actions import UNIT_VECTORS
from ..core.exceptions import EmptyBatch, InvalidConfig, ShapeMismatch
from ..engine import tensor as T
from ..engine.tensor import Tensor


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 8
    alpha_cql: float = 0.01
    gamma: float = 0.95
    tau_soft: float = 0.005
    alpha_entropy: float = 0.2
    lambda_mag: float = 1.0
    policy_weight: float = 1.0
    bc_weight: float = 1.0
    lr_encoder: float = 1e-4
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    lr_mag: float = 3e-4
    lr_floor_ratio: float = 0.01
    max_transitions_per_update: int = 2048
    clamp_magnitude_target: bool = True
    debug_nonfinite: bool = False

    def __post_init__(self):
        for name in ('alpha_cql', 'tau_soft', 'alpha_entropy', 'lambda_mag', 'lr_encoder',
                     'lr_actor', 'lr_critic', 'lr_mag', 'lr_floor_ratio'):
            if getattr(self, name) <= 0:
                raise InvalidConfig(f"training.{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.gamma < 1:
            raise InvalidConfig(f"training.gamma must lie in (0, 1), got {self.gamma}")
        if self.epochs < 1 or self.batch_size < 1 or self.max_transitions_per_update < 1:
            raise InvalidConfig("epochs, batch_size and max_transitions_per_update must be >= 1")

    @classmethod
    def from_config(cls, config) -> "TrainConfig":
        section = config.section('training')
        known = {k: v for k, v in section.items() if k in cls.__dataclass_fields__}
        return cls(batch_size=config.get('episode.batch_size', 8), **known)


@dataclass(frozen=True)
class LossReport:
    critic1: float = 0.0
    critic2: float = 0.0
    bellman: float = 0.0
    cql_penalty: float = 0.0
    policy: float = 0.0
    bc: float = 0.0
    magnitude: float = 0.0
    critic_total: float = 0.0
    actor_total: float = 0.0

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)

    @classmethod
    def mean(cls, reports: Sequence["LossReport"]) -> "LossReport":
        if not reports:
            raise EmptyBatch("No loss reports to average")
        return cls(**{
            f.name: float(np.mean([getattr(r, f.name) for r in reports])) for f in fields(cls)
        })


def _check_batch(n: int) -> None:
    if n == 0:
        raise EmptyBatch("Loss needs at least one transition")


def soft_state_value(target_q1: np.ndarray, target_q2: np.ndarray, next_logits: np.ndarray,
                     alpha_entropy: float) -> np.ndarray:
    """V(s') = sum_a pi(a|s') [min(Q1_tgt, Q2_tgt)(s', a) - alpha log pi(a|s')]"""
    shifted = next_logits - next_logits.max(axis=-1, keepdims=True)
    log_pi = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    pi = np.exp(log_pi)
    return np.sum(pi * (np.minimum(target_q1, target_q2) - alpha_entropy * log_pi), axis=-1)


def bellman_target(rewards: np.ndarray, dones: np.ndarray, next_value: np.ndarray, gamma: float) -> np.ndarray:
    """y = r + gamma (1 - d) V(s')"""
    return rewards + gamma * (1.0 - dones.astype(np.float64)) * next_value


def critic_loss(q1: Tensor, q2: Tensor, actions: np.ndarray, targets: np.ndarray,
                alpha_cql: float) -> Tuple[Tensor, Dict[str, float]]:
    """
    Twin-critic loss: per head, squared Bellman error plus
    alpha_cql * mean[logsumexp_a Q(s, a) - Q(s, a_exp)]

    Args:
        q1, q2: (n, 9) values from critics fed detached states
        actions: (n,) expert actions as 0-based column indices
        targets: (n,) Bellman targets, treated as constants

    Returns:
        (sum of both head losses, scalar breakdown)
    """
    _check_batch(len(actions))
    if q1.shape != q2.shape or q1.shape[0] != len(actions) or len(targets) != len(actions):
        raise ShapeMismatch("critic_loss: Q tables, actions and targets disagree in batch size")
    parts: Dict[str, float] = {}
    heads = []
    for name, q in (('critic1', q1), ('critic2', q2)):
        q_taken = T.gather(q, actions)
        bellman = T.mse(q_taken, targets)
        penalty = T.mean(T.logsumexp(q, axis=-1) - q_taken) * alpha_cql
        head = bellman + penalty
        heads.append(head)
        parts[name] = head.item()
        parts[f"{name}_bellman"] = bellman.item()
        parts[f"{name}_penalty"] = penalty.item()
    total = heads[0] + heads[1]
    parts['bellman'] = 0.5 * (parts['critic1_bellman'] + parts['critic2_bellman'])
    parts['cql_penalty'] = 0.5 * (parts['critic1_penalty'] + parts['critic2_penalty'])
    return total, parts


def policy_loss(logits: Tensor, q1: Tensor, q2: Tensor, alpha_entropy: float) -> Tensor:
    """mean_s sum_a pi(a|s) [alpha log pi(a|s) - min(Q1, Q2)(s, a)]"""
    _check_batch(logits.shape[0])
    log_pi = T.log_softmax(logits, axis=-1)
    pi = T.exp(log_pi)
    inner = log_pi * alpha_entropy - T.minimum(q1, q2)
    return T.mean(T.sum_(pi * inner, axis=-1))


def bc_loss(logits: Tensor, actions: np.ndarray) -> Tensor:
    """Mean cross-entropy of the expert actions (0-based) under the policy logits"""
    _check_batch(len(actions))
    return T.cross_entropy(logits, actions)


def magnitude_loss(magnitude: Tensor, probs: Tensor, expert_lengths: np.ndarray, lambda_mag: float) -> Tensor:
    """
    lambda_mag * mean[(m * ||E[u]|| - ||p_{k+1} - p_k||)^2]

    Args:
        magnitude: (n,) predicted step lengths
        probs: (n, 9) policy probabilities; only the magnitude path is trained here
        expert_lengths: (n,) expert step lengths (possibly clamped to delta_max)
    """
    _check_batch(len(expert_lengths))
    direction = T.matmul(probs.detach(), UNIT_VECTORS)
    predicted_length = magnitude * T.norm(direction, axis=-1)
    return T.mse(predicted_length, np.asarray(expert_lengths, dtype=np.float64)) * lambda_mag
