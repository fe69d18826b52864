"""Dense per-step reward from densified supervision"""

import math
from dataclasses import dataclass
from typing import Optional

from .exceptions import InvalidConfig
from .trajectory import DenseSample, PixelPoint


@dataclass(frozen=True)
class RewardConfig:
    r_time: float = -0.01
    r_prox_max: float = 0.5
    tau_dist: float = 0.02
    clamp_prox_at: Optional[float] = None

    def __post_init__(self):
        if self.tau_dist <= 0:
            raise InvalidConfig(f"tau_dist must be positive, got {self.tau_dist}")
        if self.r_prox_max <= 0:
            raise InvalidConfig(f"r_prox_max must be positive, got {self.r_prox_max}")


@dataclass(frozen=True)
class RewardBreakdown:
    time: float
    prox: float
    term: float
    total: float
    d_k: float
    w_k: float


def confidence_weight(is_keyframe: bool, confidence: float) -> float:
    """1.0 for annotated keyframes, 0.5 + 0.5 * confidence for interpolated frames"""
    if is_keyframe:
        return 1.0
    return 0.5 + 0.5 * confidence


def step_reward(
    pred: PixelPoint,
    ref: DenseSample,
    is_final: bool,
    cfg: RewardConfig = RewardConfig(),
) -> RewardBreakdown:
    """
    Reward for one prediction step

    Args:
        pred: predicted (or expert successor) position
        ref: dense reference sample for the same frame
        is_final: whether this is the last step of the episode
        cfg: reward constants

    Returns:
        RewardBreakdown whose total is time + prox + term
    """
    d_k = math.hypot(pred.x - ref.point.x, pred.y - ref.point.y)
    w_k = confidence_weight(ref.is_keyframe, ref.confidence)
    prox = w_k * cfg.r_prox_max * (1.0 - d_k / cfg.tau_dist)
    if cfg.clamp_prox_at is not None:
        prox = max(prox, cfg.clamp_prox_at)
    term = prox if is_final else 0.0
    time = cfg.r_time
    return RewardBreakdown(time=time, prox=prox, term=term, total=time + prox + term, d_k=d_k, w_k=w_k)
