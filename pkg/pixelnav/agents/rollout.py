"""Autoregressive rollout under polynomial-extrapolation pseudo-guidance"""

from dataclasses import dataclass, field
from typing import Callable, Tuple

import numpy as np

from ..core.actions import PolicyOutput, step_array
from ..core.exceptions import InvalidConfig, OutOfRange, TooFewPoints
from ..core.trajectory import PixelPoint
from ..data.dataset import Observation
from ..engine.tensor import no_grad


@dataclass(frozen=True)
class GuidanceConfig:
    window: int = 10
    quad_min_points: int = 5

    def __post_init__(self):
        if self.window < 2:
            raise InvalidConfig(f"guidance.window must be >= 2, got {self.window}")
        if self.quad_min_points < 3:
            raise InvalidConfig(f"guidance.quad_min_points must be >= 3, got {self.quad_min_points}")

    @classmethod
    def from_config(cls, config) -> "GuidanceConfig":
        return cls(**config.section('guidance'))


@dataclass(frozen=True)
class Rollout:
    episode_id: str
    points: np.ndarray                          # [T_pred, 2]
    outputs: Tuple[PolicyOutput, ...] = ()
    guidance: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        points = np.asarray(self.points)
        if points.ndim != 2 or points.shape[1] != 2:
            raise OutOfRange(f"Rollout points must be [T, 2], got {points.shape}")
        if np.any(points < 0) or np.any(points > 1):
            raise OutOfRange("Rollout points must lie in [0, 1]^2")

    @property
    def horizon(self) -> int:
        return len(self.points)


def extrapolate_guidance(observed: np.ndarray, steps_ahead: int, cfg: GuidanceConfig = GuidanceConfig()) -> PixelPoint:
    """
    Least-squares polynomial continuation of the observed tail

    Fits each coordinate against step index over the last min(window, n)
    points, quadratic with at least quad_min_points points and linear
    otherwise, and evaluates steps_ahead past the last point, clipped to [0, 1].
    """
    observed = np.asarray(observed, dtype=np.float64).reshape(-1, 2)
    if len(observed) < 2:
        raise TooFewPoints(f"Extrapolation needs at least 2 observed points, got {len(observed)}")
    tail = observed[-min(cfg.window, len(observed)):]
    m = len(tail)
    degree = 2 if m >= cfg.quad_min_points else 1
    # centre the step index on the newest point
    t = np.arange(m, dtype=np.float64) - (m - 1)
    coefficients = np.polynomial.polynomial.polyfit(t, tail, degree)
    value = np.polynomial.polynomial.polyval(float(steps_ahead), coefficients)
    return PixelPoint(float(np.clip(value[0], 0.0, 1.0)), float(np.clip(value[1], 0.0, 1.0)))


Decide = Callable[[np.ndarray, np.ndarray, int], Tuple[np.ndarray, float]]


def rollout_with(decide: Decide, observation: Observation, cfg: GuidanceConfig = GuidanceConfig()) -> Rollout:
    """
    Step k: pseudo-guidance k+1 steps past the last observation, ask decide for
    (probs, magnitude), move by the expected direction with clipping
    """
    position = np.asarray(observation.last_position, dtype=np.float64)
    points, outputs, guidance = [], [], []
    for k in range(observation.horizon):
        g = extrapolate_guidance(observation.observed, k + 1, cfg).as_array()
        probs, magnitude = decide(position, g, k)
        probs = np.asarray(probs, dtype=np.float64)
        outputs.append(PolicyOutput(tuple(float(p) for p in probs), float(magnitude)))
        position = step_array(position[None], probs[None], np.array([magnitude]))[0]
        points.append(position)
        guidance.append(g)
    return Rollout(observation.episode_id, np.array(points), tuple(outputs), np.array(guidance))


def predict(model, observation: Observation, cfg: GuidanceConfig = GuidanceConfig()) -> Rollout:
    """Roll out a trained PixelNavModel; z_c is encoded once per clip"""
    clip = np.asarray(observation.clip)[None]
    mask = np.ones((1, clip.shape[1]), dtype=bool)
    with no_grad():
        z_c = model.encode_clip(clip, mask)

    def decide(position: np.ndarray, g: np.ndarray, k: int) -> Tuple[np.ndarray, float]:
        with no_grad():
            s = model.encode_state(z_c, position[None], g[None], np.array([k]), observation.horizon)
        probs, magnitude = model.act(s)
        return probs[0], float(magnitude[0])

    return rollout_with(decide, observation, cfg)
