"""Nine-action direction space, expert quantization and the clipped kinematic update"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .exceptions import InvalidAction, InvalidConfig, InvalidDistribution
from .trajectory import PixelPoint


NUM_ACTIONS = 9
IDLE_ACTION = 9


@dataclass(frozen=True)
class ActionSpec:
    id: int
    unit_vector: Tuple[float, float]


@dataclass(frozen=True)
class ActionConfig:
    delta_max: float = 0.05
    idle_eps: float = 1e-4

    def __post_init__(self):
        if not 0 < self.delta_max <= 1:
            raise InvalidConfig(f"delta_max must lie in (0, 1], got {self.delta_max}")
        if self.idle_eps <= 0:
            raise InvalidConfig(f"idle_eps must be positive, got {self.idle_eps}")


@dataclass(frozen=True)
class PolicyOutput:
    """Direction distribution plus step magnitude for one prediction step"""
    probs: Tuple[float, ...]
    magnitude: float

    def __post_init__(self):
        validate_distribution(self.probs, tolerance=1e-9)
        if self.magnitude < 0:
            raise InvalidDistribution(f"Magnitude must be non-negative, got {self.magnitude}")


def _build_table() -> np.ndarray:
    table = np.zeros((NUM_ACTIONS, 2), dtype=np.float64)
    for a in range(1, NUM_ACTIONS):
        angle = (a - 1) * math.pi / 4
        table[a - 1] = (math.sin(angle), -math.cos(angle))
    # snap the cos/sin rounding residue so axis-aligned actions are exact
    table[np.abs(table) < 1e-15] = 0.0
    return table


# Row a-1 holds the unit vector of action a; the only direction table in the package.
UNIT_VECTORS: np.ndarray = _build_table()
UNIT_VECTORS.setflags(write=False)

ACTIONS: Tuple[ActionSpec, ...] = tuple(
    ActionSpec(a, (float(UNIT_VECTORS[a - 1, 0]), float(UNIT_VECTORS[a - 1, 1])))
    for a in range(1, NUM_ACTIONS + 1)
)


def unit_vector(action: int) -> Tuple[float, float]:
    """Unit vector of an action id in 1..9 (action 9 is idle)"""
    if not isinstance(action, (int, np.integer)) or not 1 <= action <= NUM_ACTIONS:
        raise InvalidAction(f"Action must be an integer in 1..{NUM_ACTIONS}, got {action!r}")
    vector = UNIT_VECTORS[int(action) - 1]
    return float(vector[0]), float(vector[1])


def quantize_displacement(delta: Sequence[float], idle_eps: float = 1e-4) -> int:
    """
    Map an expert displacement to the nearest compass action

    Returns 9 below idle_eps; otherwise the direction with the largest dot
    product, ties going to the smallest id.
    """
    delta = np.asarray(delta, dtype=np.float64)
    if float(np.hypot(delta[0], delta[1])) < idle_eps:
        return IDLE_ACTION
    scores = UNIT_VECTORS[:8] @ delta
    # argmax returns the first maximum, i.e. the smallest action id
    return int(np.argmax(scores)) + 1


def validate_distribution(probs: Sequence[float], tolerance: float = 1e-6) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (NUM_ACTIONS,):
        raise InvalidDistribution(f"Expected {NUM_ACTIONS} probabilities, got shape {probs.shape}")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise InvalidDistribution("Probabilities must be finite and non-negative")
    if abs(float(probs.sum()) - 1.0) > tolerance:
        raise InvalidDistribution(f"Probabilities sum to {probs.sum():.12f}, expected 1")
    return probs


def expected_direction(probs: Sequence[float]) -> Tuple[float, float]:
    """Probability-weighted mixture of the action unit vectors"""
    probs = validate_distribution(probs)
    direction = probs @ UNIT_VECTORS
    return float(direction[0]), float(direction[1])


def step(point: PixelPoint, probs: Sequence[float], magnitude: float) -> PixelPoint:
    """Advance a point by magnitude along the expected direction, clipped to [0, 1]^2"""
    dx, dy = expected_direction(probs)
    return PixelPoint(
        min(max(point.x + magnitude * dx, 0.0), 1.0),
        min(max(point.y + magnitude * dy, 0.0), 1.0),
    )


def step_array(points: np.ndarray, probs: np.ndarray, magnitudes: np.ndarray) -> np.ndarray:
    """Batched step over (n, 2) points, (n, 9) probabilities and (n,) magnitudes"""
    directions = probs @ UNIT_VECTORS
    return np.clip(points + magnitudes[:, None] * directions, 0.0, 1.0)
