"""Core package initialization"""

from .exceptions import PixelNavError
from .trajectory import (
    PixelPoint,
    Keyframe,
    DenseSample,
    SplineModel,
    Trajectory,
    fit_natural_spline,
    densify,
    assign_confidence,
    load_corpus,
    save_corpus,
)
from .actions import (
    ActionConfig,
    PolicyOutput,
    unit_vector,
    quantize_displacement,
    expected_direction,
    step,
)
from .reward import RewardConfig, RewardBreakdown, confidence_weight, step_reward

__all__ = [
    'PixelNavError',
    'PixelPoint',
    'Keyframe',
    'DenseSample',
    'SplineModel',
    'Trajectory',
    'fit_natural_spline',
    'densify',
    'assign_confidence',
    'load_corpus',
    'save_corpus',
    'ActionConfig',
    'PolicyOutput',
    'unit_vector',
    'quantize_displacement',
    'expected_direction',
    'step',
    'RewardConfig',
    'RewardBreakdown',
    'confidence_weight',
    'step_reward',
]
