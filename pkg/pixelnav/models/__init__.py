"""Models package initialization"""

from .encoders import (
    EncoderConfig,
    ObservationEncoder,
    StateEncoder,
    rasterize_guidance,
    sinusoidal_encoding,
    source_to_crop,
)
from .networks import CriticPair, MagnitudeHead, PixelNavModel, PolicyHead, QHead

__all__ = [
    'EncoderConfig',
    'ObservationEncoder',
    'StateEncoder',
    'rasterize_guidance',
    'sinusoidal_encoding',
    'source_to_crop',
    'CriticPair',
    'MagnitudeHead',
    'PixelNavModel',
    'PolicyHead',
    'QHead',
]
