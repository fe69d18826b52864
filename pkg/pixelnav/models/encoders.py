"""Observation encoder (crops -> z_c) and the goal-conditioned state encoder"""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from ..core.exceptions import AllFramesMasked, OutOfRange, ShapeMismatch
from ..engine import tensor as T
from ..engine.nn import Conv2d, Linear, MLP, Module, TransformerEncoderLayer
from ..engine.tensor import Tensor


@dataclass(frozen=True)
class EncoderConfig:
    crop_size: int = 32
    channels: Sequence[int] = (16, 32, 64)
    kernel_size: int = 3
    stride: int = 2
    model_dim: int = 128
    heads: int = 4
    layers: int = 2
    freq_pairs: int = 8
    coord_dim: int = 32
    state_dim: int = 128
    hidden_dim: int = 128
    guidance_radius: float = 2.0

    @classmethod
    def from_section(cls, section: dict) -> "EncoderConfig":
        known = {k: v for k, v in section.items() if k in cls.__dataclass_fields__}
        if 'channels' in known:
            known['channels'] = tuple(known['channels'])
        return cls(**known)


# Guidance channel

def source_to_crop(points_px: np.ndarray, centre_px: Sequence[float], extent_px: float, crop_size: int) -> np.ndarray:
    """Map source-pixel points into crop pixel coordinates (pixel j has its centre at j)"""
    points_px = np.asarray(points_px, dtype=np.float64).reshape(-1, 2)
    origin = np.asarray(centre_px, dtype=np.float64) - extent_px / 2.0
    return (points_px - origin) * (crop_size / extent_px) - 0.5


def rasterize_guidance(points: np.ndarray, confidences: Sequence[float], crop_size: int,
                       radius: float = 2.0) -> np.ndarray:
    """
    Stamp a disk per trajectory point onto a (crop_size, crop_size) heatmap

    Args:
        points: (n, 2) crop pixel coordinates (x, y); points off the crop may still touch it
        confidences: per-point intensity in [0, 1]
        crop_size: side of the square heatmap
        radius: disk radius in crop pixels

    Returns:
        heatmap where overlapping disks keep the maximum intensity
    """
    heatmap = np.zeros((crop_size, crop_size), dtype=np.float64)
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    confidences = np.clip(np.asarray(confidences, dtype=np.float64).reshape(-1), 0.0, 1.0)
    if len(points) != len(confidences):
        raise ShapeMismatch(f"{len(points)} points but {len(confidences)} confidences")

    rows, cols = np.mgrid[0:crop_size, 0:crop_size]
    for (x, y), conf in zip(points, confidences):
        if x < -radius or y < -radius or x > crop_size - 1 + radius or y > crop_size - 1 + radius:
            continue
        disk = (cols - x) ** 2 + (rows - y) ** 2 <= radius * radius
        np.maximum(heatmap, np.where(disk, conf, 0.0), out=heatmap)
    return heatmap


# Positional features

def sinusoidal_encoding(values: np.ndarray, freq_pairs: int = 8) -> np.ndarray:
    """Per coordinate [sin(2^i pi v), cos(2^i pi v)] for i in 0..F-1; (..., c) -> (..., c * 2F)"""
    values = np.asarray(values, dtype=np.float64)
    freqs = (2.0 ** np.arange(freq_pairs)) * np.pi
    angles = values[..., None] * freqs
    features = np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)
    return features.reshape(*values.shape[:-1], values.shape[-1] * 2 * freq_pairs)


def temporal_position_table(length: int, dim: int) -> np.ndarray:
    positions = np.arange(length, dtype=np.float64)[:, None]
    rates = np.exp(-np.log(10000.0) * (2 * np.arange((dim + 1) // 2)) / dim)
    table = np.zeros((length, dim), dtype=np.float64)
    table[:, 0::2] = np.sin(positions * rates)
    table[:, 1::2] = np.cos(positions * rates)[:, : dim // 2]
    return table


class ObservationEncoder(Module):
    """Per-frame CNN, masked temporal self-attention, masked mean pooling"""

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator, in_channels: int = 4):
        self.cfg = cfg
        self.convs: List[Conv2d] = []
        size = cfg.crop_size
        previous = in_channels
        for channels in cfg.channels:
            self.convs.append(Conv2d(previous, channels, cfg.kernel_size, rng,
                                     stride=cfg.stride, padding=cfg.kernel_size // 2))
            size = (size + 2 * (cfg.kernel_size // 2) - cfg.kernel_size) // cfg.stride + 1
            previous = channels
        self.pool = 2 if size >= 2 else 1
        size //= self.pool
        self.flat_dim = previous * size * size
        self.project = Linear(self.flat_dim, cfg.model_dim, rng)
        self.layers = [TransformerEncoderLayer(cfg.model_dim, cfg.heads, rng) for _ in range(cfg.layers)]

    def frame_features(self, frames: Tensor) -> Tensor:
        """(N, C, S, S) -> (N, D)"""
        x = frames
        for conv in self.convs:
            x = T.relu(conv(x))
        if self.pool > 1:
            x = T.max_pool2d(x, self.pool)
        return self.project(x.reshape(x.shape[0], self.flat_dim))

    def forward(self, clip: np.ndarray, mask: np.ndarray) -> Tensor:
        """
        Args:
            clip: (B, L, 4, S, S) frames; padded positions may hold anything
            mask: (B, L) boolean, True on valid frames

        Returns:
            z_c of shape (B, D)
        """
        clip = np.asarray(clip)
        mask = np.asarray(mask, dtype=bool)
        if clip.ndim != 5 or clip.shape[:2] != mask.shape:
            raise ShapeMismatch(f"Clip shape {clip.shape} does not match mask shape {mask.shape}")
        counts = mask.sum(axis=1)
        if np.any(counts == 0):
            raise AllFramesMasked("Every clip needs at least one valid frame")

        batch, length = mask.shape
        # only valid frames go through the CNN; padded slots read a zero row
        valid = self.frame_features(Tensor(clip[mask].astype(T.get_default_dtype())))
        dim = self.cfg.model_dim
        rows = np.full(mask.shape, valid.shape[0], dtype=np.int64)
        rows[mask] = np.arange(valid.shape[0])
        table = T.concat([valid, Tensor(np.zeros((1, dim)))], axis=0)
        x = T.getitem(table, rows) + temporal_position_table(length, dim)[None]

        for layer in self.layers:
            x = layer(x, mask)

        weights = (mask / counts[:, None])[..., None]
        return T.sum_(x * weights, axis=1)


class StateEncoder(Module):
    """s_k = phi([z_c, enc(p), enc(g), enc(g - p), lin(k / T_pred)])"""

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        self.cfg = cfg
        feature_dim = 2 * 2 * cfg.freq_pairs
        self.position_proj = Linear(feature_dim, cfg.coord_dim, rng)
        self.guidance_proj = Linear(feature_dim, cfg.coord_dim, rng)
        self.relative_proj = Linear(feature_dim, cfg.coord_dim, rng)
        self.progress_proj = Linear(1, cfg.coord_dim, rng)
        self.phi = MLP([cfg.model_dim + 4 * cfg.coord_dim, cfg.hidden_dim, cfg.state_dim], rng)

    def forward(self, z_c: Tensor, p_hat: np.ndarray, guidance: np.ndarray,
                k: np.ndarray, t_pred) -> Tensor:
        """
        Args:
            z_c: (B, D) context embeddings
            p_hat, guidance: (B, 2) normalized positions
            k: (B,) prediction step indices
            t_pred: horizon, scalar or (B,)

        Returns:
            (B, state_dim) state vectors
        """
        p_hat = np.asarray(p_hat, dtype=np.float64).reshape(-1, 2)
        guidance = np.asarray(guidance, dtype=np.float64).reshape(-1, 2)
        k = np.asarray(k, dtype=np.float64).reshape(-1)
        t_pred = np.broadcast_to(np.asarray(t_pred, dtype=np.float64), k.shape)
        if np.any(p_hat < 0) or np.any(p_hat > 1) or np.any(guidance < 0) or np.any(guidance > 1):
            raise OutOfRange("Position and guidance must lie in [0, 1]^2")
        if np.any(k < 0) or np.any(k >= t_pred):
            raise OutOfRange("Step index k must satisfy 0 <= k < T_pred")

        F = self.cfg.freq_pairs
        parts = [
            z_c,
            self.position_proj(Tensor(sinusoidal_encoding(p_hat, F))),
            self.guidance_proj(Tensor(sinusoidal_encoding(guidance, F))),
            self.relative_proj(Tensor(sinusoidal_encoding(guidance - p_hat, F))),
            self.progress_proj(Tensor((k / t_pred)[:, None])),
        ]
        return self.phi(T.concat(parts, axis=-1))
