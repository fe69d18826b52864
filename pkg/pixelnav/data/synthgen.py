"""Procedural keyframe-annotated trajectories with rendered needle crops"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
from sklearn.model_selection import GroupShuffleSplit

from ..core.exceptions import InvalidConfig
from ..core.trajectory import Keyframe, PixelPoint, Trajectory, save_corpus
from ..utils.archive import CropArchive
from ..utils.logger import get_logger

logger = get_logger(__name__)

SPLITS = ('train', 'val', 'test')


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 42
    count: int = 280
    scenes: int = 56
    frame_span_min: int = 40
    frame_span_max: int = 90
    keyframes: int = 9
    curvature_max: float = 1.2
    noise_px: float = 1.5
    width: int = 1264
    height: int = 902
    texture_complexity: int = 4
    max_keyframe_step: float = 0.045
    split_ratios: Tuple[float, float, float] = (0.72, 0.14, 0.14)
    crop_size: int = 32
    crop_extent_px: int = 128
    segments: int = 2
    confidence_min: float = 0.45
    confidence_max: float = 0.9

    def __post_init__(self):
        if self.count < 1 or self.scenes < 1:
            raise InvalidConfig("synth.count and synth.scenes must be >= 1")
        if self.keyframes < 2:
            raise InvalidConfig("synth.keyframes must be >= 2")
        if self.frame_span_min < self.keyframes - 1 or self.frame_span_max < self.frame_span_min:
            raise InvalidConfig("synth frame span must leave one frame per keyframe interval")
        if self.noise_px < 0 or self.curvature_max < 0:
            raise InvalidConfig("synth.noise_px and synth.curvature_max must be >= 0")
        if self.width < 16 or self.height < 16:
            raise InvalidConfig("synth resolution is too small")
        if not 0 <= self.confidence_min <= self.confidence_max <= 1:
            raise InvalidConfig("trajectory confidence range must satisfy 0 <= min <= max <= 1")
        if not 0 < self.max_keyframe_step < 0.5:
            raise InvalidConfig("synth.max_keyframe_step must lie in (0, 0.5)")
        if len(self.split_ratios) != 3 or abs(sum(self.split_ratios) - 1.0) > 1e-9 or min(self.split_ratios) < 0:
            raise InvalidConfig("synth.split_ratios must be three non-negative fractions summing to 1")

    @classmethod
    def from_config(cls, config) -> "SynthConfig":
        """Build from a ConfigManager (synth, encoder and trajectory sections and the root seed)"""
        synth = config.section('synth')
        known = {k: v for k, v in synth.items() if k in cls.__dataclass_fields__}
        known['split_ratios'] = tuple(known.get('split_ratios', (0.72, 0.14, 0.14)))
        return cls(
            seed=config.get('seed', 42),
            crop_size=config.get('encoder.crop_size', 32),
            crop_extent_px=config.get('encoder.crop_extent_px', 128),
            confidence_min=config.get('trajectory.confidence_min', 0.45),
            confidence_max=config.get('trajectory.confidence_max', 0.9),
            **known,
        )


@dataclass
class SyntheticSample:
    trajectory: Trajectory
    tiles: np.ndarray  # uint8 [dense frames, crop, crop, 3]


@dataclass(frozen=True)
class SceneTexture:
    """Sum of plane waves per RGB channel, evaluated in source pixels"""
    wave_x: np.ndarray
    wave_y: np.ndarray
    phase: np.ndarray
    amplitude: np.ndarray
    base: np.ndarray

    @classmethod
    def random(cls, rng: np.random.Generator, complexity: int) -> "SceneTexture":
        shape = (3, max(complexity, 1))
        wavelength = rng.uniform(40.0, 220.0, size=shape)
        angle = rng.uniform(0.0, 2 * math.pi, size=shape)
        return cls(
            wave_x=2 * math.pi * np.cos(angle) / wavelength,
            wave_y=2 * math.pi * np.sin(angle) / wavelength,
            phase=rng.uniform(0.0, 2 * math.pi, size=shape),
            amplitude=rng.uniform(0.04, 0.12, size=shape),
            base=rng.uniform(0.35, 0.6, size=3),
        )

    def sample(self, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
        """RGB in [0, 1] at source coordinates; returns sx.shape + (3,)"""
        out = np.empty(sx.shape + (3,), dtype=np.float64)
        for c in range(3):
            value = np.full(sx.shape, self.base[c])
            for j in range(self.wave_x.shape[1]):
                value += self.amplitude[c, j] * np.sin(
                    self.wave_x[c, j] * sx + self.wave_y[c, j] * sy + self.phase[c, j]
                )
            out[..., c] = value
        return np.clip(out, 0.0, 1.0)


def _rotate(vector: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * vector[0] - s * vector[1], s * vector[0] + c * vector[1]])


def bezier_path(start: np.ndarray, heading: float, length: float, turns: Sequence[float]) -> List[np.ndarray]:
    """
    Control points of G1-continuous quadratic Bezier segments of equal chord budget

    A zero turn places the control point at the chord midpoint, so an
    all-zero curve is a straight line traversed at constant speed.
    """
    segments = []
    direction = np.array([math.cos(heading), math.sin(heading)])
    a = np.asarray(start, dtype=np.float64)
    for turn in turns:
        b = a + 0.5 * length * direction
        direction = _rotate(direction, turn)
        c = b + 0.5 * length * direction
        segments.append(np.stack([a, b, c]))
        a = c
    return segments


def evaluate_path(segments: List[np.ndarray], u: np.ndarray) -> np.ndarray:
    """Evaluate at global parameter u in [0, n_segments]; returns (len(u), 2)"""
    u = np.asarray(u, dtype=np.float64)
    index = np.minimum(np.floor(u).astype(int), len(segments) - 1)
    t = (u - index)[:, None]
    control = np.stack(segments)[index]
    return (1 - t) ** 2 * control[:, 0] + 2 * (1 - t) * t * control[:, 1] + t ** 2 * control[:, 2]


def _keyframe_frames(rng: np.random.Generator, span: int, count: int) -> np.ndarray:
    frames = np.round(np.linspace(0, span, count)).astype(int)
    gap = span / (count - 1)
    if gap >= 3:
        jitter = rng.integers(-1, 2, size=count)
        jitter[0] = jitter[-1] = 0
        frames = frames + jitter
    return frames


def _synthesize_one(cfg: SynthConfig, index: int, texture: SceneTexture, scene_id: str) -> SyntheticSample:
    rng = np.random.default_rng([cfg.seed, index])
    resolution = (cfg.width, cfg.height)
    span = int(rng.integers(cfg.frame_span_min, cfg.frame_span_max + 1))
    frame_offset = int(rng.integers(0, 30))
    frames = _keyframe_frames(rng, span, cfg.keyframes)

    turns = rng.uniform(-cfg.curvature_max, cfg.curvature_max, size=cfg.segments)
    segments = bezier_path(np.zeros(2), rng.uniform(0, 2 * math.pi), 1.0, turns)
    points = evaluate_path(segments, cfg.segments * frames / span)

    # scale so the largest keyframe step sits just under max_keyframe_step (normalized units)
    steps = np.hypot(*np.diff(points, axis=0).T)
    target = cfg.max_keyframe_step * rng.uniform(0.75, 0.98)
    points = points * (target / max(float(steps.max()), 1e-12))

    # place inside the frame with a margin
    margin = 0.08
    low, high = points.min(axis=0), points.max(axis=0)
    room = np.maximum((1 - 2 * margin) - (high - low), 0.0)
    offset = margin - low + rng.uniform(0.0, 1.0, size=2) * room
    points = points + offset

    pixels = points * np.array([cfg.width - 1, cfg.height - 1])
    if cfg.noise_px > 0:
        pixels = pixels + rng.normal(0.0, cfg.noise_px, size=pixels.shape)
    pixels = np.clip(pixels, [1.0, 1.0], [cfg.width - 2.0, cfg.height - 2.0])

    keyframes = [
        Keyframe(int(frame_offset + f), PixelPoint.from_pixels(float(x), float(y), resolution))
        for f, (x, y) in zip(frames, pixels)
    ]
    trajectory = Trajectory.from_keyframes(f"traj_{index:05d}", keyframes, resolution, scene_id,
                                          cfg.confidence_min, cfg.confidence_max)
    return SyntheticSample(trajectory, render_crops(trajectory, texture, cfg.crop_size, cfg.crop_extent_px))


def render_crops(trajectory: Trajectory, texture: SceneTexture, crop_size: int, extent_px: float) -> np.ndarray:
    """
    Needle-centred RGB tiles for every dense frame

    Background texture is fixed in source coordinates, so it slides under the
    crop as the tip moves; the tip disk sits at the centre with the shaft
    trailing opposite the direction of motion.
    """
    w, h = trajectory.source_resolution
    centres = np.rint(trajectory.dense_positions() * np.array([w - 1, h - 1]))
    n = len(centres)

    offsets = (np.arange(crop_size) + 0.5) * (extent_px / crop_size) - extent_px / 2.0
    sx = centres[:, 0, None, None] + offsets[None, None, :]
    sy = centres[:, 1, None, None] + offsets[None, :, None]
    sx, sy = np.broadcast_arrays(sx, sy)
    image = texture.sample(sx, sy)
    outside = (sx < 0) | (sx > w - 1) | (sy < 0) | (sy > h - 1)
    image[outside] = 0.08

    # heading from central differences over dense positions
    heading = np.zeros((n, 2))
    if n > 1:
        heading = np.gradient(centres, axis=0)
    norms = np.hypot(heading[:, 0], heading[:, 1])
    fallback = np.array([0.0, -1.0])
    for i in range(n):
        if norms[i] > 1e-9:
            heading[i] /= norms[i]
        else:
            heading[i] = heading[i - 1] if i > 0 and np.any(heading[i - 1]) else fallback

    grid = np.arange(crop_size, dtype=np.float64)
    cols, rows = np.meshgrid(grid, grid)
    centre = (crop_size - 1) / 2.0
    tip_radius = max(crop_size / 12.0, 1.0)
    shaft_length = crop_size / 3.0
    for i in range(n):
        dx, dy = cols - centre, rows - centre
        along = -(dx * heading[i, 0] + dy * heading[i, 1])
        across = np.abs(dx * heading[i, 1] - dy * heading[i, 0])
        shaft = (along > 0) & (along < shaft_length) & (across <= 0.9)
        image[i][shaft] = (0.05, 0.05, 0.05)
        tip = dx * dx + dy * dy <= tip_radius * tip_radius
        image[i][tip] = (1.0, 1.0, 0.25)

    return np.rint(image * 255.0).astype(np.uint8)


def generate_trajectories(cfg: SynthConfig, threads: int = 1) -> List[SyntheticSample]:
    """All samples in index order; per-trajectory seeds make the result thread-count independent"""
    scene_count = min(cfg.scenes, cfg.count)
    textures = [
        SceneTexture.random(np.random.default_rng([cfg.seed, 1_000_000 + s]), cfg.texture_complexity)
        for s in range(scene_count)
    ]

    def build(index: int) -> SyntheticSample:
        scene = index % scene_count
        return _synthesize_one(cfg, index, textures[scene], f"scene_{scene:03d}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(build, range(cfg.count)))
    return [build(i) for i in range(cfg.count)]


def split_by_scene(samples: Sequence[SyntheticSample], ratios: Sequence[float], seed: int) -> Dict[str, List[SyntheticSample]]:
    """Group-level split: trajectories sharing a scene id land in the same split"""
    groups = np.array([s.trajectory.scene_id for s in samples])
    splits: Dict[str, List[SyntheticSample]] = {name: [] for name in SPLITS}
    train_ratio, val_ratio, test_ratio = ratios
    if len(set(groups)) < 3 or train_ratio >= 1.0:
        logger.warning("Too few scenes for a three-way split; everything goes to train")
        splits['train'] = list(samples)
        return splits

    # whole-scene counts; fractional test_size would take the ceiling of a rounded product
    n_groups = len(set(groups))
    n_rest = min(max(int(round((val_ratio + test_ratio) * n_groups)), 1), n_groups - 1)
    indices = np.arange(len(samples))
    outer = GroupShuffleSplit(n_splits=1, test_size=n_rest, random_state=seed)
    train_idx, rest_idx = next(outer.split(indices, groups=groups))
    splits['train'] = [samples[i] for i in sorted(train_idx)]

    rest_groups = groups[rest_idx]
    if n_rest < 2 or test_ratio == 0:
        splits['val'] = [samples[i] for i in sorted(rest_idx)]
        return splits
    n_test = min(max(int(round(test_ratio / (val_ratio + test_ratio) * n_rest)), 1), n_rest - 1)
    inner = GroupShuffleSplit(n_splits=1, test_size=n_test, random_state=seed)
    val_local, test_local = next(inner.split(rest_idx, groups=rest_groups))
    splits['val'] = [samples[i] for i in sorted(rest_idx[val_local])]
    splits['test'] = [samples[i] for i in sorted(rest_idx[test_local])]
    return splits


def generate_corpus(cfg: SynthConfig, out_dir, threads: int = 1) -> Dict[str, Dict[str, Path]]:
    """
    Write train/val/test corpus files and crop archives

    Returns:
        {split: {'corpus': path, 'crops': path}}
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = generate_trajectories(cfg, threads=threads)
    splits = split_by_scene(samples, cfg.split_ratios, cfg.seed)

    written: Dict[str, Dict[str, Path]] = {}
    for name in SPLITS:
        members = splits[name]
        corpus_path = save_corpus(out_dir / f"{name}.jsonl", [s.trajectory for s in members])
        crops_path = CropArchive(out_dir / f"crops_{name}.zip").write(
            (s.trajectory.id, s.tiles) for s in members
        )
        written[name] = {'corpus': corpus_path, 'crops': crops_path}
        logger.info(f"Wrote {len(members)} {name} trajectories to {corpus_path}")
    return written
