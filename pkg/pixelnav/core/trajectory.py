"""Trajectory data model, natural cubic spline densification and confidence assignment"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .exceptions import DuplicateKnot, EmptyCorpus, OutOfRange, TooFewKnots


DEFAULT_RESOLUTION: Tuple[int, int] = (1264, 902)
CORPUS_FORMAT = "pixelnav-corpus"
CORPUS_VERSION = 1


@dataclass(frozen=True)
class PixelPoint:
    """Point in normalized image coordinates, x to the right and y downward"""
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise OutOfRange(f"PixelPoint coordinates must be finite, got ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)

    def clipped(self) -> "PixelPoint":
        return PixelPoint(min(max(self.x, 0.0), 1.0), min(max(self.y, 0.0), 1.0))

    def to_pixels(self, resolution: Tuple[int, int]) -> Tuple[float, float]:
        width, height = resolution
        return self.x * (width - 1), self.y * (height - 1)

    @classmethod
    def from_pixels(cls, x_px: float, y_px: float, resolution: Tuple[int, int]) -> "PixelPoint":
        width, height = resolution
        return cls(x_px / (width - 1), y_px / (height - 1))

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "PixelPoint":
        return cls(float(values[0]), float(values[1]))


@dataclass(frozen=True)
class Keyframe:
    """Expert-annotated frame; always fully trusted"""
    frame_index: int
    point: PixelPoint
    confidence: float = 1.0


@dataclass(frozen=True)
class DenseSample:
    """Per-frame supervision sample produced by densification"""
    frame_index: int
    point: PixelPoint
    confidence: float
    is_keyframe: bool


@dataclass(frozen=True)
class SplineModel:
    """
    Natural cubic spline for one coordinate channel, parameterised by frame index

    `coefficients` has shape (4, n_knots - 1): rows are the cubic, quadratic,
    linear and constant terms of each interval in local coordinates.
    """
    knots: Tuple[float, ...]
    values: Tuple[float, ...]
    coefficients: np.ndarray = field(repr=False, compare=False)

    def evaluate(self, frames) -> np.ndarray:
        """Evaluate inside the knot span; requests outside raise OutOfRange"""
        frames = np.asarray(frames, dtype=np.float64)
        if np.any(frames < self.knots[0]) or np.any(frames > self.knots[-1]):
            raise OutOfRange(
                f"Spline evaluation outside [{self.knots[0]}, {self.knots[-1]}] is not allowed"
            )
        t = np.asarray(self.knots)
        interval = np.clip(np.searchsorted(t, frames, side='right') - 1, 0, len(t) - 2)
        local = frames - t[interval]
        c = self.coefficients
        result = ((c[0, interval] * local + c[1, interval]) * local + c[2, interval]) * local + c[3, interval]
        # exact knot reproduction
        knot_index = np.clip(np.searchsorted(t, frames), 0, len(t) - 1)
        on_knot = t[knot_index] == frames
        return np.where(on_knot, np.asarray(self.values)[knot_index], result)

    def second_derivative(self, frames) -> np.ndarray:
        frames = np.asarray(frames, dtype=np.float64)
        t = np.asarray(self.knots)
        interval = np.clip(np.searchsorted(t, frames, side='right') - 1, 0, len(t) - 2)
        local = frames - t[interval]
        c = self.coefficients
        return 6.0 * c[0, interval] * local + 2.0 * c[1, interval]


def fit_natural_spline(knots: Sequence[Tuple[float, float]]) -> SplineModel:
    """
    Fit a natural cubic spline through (frame_index, value) knots

    Args:
        knots: sequence of (frame_index, value), strictly increasing in frame

    Returns:
        SplineModel for a single channel
    """
    if len(knots) < 2:
        raise TooFewKnots(f"Need at least 2 knots, got {len(knots)}")

    frames = np.array([float(k[0]) for k in knots])
    values = np.array([float(k[1]) for k in knots])
    if not (np.all(np.isfinite(frames)) and np.all(np.isfinite(values))):
        raise OutOfRange("Spline knots must be finite")

    diffs = np.diff(frames)
    if np.any(diffs == 0):
        duplicate = frames[1:][diffs == 0][0]
        raise DuplicateKnot(f"Two knots share frame index {duplicate:g}")
    if np.any(diffs < 0):
        raise OutOfRange("Knot frame indices must be strictly increasing")

    spline = CubicSpline(frames, values, bc_type='natural')
    return SplineModel(
        knots=tuple(frames.tolist()),
        values=tuple(values.tolist()),
        coefficients=np.array(spline.c, dtype=np.float64),
    )


def assign_confidence(
    frame_index: int,
    keyframe_indices: Sequence[int],
    conf_min: float = 0.45,
    conf_max: float = 0.9,
) -> float:
    """
    Confidence of a frame from its distance to the nearest keyframe

    Keyframes get 1.0. Other frames fall linearly from conf_max next to a
    keyframe to conf_min at the farthest point of their keyframe interval.
    """
    indices = sorted(int(k) for k in keyframe_indices)
    if not indices or frame_index < indices[0] or frame_index > indices[-1]:
        raise OutOfRange(
            f"Frame {frame_index} lies outside the keyframe span "
            f"[{indices[0] if indices else '?'}, {indices[-1] if indices else '?'}]"
        )
    if frame_index in indices:
        return 1.0

    position = int(np.searchsorted(indices, frame_index))
    left, right = indices[position - 1], indices[position]
    distance = min(frame_index - left, right - frame_index)
    max_distance = (right - left) // 2
    confidence = conf_max - (conf_max - conf_min) * (distance / max_distance)
    return float(min(max(confidence, conf_min), conf_max))


def _round_half_away(values: np.ndarray) -> np.ndarray:
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def fit_trajectory_splines(
    keyframes: Sequence[Keyframe],
    resolution: Tuple[int, int] = DEFAULT_RESOLUTION,
) -> Tuple[SplineModel, SplineModel]:
    """Fit the x and y channels (in source pixels) independently"""
    width, height = resolution
    spline_x = fit_natural_spline([(k.frame_index, k.point.x * (width - 1)) for k in keyframes])
    spline_y = fit_natural_spline([(k.frame_index, k.point.y * (height - 1)) for k in keyframes])
    return spline_x, spline_y


def densify(
    keyframes: Sequence[Keyframe],
    resolution: Tuple[int, int] = DEFAULT_RESOLUTION,
    conf_min: float = 0.45,
    conf_max: float = 0.9,
) -> List[DenseSample]:
    """
    Evaluate keyframe splines at every integer frame between the first and last keyframe

    Interpolated coordinates are rounded to the nearest pixel and
    re-normalized; keyframe samples keep their annotated coordinates.

    Args:
        keyframes: at least two keyframes with strictly increasing frames
        resolution: source (width, height) in pixels
        conf_min: confidence at the farthest interpolated frame
        conf_max: confidence next to a keyframe

    Returns:
        One DenseSample per frame
    """
    if len(keyframes) < 2:
        raise TooFewKnots(f"Need at least 2 keyframes, got {len(keyframes)}")

    spline_x, spline_y = fit_trajectory_splines(keyframes, resolution)
    width, height = resolution
    first, last = keyframes[0].frame_index, keyframes[-1].frame_index
    frames = np.arange(first, last + 1)
    xs = np.clip(_round_half_away(spline_x.evaluate(frames)), 0, width - 1)
    ys = np.clip(_round_half_away(spline_y.evaluate(frames)), 0, height - 1)

    by_frame = {k.frame_index: k for k in keyframes}
    keyframe_indices = list(by_frame)
    samples = []
    for frame, x_px, y_px in zip(frames.tolist(), xs.tolist(), ys.tolist()):
        keyframe = by_frame.get(frame)
        if keyframe is not None:
            samples.append(DenseSample(frame, keyframe.point, 1.0, True))
        else:
            samples.append(DenseSample(
                frame,
                PixelPoint.from_pixels(x_px, y_px, resolution),
                assign_confidence(frame, keyframe_indices, conf_min, conf_max),
                False,
            ))
    return samples


@dataclass(frozen=True)
class Trajectory:
    """Keyframe-annotated trajectory with its densified per-frame samples"""
    id: str
    keyframes: Tuple[Keyframe, ...]
    dense: Tuple[DenseSample, ...]
    source_resolution: Tuple[int, int] = DEFAULT_RESOLUTION
    scene_id: str = ""

    def __post_init__(self):
        frames = [k.frame_index for k in self.keyframes]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise OutOfRange(f"Trajectory {self.id}: keyframe frames must be strictly increasing")
        if self.dense:
            expected = list(range(frames[0], frames[-1] + 1))
            if [s.frame_index for s in self.dense] != expected:
                raise OutOfRange(
                    f"Trajectory {self.id}: dense samples must cover frames {frames[0]}..{frames[-1]}"
                )

    @classmethod
    def from_keyframes(
        cls,
        traj_id: str,
        keyframes: Sequence[Keyframe],
        resolution: Tuple[int, int] = DEFAULT_RESOLUTION,
        scene_id: str = "",
        conf_min: float = 0.45,
        conf_max: float = 0.9,
    ) -> "Trajectory":
        dense = densify(keyframes, resolution, conf_min, conf_max)
        return cls(traj_id, tuple(keyframes), tuple(dense), tuple(resolution), scene_id)

    @property
    def first_frame(self) -> int:
        return self.keyframes[0].frame_index

    @property
    def last_frame(self) -> int:
        return self.keyframes[-1].frame_index

    @property
    def keyframe_indices(self) -> List[int]:
        return [k.frame_index for k in self.keyframes]

    def sample_at(self, frame_index: int) -> DenseSample:
        """Dense sample for an absolute frame index"""
        offset = frame_index - self.first_frame
        if offset < 0 or offset >= len(self.dense):
            raise OutOfRange(f"Frame {frame_index} outside trajectory {self.id}")
        return self.dense[offset]

    def dense_positions(self) -> np.ndarray:
        """Dense positions as an (n, 2) array in normalized units"""
        return np.array([[s.point.x, s.point.y] for s in self.dense], dtype=np.float64)


# Corpus file I/O

def _px(value: float) -> float:
    return round(value, 6)


def trajectory_to_record(trajectory: Trajectory, include_dense: bool = True) -> Dict[str, Any]:
    resolution = trajectory.source_resolution
    record: Dict[str, Any] = {
        'id': trajectory.id,
        'scene_id': trajectory.scene_id,
        'source_resolution': list(resolution),
        'keyframes': [
            [k.frame_index, *map(_px, k.point.to_pixels(resolution))] for k in trajectory.keyframes
        ],
    }
    if include_dense:
        record['dense'] = [
            [s.frame_index, *map(_px, s.point.to_pixels(resolution)), round(s.confidence, 12), s.is_keyframe]
            for s in trajectory.dense
        ]
    return record


def trajectory_from_record(record: Dict[str, Any]) -> Trajectory:
    resolution = tuple(int(v) for v in record.get('source_resolution', DEFAULT_RESOLUTION))
    keyframes = tuple(
        Keyframe(int(frame), PixelPoint.from_pixels(x_px, y_px, resolution))
        for frame, x_px, y_px in record['keyframes']
    )
    if record.get('dense'):
        dense = tuple(
            DenseSample(int(frame), PixelPoint.from_pixels(x_px, y_px, resolution), float(conf), bool(is_kf))
            for frame, x_px, y_px, conf, is_kf in record['dense']
        )
        return Trajectory(str(record['id']), keyframes, dense, resolution, str(record.get('scene_id', '')))
    return Trajectory.from_keyframes(
        str(record['id']), keyframes, resolution, str(record.get('scene_id', ''))
    )


def save_corpus(path: Path, trajectories: Iterable[Trajectory], include_dense: bool = True) -> Path:
    """Write trajectories as JSON Lines behind a versioned header line"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(json.dumps({'format': CORPUS_FORMAT, 'version': CORPUS_VERSION}) + '\n')
        for trajectory in trajectories:
            f.write(json.dumps(trajectory_to_record(trajectory, include_dense), separators=(',', ':')) + '\n')
    return path


def load_corpus(path: Path) -> List[Trajectory]:
    """Read a corpus file written by save_corpus"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Corpus file not found: {path}")

    trajectories = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if line_number == 1 and record.get('format') == CORPUS_FORMAT:
                if record.get('version') != CORPUS_VERSION:
                    raise ValueError(f"Unsupported corpus version {record.get('version')} in {path}")
                continue
            trajectories.append(trajectory_from_record(record))

    if not trajectories:
        raise EmptyCorpus(f"No trajectories in {path}")
    return trajectories
