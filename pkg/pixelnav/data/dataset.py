"""Episodes, expert transitions, bucketed sampling and the transition cache"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from ..core.actions import ActionConfig, quantize_displacement
from ..core.exceptions import EmptyCorpus, InvalidConfig, OutOfRange, SpecOutOfRange
from ..core.reward import RewardBreakdown, RewardConfig, step_reward
from ..core.trajectory import DenseSample, PixelPoint, Trajectory, load_corpus
from ..models.encoders import rasterize_guidance, source_to_crop
from ..utils.archive import CropArchive
from ..utils.logger import get_logger

logger = get_logger(__name__)

TRANSITION_FORMAT = "pixelnav-transitions"
TRANSITION_VERSION = 1


@dataclass(frozen=True)
class DatasetConfig:
    mode: str = 'keyframe'
    t_obs: int = 6
    t_pred: int = 3
    lookahead: int = 1
    frame_stride: int = 3
    bucket_boundaries: Tuple[int, ...] = (8, 12, 16)
    batch_size: int = 8
    crop_size: int = 32
    crop_extent_px: float = 128
    guidance_radius: float = 2.0
    actions: ActionConfig = field(default_factory=ActionConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self):
        if self.mode not in ('keyframe', 'dense'):
            raise InvalidConfig(f"episode.mode must be 'keyframe' or 'dense', got {self.mode!r}")
        if self.t_obs < 1 or self.t_pred < 1 or self.lookahead < 1 or self.frame_stride < 1:
            raise InvalidConfig("t_obs, t_pred, lookahead and frame_stride must be >= 1")
        if self.batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1")

    @classmethod
    def from_config(cls, config) -> "DatasetConfig":
        episode = config.section('episode')
        return cls(
            mode=episode.get('mode', 'keyframe'),
            t_obs=episode.get('t_obs', 6),
            t_pred=episode.get('t_pred', 3),
            lookahead=episode.get('lookahead', 1),
            frame_stride=episode.get('frame_stride', 3),
            bucket_boundaries=tuple(episode.get('bucket_boundaries', (8, 12, 16))),
            batch_size=episode.get('batch_size', 8),
            crop_size=config.get('encoder.crop_size', 32),
            crop_extent_px=config.get('encoder.crop_extent_px', 128),
            guidance_radius=config.get('encoder.guidance_radius', 2.0),
            actions=ActionConfig(**config.section('actions')),
            reward=RewardConfig(**config.section('reward')),
        )


@dataclass(frozen=True)
class EpisodeSpec:
    """Which frames are observed and which frames the prediction steps land on"""
    trajectory_id: str
    t_obs: int
    t_pred: int
    mode: str
    start: int
    obs_frames: Tuple[int, ...]
    anchor_frame: int
    pred_frames: Tuple[int, ...]

    @property
    def episode_id(self) -> str:
        return f"{self.trajectory_id}@{self.start}"

    @property
    def horizon(self) -> int:
        """K, the number of prediction steps"""
        return len(self.pred_frames)


def build_episode_spec(traj: Trajectory, t_obs: int, t_pred: int, mode: str = 'keyframe',
                       start: int = 0, frame_stride: int = 1) -> EpisodeSpec:
    """
    Lay an Obs/Pred window over the keyframes starting at keyframe `start`

    The clip covers every dense frame from the first observed keyframe to the
    last one, taking every frame_stride-th frame counted back from the last.
    Keyframe mode has one prediction step per future keyframe; dense mode has
    one per frame up to the last predicted keyframe.
    """
    frames = traj.keyframe_indices
    if start < 0 or t_obs < 1 or t_pred < 1 or start + t_obs + t_pred > len(frames):
        raise SpecOutOfRange(
            f"Trajectory {traj.id} has {len(frames)} keyframes; "
            f"start={start}, t_obs={t_obs}, t_pred={t_pred} does not fit"
        )
    anchor = frames[start + t_obs - 1]
    observed = list(range(frames[start], anchor + 1))
    obs_frames = tuple(observed[::-1][::frame_stride][::-1])
    if mode == 'keyframe':
        pred_frames = tuple(frames[start + t_obs:start + t_obs + t_pred])
    elif mode == 'dense':
        pred_frames = tuple(range(anchor + 1, frames[start + t_obs + t_pred - 1] + 1))
    else:
        raise InvalidConfig(f"Unknown episode mode {mode!r}")
    return EpisodeSpec(traj.id, t_obs, len(pred_frames), mode, start, obs_frames, anchor, pred_frames)


@dataclass(frozen=True)
class Transition:
    episode_id: str
    k: int
    horizon: int
    position: Tuple[float, float]
    guidance: Tuple[float, float]
    expert_action: int
    expert_length: float
    reward: RewardBreakdown
    next_position: Tuple[float, float]
    next_guidance: Tuple[float, float]
    done: bool
    ref_frame: int

    def to_record(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_record(cls, record: Dict) -> "Transition":
        record = dict(record)
        record['reward'] = RewardBreakdown(**record['reward'])
        for key in ('position', 'guidance', 'next_position', 'next_guidance'):
            record[key] = tuple(record[key])
        return cls(**record)


@dataclass(frozen=True)
class Observation:
    """Everything a predictor may see: no ground-truth future"""
    episode_id: str
    clip: np.ndarray        # [L, 4, S, S]
    observed: np.ndarray    # [n, 2] in prediction-step units
    horizon: int

    @property
    def last_position(self) -> np.ndarray:
        return self.observed[-1]

    @property
    def clip_length(self) -> int:
        return self.clip.shape[0]


@dataclass
class Episode:
    """One Obs/Pred window with its clip tensor and ground-truth positions"""
    spec: EpisodeSpec
    clip: np.ndarray             # float32 [L, 4, S, S]
    positions: np.ndarray        # [K + 1, 2]; row 0 is the last observed position
    observed: np.ndarray         # [n, 2] observed points in prediction-step units
    references: Tuple[DenseSample, ...]   # dense sample at each step's landing frame
    transitions: Tuple[Transition, ...]
    resolution: Tuple[int, int]

    @property
    def episode_id(self) -> str:
        return self.spec.episode_id

    @property
    def horizon(self) -> int:
        return self.spec.horizon

    @property
    def clip_length(self) -> int:
        return self.clip.shape[0]

    @property
    def future(self) -> np.ndarray:
        return self.positions[1:]

    def observation(self) -> Observation:
        return Observation(self.episode_id, self.clip, self.observed, self.horizon)


def episode_positions(traj: Trajectory, spec: EpisodeSpec) -> np.ndarray:
    frames = (spec.anchor_frame,) + spec.pred_frames
    return np.array([traj.sample_at(f).point.as_array() for f in frames])


def observed_points(traj: Trajectory, spec: EpisodeSpec) -> np.ndarray:
    """Observed track in the units the extrapolator steps in"""
    if spec.mode == 'keyframe':
        keyframes = traj.keyframes[spec.start:spec.start + spec.t_obs]
        return np.array([k.point.as_array() for k in keyframes])
    first = traj.keyframe_indices[spec.start]
    return np.array([traj.sample_at(f).point.as_array() for f in range(first, spec.anchor_frame + 1)])


def training_guidance(positions: np.ndarray, k: int, lookahead: int = 1) -> PixelPoint:
    """
    Ground-truth guidance for step k: the position `lookahead` steps ahead,
    capped at the final ground-truth point

    Args:
        positions: [K + 1, 2] with row 0 the last observed position
        k: prediction step in 0..K-1
        lookahead: h >= 1
    """
    horizon = len(positions) - 1
    if not 0 <= k < horizon:
        raise OutOfRange(f"Step {k} outside prediction horizon 0..{horizon - 1}")
    return PixelPoint.from_array(positions[min(k + lookahead, horizon)])


def extract_transitions(traj: Trajectory, spec: EpisodeSpec, action_cfg: ActionConfig = ActionConfig(),
                        reward_cfg: RewardConfig = RewardConfig(), lookahead: int = 1) -> List[Transition]:
    """Walk the demonstration through the prediction window; successors come from the data"""
    if spec.trajectory_id != traj.id:
        raise SpecOutOfRange(f"Spec for {spec.trajectory_id} applied to trajectory {traj.id}")
    if spec.pred_frames[-1] > traj.last_frame:
        raise SpecOutOfRange(f"Spec frames run past the end of trajectory {traj.id}")

    positions = episode_positions(traj, spec)
    horizon = spec.horizon
    transitions = []
    for k in range(horizon):
        p_k, p_next = positions[k], positions[k + 1]
        delta = p_next - p_k
        reference = traj.sample_at(spec.pred_frames[k])
        done = k == horizon - 1
        reward = step_reward(PixelPoint.from_array(p_next), reference, done, reward_cfg)
        guidance = training_guidance(positions, k, lookahead)
        next_guidance = training_guidance(positions, min(k + 1, horizon - 1), lookahead)
        transitions.append(Transition(
            episode_id=spec.episode_id,
            k=k,
            horizon=horizon,
            position=(float(p_k[0]), float(p_k[1])),
            guidance=(guidance.x, guidance.y),
            expert_action=quantize_displacement(delta, action_cfg.idle_eps),
            expert_length=float(np.hypot(delta[0], delta[1])),
            reward=reward,
            next_position=(float(p_next[0]), float(p_next[1])),
            next_guidance=(next_guidance.x, next_guidance.y),
            done=done,
            ref_frame=spec.pred_frames[k],
        ))
    return transitions


def build_clip(traj: Trajectory, tiles: np.ndarray, frames: Sequence[int], extent_px: float,
               radius: float) -> np.ndarray:
    """
    Stack RGB tiles with the guidance channel for the given frames

    The guidance channel at frame f rasterizes the dense path from the first
    frame up to f, intensity = confidence, in the crop centred on frame f.
    """
    crop_size = tiles.shape[1]
    w, h = traj.source_resolution
    scale = np.array([w - 1, h - 1])
    path_px = traj.dense_positions() * scale
    confidences = np.array([s.confidence for s in traj.dense])
    clip = np.empty((len(frames), 4, crop_size, crop_size), dtype=np.float32)
    for i, frame in enumerate(frames):
        offset = frame - traj.first_frame
        centre = np.rint(path_px[offset])
        clip[i, :3] = tiles[offset].transpose(2, 0, 1) / 255.0
        points = source_to_crop(path_px[:offset + 1], centre, extent_px, crop_size)
        clip[i, 3] = rasterize_guidance(points, confidences[:offset + 1], crop_size, radius)
    return clip


def build_episode(traj: Trajectory, tiles: np.ndarray, cfg: DatasetConfig, start: int = 0) -> Episode:
    spec = build_episode_spec(traj, cfg.t_obs, cfg.t_pred, cfg.mode, start, cfg.frame_stride)
    if tiles.shape[0] != len(traj.dense):
        raise SpecOutOfRange(f"Trajectory {traj.id}: {tiles.shape[0]} tiles for {len(traj.dense)} dense frames")
    return Episode(
        spec=spec,
        clip=build_clip(traj, tiles, spec.obs_frames, cfg.crop_extent_px, cfg.guidance_radius),
        positions=episode_positions(traj, spec),
        observed=observed_points(traj, spec),
        references=tuple(traj.sample_at(f) for f in spec.pred_frames),
        transitions=tuple(extract_transitions(traj, spec, cfg.actions, cfg.reward, cfg.lookahead)),
        resolution=traj.source_resolution,
    )


def build_episodes(trajectories: Sequence[Trajectory], tiles: Dict[str, np.ndarray], cfg: DatasetConfig,
                   threads: int = 1) -> List[Episode]:
    """Every Obs/Pred window of every trajectory, in corpus order"""
    if not trajectories:
        raise EmptyCorpus("No trajectories to build episodes from")

    def build(traj: Trajectory) -> List[Episode]:
        if traj.id not in tiles:
            raise SpecOutOfRange(f"No crops for trajectory {traj.id}")
        windows = len(traj.keyframes) - (cfg.t_obs + cfg.t_pred) + 1
        if windows < 1:
            logger.debug(f"Skipping {traj.id}: {len(traj.keyframes)} keyframes, "
                         f"needs {cfg.t_obs + cfg.t_pred}")
        return [build_episode(traj, tiles[traj.id], cfg, start) for start in range(max(windows, 0))]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            nested = list(pool.map(build, trajectories))
    else:
        nested = [build(t) for t in trajectories]
    episodes = [e for group in nested for e in group]
    if not episodes:
        raise EmptyCorpus(f"No trajectory is long enough for t_obs={cfg.t_obs}, t_pred={cfg.t_pred}")
    return episodes


def load_split(corpus_dir, split: str) -> Tuple[List[Trajectory], Dict[str, np.ndarray]]:
    """Trajectories and crop tiles of one split written by gen-data"""
    corpus_dir = Path(corpus_dir)
    trajectories = load_corpus(corpus_dir / f"{split}.jsonl")
    tiles = CropArchive(corpus_dir / f"crops_{split}.zip").read_all()
    return trajectories, tiles


# Bucketed sampling

@dataclass(frozen=True)
class Bucket:
    low: float
    high: float
    episode_ids: Tuple[str, ...]


def make_buckets(lengths: Dict[str, int], boundaries: Sequence[int]) -> List[Bucket]:
    """
    Partition episode ids by clip length

    Bucket i holds lengths in [boundaries[i-1], boundaries[i]); the first and
    last buckets are open-ended. Only non-empty buckets are returned.
    """
    if not lengths:
        raise EmptyCorpus("No episodes to bucket")
    boundaries = list(boundaries)
    if any(later <= earlier for earlier, later in zip(boundaries, boundaries[1:])):
        raise InvalidConfig("Bucket boundaries must be strictly increasing")

    edges = [-np.inf] + [float(b) for b in boundaries] + [np.inf]
    members: List[List[str]] = [[] for _ in range(len(edges) - 1)]
    for episode_id, length in lengths.items():
        members[int(np.searchsorted(boundaries, length, side='right'))].append(episode_id)
    return [
        Bucket(edges[i], edges[i + 1], tuple(ids))
        for i, ids in enumerate(members) if ids
    ]


class BucketSampler:
    """Seeded batches drawn within one bucket at a time"""

    def __init__(self, buckets: Sequence[Bucket], batch_size: int, seed: int = 42):
        if not buckets:
            raise EmptyCorpus("No buckets to sample from")
        self.buckets = list(buckets)
        self.batch_size = batch_size
        self.seed = seed

    def batches(self, epoch: int) -> List[List[str]]:
        rng = np.random.default_rng([self.seed, epoch])
        batches = []
        for bucket in self.buckets:
            ids = list(bucket.episode_ids)
            order = rng.permutation(len(ids))
            shuffled = [ids[i] for i in order]
            batches.extend(shuffled[i:i + self.batch_size] for i in range(0, len(shuffled), self.batch_size))
        order = rng.permutation(len(batches))
        return [batches[i] for i in order]


def collate_clips(episodes: Sequence[Episode]) -> Tuple[np.ndarray, np.ndarray]:
    """Right-pad clips to the longest in the batch; returns (clip [B, L, 4, S, S], mask [B, L])"""
    length = max(e.clip_length for e in episodes)
    shape = episodes[0].clip.shape[1:]
    clip = np.zeros((len(episodes), length) + shape, dtype=np.float64)
    mask = np.zeros((len(episodes), length), dtype=bool)
    for i, episode in enumerate(episodes):
        clip[i, :episode.clip_length] = episode.clip
        mask[i, :episode.clip_length] = True
    return clip, mask


# Transition cache

def save_transitions(path, transitions: Iterable[Transition]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(json.dumps({'format': TRANSITION_FORMAT, 'version': TRANSITION_VERSION}) + "\n")
        for transition in transitions:
            f.write(json.dumps(transition.to_record(), sort_keys=True) + "\n")
    return path


def load_transitions(path) -> List[Transition]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Transition cache not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        header = json.loads(f.readline() or "{}")
        if header.get('format') != TRANSITION_FORMAT or header.get('version') != TRANSITION_VERSION:
            raise SpecOutOfRange(f"{path} is not a version {TRANSITION_VERSION} transition cache")
        return [Transition.from_record(json.loads(line)) for line in f if line.strip()]
