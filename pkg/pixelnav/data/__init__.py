"""Data package initialization"""

from .dataset import (
    Bucket,
    BucketSampler,
    DatasetConfig,
    Episode,
    EpisodeSpec,
    Observation,
    Transition,
    build_episode,
    build_episode_spec,
    build_episodes,
    collate_clips,
    extract_transitions,
    load_split,
    load_transitions,
    make_buckets,
    save_transitions,
    training_guidance,
)
from .synthgen import SynthConfig, generate_corpus, generate_trajectories, split_by_scene

__all__ = [
    'Bucket',
    'BucketSampler',
    'DatasetConfig',
    'Episode',
    'EpisodeSpec',
    'Observation',
    'Transition',
    'build_episode',
    'build_episode_spec',
    'build_episodes',
    'collate_clips',
    'extract_transitions',
    'load_split',
    'load_transitions',
    'make_buckets',
    'save_transitions',
    'training_guidance',
    'SynthConfig',
    'generate_corpus',
    'generate_trajectories',
    'split_by_scene',
]
