#!/usr/bin/env python3
"""Tests for episode windows, expert transitions, guidance selection and bucketed sampling"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from pixelnav.core.exceptions import EmptyCorpus, InvalidConfig, OutOfRange, SpecOutOfRange
from pixelnav.core.reward import step_reward
from pixelnav.core.trajectory import Keyframe, PixelPoint, Trajectory, save_corpus
from pixelnav.data.dataset import (
    BucketSampler,
    DatasetConfig,
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
from pixelnav.utils.archive import CropArchive

RES = (1264, 902)
W = RES[0] - 1


def make_trajectory(traj_id, pixels, frames=None, scene_id="scene_000"):
    frames = frames if frames is not None else list(range(0, 10 * len(pixels), 10))
    keyframes = [Keyframe(f, PixelPoint.from_pixels(x, y, RES)) for f, (x, y) in zip(frames, pixels)]
    return Trajectory.from_keyframes(traj_id, keyframes, RES, scene_id)


def eastward(traj_id="east", step_px=50):
    return make_trajectory(traj_id, [(200 + step_px * i, 400) for i in range(9)])


def curved(traj_id="curve"):
    return make_trajectory(traj_id, [(300 + 40 * i, 300 + 4 * i * i) for i in range(9)])


def tiles_for(traj, size=16):
    return np.zeros((len(traj.dense), size, size, 3), dtype=np.uint8)


def test_episode_spec_windows():
    traj = eastward()
    spec = build_episode_spec(traj, 6, 3, 'keyframe', start=0, frame_stride=3)
    assert spec.anchor_frame == 50 and spec.pred_frames == (60, 70, 80)
    assert spec.horizon == 3 and spec.episode_id == "east@0"
    assert spec.obs_frames[-1] == 50 and spec.obs_frames[0] == 2
    assert all(b - a == 3 for a, b in zip(spec.obs_frames, spec.obs_frames[1:]))

    dense = build_episode_spec(traj, 6, 3, 'dense', start=0, frame_stride=1)
    assert dense.pred_frames == tuple(range(51, 81)) and dense.horizon == 30
    assert dense.obs_frames == tuple(range(0, 51))

    shifted = build_episode_spec(traj, 3, 3, 'keyframe', start=3)
    assert shifted.anchor_frame == 50 and shifted.pred_frames == (60, 70, 80)
    for start, t_obs, t_pred in ((1, 6, 3), (0, 7, 3), (-1, 3, 3)):
        try:
            build_episode_spec(traj, t_obs, t_pred, start=start)
            assert False, "expected SpecOutOfRange"
        except SpecOutOfRange:
            pass


def test_extract_transitions_count_and_replay():
    traj = curved()
    spec = build_episode_spec(traj, 6, 3)
    transitions = extract_transitions(traj, spec)
    assert len(transitions) == 3
    assert [t.done for t in transitions] == [False, False, True]
    assert [t.k for t in transitions] == [0, 1, 2]
    for a, b in zip(transitions, transitions[1:]):
        assert a.next_position == b.position

    # stored rewards are reproduced by the reward module
    for t in transitions:
        again = step_reward(PixelPoint(*t.next_position), traj.sample_at(t.ref_frame), t.done)
        assert again == t.reward
    assert transitions[-1].reward.term == transitions[-1].reward.prox
    assert all(t.reward.term == 0.0 for t in transitions[:-1])

    other = eastward("other")
    try:
        extract_transitions(other, spec)
        assert False, "expected SpecOutOfRange"
    except SpecOutOfRange:
        pass


def test_stationary_expert_is_idle():
    traj = make_trajectory("still", [(500, 500)] * 9)
    for mode in ('keyframe', 'dense'):
        transitions = extract_transitions(traj, build_episode_spec(traj, 6, 3, mode))
        assert all(t.expert_action == 9 for t in transitions)
        assert all(t.reward.d_k == 0.0 for t in transitions)
        assert all(t.expert_length == 0.0 for t in transitions)


def test_eastward_expert():
    traj = eastward(step_px=50)
    keyframe = extract_transitions(traj, build_episode_spec(traj, 6, 3, 'keyframe'))
    assert all(t.expert_action == 3 for t in keyframe)
    assert np.allclose([t.expert_length for t in keyframe], 50 / W, atol=1e-12)

    dense = extract_transitions(traj, build_episode_spec(traj, 6, 3, 'dense'))
    assert len(dense) == 30
    assert all(t.expert_action == 3 for t in dense)
    # oracle: per-frame displacements recomputed from the dense samples
    positions = traj.dense_positions()
    expected = np.hypot(*np.diff(positions[50:81], axis=0).T)
    assert np.allclose([t.expert_length for t in dense], expected, atol=1e-12)
    assert np.allclose(expected, 5 / W, atol=1e-12)


def test_training_guidance():
    positions = np.array([[0.1, 0.5], [0.2, 0.5], [0.3, 0.5], [0.4, 0.5]])
    assert training_guidance(positions, 2) == PixelPoint(0.4, 0.5)
    # step 0 aims at the point it should reach, one step past the last observation
    assert training_guidance(positions, 0) == PixelPoint(0.2, 0.5)
    assert training_guidance(positions, 1, lookahead=2) == PixelPoint(0.4, 0.5)
    # goal-only mode
    for k in range(3):
        assert training_guidance(positions, k, lookahead=3 - k) == PixelPoint(0.4, 0.5)
        assert training_guidance(positions, k, lookahead=50) == PixelPoint(0.4, 0.5)
    for k in (-1, 3):
        try:
            training_guidance(positions, k)
            assert False, "expected OutOfRange"
        except OutOfRange:
            pass


def test_make_buckets():
    buckets = make_buckets({'a': 3, 'b': 3, 'c': 6, 'd': 6}, [5])
    assert [len(b.episode_ids) for b in buckets] == [2, 2]
    assert make_buckets({'a': 4, 'b': 4, 'c': 4}, [2, 8, 12])[0].episode_ids == ('a', 'b', 'c')
    assert len(make_buckets({'a': 4, 'b': 4, 'c': 4}, [2, 8, 12])) == 1

    rng = np.random.default_rng(0)
    lengths = {f"e{i}": int(n) for i, n in enumerate(rng.integers(1, 30, size=100))}
    buckets = make_buckets(lengths, [8, 12, 16])
    members = [i for b in buckets for i in b.episode_ids]
    assert len(members) == len(set(members)) == 100 and set(members) == set(lengths)
    for bucket in buckets:
        assert all(bucket.low <= lengths[i] < bucket.high for i in bucket.episode_ids)

    for bad in ([8, 8], [12, 8]):
        try:
            make_buckets(lengths, bad)
            assert False, "expected InvalidConfig"
        except InvalidConfig:
            pass
    try:
        make_buckets({}, [5])
        assert False, "expected EmptyCorpus"
    except EmptyCorpus:
        pass


def test_bucket_sampler_is_seeded():
    lengths = {f"e{i}": (i % 4) * 5 + 2 for i in range(40)}
    buckets = make_buckets(lengths, [5, 10, 15])
    where = {i: n for n, b in enumerate(buckets) for i in b.episode_ids}

    first = BucketSampler(buckets, 4, seed=9).batches(0)
    assert first == BucketSampler(buckets, 4, seed=9).batches(0)
    assert first != BucketSampler(buckets, 4, seed=9).batches(1)
    assert sorted(i for batch in first for i in batch) == sorted(lengths)
    assert all(len({where[i] for i in batch}) == 1 for batch in first)
    assert all(1 <= len(batch) <= 4 for batch in first)


def test_build_episodes():
    cfg = DatasetConfig(t_obs=6, t_pred=3, crop_size=16)
    trajectories = [curved("a"), eastward("b")]
    tiles = {t.id: tiles_for(t) for t in trajectories}
    episodes = build_episodes(trajectories, tiles, cfg)
    assert [e.episode_id for e in episodes] == ["a@0", "b@0"]

    episode = episodes[0]
    assert episode.clip.shape == (len(episode.spec.obs_frames), 4, 16, 16)
    assert episode.clip.dtype == np.float32
    guidance = episode.clip[:, 3]
    assert guidance.min() >= 0.0 and guidance.max() <= 1.0
    # the current tip sits at the crop centre
    assert np.all(guidance[:, 7, 7] > 0)
    assert episode.positions.shape == (4, 2)
    assert np.array_equal(episode.observed[-1], episode.positions[0])
    assert [r.frame_index for r in episode.references] == list(episode.spec.pred_frames)

    observation = episode.observation()
    assert observation.horizon == 3 and observation.clip is episode.clip
    assert not hasattr(observation, 'positions')

    short = DatasetConfig(t_obs=3, t_pred=3, crop_size=16)
    sliding = build_episodes(trajectories, tiles, short, threads=2)
    assert [e.episode_id for e in sliding] == [f"{t}@{s}" for t in "ab" for s in range(4)]

    try:
        build_episodes(trajectories, {'a': tiles['a']}, cfg)
        assert False, "expected SpecOutOfRange"
    except SpecOutOfRange:
        pass
    try:
        build_episodes(trajectories, tiles, DatasetConfig(t_obs=8, t_pred=3, crop_size=16))
        assert False, "expected EmptyCorpus"
    except EmptyCorpus:
        pass
    try:
        build_episode(trajectories[0], tiles_for(trajectories[0])[:-1], cfg)
        assert False, "expected SpecOutOfRange"
    except SpecOutOfRange:
        pass


def test_collate_clips():
    cfg = DatasetConfig(t_obs=3, t_pred=3, frame_stride=1, crop_size=16)
    traj = curved()
    long = build_episode(traj, tiles_for(traj), cfg, start=0)
    short_traj = make_trajectory("s", [(300 + 40 * i, 300) for i in range(6)], frames=[0, 2, 4, 6, 8, 10])
    short = build_episode(short_traj, tiles_for(short_traj), cfg, start=0)
    clip, mask = collate_clips([long, short])
    assert clip.shape[:2] == (2, long.clip_length) == mask.shape
    assert mask[0].all() and mask[1].sum() == short.clip_length
    assert not clip[1, short.clip_length:].any()


def test_transition_cache(tmp_path=None):
    import tempfile
    directory = Path(tmp_path or tempfile.mkdtemp())
    traj = curved()
    transitions = extract_transitions(traj, build_episode_spec(traj, 3, 6, 'keyframe'))
    path = save_transitions(directory / "cache" / "transitions.jsonl", transitions)
    assert load_transitions(path) == transitions

    (directory / "bad.jsonl").write_text('{"format": "other"}\n', encoding='utf-8')
    try:
        load_transitions(directory / "bad.jsonl")
        assert False, "expected SpecOutOfRange"
    except SpecOutOfRange:
        pass


def test_load_split(tmp_path=None):
    import tempfile
    directory = Path(tmp_path or tempfile.mkdtemp())
    trajectories = [curved("a"), eastward("b")]
    save_corpus(directory / "val.jsonl", trajectories)
    CropArchive(directory / "crops_val.zip").write((t.id, tiles_for(t)) for t in trajectories)
    loaded, tiles = load_split(directory, "val")
    assert [t.id for t in loaded] == ["a", "b"]
    assert set(tiles) == {"a", "b"} and tiles["a"].shape == tiles_for(trajectories[0]).shape
    try:
        load_split(directory, "test")
        assert False, "expected FileNotFoundError"
    except FileNotFoundError:
        pass


if __name__ == "__main__":
    from test_platform import run_module
    sys.exit(run_module(sys.modules[__name__]))
