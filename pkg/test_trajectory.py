#!/usr/bin/env python3
"""Tests for keyframe densification, spline fitting and confidence assignment"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from pixelnav.core.exceptions import DuplicateKnot, OutOfRange, TooFewKnots
from pixelnav.core.trajectory import (
    Keyframe,
    PixelPoint,
    Trajectory,
    assign_confidence,
    densify,
    fit_natural_spline,
    load_corpus,
    save_corpus,
)


def dense_natural_spline(t, y, query):
    """Reference: assemble the full natural-spline system and solve it densely"""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(t)
    h = np.diff(t)
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    A[0, 0] = 1.0
    A[-1, -1] = 1.0
    for i in range(1, n - 1):
        A[i, i - 1] = h[i - 1]
        A[i, i] = 2 * (h[i - 1] + h[i])
        A[i, i + 1] = h[i]
        rhs[i] = 6 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1])
    M = np.linalg.solve(A, rhs)

    out = []
    for q in np.atleast_1d(query):
        i = min(max(np.searchsorted(t, q, side='right') - 1, 0), n - 2)
        a, b = t[i], t[i + 1]
        hi = b - a
        value = (M[i] * (b - q) ** 3 / (6 * hi) + M[i + 1] * (q - a) ** 3 / (6 * hi)
                 + (y[i] / hi - M[i] * hi / 6) * (b - q) + (y[i + 1] / hi - M[i + 1] * hi / 6) * (q - a))
        out.append(value)
    return np.array(out)


def _keyframes(points_px, frames, resolution=(1264, 902)):
    return [Keyframe(f, PixelPoint.from_pixels(x, y, resolution)) for f, (x, y) in zip(frames, points_px)]


def test_spline_affine_and_constant():
    spline = fit_natural_spline([(0, 0), (10, 20), (20, 40)])
    assert abs(spline.evaluate(5) - 10.0) < 1e-12
    constant = fit_natural_spline([(0, 1), (10, 1)])
    assert np.allclose(constant.evaluate(np.linspace(0, 10, 11)), 1.0, atol=1e-12)


def test_spline_matches_dense_solver():
    rng = np.random.default_rng(7)
    for _ in range(100):
        frames = np.cumsum(rng.integers(1, 15, size=9)).astype(float)
        values = rng.normal(0, 50, size=9)
        spline = fit_natural_spline(list(zip(frames, values)))
        query = rng.uniform(frames[0], frames[-1], size=100)
        expected = dense_natural_spline(frames, values, query)
        assert np.max(np.abs(spline.evaluate(query) - expected)) <= 1e-9


def test_spline_knots_exact_and_natural_boundary():
    rng = np.random.default_rng(3)
    frames = np.arange(0, 90, 10, dtype=float)
    values = rng.uniform(0, 1000, size=9)
    spline = fit_natural_spline(list(zip(frames, values)))
    assert np.max(np.abs(spline.evaluate(frames) - values)) <= 1e-12
    ends = spline.second_derivative([frames[0], frames[-1]])
    assert np.max(np.abs(ends)) <= 1e-6

    # affine data is reproduced before rounding
    affine = fit_natural_spline([(f, 3.5 * f - 2.0) for f in frames])
    query = np.linspace(frames[0], frames[-1], 200)
    assert np.max(np.abs(affine.evaluate(query) - (3.5 * query - 2.0))) <= 1e-9


def test_spline_errors():
    try:
        fit_natural_spline([(0, 1)])
        assert False, "expected TooFewKnots"
    except TooFewKnots:
        pass
    try:
        fit_natural_spline([(0, 1), (5, 2), (5, 3)])
        assert False, "expected DuplicateKnot"
    except DuplicateKnot:
        pass


def test_densify_examples():
    resolution = (101, 101)
    dense = densify(_keyframes([(0, 0), (4, 8)], [0, 4], resolution), resolution)
    assert len(dense) == 5
    x_px, y_px = dense[2].point.to_pixels(resolution)
    assert abs(x_px - 2) < 1e-9 and abs(y_px - 4) < 1e-9

    consecutive = _keyframes([(10, 10), (12, 15), (20, 30)], [3, 4, 5], resolution)
    dense = densify(consecutive, resolution)
    assert [s.point for s in dense] == [k.point for k in consecutive]
    assert all(s.is_keyframe and s.confidence == 1.0 for s in dense)

    nine = _keyframes([(100 + 10 * i, 200 + 5 * i) for i in range(9)], list(range(0, 90, 10)))
    dense = densify(nine)
    assert len(dense) == 81
    # keyframe positions come back unchanged
    by_frame = {s.frame_index: s for s in dense}
    assert all(by_frame[k.frame_index].point == k.point for k in nine)


def test_assign_confidence():
    keyframes = [0, 10, 20]
    assert assign_confidence(10, keyframes) == 1.0
    assert abs(assign_confidence(5, keyframes) - 0.45) < 1e-12
    assert abs(assign_confidence(1, keyframes) - 0.81) < 1e-12
    # non-increasing with distance to the nearest keyframe
    values = [assign_confidence(f, keyframes) for f in range(11, 16)]
    assert all(b <= a for a, b in zip(values, values[1:]))
    try:
        assign_confidence(21, keyframes)
        assert False, "expected OutOfRange"
    except OutOfRange:
        pass


def test_dense_confidence_range():
    nine = _keyframes([(300 + 40 * i, 400 + (i % 3) * 30) for i in range(9)],
                      [0, 7, 15, 22, 31, 40, 46, 55, 63])
    traj = Trajectory.from_keyframes("t", nine)
    for s in traj.dense:
        if s.is_keyframe:
            assert s.confidence == 1.0
        else:
            assert 0.45 <= s.confidence <= 0.9
    assert [s.frame_index for s in traj.dense] == list(range(0, 64))


def test_corpus_roundtrip(tmp_path=None):
    import tempfile
    directory = Path(tmp_path or tempfile.mkdtemp())
    nine = _keyframes([(300 + 40 * i, 400 + 3 * i) for i in range(9)], list(range(0, 45, 5)))
    trajectories = [Trajectory.from_keyframes("a", nine, scene_id="s1")]
    path = save_corpus(directory / "train.jsonl", trajectories)
    loaded = load_corpus(path)
    assert len(loaded) == 1
    assert loaded[0].id == "a" and loaded[0].scene_id == "s1"
    assert np.allclose(loaded[0].dense_positions(), trajectories[0].dense_positions(), atol=1e-6)

    # keyframes-only records are densified on load
    path = save_corpus(directory / "sparse.jsonl", trajectories, include_dense=False)
    sparse = load_corpus(path)[0]
    assert len(sparse.dense) == len(trajectories[0].dense)


if __name__ == "__main__":
    from test_platform import run_module
    sys.exit(run_module(sys.modules[__name__]))
