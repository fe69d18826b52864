#!/usr/bin/env python3
"""Tests for the direction table, expert quantization and the kinematic update"""

import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from pixelnav.core.actions import (
    ActionConfig,
    PolicyOutput,
    UNIT_VECTORS,
    expected_direction,
    quantize_displacement,
    step,
    step_array,
    unit_vector,
)
from pixelnav.core.exceptions import InvalidAction, InvalidConfig, InvalidDistribution
from pixelnav.core.trajectory import PixelPoint


def one_hot(action):
    probs = np.zeros(9)
    probs[action - 1] = 1.0
    return probs


def test_unit_vectors():
    assert unit_vector(1) == (0.0, -1.0)
    assert unit_vector(3) == (1.0, 0.0)
    assert unit_vector(5) == (0.0, 1.0)
    assert unit_vector(7) == (-1.0, 0.0)
    assert unit_vector(9) == (0.0, 0.0)
    for a in range(1, 9):
        assert abs(math.hypot(*unit_vector(a)) - 1.0) < 1e-12
    # clockwise from north in 45 degree steps
    x, y = unit_vector(2)
    assert abs(x - math.sqrt(0.5)) < 1e-12 and abs(y + math.sqrt(0.5)) < 1e-12

    for bad in (0, 10, 2.5, "3"):
        try:
            unit_vector(bad)
            assert False, f"expected InvalidAction for {bad!r}"
        except InvalidAction:
            pass
    assert not UNIT_VECTORS.flags.writeable


def test_quantize_displacement():
    assert quantize_displacement((0.0, 0.0)) == 9
    assert quantize_displacement((0.00005, 0.0)) == 9
    assert quantize_displacement((0.02, 0.0)) == 3
    assert quantize_displacement((0.01, -0.01)) == 2
    assert quantize_displacement((0.0, 0.03)) == 5
    assert quantize_displacement((-0.02, 0.02)) == 6

    # agrees with a brute-force argmax over the 8 dot products
    rng = np.random.default_rng(11)
    for delta in rng.normal(0, 0.02, size=(500, 2)):
        scores = [np.dot(unit_vector(a), delta) for a in range(1, 9)]
        assert quantize_displacement(delta) == int(np.argmax(scores)) + 1


def test_expected_direction():
    assert np.allclose(expected_direction(one_hot(5)), (0.0, 1.0))
    uniform = np.array([1 / 8] * 8 + [0.0])
    assert np.allclose(expected_direction(uniform), (0.0, 0.0), atol=1e-12)
    half = np.zeros(9)
    half[0] = half[2] = 0.5
    assert np.allclose(expected_direction(half), (0.5, -0.5))

    for bad in (np.ones(9), np.zeros(8), -one_hot(1) + 2 * one_hot(2)):
        try:
            expected_direction(bad)
            assert False, "expected InvalidDistribution"
        except InvalidDistribution:
            pass


def test_step():
    p = step(PixelPoint(0.5, 0.5), one_hot(3), 0.1)
    assert abs(p.x - 0.6) < 1e-12 and abs(p.y - 0.5) < 1e-12
    p = step(PixelPoint(0.99, 0.5), one_hot(3), 0.05)
    assert p == PixelPoint(1.0, 0.5)
    assert step(PixelPoint(0.5, 0.5), one_hot(9), 0.3) == PixelPoint(0.5, 0.5)

    # every step stays in the unit square
    rng = np.random.default_rng(5)
    points = rng.uniform(0, 1, size=(200, 2))
    probs = rng.dirichlet(np.ones(9), size=200)
    magnitudes = rng.uniform(0, 1, size=200)
    moved = step_array(points, probs, magnitudes)
    assert np.all((moved >= 0) & (moved <= 1))
    single = step(PixelPoint(*points[0]), probs[0], magnitudes[0])
    assert np.allclose(single.as_array(), moved[0])


def test_action_config_and_output():
    try:
        ActionConfig(delta_max=0.0)
        assert False, "expected InvalidConfig"
    except InvalidConfig:
        pass
    try:
        ActionConfig(delta_max=1.5)
        assert False, "expected InvalidConfig"
    except InvalidConfig:
        pass

    output = PolicyOutput(tuple(one_hot(4)), 0.02)
    assert output.magnitude == 0.02
    try:
        PolicyOutput(tuple(one_hot(4)), -0.1)
        assert False, "expected InvalidDistribution"
    except InvalidDistribution:
        pass


if __name__ == "__main__":
    from test_platform import run_module
    sys.exit(run_module(sys.modules[__name__]))
