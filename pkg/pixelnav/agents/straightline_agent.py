"""Non-learned baseline: the pseudo-guidance points are the prediction"""

import numpy as np

from ..data.dataset import Observation
from .base_agent import BaseAgent
from .rollout import GuidanceConfig, Rollout, extrapolate_guidance


def straightline_baseline(observation: Observation, guidance: GuidanceConfig = GuidanceConfig()) -> Rollout:
    points = np.array([
        extrapolate_guidance(observation.observed, k + 1, guidance).as_array()
        for k in range(observation.horizon)
    ])
    return Rollout(observation.episode_id, points, (), points.copy())


class StraightLineAgent(BaseAgent):
    def __init__(self, guidance: GuidanceConfig = GuidanceConfig(), name: str = "straightline"):
        super().__init__(name)
        self.guidance = guidance

    def initialize(self) -> bool:
        self.update_status("ready")
        return True

    def predict(self, observation: Observation) -> Rollout:
        return straightline_baseline(observation, self.guidance)
