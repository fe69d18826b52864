"""Predictor backed by the CQL-trained goal-conditioned policy"""

from ..data.dataset import Observation
from ..models.networks import PixelNavModel
from .base_agent import BaseAgent
from .rollout import GuidanceConfig, Rollout, predict


class CQLAgent(BaseAgent):
    """Expected-direction rollout of a PixelNavModel under extrapolated guidance"""

    def __init__(self, model: PixelNavModel, guidance: GuidanceConfig = GuidanceConfig(),
                 name: str = "cql", require_trained: bool = True):
        super().__init__(name)
        self.model = model
        self.guidance = guidance
        self.require_trained = require_trained

    def initialize(self) -> bool:
        if self.require_trained and self.model.epochs_trained < 1:
            self.logger.error(f"{self.name}: model has not been trained")
            self.update_status("untrained")
            return False
        self.update_status("ready")
        return True

    def predict(self, observation: Observation) -> Rollout:
        return predict(self.model, observation, self.guidance)
