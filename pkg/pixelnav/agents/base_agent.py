"""Base Agent class for all predictors"""

from abc import ABC, abstractmethod
from typing import Optional, Dict, Any, List, Sequence
from datetime import datetime

from ..data.dataset import Observation
from ..utils.logger import get_logger
from .rollout import Rollout


class BaseAgent(ABC):
    """Base class for every trajectory predictor in the system"""

    def __init__(self, name: str):
        """
        Initialize base agent

        Args:
            name: Agent name, used as the method label in reports
        """
        self.name = name
        self.logger = get_logger(f"agent.{name}")
        self.status = "initialized"
        self.last_update: Optional[datetime] = None

    @abstractmethod
    def initialize(self) -> bool:
        """
        Prepare the agent for prediction

        Returns:
            True if the agent can predict, False otherwise
        """

    @abstractmethod
    def predict(self, observation: Observation) -> Rollout:
        """Predict observation.horizon future points from observed data only"""

    def predict_many(self, observations: Sequence[Observation]) -> List[Rollout]:
        rollouts = [self.predict(o) for o in observations]
        self.update_status("ready")
        return rollouts

    def health_check(self) -> Dict[str, Any]:
        """
        Check agent health

        Returns:
            Health status dictionary
        """
        return {
            "name": self.name,
            "status": self.status,
            "last_update": self.last_update.isoformat() if self.last_update else None
        }

    def update_status(self, status: str) -> None:
        """Update agent status"""
        self.status = status
        self.last_update = datetime.now()

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__}: {self.name}, status={self.status}>"
