"""Agents package initialization"""

from .rollout import GuidanceConfig, Rollout, extrapolate_guidance, predict, rollout_with
from .base_agent import BaseAgent
from .agent_manager import AgentManager
from .cql_agent import CQLAgent
from .bc_agent import BCAgent, BCModel
from .straightline_agent import StraightLineAgent, straightline_baseline

__all__ = [
    'GuidanceConfig',
    'Rollout',
    'extrapolate_guidance',
    'predict',
    'rollout_with',
    'BaseAgent',
    'AgentManager',
    'CQLAgent',
    'BCAgent',
    'BCModel',
    'StraightLineAgent',
    'straightline_baseline',
]
