"""Agent Manager - runs every registered predictor over the same observations"""

from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Any, Sequence

from ..data.dataset import Observation
from ..utils.logger import get_logger
from .base_agent import BaseAgent
from .rollout import Rollout


class AgentManager:
    """Manages and evaluates all predictors"""

    def __init__(self, threads: int = 1):
        self.agents: Dict[str, BaseAgent] = {}
        self.logger = get_logger("agent_manager")
        self.threads = max(int(threads), 1)
        self.errors: Dict[str, str] = {}

    def register_agent(self, agent: BaseAgent) -> None:
        """
        Register an agent with the manager

        Args:
            agent: Agent to register
        """
        if agent.name in self.agents:
            self.logger.warning(f"Agent {agent.name} already registered, overwriting")

        self.agents[agent.name] = agent
        self.logger.info(f"Registered agent: {agent.name}")

    def initialize_all(self) -> Dict[str, bool]:
        """Initialize every agent; failures are logged and reported, not raised"""
        results = {}
        for name, agent in self.agents.items():
            try:
                results[name] = agent.initialize()
            except Exception as e:
                self.logger.error(f"Failed to initialize agent {name}: {e}")
                results[name] = False
        return results

    def _run_agent(self, agent: BaseAgent, observations: Sequence[Observation]) -> List[Rollout]:
        if self.threads == 1:
            return agent.predict_many(observations)
        # pool.map keeps input order, so results do not depend on thread count
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            rollouts = list(pool.map(agent.predict, observations))
        agent.update_status("ready")
        return rollouts

    def predict_all(self, observations: Sequence[Observation]) -> Dict[str, List[Rollout]]:
        """
        Run every agent on the same observations

        Returns:
            {agent name: rollouts in observation order}; agents that raise are
            left out and their error recorded in self.errors
        """
        self.errors = {}
        results: Dict[str, List[Rollout]] = {}
        for name, agent in self.agents.items():
            try:
                results[name] = self._run_agent(agent, observations)
                self.logger.info(f"{name}: predicted {len(observations)} trajectories")
            except Exception as e:
                self.logger.exception(f"Agent {name} failed during prediction")
                agent.update_status("error")
                self.errors[name] = str(e)
        return results

    def get_all_status(self) -> Dict[str, Any]:
        """
        Get status of all agents

        Returns:
            Dictionary with agent statuses
        """
        statuses = {}
        for name, agent in self.agents.items():
            try:
                statuses[name] = agent.health_check()
            except Exception as e:
                statuses[name] = {"error": str(e)}

        return statuses

    def list_agents(self) -> List[str]:
        """
        List all registered agents

        Returns:
            List of agent names
        """
        return list(self.agents.keys())

    def __repr__(self) -> str:
        agent_list = ", ".join(self.agents.keys())
        return f"<AgentManager: {len(self.agents)} agents [{agent_list}]>"
