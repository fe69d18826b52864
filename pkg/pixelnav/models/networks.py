"""Policy, magnitude and twin-critic heads, and the full goal-conditioned model"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..core.actions import NUM_ACTIONS
from ..core.exceptions import CheckpointError, UntrainedModel
from ..engine import tensor as T
from ..engine.checkpoint import load_checkpoint, save_checkpoint
from ..engine.nn import MLP, Module
from ..engine.optim import soft_update
from ..engine.tensor import Tensor, no_grad
from ..utils.logger import get_logger
from .encoders import EncoderConfig, ObservationEncoder, StateEncoder

logger = get_logger(__name__)


class PolicyHead(Module):
    """State -> logits over the 9 direction actions"""

    def __init__(self, state_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.net = MLP([state_dim, hidden_dim, NUM_ACTIONS], rng)

    def forward(self, s: Tensor) -> Tensor:
        return self.net(s)


class MagnitudeHead(Module):
    """State -> step length in [0, delta_max]"""

    def __init__(self, state_dim: int, hidden_dim: int, delta_max: float, rng: np.random.Generator):
        self.net = MLP([state_dim, hidden_dim, 1], rng)
        self.delta_max = delta_max

    def forward(self, s: Tensor) -> Tensor:
        return T.sigmoid(self.net(s)).reshape(s.shape[0]) * self.delta_max


class QHead(Module):
    """State -> all 9 action values in one projection"""

    def __init__(self, state_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.net = MLP([state_dim, hidden_dim, NUM_ACTIONS], rng)

    def forward(self, s: Tensor) -> Tensor:
        return self.net(s)


class CriticPair(Module):
    """Twin Q heads with frozen lagged copies that move only through soft_update"""

    def __init__(self, state_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.q1 = QHead(state_dim, hidden_dim, rng)
        self.q2 = QHead(state_dim, hidden_dim, rng)
        self.q1_target = QHead(state_dim, hidden_dim, rng).freeze()
        self.q2_target = QHead(state_dim, hidden_dim, rng).freeze()
        self.q1_target.load_state_dict(self.q1.state_dict())
        self.q2_target.load_state_dict(self.q2.state_dict())

    def forward(self, s: Tensor) -> Tuple[Tensor, Tensor]:
        return self.q1(s), self.q2(s)

    def target(self, s: Tensor) -> Tuple[Tensor, Tensor]:
        return self.q1_target(s), self.q2_target(s)

    def online_parameters(self) -> List[Tensor]:
        return self.q1.parameters() + self.q2.parameters()

    def target_tensors(self) -> List[Tensor]:
        return [t for _, t in self.q1_target.named_tensors()] + [t for _, t in self.q2_target.named_tensors()]

    def soft_update(self, tau_soft: float) -> None:
        soft_update(self.target_tensors(), self.online_parameters(), tau_soft)


class PixelNavModel(Module):
    """Observation encoder, state encoder, policy, magnitude head and critics"""

    def __init__(self, cfg: EncoderConfig, delta_max: float = 0.05, seed: int = 42):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.delta_max = delta_max
        self.seed = seed
        self.epochs_trained = 0
        self.observation_encoder = ObservationEncoder(cfg, rng)
        self.state_encoder = StateEncoder(cfg, rng)
        self.policy = PolicyHead(cfg.state_dim, cfg.hidden_dim, rng)
        self.magnitude = MagnitudeHead(cfg.state_dim, cfg.hidden_dim, delta_max, rng)
        self.critics = CriticPair(cfg.state_dim, cfg.hidden_dim, rng)

    # Parameter groups, one per optimizer
    def encoder_parameters(self) -> List[Tensor]:
        return self.observation_encoder.parameters() + self.state_encoder.parameters()

    def actor_parameters(self) -> List[Tensor]:
        return self.policy.parameters()

    def critic_parameters(self) -> List[Tensor]:
        return self.critics.online_parameters()

    def magnitude_parameters(self) -> List[Tensor]:
        return self.magnitude.parameters()

    def encode_clip(self, clip: np.ndarray, mask: np.ndarray) -> Tensor:
        return self.observation_encoder(clip, mask)

    def encode_state(self, z_c: Tensor, p_hat, guidance, k, t_pred) -> Tensor:
        return self.state_encoder(z_c, p_hat, guidance, k, t_pred)

    def act(self, s: Tensor) -> Tuple[np.ndarray, np.ndarray]:
        """Policy probabilities (B, 9) and magnitudes (B,) without building a graph"""
        with no_grad():
            probs = T.softmax(self.policy(s), axis=-1).data
            magnitude = self.magnitude(s).data
        return probs, magnitude

    def require_trained(self) -> None:
        if self.epochs_trained < 1:
            raise UntrainedModel("Model has not been trained; load a checkpoint produced by `train`")

    # Persistence
    def save(self, path, metadata: Optional[Dict[str, Any]] = None, extra: Optional[Dict[str, np.ndarray]] = None) -> Path:
        arrays = {f"model.{name}": value for name, value in self.state_dict().items()}
        if extra:
            arrays.update(extra)
        header = {
            'encoder': {k: list(v) if isinstance(v, tuple) else v for k, v in self.cfg.__dict__.items()},
            'delta_max': self.delta_max,
            'seed': self.seed,
            'epochs_trained': self.epochs_trained,
        }
        header.update(metadata or {})
        return save_checkpoint(path, arrays, header)

    @classmethod
    def load(cls, path) -> Tuple["PixelNavModel", Dict[str, np.ndarray], Dict[str, Any]]:
        """Returns (model, non-model arrays such as optimizer moments, metadata)"""
        arrays, metadata = load_checkpoint(path)
        if 'encoder' not in metadata:
            raise CheckpointError(f"{path} does not hold a PixelNav model")
        model = cls(EncoderConfig.from_section(metadata['encoder']),
                    delta_max=metadata.get('delta_max', 0.05), seed=metadata.get('seed', 42))
        state = {name[len("model."):]: value for name, value in arrays.items() if name.startswith("model.")}
        model.load_state_dict(state)
        model.epochs_trained = int(metadata.get('epochs_trained', 0))
        rest = {name: value for name, value in arrays.items() if not name.startswith("model.")}
        logger.debug(f"Loaded model from {path} ({model.epochs_trained} epochs trained)")
        return model, rest, metadata
