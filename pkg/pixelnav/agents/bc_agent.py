"""Behaviour-cloning baseline: shared encoder design plus a coordinate-regression head"""

import time
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.exceptions import CheckpointError, EmptyCorpus
from ..data.dataset import BucketSampler, Episode, Observation, collate_clips, make_buckets
from ..engine import tensor as T
from ..engine.checkpoint import load_checkpoint, save_checkpoint
from ..engine.nn import Linear, MLP, Module
from ..engine.optim import Adam
from ..engine.tensor import Tensor, no_grad
from ..models.encoders import EncoderConfig, ObservationEncoder, sinusoidal_encoding
from .base_agent import BaseAgent
from .rollout import Rollout


class BCModel(Module):
    """Regresses the offset of every future point from the last observed position"""

    def __init__(self, cfg: EncoderConfig, seed: int = 42):
        rng = np.random.default_rng([seed, 2])
        self.cfg = cfg
        self.seed = seed
        self.observation_encoder = ObservationEncoder(cfg, rng)
        self.position_proj = Linear(2 * 2 * cfg.freq_pairs, cfg.coord_dim, rng)
        self.progress_proj = Linear(1, cfg.coord_dim, rng)
        self.head = MLP([cfg.model_dim + 2 * cfg.coord_dim, cfg.hidden_dim, 2], rng)

    def forward(self, clip: np.ndarray, mask: np.ndarray, last: np.ndarray,
                rows: np.ndarray, progress: np.ndarray) -> Tensor:
        """
        Args:
            clip, mask: padded batch of clips
            last: (B, 2) last observed positions
            rows: (n,) clip index of every requested step
            progress: (n,) (k + 1) / K of every requested step

        Returns:
            (n, 2) predicted positions, unclipped
        """
        z_c = T.getitem(self.observation_encoder(clip, mask), rows)
        anchor = last[rows]
        parts = [
            z_c,
            self.position_proj(Tensor(sinusoidal_encoding(anchor, self.cfg.freq_pairs))),
            self.progress_proj(Tensor(progress[:, None])),
        ]
        return self.head(T.concat(parts, axis=-1)) + anchor


def _step_rows(horizons: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    rows = np.concatenate([np.full(h, i) for i, h in enumerate(horizons)]).astype(np.int64)
    progress = np.concatenate([(np.arange(h) + 1.0) / h for h in horizons])
    return rows, progress


class BCAgent(BaseAgent):
    def __init__(self, cfg: EncoderConfig, seed: int = 42, name: str = "bc"):
        super().__init__(name)
        self.model = BCModel(cfg, seed)
        self.seed = seed
        self.epochs_trained = 0
        self.history: List[Dict[str, float]] = []

    def initialize(self) -> bool:
        if self.epochs_trained < 1:
            self.logger.warning(f"{self.name}: predicting with an untrained regression head")
        self.update_status("ready")
        return True

    def _forward(self, episodes_or_obs: Sequence, last: np.ndarray) -> Tuple[Tensor, np.ndarray]:
        clip, mask = collate_clips(episodes_or_obs)
        rows, progress = _step_rows([e.horizon for e in episodes_or_obs])
        return self.model(clip, mask, last, rows, progress), rows

    def train(self, episodes: Sequence[Episode], epochs: int = 100, lr: float = 3e-4,
              batch_size: int = 8, boundaries: Sequence[int] = (8, 12, 16),
              floor_ratio: float = 0.01) -> List[Dict[str, float]]:
        """Squared-error regression of future coordinates, Adam with cosine annealing"""
        if not episodes:
            raise EmptyCorpus("No episodes to train the BC baseline on")
        by_id = {e.episode_id: e for e in episodes}
        buckets = make_buckets({e.episode_id: e.clip_length for e in episodes}, boundaries)
        sampler = BucketSampler(buckets, batch_size, seed=self.seed)
        optimizer = Adam(self.model.parameters(), lr, epochs, floor_ratio)

        for epoch in range(epochs):
            started = time.perf_counter()
            optimizer.set_epoch(epoch)
            losses = []
            for batch_ids in sampler.batches(epoch):
                batch = [by_id[i] for i in batch_ids]
                last = np.array([e.observed[-1] for e in batch])
                predicted, _ = self._forward(batch, last)
                target = np.concatenate([e.future for e in batch])
                loss = T.mse(predicted, target)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                losses.append(loss.item())
            self.epochs_trained += 1
            row = {'epoch': epoch, 'mse': float(np.mean(losses)), 'lr': optimizer.lr,
                   'wall_time': time.perf_counter() - started}
            self.history.append(row)
            self.logger.debug(f"bc epoch {epoch + 1}/{epochs} mse={row['mse']:.6f}")
        self.logger.info(f"{self.name}: trained {epochs} epochs, final mse={self.history[-1]['mse']:.6f}")
        self.update_status("trained")
        return self.history

    def predict(self, observation: Observation) -> Rollout:
        with no_grad():
            predicted, _ = self._forward([observation], np.asarray(observation.observed[-1])[None])
        return Rollout(observation.episode_id, np.clip(predicted.data, 0.0, 1.0))

    # Persistence
    def save(self, path, metadata: Optional[Dict[str, Any]] = None):
        header = {
            'kind': 'bc',
            'encoder': {k: list(v) if isinstance(v, tuple) else v for k, v in self.model.cfg.__dict__.items()},
            'seed': self.seed,
            'epochs_trained': self.epochs_trained,
        }
        header.update(metadata or {})
        return save_checkpoint(path, self.model.state_dict(), header)

    @classmethod
    def load(cls, path, name: str = "bc") -> "BCAgent":
        arrays, metadata = load_checkpoint(path)
        if metadata.get('kind') != 'bc':
            raise CheckpointError(f"{path} is not a BC baseline checkpoint")
        agent = cls(EncoderConfig.from_section(metadata['encoder']), metadata.get('seed', 42), name)
        agent.model.load_state_dict(arrays)
        agent.epochs_trained = int(metadata.get('epochs_trained', 0))
        return agent
