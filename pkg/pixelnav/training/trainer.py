"""Offline CQL trainer with four optimizers and gradient-flow separation"""

import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..core.exceptions import EmptyBatch, EmptyCorpus
from ..data.dataset import BucketSampler, Episode, collate_clips, make_buckets
from ..engine import tensor as T
from ..engine.optim import Adam
from ..engine.tensor import Tensor, no_grad
from ..models.networks import PixelNavModel
from ..utils.logger import get_logger
from .losses import (
    LossReport,
    TrainConfig,
    bc_loss,
    bellman_target,
    critic_loss,
    magnitude_loss,
    policy_loss,
    soft_state_value,
)

logger = get_logger(__name__)


@dataclass
class PreparedBatch:
    """
    Encoded states for one update; `states` keeps its graph back to the encoder.
    The critic sees every row, the actor path only `actor_rows`.
    """
    states: Tensor
    targets: np.ndarray
    actions: np.ndarray
    expert_lengths: np.ndarray
    actor_rows: np.ndarray

    @property
    def size(self) -> int:
        return len(self.actions)

    @property
    def actor_size(self) -> int:
        return len(self.actor_rows)


@dataclass
class EpochLog:
    epoch: int
    report: LossReport
    learning_rates: Dict[str, float]
    wall_time: float
    updates: int

    def as_row(self) -> Dict:
        row = {'epoch': self.epoch, **self.report.as_dict()}
        row.update({f"lr_{name}": lr for name, lr in self.learning_rates.items()})
        row['wall_time'] = self.wall_time
        row['updates'] = self.updates
        return row


def stack_transitions(episodes: Sequence[Episode]) -> Dict[str, np.ndarray]:
    """Flatten the transitions of a batch of episodes into column arrays"""
    rows = [(i, t) for i, e in enumerate(episodes) for t in e.transitions]
    if not rows:
        raise EmptyBatch("Batch has no transitions")
    return {
        'episode': np.array([i for i, _ in rows], dtype=np.int64),
        'k': np.array([t.k for _, t in rows], dtype=np.int64),
        'horizon': np.array([t.horizon for _, t in rows], dtype=np.int64),
        'position': np.array([t.position for _, t in rows]),
        'guidance': np.array([t.guidance for _, t in rows]),
        'action': np.array([t.expert_action - 1 for _, t in rows], dtype=np.int64),
        'length': np.array([t.expert_length for _, t in rows]),
        'reward': np.array([t.reward.total for _, t in rows]),
        'done': np.array([t.done for _, t in rows], dtype=bool),
        'next_position': np.array([t.next_position for _, t in rows]),
        'next_guidance': np.array([t.next_guidance for _, t in rows]),
    }


class CQLTrainer:
    """
    Runs the per-batch update:
    encode -> critic step on detached states -> actor/BC/magnitude step
    through the encoder -> soft target update
    """

    def __init__(self, model: PixelNavModel, cfg: TrainConfig, seed: int = 42):
        self.model = model
        self.cfg = cfg
        self.seed = seed
        self.rng = np.random.default_rng([seed, 1])
        self.clamped_targets = 0
        self.history: List[EpochLog] = []
        T.set_debug_checks(cfg.debug_nonfinite)

        floor = cfg.lr_floor_ratio
        self.optimizers: Dict[str, Adam] = {
            'encoder': Adam(model.encoder_parameters(), cfg.lr_encoder, cfg.epochs, floor),
            'actor': Adam(model.actor_parameters(), cfg.lr_actor, cfg.epochs, floor),
            'critic': Adam(model.critic_parameters(), cfg.lr_critic, cfg.epochs, floor),
            'magnitude': Adam(model.magnitude_parameters(), cfg.lr_mag, cfg.epochs, floor),
        }

    def learning_rates(self) -> Dict[str, float]:
        return {name: opt.lr for name, opt in self.optimizers.items()}

    def set_epoch(self, epoch: int) -> None:
        for opt in self.optimizers.values():
            opt.set_epoch(epoch)

    def zero_grad(self) -> None:
        for opt in self.optimizers.values():
            opt.zero_grad()

    def prepare(self, episodes: Sequence[Episode]) -> PreparedBatch:
        """Encode clips and states, build Bellman targets and pick the actor subsample"""
        if not episodes:
            raise EmptyBatch("Empty episode batch")
        model, cfg = self.model, self.cfg
        columns = stack_transitions(episodes)
        n = len(columns['k'])
        if n > cfg.max_transitions_per_update:
            actor_rows = np.sort(self.rng.choice(n, size=cfg.max_transitions_per_update, replace=False))
        else:
            actor_rows = np.arange(n)

        clip, mask = collate_clips(episodes)
        z_c = model.encode_clip(clip, mask)
        z_rows = T.getitem(z_c, columns['episode'])
        states = model.encode_state(z_rows, columns['position'], columns['guidance'],
                                    columns['k'], columns['horizon'])

        next_k = np.minimum(columns['k'] + 1, columns['horizon'] - 1)
        with no_grad():
            next_states = model.encode_state(z_rows.detach(), columns['next_position'],
                                             columns['next_guidance'], next_k, columns['horizon'])
            target_q1, target_q2 = model.critics.target(next_states)
            next_logits = model.policy(next_states)
        next_value = soft_state_value(target_q1.data, target_q2.data, next_logits.data, cfg.alpha_entropy)
        targets = bellman_target(columns['reward'], columns['done'], next_value, cfg.gamma)

        lengths = columns['length']
        if cfg.clamp_magnitude_target:
            over = lengths > model.delta_max
            if np.any(over):
                self.clamped_targets += int(over.sum())
                lengths = np.minimum(lengths, model.delta_max)
        return PreparedBatch(states, targets, columns['action'], lengths, actor_rows)

    def critic_backward(self, batch: PreparedBatch) -> Dict[str, float]:
        """Critic loss on detached states; leaves gradients on critic parameters only"""
        q1, q2 = self.model.critics(batch.states.detach())
        total, parts = critic_loss(q1, q2, batch.actions, batch.targets, self.cfg.alpha_cql)
        total.backward()
        parts['critic_total'] = total.item()
        return parts

    def actor_backward(self, batch: PreparedBatch) -> Dict[str, float]:
        """Policy + BC + magnitude loss through the live state graph into the encoder"""
        model, cfg = self.model, self.cfg
        rows = batch.actor_rows
        states = batch.states if batch.actor_size == batch.size else T.getitem(batch.states, rows)
        logits = model.policy(states)
        q1, q2 = model.critics(states)
        policy = policy_loss(logits, q1, q2, cfg.alpha_entropy)
        bc = bc_loss(logits, batch.actions[rows])
        probs = T.softmax(logits, axis=-1)
        magnitude = magnitude_loss(model.magnitude(states), probs, batch.expert_lengths[rows], cfg.lambda_mag)
        total = policy * cfg.policy_weight + bc * cfg.bc_weight + magnitude
        total.backward()
        return {'policy': policy.item(), 'bc': bc.item(), 'magnitude': magnitude.item(),
                'actor_total': total.item()}

    def update(self, episodes: Sequence[Episode]) -> LossReport:
        batch = self.prepare(episodes)

        self.zero_grad()
        critic_parts = self.critic_backward(batch)
        self.optimizers['critic'].step()

        self.zero_grad()
        actor_parts = self.actor_backward(batch)
        self.optimizers['actor'].step()
        self.optimizers['magnitude'].step()
        self.optimizers['encoder'].step()
        self.zero_grad()

        self.model.critics.soft_update(self.cfg.tau_soft)
        logger.debug(f"update: n={batch.size} actor_n={batch.actor_size} critic={critic_parts['critic_total']:.5f} "
                     f"actor={actor_parts['actor_total']:.5f}")
        return LossReport(
            critic1=critic_parts['critic1'],
            critic2=critic_parts['critic2'],
            bellman=critic_parts['bellman'],
            cql_penalty=critic_parts['cql_penalty'],
            policy=actor_parts['policy'],
            bc=actor_parts['bc'],
            magnitude=actor_parts['magnitude'],
            critic_total=critic_parts['critic_total'],
            actor_total=actor_parts['actor_total'],
        )

    def train_epoch(self, episodes: Sequence[Episode], epoch: int,
                    boundaries: Sequence[int] = (8, 12, 16)) -> EpochLog:
        """One pass over bucketed batches at the epoch's scheduled learning rates"""
        if not episodes:
            raise EmptyCorpus("No episodes to train on")
        started = time.perf_counter()
        by_id = {e.episode_id: e for e in episodes}
        buckets = make_buckets({e.episode_id: e.clip_length for e in episodes}, boundaries)
        sampler = BucketSampler(buckets, self.cfg.batch_size, seed=self.seed)

        self.set_epoch(epoch)
        rates = self.learning_rates()
        clamped_before = self.clamped_targets
        reports = [self.update([by_id[i] for i in batch]) for batch in sampler.batches(epoch)]
        if self.clamped_targets > clamped_before:
            logger.warning(f"Magnitude targets clamped to delta_max: "
                           f"{self.clamped_targets - clamped_before} this epoch, {self.clamped_targets} total")

        self.model.epochs_trained += 1
        log = EpochLog(epoch, LossReport.mean(reports), rates, time.perf_counter() - started, len(reports))
        self.history.append(log)
        r = log.report
        logger.info(f"epoch {epoch + 1}/{self.cfg.epochs} critic={r.critic_total:.4f} "
                    f"cql={r.cql_penalty:.4f} policy={r.policy:.4f} bc={r.bc:.4f} "
                    f"mag={r.magnitude:.6f} lr_actor={rates['actor']:.2e} ({log.wall_time:.1f}s)")
        return log

    def fit(self, episodes: Sequence[Episode], epochs: Optional[int] = None,
            boundaries: Sequence[int] = (8, 12, 16),
            on_epoch: Optional[Callable[[EpochLog], None]] = None) -> List[EpochLog]:
        epochs = epochs or self.cfg.epochs
        logs = []
        for epoch in range(epochs):
            log = self.train_epoch(episodes, epoch, boundaries)
            if on_epoch is not None:
                on_epoch(log)
            logs.append(log)
        return logs

    # Persistence
    def optimizer_arrays(self) -> Dict[str, np.ndarray]:
        arrays: Dict[str, np.ndarray] = {}
        for name, opt in self.optimizers.items():
            arrays.update(opt.state_dict(f"optim.{name}"))
        return arrays

    def load_optimizer_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        for name, opt in self.optimizers.items():
            if f"optim.{name}.step" in arrays:
                opt.load_state_dict(arrays, f"optim.{name}")

    def save(self, path, metadata: Optional[Dict] = None):
        header = {'clamped_targets': self.clamped_targets, 'train_seed': self.seed}
        header.update(metadata or {})
        return self.model.save(path, header, extra=self.optimizer_arrays())


def train_epoch(episodes: Sequence[Episode], model: PixelNavModel, cfg: TrainConfig, seed: int = 42,
                epoch: int = 0, boundaries: Sequence[int] = (8, 12, 16)) -> LossReport:
    """Single-epoch convenience wrapper; the model is updated in place"""
    return CQLTrainer(model, cfg, seed).train_epoch(episodes, epoch, boundaries).report
