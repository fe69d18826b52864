"""Per-step pessimistic value of the policy's action versus the expert's"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

import numpy as np
import pandas as pd

from ..core.exceptions import LengthMismatch
from ..engine import tensor as T
from ..engine.tensor import no_grad
from ..utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class QCurve:
    """min(Q1, Q2) at argmax-pi and at the expert action, one entry per transition"""
    episode_id: str
    q_policy: np.ndarray
    q_expert: np.ndarray
    policy_actions: np.ndarray      # 1..9
    expert_actions: np.ndarray      # 1..9
    keyframe: np.ndarray            # bool, step lands on an annotated keyframe

    def __post_init__(self):
        if len(self.q_policy) != len(self.q_expert):
            raise LengthMismatch("Q-curve series differ in length")

    def __len__(self) -> int:
        return len(self.q_policy)

    def dominance_fraction(self, tolerance: float = 1e-6) -> float:
        """Share of steps where Q_policy >= Q_expert - tolerance"""
        if len(self) == 0:
            return float('nan')
        return float(np.mean(self.q_policy >= self.q_expert - tolerance))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'episode_id': self.episode_id,
            'step': np.arange(len(self)),
            'q_policy': self.q_policy,
            'q_expert': self.q_expert,
            'policy_action': self.policy_actions,
            'expert_action': self.expert_actions,
            'keyframe': self.keyframe,
        })


def compute_qcurve(model, episode) -> QCurve:
    """
    Evaluate the online critics on the expert states of one episode

    Raises:
        UntrainedModel: model was never trained
    """
    model.require_trained()
    transitions = episode.transitions
    clip = np.asarray(episode.clip)[None]
    mask = np.ones((1, clip.shape[1]), dtype=bool)
    rows = np.zeros(len(transitions), dtype=np.int64)

    with no_grad():
        z_c = T.getitem(model.encode_clip(clip, mask), rows)
        states = model.encode_state(
            z_c,
            np.array([t.position for t in transitions]),
            np.array([t.guidance for t in transitions]),
            np.array([t.k for t in transitions]),
            np.array([t.horizon for t in transitions]),
        )
        logits = model.policy(states).data
        q1, q2 = model.critics(states)
    q_min = np.minimum(q1.data, q2.data)

    steps = np.arange(len(transitions))
    policy_idx = np.argmax(logits, axis=-1)
    expert_idx = np.array([t.expert_action - 1 for t in transitions], dtype=np.int64)
    return QCurve(
        episode_id=episode.episode_id,
        q_policy=q_min[steps, policy_idx],
        q_expert=q_min[steps, expert_idx],
        policy_actions=policy_idx + 1,
        expert_actions=expert_idx + 1,
        keyframe=np.array([r.is_keyframe for r in episode.references], dtype=bool),
    )


def compute_qcurves(model, episodes: Sequence) -> List[QCurve]:
    curves = [compute_qcurve(model, e) for e in episodes]
    overall = dominance_fraction(curves)
    logger.info(f"Q-curves for {len(curves)} episodes: Q_policy >= Q_expert at {overall:.1%} of steps")
    return curves


def dominance_fraction(curves: Sequence[QCurve], tolerance: float = 1e-6) -> float:
    """Pooled over all steps of all curves"""
    if not curves:
        return float('nan')
    policy = np.concatenate([c.q_policy for c in curves])
    expert = np.concatenate([c.q_expert for c in curves])
    return float(np.mean(policy >= expert - tolerance))


def write_qcurves(curves: Sequence[QCurve], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.concat([c.to_frame() for c in curves], ignore_index=True).to_csv(path, index=False, float_format='%.10g')
    return path


def read_qcurves(path) -> List[QCurve]:
    frame = pd.read_csv(path)
    curves = []
    for episode_id, group in frame.groupby('episode_id', sort=False):
        group = group.sort_values('step')
        curves.append(QCurve(
            episode_id=str(episode_id),
            q_policy=group['q_policy'].to_numpy(dtype=np.float64),
            q_expert=group['q_expert'].to_numpy(dtype=np.float64),
            policy_actions=group['policy_action'].to_numpy(dtype=np.int64),
            expert_actions=group['expert_action'].to_numpy(dtype=np.int64),
            keyframe=group['keyframe'].to_numpy(dtype=bool),
        ))
    return curves
