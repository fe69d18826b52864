"""Displacement and shape metrics in source-pixel units"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml
from scipy.spatial.distance import cdist

from ..core.exceptions import EmptyTrajectory, LengthMismatch
from ..utils.logger import get_logger

logger = get_logger(__name__)

METRIC_NAMES = ('ade', 'fde', 'fd')


def to_pixels(points, resolution: Tuple[int, int]) -> np.ndarray:
    """
    Rescale normalized points to source pixels, x and y separately

    Matches the corpus normalization, so pixel 0 and pixel w-1 map to 0 and 1.
    """
    width, height = resolution
    return np.asarray(points, dtype=np.float64) * np.array([width - 1, height - 1], dtype=np.float64)


def _paired(pred, gt) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64).reshape(-1, 2)
    gt = np.asarray(gt, dtype=np.float64).reshape(-1, 2)
    if len(pred) != len(gt):
        raise LengthMismatch(f"Predicted length {len(pred)} differs from ground truth length {len(gt)}")
    if len(pred) == 0:
        raise EmptyTrajectory("Cannot score an empty trajectory")
    return pred, gt


def ade(pred, gt) -> float:
    """Mean Euclidean distance over all steps"""
    pred, gt = _paired(pred, gt)
    return float(np.mean(np.linalg.norm(pred - gt, axis=1)))


def fde(pred, gt) -> float:
    """Euclidean distance at the final step"""
    pred, gt = _paired(pred, gt)
    return float(np.linalg.norm(pred[-1] - gt[-1]))


def frechet(pred, gt) -> float:
    """
    Discrete Fréchet distance

    dp[0, 0] is the first pairwise distance, the first row and column carry
    running maxima, and every other cell is
    max(min(dp[i-1, j], dp[i, j-1], dp[i-1, j-1]), d(i, j)).

    Raises:
        EmptyTrajectory: either sequence is empty
    """
    pred = np.asarray(pred, dtype=np.float64).reshape(-1, 2)
    gt = np.asarray(gt, dtype=np.float64).reshape(-1, 2)
    if len(pred) == 0 or len(gt) == 0:
        raise EmptyTrajectory("Fréchet distance needs two non-empty sequences")

    dist = cdist(pred, gt)
    p, q = dist.shape
    dp = np.empty((p, q), dtype=np.float64)
    dp[0, 0] = dist[0, 0]
    for i in range(1, p):
        dp[i, 0] = max(dp[i - 1, 0], dist[i, 0])
    for j in range(1, q):
        dp[0, j] = max(dp[0, j - 1], dist[0, j])
    for i in range(1, p):
        for j in range(1, q):
            dp[i, j] = max(min(dp[i - 1, j], dp[i, j - 1], dp[i - 1, j - 1]), dist[i, j])
    return float(dp[-1, -1])


def score_pixels(pred_px, gt_px) -> Dict[str, float]:
    return {'ade': ade(pred_px, gt_px), 'fde': fde(pred_px, gt_px), 'fd': frechet(pred_px, gt_px)}


@dataclass
class MetricsReport:
    """Per-trajectory ADE/FDE/FD in pixels and their corpus summary"""
    method: str
    resolution: Tuple[int, int]
    records: List[Dict[str, Any]] = field(default_factory=list)
    seed: Optional[int] = None

    def values(self, metric: str) -> np.ndarray:
        return np.array([r[metric] for r in self.records], dtype=np.float64)

    def summary(self) -> Dict[str, Any]:
        summary: Dict[str, Any] = {
            'method': self.method,
            'count': len(self.records),
            'resolution': list(self.resolution),
        }
        if self.seed is not None:
            summary['seed'] = self.seed
        for metric in METRIC_NAMES:
            values = self.values(metric)
            # population std (ddof=0)
            summary[metric] = {
                'mean': float(values.mean()) if len(values) else float('nan'),
                'std': float(values.std()) if len(values) else float('nan'),
            }
        return summary

    def flat_summary(self) -> Dict[str, Any]:
        """Summary as `<metric>_mean` / `<metric>_std` columns for the run ledger"""
        flat: Dict[str, Any] = {'trajectories': len(self.records)}
        for metric, stats in self.summary().items():
            if metric in METRIC_NAMES:
                flat[f"{metric}_mean"] = stats['mean']
                flat[f"{metric}_std"] = stats['std']
        return flat

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.records, columns=['episode_id', 'horizon', *METRIC_NAMES])
        frame.insert(0, 'method', self.method)
        if self.seed is not None:
            frame.insert(1, 'seed', self.seed)
        return frame

    def write(self, out_dir, stem: Optional[str] = None) -> Dict[str, Path]:
        """Write `<stem>.csv` (per trajectory) and `<stem>_summary.yaml`"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = stem or self.method
        csv_path = out_dir / f"{stem}.csv"
        summary_path = out_dir / f"{stem}_summary.yaml"
        self.to_frame().to_csv(csv_path, index=False, float_format='%.10g')
        with open(summary_path, 'w', encoding='utf-8') as f:
            yaml.safe_dump(self.summary(), f, default_flow_style=False, sort_keys=False)
        return {'csv': csv_path, 'summary': summary_path}

    @classmethod
    def read(cls, csv_path) -> "MetricsReport":
        frame = pd.read_csv(csv_path)
        if frame.empty:
            raise EmptyTrajectory(f"{csv_path} holds no per-trajectory rows")
        seed = int(frame['seed'].iloc[0]) if 'seed' in frame else None
        records = frame[['episode_id', 'horizon', *METRIC_NAMES]].to_dict('records')
        return cls(str(frame['method'].iloc[0]), (0, 0), records, seed)


def evaluate_rollouts(method: str, episodes: Sequence, rollouts: Sequence,
                      resolution: Optional[Tuple[int, int]] = None,
                      threads: int = 1, seed: Optional[int] = None) -> MetricsReport:
    """
    Score rollouts against their episodes' ground-truth futures

    Args:
        episodes: episodes in the same order as rollouts
        resolution: overrides each episode's source resolution when given
    """
    if len(episodes) != len(rollouts):
        raise LengthMismatch(f"{len(rollouts)} rollouts for {len(episodes)} episodes")

    def score(pair) -> Dict[str, Any]:
        episode, rollout = pair
        res = resolution or episode.resolution
        record = {'episode_id': episode.episode_id, 'horizon': episode.horizon}
        record.update(score_pixels(to_pixels(rollout.points, res), to_pixels(episode.future, res)))
        return record

    pairs = list(zip(episodes, rollouts))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(score, pairs))
    else:
        records = [score(p) for p in pairs]

    report_resolution = resolution or (episodes[0].resolution if episodes else (0, 0))
    report = MetricsReport(method, tuple(report_resolution), records, seed)
    s = report.summary()
    logger.info(f"{method}: ADE={s['ade']['mean']:.2f}±{s['ade']['std']:.2f}px "
                f"FDE={s['fde']['mean']:.2f}px FD={s['fd']['mean']:.2f}px over {len(records)} trajectories")
    return report
