"""SVG charts for evaluation reports and Q-curves"""

from pathlib import Path
from typing import Dict, List, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ..utils.logger import get_logger
from .metrics import METRIC_NAMES, MetricsReport
from .qcurve import QCurve, read_qcurves

logger = get_logger(__name__)

METRIC_LABELS = {'ade': 'ADE (px)', 'fde': 'FDE (px)', 'fd': 'Fréchet distance (px)'}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # no creation date in the SVG
    fig.savefig(str(path), format='svg', bbox_inches='tight', metadata={'Date': None})
    plt.close(fig)
    return path


def plot_qcurves(curves: Sequence[QCurve], path, max_panels: int = 6) -> Path:
    """One panel per episode: Q_policy and Q_expert per step, keyframe steps marked"""
    curves = list(curves)[:max_panels]
    cols = min(3, max(len(curves), 1))
    rows = max(1, -(-len(curves) // cols))
    fig, axes = plt.subplots(rows, cols, figsize=(4.2 * cols, 3.0 * rows), squeeze=False)
    for ax, curve in zip(axes.flat, curves):
        steps = np.arange(1, len(curve) + 1)
        ax.plot(steps, curve.q_policy, marker='o', label='Q(s, argmax π)')
        ax.plot(steps, curve.q_expert, marker='s', linestyle='--', label='Q(s, a*)')
        kf = curve.keyframe
        if np.any(kf):
            ax.scatter(steps[kf], curve.q_expert[kf], s=80, facecolors='none', edgecolors='k',
                       label='keyframe step')
        ax.set_title(curve.episode_id, fontsize=9)
        ax.set_xlabel('prediction step')
        ax.set_ylabel('min(Q1, Q2)')
        ax.grid(alpha=0.3)
    for ax in list(axes.flat)[len(curves):]:
        ax.axis('off')
    if curves:
        axes.flat[0].legend(fontsize=7)
    return _save(fig, path)


def plot_violins(values: Dict[str, np.ndarray], metric: str, path) -> Path:
    """Per-method distribution of one metric"""
    methods = list(values)
    fig, ax = plt.subplots(figsize=(1.8 * max(len(methods), 2) + 1.5, 3.6))
    data = [np.asarray(values[m], dtype=np.float64) for m in methods]
    positions = np.arange(1, len(methods) + 1)
    drawable = [(p, d) for p, d in zip(positions, data) if len(d) > 1]
    if drawable:
        ax.violinplot([d for _, d in drawable], positions=[p for p, _ in drawable],
                      showmeans=True, showextrema=True)
    for p, d in zip(positions, data):
        ax.scatter(np.full(len(d), p), d, s=6, alpha=0.4, color='k')
    ax.set_xticks(positions)
    ax.set_xticklabels(methods)
    ax.set_ylabel(METRIC_LABELS.get(metric, metric))
    ax.grid(axis='y', alpha=0.3)
    return _save(fig, path)


def plot_cdfs(values: Dict[str, np.ndarray], metric: str, path) -> Path:
    """Empirical CDF of one metric per method"""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for method, v in values.items():
        v = np.sort(np.asarray(v, dtype=np.float64))
        if len(v) == 0:
            continue
        ax.step(v, np.arange(1, len(v) + 1) / len(v), where='post', label=method)
    ax.set_xlabel(METRIC_LABELS.get(metric, metric))
    ax.set_ylabel('fraction of trajectories')
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def render_reports(report_dir, out_dir) -> List[Path]:
    """
    Turn every per-trajectory CSV in report_dir into violin and CDF charts,
    and every qcurves*.csv into a Q-curve chart

    Returns:
        Paths of the written SVG files
    """
    report_dir, out_dir = Path(report_dir), Path(out_dir)
    written: List[Path] = []

    by_method: Dict[str, List[MetricsReport]] = {}
    for csv_path in sorted(report_dir.glob('*.csv')):
        if csv_path.name.startswith('qcurves'):
            curves = read_qcurves(csv_path)
            written.append(plot_qcurves(curves, out_dir / f"{csv_path.stem}.svg"))
            continue
        try:
            report = MetricsReport.read(csv_path)
        except (KeyError, ValueError) as e:
            logger.warning(f"Skipping {csv_path.name}: not a metrics report ({e})")
            continue
        by_method.setdefault(report.method, []).append(report)

    if by_method:
        for metric in METRIC_NAMES:
            values = {m: np.concatenate([r.values(metric) for r in reports]) for m, reports in by_method.items()}
            written.append(plot_violins(values, metric, out_dir / f"violin_{metric}.svg"))
            written.append(plot_cdfs(values, metric, out_dir / f"cdf_{metric}.svg"))

    logger.info(f"Wrote {len(written)} charts to {out_dir}")
    return written
