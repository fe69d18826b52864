"""Analysis package initialization"""

from .metrics import MetricsReport, ade, evaluate_rollouts, fde, frechet, to_pixels
from .statistics import WilcoxonResult, compare_methods, wilcoxon_signed_rank
from .qcurve import QCurve, compute_qcurve, compute_qcurves, dominance_fraction, read_qcurves, write_qcurves

__all__ = [
    'MetricsReport',
    'ade',
    'evaluate_rollouts',
    'fde',
    'frechet',
    'to_pixels',
    'WilcoxonResult',
    'compare_methods',
    'wilcoxon_signed_rank',
    'QCurve',
    'compute_qcurve',
    'compute_qcurves',
    'dominance_fraction',
    'read_qcurves',
    'write_qcurves',
]
