"""
评测模块

IoU、主事件片段排名、R@1 / R@5 / mIoU 报表以及频率先验基线。
"""

from .metrics import (
    CATEGORY_ORDER,
    EvaluationReport,
    MetricRow,
    Prediction,
    evaluate,
    frequency_prior,
    iou,
    rank_main_segments,
)
from .config import EvaluationConfig, get_evaluation_config
from .report import render_table

__all__ = [
    'CATEGORY_ORDER',
    'EvaluationConfig',
    'get_evaluation_config',
    'EvaluationReport',
    'MetricRow',
    'Prediction',
    'evaluate',
    'frequency_prior',
    'iou',
    'rank_main_segments',
    'render_table',
]
