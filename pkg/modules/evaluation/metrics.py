"""
评测指标

R@k：真实主事件片段出现在前 k 个预测中的查询百分比；
mIoU：top-1 预测与真实片段 IoU 的均值（百分比）。
按类别分组，平均行是各类别行的算术平均。
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from modules.errors import DataError
from modules.matching import as_score_matrix
from modules.training import Category
from modules.video import Segment, SegmentSet

# 报表中的类别顺序
CATEGORY_ORDER = (Category.DIDEMO, Category.BEFORE, Category.AFTER, Category.THEN, Category.WHILE)


def iou(a: Segment, b: Segment) -> float:
    """闭区间 clip 集合上的交并比"""
    intersection = min(a[1], b[1]) - max(a[0], b[0]) + 1
    if intersection <= 0:
        return 0.0
    union = (a[1] - a[0] + 1) + (b[1] - b[0] + 1) - intersection
    return intersection / union


def rank_main_segments(S) -> List[int]:
    """按 max_j S_ij 降序排列主事件片段，并列时下标小者在前"""
    matrix = as_score_matrix(S)
    row_max = matrix.max(axis=1)
    return sorted(range(matrix.shape[0]), key=lambda i: (-row_max[i], i))


def frequency_prior(ground_truths: Sequence[Segment], segments: SegmentSet) -> List[int]:
    """按训练集中作为真实主事件的频次降序排列候选片段

    Args:
        ground_truths: 训练集的真实主事件片段
        segments: 候选片段

    Returns:
        对所有测试查询通用的片段下标排名
    """
    if not ground_truths:
        raise DataError("frequency prior needs at least one training example")
    counts = Counter(segments.index_of(segment) for segment in ground_truths)
    return sorted(range(segments.size), key=lambda i: (-counts.get(i, 0), i))


@dataclass
class Prediction:
    """一条查询的排名结果"""
    query_id: str
    category: Category
    ranked: List[Segment]
    ground_truth: Segment

    def __post_init__(self):
        self.category = Category.parse(self.category)


@dataclass
class MetricRow:
    r1: float
    r5: float
    miou: float
    count: int = 0

    def to_dict(self) -> dict:
        return {"R@1": self.r1, "R@5": self.r5, "mIoU": self.miou, "queries": self.count}


@dataclass
class EvaluationReport:
    """分类别指标与平均行"""
    rows: Dict[Category, MetricRow] = field(default_factory=dict)
    average: MetricRow = None

    def categories(self) -> List[Category]:
        return [c for c in CATEGORY_ORDER if c in self.rows]

    def to_dict(self) -> dict:
        return {
            "categories": {c.value: self.rows[c].to_dict() for c in self.categories()},
            "average": self.average.to_dict(),
        }


def _metric_row(predictions: Sequence[Prediction]) -> MetricRow:
    n = len(predictions)
    r1 = sum(1 for p in predictions if p.ground_truth in p.ranked[:1])
    r5 = sum(1 for p in predictions if p.ground_truth in p.ranked[:5])
    miou = sum(iou(p.ranked[0], p.ground_truth) for p in predictions)
    return MetricRow(100.0 * r1 / n, 100.0 * r5 / n, 100.0 * miou / n, n)


def evaluate(predictions: Sequence[Prediction]) -> EvaluationReport:
    """计算 R@1、R@5、mIoU

    Raises:
        DataError: 无查询、类别未知或某条查询没有排名
    """
    if not predictions:
        raise DataError("no predictions to evaluate")
    grouped: Dict[Category, List[Prediction]] = {}
    for prediction in predictions:
        if not prediction.ranked:
            raise DataError(f"query {prediction.query_id}: empty ranking")
        grouped.setdefault(Category.parse(prediction.category), []).append(prediction)

    report = EvaluationReport()
    for category in CATEGORY_ORDER:
        if category in grouped:
            report.rows[category] = _metric_row(grouped[category])
    rows = list(report.rows.values())
    report.average = MetricRow(
        r1=float(np.mean([row.r1 for row in rows])),
        r5=float(np.mean([row.r5 for row in rows])),
        miou=float(np.mean([row.miou for row in rows])),
        count=sum(row.count for row in rows),
    )
    return report
