"""
评测报表

与论文结果表同形：每个方法一行，每个类别 R@1 / R@5 / mIoU 三列，最后是平均列。
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

from .metrics import EvaluationReport, MetricRow

_DISPLAY = {"didemo": "DiDeMo", "before": "Before", "after": "After", "then": "Then", "while": "While"}
_CELL = 7


def _cells(row: MetricRow) -> List[str]:
    return [f"{row.r1:>{_CELL}.2f}", f"{row.r5:>{_CELL}.2f}", f"{row.miou:>{_CELL}.2f}"]


def render_table(results: Sequence[Tuple[str, EvaluationReport]], per_category: bool = True) -> str:
    """渲染对齐的文本表

    Args:
        results: (方法名, 报表) 列表
        per_category: False 时只输出平均列
    """
    categories = []
    if per_category:
        for _, report in results:
            for category in report.categories():
                if category not in categories:
                    categories.append(category)
    groups = [_DISPLAY[c.value] for c in categories] + ["Average"]

    label_width = max([len("Method")] + [len(label) for label, _ in results])
    group_width = 3 * _CELL + 2
    header = [f"{'':<{label_width}}"] + [f"{name:^{group_width}}" for name in groups]
    metrics = " ".join(f"{m:>{_CELL}}" for m in ("R@1", "R@5", "mIoU"))
    subheader = [f"{'Method':<{label_width}}"] + [metrics] * len(groups)

    lines = [" | ".join(header), " | ".join(subheader)]
    lines.append("-+-".join("-" * len(cell) for cell in subheader))
    for label, report in results:
        cells = [f"{label:<{label_width}}"]
        for category in categories:
            row = report.rows.get(category)
            cells.append(" ".join(_cells(row)) if row else " ".join(f"{'-':>{_CELL}}" for _ in range(3)))
        cells.append(" ".join(_cells(report.average)))
        lines.append(" | ".join(cells))
    return "\n".join(lines) + "\n"
