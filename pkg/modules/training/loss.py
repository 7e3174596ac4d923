"""
排序损失

    L^m = 1/P * sum_{i != p} max(0, max_j S_ij - max_k S_pk + M^m)
    L^c = 1/P * sum_{i != q} max(0, S_pi - S_pq + M^c)
    L   = L^m + lambda * L^c
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from modules.autodiff import DiffNode, constant
from modules.autodiff import graph as G
from modules.errors import ShapeError
from modules.video import SegmentSet
from .config import LossConfig
from .example import TrainingExample


@dataclass
class RankingLoss:
    main: DiffNode  # L^m
    context: DiffNode  # L^c
    total: DiffNode  # L


def resolve_context(example: TrainingExample, segments: SegmentSet) -> int:
    """有上下文时返回 q，否则返回整段视频 (0, C-1) 的下标"""
    if example.q is not None:
        return example.q
    return segments.whole_video_index()


def _negate(x: DiffNode) -> DiffNode:
    return x * constant(-1.0, dtype=x.dtype)


def _excluding(size: int, index: int, dtype) -> DiffNode:
    mask = np.ones((size, 1), dtype=dtype)
    mask[index] = 0
    return constant(mask)


def ranking_loss(S: DiffNode, p: int, q: int, config: LossConfig) -> RankingLoss:
    """计算主事件与上下文两项 hinge 损失

    Args:
        S: P x P 分数矩阵
        p: 真实主事件片段下标
        q: 真实（或回退的）上下文片段下标
        config: 损失配置
    """
    size = S.shape[0]
    if S.shape != (size, size):
        raise ShapeError(f"score matrix must be square, got {S.shape}")
    if not (0 <= p < size and 0 <= q < size):
        raise ShapeError(f"p={p}, q={q} out of range for P={size}")
    dtype = S.dtype

    row_max = G.max_over(S, axis=1)
    best_p = G.gather(row_max, [p])
    margin_m = constant(config.margin_main, dtype=dtype)
    terms_m = G.hinge(row_max + _negate(best_p) + margin_m) * _excluding(size, p, dtype)
    loss_m = G.mean(terms_m)

    row_p = G.transpose(G.gather(S, [p]))
    s_pq = G.gather(row_p, [q])
    margin_c = constant(config.margin_context, dtype=dtype)
    terms_c = G.hinge(row_p + _negate(s_pq) + margin_c) * _excluding(size, q, dtype)
    loss_c = G.mean(terms_c)

    total = loss_m + loss_c * constant(config.weight, dtype=dtype)
    return RankingLoss(main=loss_m, context=loss_c, total=total)
