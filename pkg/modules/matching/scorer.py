"""
时序定位模块与时序关系模块

定位：s^n_i = f^n(d_n, v_i)，alpha^n = softmax_i(s^n)，v^n_i = alpha^n_i v_i，
      s^loc_ij = f^loc(h_root, [v^m_i, t_i, v^c_j, t_j])
关系：s^rel_ij = f^rel(d_s, [t_i, t_j])
组合：s_ij = s^loc_ij + s^rel_ij

P x P 矩阵按 (i, j) 行优先展开成 P^2 行一次性打分，再 reshape 回 P x P。
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Mapping, Optional, Tuple

import numpy as np

from modules.autodiff import DiffNode, constant
from modules.autodiff import graph as G
from modules.errors import ShapeError
from modules.video import SegmentFeatureTable, SegmentSet
from .fusion import FusionBlockParams, fusion_score

# 与 P x P 分数矩阵对应的 numpy 数组：行 = 主事件片段，列 = 上下文片段
ScoreMatrix = np.ndarray


def as_score_matrix(values, size: Optional[int] = None) -> ScoreMatrix:
    """校验并返回有限的方阵"""
    matrix = np.asarray(values)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeError(f"score matrix must be square, got shape {matrix.shape}")
    if size is not None and matrix.shape[0] != size:
        raise ShapeError(f"score matrix must be {size} x {size}, got {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ShapeError("score matrix contains non-finite entries")
    return matrix


def pair_indices(size: int):
    """(i, j) 行优先展开后每一行对应的 i 与 j"""
    rows = np.repeat(np.arange(size), size)
    cols = np.tile(np.arange(size), size)
    return rows, cols


@dataclass
class LocalizationOutput:
    """定位模块输出

    Attributes:
        s_loc: P x P
        alpha_m / alpha_c: P x 1 片段注意力
        s_m / s_c: P x 1 单片段匹配分
    """
    s_loc: DiffNode
    alpha_m: DiffNode
    alpha_c: DiffNode
    s_m: DiffNode
    s_c: DiffNode


def localization_scores(
    d_m: DiffNode,
    d_c: DiffNode,
    h_root: DiffNode,
    feats_main: SegmentFeatureTable,
    feats_ctx: SegmentFeatureTable,
    segments: SegmentSet,
    params: Mapping[str, DiffNode],
    segment_attention: bool = True,
) -> LocalizationOutput:
    """时序定位模块

    Args:
        d_m / d_c: 主事件与上下文短语嵌入
        h_root: 根句向量
        feats_main / feats_ctx: 主事件、上下文所用模态的片段特征
        segments: 候选片段
        params: 参数节点表
        segment_attention: False 时直接用 v_i 代替 alpha_i v_i

    Raises:
        ShapeError: 特征表行数与候选数不一致
    """
    size = segments.size
    if feats_main.size != size or feats_ctx.size != size:
        raise ShapeError(
            f"feature tables have {feats_main.size} and {feats_ctx.size} rows, expected P={size}")
    dtype = d_m.dtype

    V_m = constant(feats_main.features, dtype=dtype)
    V_c = constant(feats_ctx.features, dtype=dtype)
    T = constant(segments.locations, dtype=dtype)

    s_m = fusion_score(d_m, V_m, FusionBlockParams.from_params(params, "f_m"))
    s_c = fusion_score(d_c, V_c, FusionBlockParams.from_params(params, "f_c"))
    alpha_m = G.softmax(s_m, axis=0)
    alpha_c = G.softmax(s_c, axis=0)
    if segment_attention:
        V_m = alpha_m * V_m
        V_c = alpha_c * V_c

    rows, cols = pair_indices(size)
    pairs = G.concat([G.gather(V_m, rows), G.gather(T, rows), G.gather(V_c, cols), G.gather(T, cols)], axis=1)
    s_loc = fusion_score(h_root, pairs, FusionBlockParams.from_params(params, "f_loc"))
    return LocalizationOutput(
        s_loc=G.reshape(s_loc, (size, size)),
        alpha_m=alpha_m,
        alpha_c=alpha_c,
        s_m=s_m,
        s_c=s_c,
    )


def relationship_scores(d_s: DiffNode, segments: SegmentSet, params: Mapping[str, DiffNode]) -> DiffNode:
    """时序关系模块，只依赖位置编码"""
    size = segments.size
    rows, cols = pair_indices(size)
    locations = segments.locations
    pairs = constant(np.concatenate([locations[rows], locations[cols]], axis=1), dtype=d_s.dtype)
    s_rel = fusion_score(d_s, pairs, FusionBlockParams.from_params(params, "f_rel"))
    return G.reshape(s_rel, (size, size))


def combined_scores(s_loc: DiffNode, s_rel: DiffNode) -> DiffNode:
    if s_loc.shape != s_rel.shape:
        raise ShapeError(f"cannot combine score matrices of shapes {s_loc.shape} and {s_rel.shape}")
    return s_loc + s_rel


def top_pairs(S, k: int) -> List[Tuple[int, int]]:
    """分数最高的 k 个 (i, j)，并列时按行优先下标"""
    matrix = as_score_matrix(S)
    size = matrix.shape[0]
    order = np.argsort(-matrix.ravel(), kind="stable")[:k]
    return [(int(flat // size), int(flat % size)) for flat in order]
