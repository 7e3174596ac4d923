"""
匹配模块

融合打分块、时序定位模块、时序关系模块及其分数组合。
"""

from .fusion import FusionBlockParams, fusion_score, init_fusion_block
from .scorer import (
    LocalizationOutput,
    ScoreMatrix,
    as_score_matrix,
    combined_scores,
    localization_scores,
    pair_indices,
    relationship_scores,
    top_pairs,
)

__all__ = [
    'FusionBlockParams',
    'fusion_score',
    'init_fusion_block',
    'LocalizationOutput',
    'ScoreMatrix',
    'as_score_matrix',
    'combined_scores',
    'localization_scores',
    'pair_indices',
    'relationship_scores',
    'top_pairs',
]
