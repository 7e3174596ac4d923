"""
集成模块

四路流分数矩阵的后融合、融合权重的单纯形网格搜索以及分数 / 权重文件读写。
"""

from .fusion import (
    EnsembleWeights,
    grid_search_weights,
    late_fusion,
    parse_streams,
    read_weights,
    simplex_grid,
    validation_r1,
    write_weights,
)
from .score_file import SCORE_MAGIC, read_score_file, write_score_file

__all__ = [
    'EnsembleWeights',
    'grid_search_weights',
    'late_fusion',
    'parse_streams',
    'read_weights',
    'simplex_grid',
    'validation_r1',
    'write_weights',
    'SCORE_MAGIC',
    'read_score_file',
    'write_score_file',
]
