"""
视频模块

候选片段枚举、位置编码、片段特征池化与 TCMNFEAT1 特征文件读写。
"""

from .segments import Segment, SegmentSet, enumerate_segments, location_encoding
from .features import (
    FEATURE_MAGIC,
    Modality,
    SegmentFeatureTable,
    pool_segment_features,
    read_feature_file,
    write_feature_file,
)

__all__ = [
    'Segment',
    'SegmentSet',
    'enumerate_segments',
    'location_encoding',
    'FEATURE_MAGIC',
    'Modality',
    'SegmentFeatureTable',
    'pool_segment_features',
    'read_feature_file',
    'write_feature_file',
]
