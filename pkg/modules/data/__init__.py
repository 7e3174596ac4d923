"""
数据模块

合成数据集生成与 manifest 数据集加载。
"""

from .loader import DatasetBundle, load_dataset
from .synthetic import (
    SyntheticData,
    SyntheticQuery,
    SyntheticSpec,
    build_synthetic,
    generate_synthetic,
    write_synthetic,
)

__all__ = [
    'DatasetBundle',
    'load_dataset',
    'SyntheticData',
    'SyntheticQuery',
    'SyntheticSpec',
    'build_synthetic',
    'generate_synthetic',
    'write_synthetic',
]
