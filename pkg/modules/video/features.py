"""
片段特征池化与特征文件读写

特征文件（每视频每模态一个）：
    "TCMNFEAT1" | 模态字节 (0=RGB, 1=Flow) | C (uint32) | D_v (uint32) | C*D_v 个 float32
全部小端、行优先。
"""

from __future__ import annotations

import logging
import os
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from modules.errors import DataError, ShapeError
from .segments import SegmentSet

logger = logging.getLogger(__name__)

FEATURE_MAGIC = b"TCMNFEAT1"


class Modality(Enum):
    """视觉模态"""
    RGB = "rgb"
    FLOW = "flow"

    @property
    def code(self) -> int:
        return 0 if self is Modality.RGB else 1

    @property
    def display(self) -> str:
        return "RGB" if self is Modality.RGB else "Flow"

    @classmethod
    def parse(cls, value) -> "Modality":
        if isinstance(value, Modality):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise DataError(f"unknown modality {value!r}, expected rgb or flow") from None

    @classmethod
    def from_code(cls, code: int) -> "Modality":
        if code == 0:
            return cls.RGB
        if code == 1:
            return cls.FLOW
        raise DataError(f"unknown modality byte {code}")


@dataclass
class SegmentFeatureTable:
    """P x D_v 片段特征"""
    modality: Modality
    features: np.ndarray

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def pool_segment_features(
    clip_features: np.ndarray,
    segments: SegmentSet,
    modality: Modality = Modality.RGB,
) -> SegmentFeatureTable:
    """v_i = 片段 a_i..b_i 内各 clip 特征的均值

    Args:
        clip_features: C x D_v
        segments: 候选片段
        modality: 特征模态

    Raises:
        ShapeError: clip 数与 SegmentSet 不一致
    """
    clip_features = np.asarray(clip_features)
    if clip_features.ndim != 2 or clip_features.shape[0] != segments.num_clips:
        raise ShapeError(
            f"expected {segments.num_clips} clip rows, got features of shape {clip_features.shape}")
    pooled = np.stack([clip_features[a:b + 1].mean(axis=0) for a, b in segments.segments])
    return SegmentFeatureTable(modality, pooled.astype(clip_features.dtype, copy=False))


def write_feature_file(path: str, clip_features: np.ndarray, modality: Modality) -> None:
    clip_features = np.asarray(clip_features)
    if clip_features.ndim != 2:
        raise ShapeError(f"clip features must be C x D, got {clip_features.shape}")
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    num_clips, dim = clip_features.shape
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<BII", Modality.parse(modality).code, num_clips, dim))
        fh.write(np.ascontiguousarray(clip_features, dtype="<f4").tobytes())


def read_feature_file(path: str):
    """读取特征文件

    Returns:
        (Modality, C x D_v float32 矩阵)
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read feature file: {exc}", path=path) from exc

    header = len(FEATURE_MAGIC) + struct.calcsize("<BII")
    if not data.startswith(FEATURE_MAGIC) or len(data) < header:
        raise DataError("not a TCMNFEAT1 feature file", path=path)
    code, num_clips, dim = struct.unpack_from("<BII", data, len(FEATURE_MAGIC))
    expected = header + 4 * num_clips * dim
    if len(data) != expected:
        raise DataError(f"payload size {len(data) - header} does not match C={num_clips}, D={dim}", path=path)
    values = np.frombuffer(data, dtype="<f4", offset=header).reshape(num_clips, dim)
    return Modality.from_code(code), values.astype(np.float32)
