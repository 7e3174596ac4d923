"""
候选片段枚举

所有连续片段 (a, b)，0 <= a <= b < C，按 (a, b) 字典序排列，P = C(C+1)/2。
位置编码 t = [a/C, (b+1)/C]（终点开区间）。
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from modules.errors import DataError

Segment = Tuple[int, int]


def location_encoding(segment: Segment, num_clips: int) -> np.ndarray:
    """归一化的起止位置 [a/C, (b+1)/C]"""
    a, b = segment
    if not 0 <= a <= b < num_clips:
        raise DataError(f"segment {segment} is not inside a video of {num_clips} clips")
    return np.array([a / num_clips, (b + 1) / num_clips])


@dataclass(frozen=True)
class SegmentSet:
    """一个视频的全部候选片段

    Attributes:
        num_clips: 片段数 C
        segments: (a, b) 列表
        locations: P x 2 位置编码
    """
    num_clips: int
    segments: Tuple[Segment, ...]
    locations: np.ndarray = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def size(self) -> int:
        """候选数 P"""
        return len(self.segments)

    def __post_init__(self):
        object.__setattr__(self, "_index", {segment: i for i, segment in enumerate(self.segments)})

    @classmethod
    def from_segments(cls, segments, num_clips: int) -> "SegmentSet":
        """由任意候选子集构建（必须包含整段视频）"""
        segments = tuple(sorted({(int(a), int(b)) for a, b in segments}))
        locations = np.array([location_encoding(s, num_clips) for s in segments])
        result = cls(num_clips, segments, locations)
        result.whole_video_index()
        return result

    def index_of(self, segment: Segment) -> int:
        """(a, b) -> 候选下标"""
        key = (int(segment[0]), int(segment[1]))
        index = self._index.get(key)
        if index is None:
            raise DataError(f"segment {key} is not a candidate for {self.num_clips} clips")
        return index

    def whole_video_index(self) -> int:
        return self.index_of((0, self.num_clips - 1))

    def __getitem__(self, index: int) -> Segment:
        return self.segments[index]


_CACHE: Dict[int, SegmentSet] = {}


def enumerate_segments(num_clips: int) -> SegmentSet:
    """枚举 C 个片段上的全部连续候选

    Raises:
        DataError: C < 1
    """
    if num_clips < 1:
        raise DataError(f"a video needs at least one clip, got {num_clips}")
    cached = _CACHE.get(num_clips)
    if cached is not None:
        return cached
    segments: List[Segment] = [(a, b) for a in range(num_clips) for b in range(a, num_clips)]
    locations = np.array([location_encoding(s, num_clips) for s in segments])
    locations.setflags(write=False)
    result = SegmentSet(num_clips, tuple(segments), locations)
    _CACHE[num_clips] = result
    return result
