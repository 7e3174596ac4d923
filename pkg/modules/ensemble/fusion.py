"""
四路流后融合

s_ij = sum_n gamma_n s^n_ij，gamma 位于单纯形上（非负且和为 1）。
gamma 由验证集平均 R@1 上的单纯形网格搜索选出，并列时取字典序最小的权重元组。
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, Iterator, List, Mapping, Sequence, Tuple

import numpy as np

from modules.errors import ConfigError, DataError, ShapeError
from modules.training import STREAM_PAIRS, Category, parse_stream, stream_key
from modules.video import Modality

logger = logging.getLogger(__name__)

Stream = Tuple[Modality, Modality]

# 权重和的容差
WEIGHT_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class EnsembleWeights:
    """按 V 顺序排列的 gamma"""
    gammas: Tuple[float, float, float, float]

    def __post_init__(self):
        gammas = tuple(float(g) for g in self.gammas)
        if len(gammas) != len(STREAM_PAIRS):
            raise ConfigError(f"expected {len(STREAM_PAIRS)} weights, got {len(gammas)}")
        if any(g < 0 or not np.isfinite(g) for g in gammas):
            raise ConfigError(f"weights must be finite and non-negative, got {gammas}")
        if abs(sum(gammas) - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise ConfigError(f"weights must sum to 1, got {sum(gammas)!r}")
        object.__setattr__(self, "gammas", gammas)

    @classmethod
    def one_hot(cls, stream: Stream) -> "EnsembleWeights":
        return cls(tuple(1.0 if pair == stream else 0.0 for pair in STREAM_PAIRS))

    @classmethod
    def from_mapping(cls, weights: Mapping[Stream, float]) -> "EnsembleWeights":
        unknown = set(weights) - set(STREAM_PAIRS)
        if unknown:
            raise ConfigError(f"unknown streams {sorted(stream_key(*s) for s in unknown)}")
        return cls(tuple(weights.get(pair, 0.0) for pair in STREAM_PAIRS))

    def items(self) -> Iterator[Tuple[Stream, float]]:
        return zip(STREAM_PAIRS, self.gammas)

    def weight(self, stream: Stream) -> float:
        return self.gammas[STREAM_PAIRS.index(stream)]

    def to_dict(self) -> Dict[str, float]:
        return {stream_key(*pair): gamma for pair, gamma in self.items()}


def late_fusion(matrices: Mapping[Stream, np.ndarray], weights: EnsembleWeights) -> np.ndarray:
    """按 gamma 加权求和；gamma 为 0 的流可以缺席

    Raises:
        ShapeError: 矩阵形状不一致
        DataError: 权重非零的流没有分数矩阵
    """
    shapes = {np.asarray(m).shape for m in matrices.values()}
    if len(shapes) > 1:
        raise ShapeError(f"score matrices have different shapes: {sorted(shapes)}")
    fused = None
    for stream, gamma in weights.items():
        if gamma == 0.0:
            continue
        if stream not in matrices:
            raise DataError(f"stream {stream_key(*stream)} has weight {gamma} but no scores")
        term = gamma * np.asarray(matrices[stream])
        fused = term if fused is None else fused + term
    return fused


# ============================================================================
# 网格搜索
# ============================================================================


def simplex_grid(num_streams: int, step: float) -> List[Tuple[float, ...]]:
    """步长为 step 的单纯形网格点，按字典序升序

    Raises:
        ConfigError: step 不能整除 1
    """
    if step <= 0:
        raise ConfigError(f"grid step must be positive, got {step}")
    units = int(round(1.0 / step))
    if units < 1 or abs(units * step - 1.0) > 1e-9:
        raise ConfigError(f"grid step {step} does not divide 1")
    points = []
    # 隔板法：在 units + k - 1 个位置中选 k - 1 个隔板
    slots = units + num_streams - 1
    for bars in combinations(range(slots), num_streams - 1):
        edges = (-1,) + bars + (slots,)
        counts = [edges[i + 1] - edges[i] - 1 for i in range(num_streams)]
        points.append(tuple(c / units for c in counts))
    return sorted(points)


def validation_r1(fused: Mapping[str, np.ndarray], ground_truths: Mapping[str, Tuple[int, str]]) -> float:
    """按类别平均的 R@1（百分比）

    Args:
        fused: query_id -> 融合后的分数矩阵
        ground_truths: query_id -> (真实主事件下标, 类别)
    """
    hits: Dict[Category, List[float]] = {}
    for query_id, (p, category) in ground_truths.items():
        row_max = np.asarray(fused[query_id]).max(axis=1)
        # argmax 取第一个最大值，与排名的并列规则一致
        top = int(np.argmax(row_max))
        hits.setdefault(Category.parse(category), []).append(100.0 if top == p else 0.0)
    return float(np.mean([np.mean(values) for values in hits.values()]))


def grid_search_weights(
    stream_scores: Mapping[Stream, Mapping[str, np.ndarray]],
    ground_truths: Mapping[str, Tuple[int, str]],
    step: float = 0.1,
) -> EnsembleWeights:
    """在验证集上穷举单纯形网格，选出平均 R@1 最高的 gamma

    Args:
        stream_scores: 流 -> (query_id -> 分数矩阵)；可以只给 V 的子集
        ground_truths: query_id -> (真实主事件下标, 类别)
        step: 网格步长

    Returns:
        EnsembleWeights（未参与的流权重为 0）
    """
    if not ground_truths:
        raise DataError("empty validation set")
    if not stream_scores:
        raise DataError("no stream scores to fuse")
    streams = [pair for pair in STREAM_PAIRS if pair in stream_scores]
    for stream in streams:
        missing = set(ground_truths) - set(stream_scores[stream])
        if missing:
            raise DataError(f"stream {stream_key(*stream)} has no scores for queries {sorted(missing)[:5]}")

    grid = simplex_grid(len(streams), step)
    best_point, best_score = None, -1.0
    for point in grid:
        subset = {s: g for s, g in zip(streams, point)}
        weights = EnsembleWeights.from_mapping(subset)
        fused = {
            query_id: late_fusion({s: stream_scores[s][query_id] for s in streams}, weights)
            for query_id in ground_truths
        }
        score = validation_r1(fused, ground_truths)
        if score > best_score:
            best_point, best_score = subset, score

    best = EnsembleWeights.from_mapping(best_point)
    logger.info(f"Grid search over {len(grid)} points: best validation R@1 {best_score:.2f} "
                f"with {best.to_dict()}")
    return best


# ============================================================================
# 权重文件
# ============================================================================


def write_weights(path: str, weights: EnsembleWeights) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(weights.to_dict(), fh, indent=2)
        fh.write("\n")


def read_weights(path: str) -> EnsembleWeights:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read weights: {exc}", path=path) from exc
    try:
        return EnsembleWeights.from_mapping({parse_stream(key): float(value) for key, value in data.items()})
    except (AttributeError, TypeError, ValueError) as exc:
        raise DataError(f"malformed weights file: {exc}", path=path) from exc


def parse_streams(value: str) -> List[Stream]:
    """ "rgb,rgb;flow,flow" -> 流列表 """
    return [parse_stream(part) for part in value.split(";") if part.strip()]
