"""
单路流训练与打分

每个 epoch 用种子随机数打乱样本，逐样本执行：编码句法树、池化片段特征、
计算 P x P 分数、排序损失、反向传播、Adam 更新（batch size 1）。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from modules.autodiff import adam_step, backward
from modules.errors import DataError, NumericError, TCMNError
from modules.language import WordEmbeddings
from modules.treebank import Vocabulary, build_vocabularies
from modules.video import Modality, SegmentFeatureTable, SegmentSet, enumerate_segments, pool_segment_features
from .config import LossConfig, ModelConfig, StreamConfig
from .example import TrainingExample
from .loss import ranking_loss, resolve_context
from .model import TCMNModel
from .run import EpochLoss, TrainingRun

logger = logging.getLogger(__name__)

# video -> modality -> C x D_v clip 特征
ClipFeatures = Mapping[str, Mapping[Modality, np.ndarray]]


class SegmentFeatureCache:
    """按 (视频, 模态) 缓存池化后的片段特征"""

    def __init__(self, features: ClipFeatures):
        self.features = features
        self._tables: Dict[Tuple[str, Modality], SegmentFeatureTable] = {}

    def segments(self, video: str, query_id: str = "?") -> SegmentSet:
        modalities = self.features.get(video)
        if not modalities:
            raise DataError(f"query {query_id}: no features for video {video!r}")
        clips = next(iter(modalities.values()))
        return enumerate_segments(clips.shape[0])

    def table(self, video: str, modality: Modality, query_id: str = "?") -> SegmentFeatureTable:
        key = (video, modality)
        cached = self._tables.get(key)
        if cached is not None:
            return cached
        clips = (self.features.get(video) or {}).get(modality)
        if clips is None:
            raise DataError(f"query {query_id}: missing {modality.display} features for video {video!r}")
        table = pool_segment_features(clips, enumerate_segments(clips.shape[0]), modality)
        self._tables[key] = table
        return table

    def dim(self, modality: Modality) -> int:
        for modalities in self.features.values():
            if modality in modalities:
                return int(modalities[modality].shape[1])
        raise DataError(f"no {modality.display} features available")


@dataclass
class TrainingResult:
    model: TCMNModel
    run: TrainingRun


def train_stream(
    examples: Sequence[TrainingExample],
    features: ClipFeatures,
    embeddings: WordEmbeddings,
    stream: StreamConfig,
    model_config: Optional[ModelConfig] = None,
    loss_config: Optional[LossConfig] = None,
    labels: Optional[Vocabulary] = None,
    words: Optional[Vocabulary] = None,
) -> TrainingResult:
    """训练一路流

    Args:
        examples: 训练样本
        features: 每个视频每个模态的 clip 特征
        embeddings: 固定词向量
        stream: 模态组合与优化超参数
        model_config: 结构配置
        loss_config: 损失配置
        labels / words: 词表，缺省时由训练样本的句法树建立

    Returns:
        TrainingResult（训练后的模型与逐 epoch 损失记录）

    Raises:
        DataError: 样本缺少特征或句法树（消息包含查询编号）
        NumericError: 损失出现 NaN/Inf
    """
    if not examples:
        raise DataError("no examples")
    model_config = model_config or ModelConfig()
    loss_config = loss_config or LossConfig()
    if labels is None or words is None:
        built_labels, built_words = build_vocabularies([example.tree for example in examples])
        labels = labels or built_labels
        words = words or built_words

    cache = SegmentFeatureCache(features)
    main, context = stream.pair
    rng = np.random.default_rng(stream.seed)
    model = TCMNModel.initialize(
        labels, words, embeddings, stream, model_config,
        main_dim=cache.dim(main), context_dim=cache.dim(context), rng=rng,
    )
    run = TrainingRun(stream=stream.key, num_examples=len(examples), num_parameters=model.store.count())
    run.mark_running()
    logger.info(f"Training stream {stream.key} on {len(examples)} examples for {stream.epochs} epochs")

    try:
        for epoch in range(1, stream.epochs + 1):
            totals = np.zeros(3)
            for index in rng.permutation(len(examples)):
                totals += _train_step(model, examples[index], cache, loss_config)
            means = totals / len(examples)
            run.record_epoch(EpochLoss(epoch, *(float(x) for x in means)))
            logger.info(f"Stream {stream.key} epoch {epoch}: loss={means[0]:.6f} "
                        f"Lm={means[1]:.6f} Lc={means[2]:.6f}")
    except TCMNError as exc:
        run.mark_error(str(exc))
        logger.error(f"Training stream {stream.key} failed at epoch {run.epochs_completed + 1}: {exc}")
        raise

    run.mark_completed()
    return TrainingResult(model=model, run=run)


def _train_step(
    model: TCMNModel,
    example: TrainingExample,
    cache: SegmentFeatureCache,
    loss_config: LossConfig,
) -> np.ndarray:
    if example.tree is None:
        raise DataError(f"query {example.query_id}: missing tree")
    main, context = model.stream.pair
    segments = cache.segments(example.video, example.query_id)
    feats_main = cache.table(example.video, main, example.query_id)
    feats_ctx = cache.table(example.video, context, example.query_id)

    output = model.forward(example.tree, feats_main, feats_ctx, segments)
    q = resolve_context(example, segments)
    loss = ranking_loss(output.scores, example.p, q, loss_config)
    values = np.array([loss.total.item(), loss.main.item(), loss.context.item()])
    if not np.all(np.isfinite(values)):
        raise NumericError(f"query {example.query_id}: non-finite loss {values[0]}")

    gradients = backward(loss.total, model.store)
    stream = model.stream
    adam_step(model.store, gradients, lr=stream.lr, beta1=stream.beta1, beta2=stream.beta2,
              eps=stream.eps, weight_decay=stream.weight_decay)
    return values


def score_examples(
    model: TCMNModel,
    examples: Sequence[TrainingExample],
    features: ClipFeatures,
) -> Dict[str, np.ndarray]:
    """对每条查询计算 P x P 分数矩阵

    Returns:
        query_id -> 分数矩阵（float64）
    """
    cache = SegmentFeatureCache(features)
    main, context = model.stream.pair
    matrices: Dict[str, np.ndarray] = {}
    for example in examples:
        segments = cache.segments(example.video, example.query_id)
        output = model.forward(
            example.tree,
            cache.table(example.video, main, example.query_id),
            cache.table(example.video, context, example.query_id),
            segments,
        )
        matrix = output.matrix()
        if not np.all(np.isfinite(matrix)):
            raise NumericError(f"query {example.query_id}: non-finite scores")
        matrices[example.query_id] = matrix
    return matrices
