"""
TCMN 单路流模型

把语言模块、定位模块与关系模块组装成一次前向：
句法树 -> Tree-LSTM -> 三路注意力 -> s^loc + s^rel。
模型目录包含 checkpoint.tcmn、embeddings.tcmn、labels.tsv、words.tsv、stream.json。
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from modules.autodiff import DiffNode, ParameterStore, load_checkpoint, save_checkpoint
from modules.errors import DataError
from modules.language import (
    PhraseEmbeddings,
    WordEmbeddings,
    init_tree_attention,
    init_tree_lstm,
    tree_attention,
    tree_lstm_encode,
)
from modules.matching import (
    LocalizationOutput,
    combined_scores,
    init_fusion_block,
    localization_scores,
    relationship_scores,
)
from modules.treebank import ParseTree, Vocabulary, load_vocabulary, save_vocabulary
from modules.video import SegmentFeatureTable, SegmentSet
from .config import ModelConfig, StreamConfig

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.tcmn"
EMBEDDINGS_NAME = "embeddings.tcmn"
LABELS_NAME = "labels.tsv"
WORDS_NAME = "words.tsv"
STREAM_NAME = "stream.json"

# 位置编码 t_i 的维度
LOCATION_DIM = 2


@dataclass
class QueryScores:
    """一次前向的全部中间结果"""
    phrases: PhraseEmbeddings
    localization: LocalizationOutput
    s_rel: Optional[DiffNode]
    scores: DiffNode

    def matrix(self) -> np.ndarray:
        return np.array(self.scores.value, dtype=np.float64)


class TCMNModel:
    """一个 (主事件模态, 上下文模态) 组合的完整参数集"""

    def __init__(
        self,
        store: ParameterStore,
        labels: Vocabulary,
        words: Vocabulary,
        word_table: np.ndarray,
        stream: StreamConfig,
        model_config: ModelConfig,
    ):
        self.store = store
        self.labels = labels
        self.words = words
        self.word_table = np.asarray(word_table, dtype=store.dtype)
        self.stream = stream
        self.model_config = model_config

    # ------------------------------------------------------------------
    # 构建
    # ------------------------------------------------------------------

    @classmethod
    def initialize(
        cls,
        labels: Vocabulary,
        words: Vocabulary,
        embeddings: WordEmbeddings,
        stream: StreamConfig,
        model_config: ModelConfig,
        main_dim: int,
        context_dim: int,
        rng: Optional[np.random.Generator] = None,
        dtype=np.float32,
    ) -> "TCMNModel":
        """随机初始化全部参数

        Args:
            labels / words: 标签表与词表
            embeddings: 固定词向量
            stream: 流配置（决定隐藏维度与种子）
            model_config: 结构配置
            main_dim / context_dim: 主事件、上下文模态的特征维度
            rng: 随机数发生器，默认由 stream.seed 生成
        """
        rng = rng if rng is not None else np.random.default_rng(stream.seed)
        hidden = stream.hidden_size
        store = ParameterStore(dtype)
        init_tree_lstm(store, embeddings.dim, hidden, rng)
        init_tree_attention(store, len(labels), model_config.label_dim, hidden, rng)
        init_fusion_block(store, "f_m", hidden, main_dim, hidden, rng)
        init_fusion_block(store, "f_c", hidden, context_dim, hidden, rng)
        pair_dim = main_dim + LOCATION_DIM + context_dim + LOCATION_DIM
        init_fusion_block(store, "f_loc", hidden, pair_dim, hidden, rng)
        if model_config.relationship_module:
            init_fusion_block(store, "f_rel", hidden, 2 * LOCATION_DIM, hidden, rng)
        logger.info(f"Initialized stream {stream.key} with {store.count()} parameters in {len(store)} tensors")
        return cls(store, labels, words, embeddings.table_for(words, dtype), stream, model_config)

    def astype(self, dtype) -> "TCMNModel":
        return TCMNModel(self.store.astype(dtype), self.labels, self.words,
                         self.word_table.astype(dtype), self.stream, self.model_config)

    # ------------------------------------------------------------------
    # 前向
    # ------------------------------------------------------------------

    def word_vectors(self, tree: ParseTree) -> np.ndarray:
        """叶子词向量（词表外的词为零向量）"""
        return self.word_table[self.words.ids(tree.leaves())]

    def encode(self, tree: ParseTree, params: Mapping[str, DiffNode]) -> PhraseEmbeddings:
        states = tree_lstm_encode(tree, self.word_vectors(tree), params)
        return tree_attention(states, tree, self.labels, params)

    def forward(
        self,
        tree: ParseTree,
        feats_main: SegmentFeatureTable,
        feats_ctx: SegmentFeatureTable,
        segments: SegmentSet,
        params: Optional[Mapping[str, DiffNode]] = None,
    ) -> QueryScores:
        """计算一条查询的 P x P 分数

        Args:
            tree: 查询句法树
            feats_main: 主事件模态的片段特征
            feats_ctx: 上下文模态的片段特征
            segments: 候选片段
            params: 参数节点表，默认为 store 的新叶子节点
        """
        params = params if params is not None else self.store.nodes()
        phrases = self.encode(tree, params)
        localization = localization_scores(
            phrases.d_m, phrases.d_c, phrases.h_root,
            feats_main, feats_ctx, segments, params,
            segment_attention=self.model_config.segment_attention,
        )
        s_rel = None
        scores = localization.s_loc
        if self.model_config.relationship_module:
            s_rel = relationship_scores(phrases.d_s, segments, params)
            scores = combined_scores(localization.s_loc, s_rel)
        return QueryScores(phrases=phrases, localization=localization, s_rel=s_rel, scores=scores)

    # ------------------------------------------------------------------
    # 持久化
    # ------------------------------------------------------------------

    def save(self, out_dir: str) -> str:
        """写出模型目录，返回检查点路径"""
        os.makedirs(out_dir, exist_ok=True)
        checkpoint_path = os.path.join(out_dir, CHECKPOINT_NAME)
        save_checkpoint(checkpoint_path, self.store)
        table_store = ParameterStore(self.store.dtype)
        table_store.add("embedding.words", self.word_table)
        save_checkpoint(os.path.join(out_dir, EMBEDDINGS_NAME), table_store)
        save_vocabulary(os.path.join(out_dir, LABELS_NAME), self.labels)
        save_vocabulary(os.path.join(out_dir, WORDS_NAME), self.words)
        with open(os.path.join(out_dir, STREAM_NAME), "w", encoding="utf-8") as fh:
            json.dump({"stream": self.stream.to_dict(), "model": self.model_config.to_dict()},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
        return checkpoint_path

    @classmethod
    def load(cls, checkpoint_path: str, dtype=np.float32) -> "TCMNModel":
        """由检查点文件及其同目录的附属文件恢复模型"""
        directory = os.path.dirname(os.path.abspath(checkpoint_path))
        stream_path = os.path.join(directory, STREAM_NAME)
        try:
            with open(stream_path, "r", encoding="utf-8") as fh:
                meta = json.load(fh)
            stream = StreamConfig.from_dict(meta["stream"])
            model_config = ModelConfig(**meta["model"])
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise DataError(f"cannot read stream description: {exc}", path=stream_path) from exc

        store = load_checkpoint(checkpoint_path, dtype)
        table = load_checkpoint(os.path.join(directory, EMBEDDINGS_NAME), dtype)["embedding.words"]
        labels = load_vocabulary(os.path.join(directory, LABELS_NAME))
        words = load_vocabulary(os.path.join(directory, WORDS_NAME))
        if table.shape[0] != len(words):
            raise DataError(f"embedding table has {table.shape[0]} rows for {len(words)} words", path=directory)
        logger.info(f"Loaded stream {stream.key} from {checkpoint_path}")
        return cls(store, labels, words, table, stream, model_config)
