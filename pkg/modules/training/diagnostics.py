"""
梯度检查套件

三组用例，全部在 float64 下与中心差分比较：
  1. 每个原语操作（随机输入，|x| <= 2）
  2. 5 节点句法树上的 Tree-LSTM，目标为 sum(h_root)
  3. P = 4、各维 <= 6 的完整定位 + 关系 + 排序损失
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from modules.autodiff import ParameterStore, constant, finite_difference_check, primitive_cases
from modules.language import WordEmbeddings, init_tree_lstm, tree_lstm_encode
from modules.treebank import build_vocabularies, parse_bracketed
from modules.video import Modality, SegmentSet, pool_segment_features
from .config import LossConfig, ModelConfig, StreamConfig
from .loss import ranking_loss
from .model import TCMNModel

logger = logging.getLogger(__name__)

# 梯度检查通过阈值
GRAD_CHECK_TOLERANCE = 1e-4

TREE_LSTM_CASE = "(S (NP cats) (VP sleep))"
LOSS_CASE = "(S (NP (NN person) (VBZ jumps)) (SBAR (IN before) (S (NP dog) (VP runs))))"


@dataclass
class GradCheckReport:
    """各用例的最大相对误差"""
    errors: Dict[str, float] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        values = list(self.errors.values())
        if any(np.isnan(v) for v in values):
            return float("nan")
        return max(values) if values else 0.0

    @property
    def passed(self) -> bool:
        return bool(self.max_error < GRAD_CHECK_TOLERANCE)

    def to_dict(self) -> dict:
        return {"errors": dict(self.errors), "max_error": self.max_error, "passed": self.passed}


def check_primitives(rng: np.random.Generator, trials: int) -> Dict[str, float]:
    errors: Dict[str, float] = {}
    for _ in range(trials):
        for name, fn, inputs in primitive_cases(rng):
            key = f"primitive:{name}"
            error = finite_difference_check(fn, inputs)
            previous = errors.get(key, 0.0)
            errors[key] = error if np.isnan(error) or np.isnan(previous) else max(previous, error)
    return errors


def check_tree_lstm(rng: np.random.Generator, hidden: int = 4, word_dim: int = 3) -> float:
    """5 节点树（S, NP, VP 加两个叶子）上 sum(h_root) 的梯度"""
    tree = parse_bracketed(TREE_LSTM_CASE)
    store = ParameterStore(np.float64)
    init_tree_lstm(store, word_dim, hidden, rng)
    words = rng.uniform(-1.0, 1.0, size=(len(tree.leaves()), word_dim))
    ones = constant(np.ones((hidden, 1)))

    def objective(params):
        return tree_lstm_encode(tree, words, params).h_root @ ones

    return finite_difference_check(objective, {name: value for name, value in store.items()})


def build_loss_case(rng: np.random.Generator):
    """P = 4 的小型完整模型实例"""
    tree = parse_bracketed(LOSS_CASE)
    labels, words = build_vocabularies([tree])
    embeddings = WordEmbeddings({w: rng.uniform(-1.0, 1.0, size=3) for w in words.tokens[1:]}, 3)
    stream = StreamConfig(Modality.RGB, Modality.FLOW, hidden_size=4, seed=int(rng.integers(1 << 31)))
    model_config = ModelConfig(label_dim=3)
    model = TCMNModel.initialize(labels, words, embeddings, stream, model_config,
                                 main_dim=5, context_dim=6, rng=rng, dtype=np.float64)

    segments = SegmentSet.from_segments([(0, 0), (0, 1), (0, 2), (1, 2)], num_clips=3)
    feats_main = pool_segment_features(rng.uniform(-1.0, 1.0, size=(3, 5)), segments, Modality.RGB)
    feats_ctx = pool_segment_features(rng.uniform(-1.0, 1.0, size=(3, 6)), segments, Modality.FLOW)
    return model, tree, feats_main, feats_ctx, segments


def check_full_loss(rng: np.random.Generator) -> float:
    model, tree, feats_main, feats_ctx, segments = build_loss_case(rng)
    loss_config = LossConfig()
    # 较大的间隔保证各 hinge 项处于激活区，远离折点
    loss_config.margin_main = loss_config.margin_context = 5.0

    def objective(params):
        scores = model.forward(tree, feats_main, feats_ctx, segments, params).scores
        return ranking_loss(scores, p=1, q=3, config=loss_config).total

    return finite_difference_check(objective, {name: value for name, value in model.store.items()})


def run_grad_check(seed: int = 7, trials: int = 100) -> GradCheckReport:
    """运行完整的梯度检查套件

    Args:
        seed: 随机种子
        trials: 每个原语的随机试验次数
    """
    rng = np.random.default_rng(seed)
    report = GradCheckReport()
    report.errors.update(check_primitives(rng, trials))
    report.errors["tree_lstm"] = check_tree_lstm(rng)
    report.errors["full_loss"] = check_full_loss(rng)
    for name, error in report.errors.items():
        logger.debug(f"grad-check {name}: {error:.3e}")
    logger.info(f"Gradient check max relative error {report.max_error:.3e} over {len(report.errors)} cases")
    return report
