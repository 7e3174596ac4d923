"""
训练模块

排序损失、整段视频上下文回退、单路流模型与训练循环、梯度检查套件。
"""

from .config import (
    STREAM_PAIRS,
    LossConfig,
    ModelConfig,
    StreamConfig,
    get_loss_config,
    get_model_config,
    get_stream_config,
    parse_stream,
    stream_key,
)
from .example import Category, TrainingExample
from .loss import RankingLoss, ranking_loss, resolve_context
from .model import CHECKPOINT_NAME, QueryScores, TCMNModel
from .run import EpochLoss, RunStatus, TrainingRun
from .trainer import SegmentFeatureCache, TrainingResult, score_examples, train_stream
from .diagnostics import GRAD_CHECK_TOLERANCE, GradCheckReport, run_grad_check

__all__ = [
    'STREAM_PAIRS',
    'LossConfig',
    'ModelConfig',
    'StreamConfig',
    'get_loss_config',
    'get_model_config',
    'get_stream_config',
    'parse_stream',
    'stream_key',
    'Category',
    'TrainingExample',
    'RankingLoss',
    'ranking_loss',
    'resolve_context',
    'CHECKPOINT_NAME',
    'QueryScores',
    'TCMNModel',
    'EpochLoss',
    'RunStatus',
    'TrainingRun',
    'SegmentFeatureCache',
    'TrainingResult',
    'score_examples',
    'train_stream',
    'GRAD_CHECK_TOLERANCE',
    'GradCheckReport',
    'run_grad_check',
]
