"""
训练配置模块

模型结构、单路流训练超参数与损失函数的配置及默认值。
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Tuple

from modules.errors import ConfigError
from modules.video import Modality

# 四路流的固定顺序 V
STREAM_PAIRS: Tuple[Tuple[Modality, Modality], ...] = (
    (Modality.RGB, Modality.RGB),
    (Modality.RGB, Modality.FLOW),
    (Modality.FLOW, Modality.RGB),
    (Modality.FLOW, Modality.FLOW),
)


def stream_key(main: Modality, context: Modality) -> str:
    """权重文件中的流名，如 "(RGB,Flow)" """
    return f"({main.display},{context.display})"


@dataclass
class ModelConfig:
    """模型结构配置"""

    label_dim: int = 16  # 标签嵌入维度 D_e
    segment_attention: bool = True  # False: f^loc 直接使用 v_i
    relationship_module: bool = True  # False: s = s^loc

    @classmethod
    def from_app_config(cls, app_config: dict) -> "ModelConfig":
        """从应用配置创建 ModelConfig

        Args:
            app_config: 全局配置字典

        Returns:
            ModelConfig 实例
        """
        model_config = app_config.get("model", {}) or {}
        config = cls()
        if "label_dim" in model_config:
            config.label_dim = int(model_config["label_dim"])
        if "segment_attention" in model_config:
            config.segment_attention = bool(model_config["segment_attention"])
        if "relationship_module" in model_config:
            config.relationship_module = bool(model_config["relationship_module"])
        config.validate()
        return config

    def validate(self) -> None:
        if self.label_dim <= 0:
            raise ConfigError(f"label_dim must be positive, got {self.label_dim}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StreamConfig:
    """单路流配置：模态组合与优化超参数"""

    main_modality: Modality = Modality.RGB
    context_modality: Modality = Modality.RGB
    hidden_size: int = 16

    # Adam
    lr: float = 0.001
    weight_decay: float = 1e-8
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    epochs: int = 300
    seed: int = 0

    def __post_init__(self):
        self.main_modality = Modality.parse(self.main_modality)
        self.context_modality = Modality.parse(self.context_modality)

    @classmethod
    def from_app_config(cls, app_config: dict, stream: str = "rgb,rgb") -> "StreamConfig":
        """从应用配置创建 StreamConfig

        Args:
            app_config: 全局配置字典
            stream: "main,context" 形式的模态组合

        Returns:
            StreamConfig 实例
        """
        training_config = app_config.get("training", {}) or {}
        main, context = parse_stream(stream)
        config = cls(main_modality=main, context_modality=context)
        for name in ("hidden_size", "epochs", "seed"):
            if name in training_config:
                setattr(config, name, int(training_config[name]))
        for name in ("lr", "weight_decay", "beta1", "beta2", "eps"):
            if name in training_config:
                setattr(config, name, float(training_config[name]))
        config.validate()
        return config

    @property
    def pair(self) -> Tuple[Modality, Modality]:
        return self.main_modality, self.context_modality

    @property
    def name(self) -> str:
        return f"{self.main_modality.value},{self.context_modality.value}"

    @property
    def key(self) -> str:
        return stream_key(*self.pair)

    def validate(self) -> None:
        if self.hidden_size <= 0:
            raise ConfigError(f"hidden_size must be positive, got {self.hidden_size}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError(f"Adam betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["main_modality"] = self.main_modality.value
        data["context_modality"] = self.context_modality.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "StreamConfig":
        config = cls(**data)
        config.validate()
        return config


@dataclass
class LossConfig:
    """排序损失配置"""

    margin_main: float = 0.1  # M^m
    margin_context: float = 0.1  # M^c
    weight: float = 1.0  # lambda

    @classmethod
    def from_app_config(cls, app_config: dict) -> "LossConfig":
        loss_config = app_config.get("loss", {}) or {}
        config = cls()
        if "margin_main" in loss_config:
            config.margin_main = float(loss_config["margin_main"])
        if "margin_context" in loss_config:
            config.margin_context = float(loss_config["margin_context"])
        if "lambda" in loss_config:
            config.weight = float(loss_config["lambda"])
        config.validate()
        return config

    def validate(self) -> None:
        if self.margin_main < 0 or self.margin_context < 0:
            raise ConfigError("margins must be non-negative")
        if self.weight < 0:
            raise ConfigError(f"lambda must be non-negative, got {self.weight}")


def parse_stream(stream: str) -> Tuple[Modality, Modality]:
    """ "rgb,flow" -> (Modality.RGB, Modality.FLOW) """
    parts = [part.strip() for part in str(stream).strip("()").split(",")]
    if len(parts) != 2:
        raise ConfigError(f"stream must be 'main,context', got {stream!r}")
    try:
        return Modality.parse(parts[0]), Modality.parse(parts[1])
    except Exception as exc:
        raise ConfigError(str(exc)) from None


def get_model_config(app_config: dict) -> ModelConfig:
    return ModelConfig.from_app_config(app_config)


def get_stream_config(app_config: dict, stream: str = "rgb,rgb") -> StreamConfig:
    return StreamConfig.from_app_config(app_config, stream)


def get_loss_config(app_config: dict) -> LossConfig:
    return LossConfig.from_app_config(app_config)
