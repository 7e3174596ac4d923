"""
评测配置
"""

from dataclasses import dataclass
from typing import Optional

from modules.errors import ConfigError


@dataclass
class EvaluationConfig:
    """评测与注意力可视化的配置"""

    attention_threshold: float = 0.05  # inspect-attention 列出的节点注意力下限
    top_pairs: int = 5  # predict / inspect-attention 输出的 (i, j) 对数
    grid_step: float = 0.1

    @classmethod
    def from_app_config(cls, app_config: dict) -> "EvaluationConfig":
        """从应用配置创建 EvaluationConfig

        Args:
            app_config: 全局配置字典

        Returns:
            EvaluationConfig 实例
        """
        evaluation = app_config.get("evaluation", {}) or {}
        ensemble = app_config.get("ensemble", {}) or {}
        config = cls()
        if "attention_threshold" in evaluation:
            config.attention_threshold = float(evaluation["attention_threshold"])
        if "top_pairs" in evaluation:
            config.top_pairs = int(evaluation["top_pairs"])
        if "step" in ensemble:
            config.grid_step = float(ensemble["step"])
        config.validate()
        return config

    def validate(self) -> None:
        if not 0.0 <= self.attention_threshold <= 1.0:
            raise ConfigError(f"attention_threshold must lie in [0, 1], got {self.attention_threshold}")
        if self.top_pairs < 1:
            raise ConfigError(f"top_pairs must be positive, got {self.top_pairs}")
        if self.grid_step <= 0 or self.grid_step > 1:
            raise ConfigError(f"ensemble step must lie in (0, 1], got {self.grid_step}")


def get_evaluation_config(app_config: Optional[dict] = None) -> EvaluationConfig:
    """获取评测配置（便捷函数）"""
    if app_config is None:
        from modules.app_config import load_app_config
        app_config = load_app_config()
    return EvaluationConfig.from_app_config(app_config)
