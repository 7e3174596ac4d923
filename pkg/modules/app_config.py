"""
应用配置加载

读取 config/config.json（或 TCMN_CONFIG 指定的文件），按节与默认值合并。
各模块再通过各自的 from_app_config 取出所需字段。
"""

from __future__ import annotations

import copy
import json
import logging
import os
from typing import Optional

from modules.errors import ConfigError

logger = logging.getLogger(__name__)

CONFIG_FILE = os.getenv("TCMN_CONFIG", "config/config.json")

DEFAULT_CONFIG = {
    "model": {
        "label_dim": 16,
        "segment_attention": True,
        "relationship_module": True,
    },
    "training": {
        "hidden_size": 16,
        "lr": 0.001,
        "weight_decay": 1e-8,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "epochs": 300,
        "seed": 0,
    },
    "loss": {
        "margin_main": 0.1,
        "margin_context": 0.1,
        "lambda": 1.0,
    },
    "ensemble": {
        "step": 0.1,
    },
    "evaluation": {
        "attention_threshold": 0.05,
        "top_pairs": 5,
    },
    "logging": {
        "level": "INFO",
        "log_dir": "logs",
    },
}


def load_app_config(path: Optional[str] = None) -> dict:
    """加载配置文件并与默认值合并

    Args:
        path: 配置文件路径，默认取 TCMN_CONFIG 或 config/config.json

    Returns:
        配置字典（文件缺失时为默认值）

    Raises:
        ConfigError: 文件存在但不是合法 JSON 对象
    """
    path = path or CONFIG_FILE
    config = copy.deepcopy(DEFAULT_CONFIG)
    if not os.path.exists(path):
        logger.info(f"Configuration file {path} not found, using defaults")
        return config

    try:
        with open(path, "r", encoding="utf-8") as f:
            loaded = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Failed to load configuration file: {e}")
        raise ConfigError(f"cannot load configuration file {path}: {e}") from e
    if not isinstance(loaded, dict):
        raise ConfigError(f"configuration file {path} must contain a JSON object")

    for section, values in loaded.items():
        if isinstance(values, dict) and isinstance(config.get(section), dict):
            config[section].update(values)
        else:
            config[section] = values
    logger.debug(f"Loaded configuration file: {path}")
    return config
