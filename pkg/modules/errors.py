"""TCMN 异常定义。

所有模块抛出的业务异常都继承自 TCMNError，命令行入口据此映射退出码：
DataError / ConfigError -> 2，NumericError -> 3。
"""

from __future__ import annotations

from typing import Optional

__all__ = [
    "TCMNError",
    "DataError",
    "TreeParseError",
    "NumericError",
    "ShapeError",
    "ConfigError",
]


# ============================================================================
# 异常定义
# ============================================================================


class TCMNError(RuntimeError):
    """TCMN 异常基类。"""


class DataError(TCMNError):
    """输入数据缺失或格式错误。"""

    def __init__(self, message: str, *, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class TreeParseError(DataError):
    """括号树解析失败，offset 为 UTF-8 字节偏移。"""

    def __init__(self, message: str, offset: int, **kwargs):
        self.reason = message
        self.offset = offset
        super().__init__(f"{message} (at byte {offset})", **kwargs)


class NumericError(TCMNError):
    """出现 NaN/Inf 或梯度检查未通过。"""


class ShapeError(TCMNError, ValueError):
    """张量维度不匹配。"""


class ConfigError(TCMNError):
    """配置取值非法。"""
