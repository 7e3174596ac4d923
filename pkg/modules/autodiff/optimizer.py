"""
参数存储与 Adam 优化器

ParameterStore 按名字保存可训练张量及其一、二阶矩缓冲区；
adam_step 就地更新参数并推进步数计数器。
"""

from __future__ import annotations

from typing import Dict, Iterator, Mapping, Optional, Tuple

import numpy as np

from modules.errors import ConfigError, ShapeError
from .graph import DiffNode


class ParameterStore:
    """命名参数集合

    Attributes:
        dtype: 参数精度（训练 float32，梯度检查 float64）
        step: Adam 已执行的步数
    """

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.step = 0
        self._params: Dict[str, np.ndarray] = {}
        self._first_moment: Dict[str, np.ndarray] = {}
        self._second_moment: Dict[str, np.ndarray] = {}

    # ------------------------------------------------------------------
    # 注册与初始化
    # ------------------------------------------------------------------

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        """注册一个参数

        Args:
            name: 参数名（全局唯一）
            value: 初始值，必须是二维

        Returns:
            存储中的参数数组
        """
        if name in self._params:
            raise ConfigError(f"parameter {name!r} registered twice")
        array = np.array(value, dtype=self.dtype)
        if array.ndim != 2:
            raise ShapeError(f"parameter {name!r} must be 2-D, got shape {array.shape}")
        self._params[name] = array
        self._first_moment[name] = np.zeros_like(array)
        self._second_moment[name] = np.zeros_like(array)
        return array

    def add_uniform(
        self,
        name: str,
        shape: Tuple[int, int],
        rng: np.random.Generator,
        fan_in: Optional[int] = None,
    ) -> np.ndarray:
        """uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) 初始化，fan_in 默认取行数"""
        fan_in = fan_in or shape[0]
        bound = 1.0 / np.sqrt(max(fan_in, 1))
        return self.add(name, rng.uniform(-bound, bound, size=shape))

    def add_constant(self, name: str, shape: Tuple[int, int], fill: float) -> np.ndarray:
        return self.add(name, np.full(shape, fill))

    # ------------------------------------------------------------------
    # 访问
    # ------------------------------------------------------------------

    def __getitem__(self, name: str) -> np.ndarray:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def set(self, name: str, value: np.ndarray) -> None:
        """覆盖参数值（加载检查点用），形状必须一致"""
        if name not in self._params:
            raise ConfigError(f"unknown parameter {name!r}")
        array = np.asarray(value, dtype=self.dtype)
        if array.shape != self._params[name].shape:
            raise ShapeError(f"parameter {name!r}: expected {self._params[name].shape}, got {array.shape}")
        self._params[name][...] = array

    def moments(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        return self._first_moment[name], self._second_moment[name]

    def nodes(self) -> Dict[str, DiffNode]:
        """为一次前向计算创建新的参数叶子节点"""
        return {name: DiffNode.parameter(value, name) for name, value in self._params.items()}

    def count(self) -> int:
        """参数标量总数"""
        return int(sum(value.size for value in self._params.values()))

    def astype(self, dtype) -> "ParameterStore":
        """复制为另一精度（不复制矩缓冲区）"""
        clone = ParameterStore(dtype)
        for name, value in self._params.items():
            clone.add(name, value)
        return clone


def adam_step(
    store: ParameterStore,
    gradients: Mapping[str, np.ndarray],
    lr: float = 0.001,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> ParameterStore:
    """执行一步带偏差校正的 Adam 更新

    权重衰减以 weight_decay * param 的形式加到梯度上，再更新矩估计。
    梯度表中缺失的参数按零梯度处理。

    Args:
        store: 参数存储（就地修改）
        gradients: 参数名 -> 梯度

    Returns:
        同一个 store
    """
    if lr <= 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    unknown = set(gradients) - set(store.names())
    if unknown:
        raise ShapeError(f"gradients for unknown parameters: {sorted(unknown)}")

    store.step += 1
    bias_correction1 = 1.0 - beta1 ** store.step
    bias_correction2 = 1.0 - beta2 ** store.step

    for name, param in store.items():
        grad = gradients.get(name)
        if grad is None:
            grad = np.zeros_like(param)
        else:
            grad = np.asarray(grad)
            if grad.shape != param.shape:
                raise ShapeError(f"gradient for {name!r} has shape {grad.shape}, parameter has {param.shape}")
            grad = grad.astype(param.dtype, copy=False)
        if weight_decay:
            grad = grad + weight_decay * param

        m, v = store.moments(name)
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * (grad * grad)

        m_hat = m / bias_correction1
        v_hat = v / bias_correction2
        param -= lr * m_hat / (np.sqrt(v_hat) + eps)

    return store
