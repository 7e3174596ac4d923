"""
有限差分梯度检查

finite_difference_check 以中心差分逐坐标比较解析梯度；
primitive_cases 为每个原语生成随机用例（|x| <= 2，float64）。
"""

from __future__ import annotations

from typing import Callable, Dict, List, Mapping, Tuple

import numpy as np

from . import graph as G
from .graph import DiffNode

# 相对误差分母下限：低于该量级的梯度按绝对误差比较
RELATIVE_FLOOR = 1e-5

ScalarFunction = Callable[[Dict[str, DiffNode]], DiffNode]


def relative_error(analytic: float, numeric: float) -> float:
    """|a-n| / max(|a|, |n|, floor)，0/0 记为 0"""
    diff = abs(analytic - numeric)
    if diff == 0.0:
        return 0.0
    return diff / max(abs(analytic), abs(numeric), RELATIVE_FLOOR)


def finite_difference_check(
    fn: ScalarFunction,
    inputs: Mapping[str, np.ndarray],
    eps: float = 1e-5,
) -> float:
    """比较解析梯度与中心差分

    Args:
        fn: 接收 {名字: 参数节点} 并返回 1×1 节点的确定性函数
        inputs: 名字 -> 初始值
        eps: 差分步长

    Returns:
        所有坐标上的最大相对误差（出现 NaN 时返回 NaN）
    """
    base = {name: np.array(value, dtype=np.float64) for name, value in inputs.items()}

    def evaluate(values: Mapping[str, np.ndarray]) -> float:
        nodes = {name: DiffNode.parameter(value, name) for name, value in values.items()}
        return fn(nodes).item()

    nodes = {name: DiffNode.parameter(value, name) for name, value in base.items()}
    analytic = G.backward(fn(nodes))

    worst = 0.0
    for name, value in base.items():
        grad = analytic.get(name, np.zeros_like(value))
        for index in np.ndindex(value.shape):
            original = value[index]
            value[index] = original + eps
            plus = evaluate(base)
            value[index] = original - eps
            minus = evaluate(base)
            value[index] = original
            numeric = (plus - minus) / (2.0 * eps)
            error = relative_error(float(grad[index]), numeric)
            if np.isnan(error):
                return float("nan")
            worst = max(worst, error)
    return worst


def _away_from_zero(x: np.ndarray, margin: float = 0.05) -> np.ndarray:
    return np.where(np.abs(x) < margin, np.sign(x + 1e-12) * margin, x)


def _distinct_values(rng: np.random.Generator, shape: Tuple[int, int]) -> np.ndarray:
    # 间隔至少 0.05，避免 max 在差分步长内换位
    count = shape[0] * shape[1]
    values = rng.permutation(count) * (4.0 / count) - 2.0 + rng.uniform(0.0, 0.05, size=count)
    return values.reshape(shape)


def primitive_cases(rng: np.random.Generator) -> List[Tuple[str, ScalarFunction, Dict[str, np.ndarray]]]:
    """为每个原语生成一组随机梯度检查用例"""
    u = lambda *shape: rng.uniform(-2.0, 2.0, size=shape)
    reduce_rng = np.random.default_rng(rng.integers(1 << 31))
    heads = {}

    def head(tag: str, node: DiffNode) -> DiffNode:
        # 同一用例在多次求值间复用同一组权重
        if tag not in heads:
            heads[tag] = G.constant(reduce_rng.uniform(-1.0, 1.0, size=node.shape))
        return G.mean(G.mul(node, heads[tag]))

    indices = rng.integers(0, 5, size=4).tolist()

    def composite(x: Dict[str, DiffNode]) -> DiffNode:
        h1 = G.tanh(G.add(G.matmul(x["x"], x["w1"]), x["b1"]))
        h2 = G.tanh(G.add(G.matmul(h1, x["w2"]), x["b2"]))
        return head("composite", G.softmax(G.matmul(h2, x["w3"]), axis=1))

    return [
        ("matmul", lambda x: head("matmul", G.matmul(x["a"], x["b"])), {"a": u(3, 4), "b": u(4, 2)}),
        ("add", lambda x: head("add", G.add(x["a"], x["b"])), {"a": u(3, 4), "b": u(1, 4)}),
        ("mul", lambda x: head("mul", G.mul(x["a"], x["b"])), {"a": u(3, 4), "b": u(3, 1)}),
        ("concat", lambda x: head("concat", G.concat([x["a"], x["b"]], axis=1)), {"a": u(2, 3), "b": u(2, 2)}),
        ("concat_rows", lambda x: head("concat_rows", G.concat([x["a"], x["b"]], axis=0)), {"a": u(2, 3), "b": u(1, 3)}),
        ("mean", lambda x: head("mean", G.mean(x["a"], axis=0)), {"a": u(4, 3)}),
        ("mean_all", lambda x: G.mean(G.mul(x["a"], x["a"])), {"a": u(3, 3)}),
        ("sigmoid", lambda x: head("sigmoid", G.sigmoid(x["a"])), {"a": u(3, 4)}),
        ("tanh", lambda x: head("tanh", G.tanh(x["a"])), {"a": u(3, 4)}),
        ("softmax", lambda x: head("softmax", G.softmax(x["a"], axis=1)), {"a": u(2, 5)}),
        ("softmax_columns", lambda x: head("softmax_columns", G.softmax(x["a"], axis=0)), {"a": u(5, 2)}),
        ("l2_normalize", lambda x: head("l2_normalize", G.l2_normalize(x["a"])), {"a": u(3, 4)}),
        ("hinge", lambda x: head("hinge", G.hinge(x["a"])), {"a": _away_from_zero(u(3, 4))}),
        ("max", lambda x: head("max", G.max_over(x["a"], axis=1)), {"a": _distinct_values(rng, (3, 5))}),
        ("max_columns", lambda x: head("max_columns", G.max_over(x["a"], axis=0)), {"a": _distinct_values(rng, (4, 3))}),
        ("gather", lambda x: head("gather", G.gather(x["a"], indices)), {"a": u(5, 3)}),
        ("transpose", lambda x: head("transpose", G.transpose(x["a"])), {"a": u(2, 4)}),
        ("reshape", lambda x: head("reshape", G.reshape(x["a"], (4, 3))), {"a": u(2, 6)}),
        ("composite", composite, {
            "x": u(2, 6), "w1": u(6, 8), "b1": u(1, 8),
            "w2": u(8, 5), "b2": u(1, 5), "w3": u(5, 4),
        }),
    ]
