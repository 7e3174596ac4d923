"""
反向自动微分计算图

所有张量均为二维（行向量 1×D，标量 1×1）。每个原语操作返回新的 DiffNode，
并挂接一个把上游梯度累加到父节点的闭包；backward 按逆拓扑序逐个调用。
"""

from __future__ import annotations

from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TYPE_CHECKING

import numpy as np

from modules.errors import ShapeError

if TYPE_CHECKING:
    from .optimizer import ParameterStore

# L2 归一化分母中的平滑项，保证零向量映射为零向量
L2_EPS = 1e-12


class OpTag(Enum):
    """原语操作枚举"""
    PARAM = "param"
    CONST = "const"
    MATMUL = "matmul"
    ADD = "add"
    MUL = "mul"
    CONCAT = "concat"
    MEAN = "mean"
    SIGMOID = "sigmoid"
    TANH = "tanh"
    SOFTMAX = "softmax"
    L2_NORMALIZE = "l2_normalize"
    HINGE = "hinge"
    MAX = "max"
    GATHER = "gather"
    TRANSPOSE = "transpose"
    RESHAPE = "reshape"


class DiffNode:
    """计算图节点

    value 与 grad 形状始终一致；parents 为有序的父节点列表。
    """

    __slots__ = ("value", "grad", "op", "parents", "name", "requires_grad", "_backward")

    def __init__(
        self,
        value: np.ndarray,
        op: OpTag,
        parents: Sequence["DiffNode"] = (),
        name: Optional[str] = None,
        requires_grad: Optional[bool] = None,
        backward_fn: Optional[Callable[[np.ndarray], None]] = None,
    ):
        value = np.asarray(value)
        if value.ndim != 2:
            raise ShapeError(f"DiffNode values must be 2-D, got shape {value.shape}")
        self.value = value
        self.grad = np.zeros_like(value)
        self.op = op
        self.parents: Tuple[DiffNode, ...] = tuple(parents)
        self.name = name
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in self.parents)
        self.requires_grad = requires_grad
        self._backward = backward_fn

    @classmethod
    def parameter(cls, value: np.ndarray, name: str) -> "DiffNode":
        """创建可训练叶子节点"""
        return cls(np.array(value, copy=True), OpTag.PARAM, name=name, requires_grad=True)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.value.shape

    @property
    def dtype(self) -> np.dtype:
        return self.value.dtype

    def item(self) -> float:
        """取出 1×1 节点的标量值"""
        if self.value.shape != (1, 1):
            raise ShapeError(f"item() requires a 1x1 node, got {self.value.shape}")
        return float(self.value[0, 0])

    def __add__(self, other: "DiffNode") -> "DiffNode":
        return add(self, other)

    def __mul__(self, other: "DiffNode") -> "DiffNode":
        return mul(self, other)

    def __matmul__(self, other: "DiffNode") -> "DiffNode":
        return matmul(self, other)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"<DiffNode {self.op.value}{label} shape={self.shape}>"


def constant(value, dtype=None) -> DiffNode:
    """创建常量叶子节点（不参与求导）"""
    array = np.asarray(value, dtype=dtype)
    if array.ndim == 0:
        array = array.reshape(1, 1)
    elif array.ndim == 1:
        array = array.reshape(1, -1)
    return DiffNode(array, OpTag.CONST, requires_grad=False)


# ============================================================================
# 内部工具
# ============================================================================


def _broadcast_shape(a: DiffNode, b: DiffNode, op: str) -> Tuple[int, int]:
    shape = []
    for da, db in zip(a.shape, b.shape):
        if da == db or db == 1:
            shape.append(da)
        elif da == 1:
            shape.append(db)
        else:
            raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")
    return shape[0], shape[1]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """把广播后的梯度求和回操作数形状"""
    for axis in (0, 1):
        if shape[axis] == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _accumulate(node: DiffNode, grad: np.ndarray) -> None:
    if node.requires_grad:
        node.grad += grad


# ============================================================================
# 原语操作
# ============================================================================


def matmul(a: DiffNode, b: DiffNode) -> DiffNode:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.grad += g @ b.value.T
        if b.requires_grad:
            b.grad += a.value.T @ g

    return DiffNode(a.value @ b.value, OpTag.MATMUL, (a, b), backward_fn=backward)


def add(a: DiffNode, b: DiffNode) -> DiffNode:
    _broadcast_shape(a, b, "add")

    def backward(g: np.ndarray) -> None:
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return DiffNode(a.value + b.value, OpTag.ADD, (a, b), backward_fn=backward)


def mul(a: DiffNode, b: DiffNode) -> DiffNode:
    _broadcast_shape(a, b, "mul")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.grad += _unbroadcast(g * b.value, a.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(g * a.value, b.shape)

    return DiffNode(a.value * b.value, OpTag.MUL, (a, b), backward_fn=backward)


def concat(nodes: Sequence[DiffNode], axis: int = 1) -> DiffNode:
    if not nodes:
        raise ShapeError("concat: empty input")
    other = 1 - axis
    if any(n.shape[other] != nodes[0].shape[other] for n in nodes):
        raise ShapeError(f"concat axis={axis}: mismatched shapes {[n.shape for n in nodes]}")
    sizes = [n.shape[axis] for n in nodes]
    cuts = np.cumsum(sizes)[:-1]

    def backward(g: np.ndarray) -> None:
        for node, part in zip(nodes, np.split(g, cuts, axis=axis)):
            _accumulate(node, part)

    value = np.concatenate([n.value for n in nodes], axis=axis)
    return DiffNode(value, OpTag.CONCAT, nodes, backward_fn=backward)


def mean(x: DiffNode, axis: Optional[int] = None) -> DiffNode:
    if axis is None:
        value = np.mean(x.value).reshape(1, 1).astype(x.dtype)
        count = x.value.size
    else:
        value = np.mean(x.value, axis=axis, keepdims=True)
        count = x.shape[axis]

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.grad += np.broadcast_to(g / count, x.shape)

    return DiffNode(value, OpTag.MEAN, (x,), backward_fn=backward)


def sigmoid(x: DiffNode) -> DiffNode:
    # tanh 形式避免 exp 溢出
    y = 0.5 * (1.0 + np.tanh(0.5 * x.value))

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g * y * (1.0 - y))

    return DiffNode(y, OpTag.SIGMOID, (x,), backward_fn=backward)


def tanh(x: DiffNode) -> DiffNode:
    y = np.tanh(x.value)

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g * (1.0 - y * y))

    return DiffNode(y, OpTag.TANH, (x,), backward_fn=backward)


def softmax(x: DiffNode, axis: int = 1) -> DiffNode:
    shifted = x.value - np.max(x.value, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g: np.ndarray) -> None:
        _accumulate(x, y * (g - np.sum(g * y, axis=axis, keepdims=True)))

    return DiffNode(y, OpTag.SOFTMAX, (x,), backward_fn=backward)


def l2_normalize(x: DiffNode) -> DiffNode:
    """逐行 L2 归一化"""
    norm = np.sqrt(np.sum(x.value * x.value, axis=1, keepdims=True) + L2_EPS)
    y = x.value / norm

    def backward(g: np.ndarray) -> None:
        _accumulate(x, (g - y * np.sum(g * y, axis=1, keepdims=True)) / norm)

    return DiffNode(y, OpTag.L2_NORMALIZE, (x,), backward_fn=backward)


def hinge(x: DiffNode) -> DiffNode:
    """max(0, x)"""
    mask = x.value > 0

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g * mask)

    return DiffNode(np.where(mask, x.value, 0).astype(x.dtype), OpTag.HINGE, (x,), backward_fn=backward)


def max_over(x: DiffNode, axis: int = 1) -> DiffNode:
    """沿轴取最大值；并列时次梯度只流向第一个最大下标"""
    index = np.argmax(x.value, axis=axis)
    if axis == 1:
        rows = np.arange(x.shape[0])
        value = x.value[rows, index].reshape(-1, 1)
    else:
        cols = np.arange(x.shape[1])
        value = x.value[index, cols].reshape(1, -1)

    def backward(g: np.ndarray) -> None:
        if not x.requires_grad:
            return
        if axis == 1:
            x.grad[rows, index] += g[:, 0]
        else:
            x.grad[index, cols] += g[0, :]

    return DiffNode(value, OpTag.MAX, (x,), backward_fn=backward)


def gather(table: DiffNode, indices: Sequence[int]) -> DiffNode:
    """按行取表（嵌入查找）"""
    index = np.asarray(indices, dtype=np.int64)
    if index.ndim != 1 or (index.size and (index.min() < 0 or index.max() >= table.shape[0])):
        raise ShapeError(f"gather: indices out of range for table of {table.shape[0]} rows")

    def backward(g: np.ndarray) -> None:
        if table.requires_grad:
            np.add.at(table.grad, index, g)

    return DiffNode(table.value[index], OpTag.GATHER, (table,), backward_fn=backward)


def transpose(x: DiffNode) -> DiffNode:
    def backward(g: np.ndarray) -> None:
        _accumulate(x, g.T)

    return DiffNode(x.value.T, OpTag.TRANSPOSE, (x,), backward_fn=backward)


def reshape(x: DiffNode, shape: Tuple[int, int]) -> DiffNode:
    if len(shape) != 2 or shape[0] * shape[1] != x.value.size:
        raise ShapeError(f"reshape: cannot reshape {x.shape} to {shape}")

    def backward(g: np.ndarray) -> None:
        _accumulate(x, g.reshape(x.shape))

    return DiffNode(x.value.reshape(shape), OpTag.RESHAPE, (x,), backward_fn=backward)


# ============================================================================
# 反向传播
# ============================================================================


def topological_order(root: DiffNode) -> List[DiffNode]:
    """返回从叶到根的拓扑序（迭代 DFS，避免深树递归）"""
    order: List[DiffNode] = []
    visited = set()
    stack: List[Tuple[DiffNode, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in reversed(node.parents):
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(root: DiffNode, store: Optional["ParameterStore"] = None) -> Dict[str, np.ndarray]:
    """从标量根节点反向传播

    Args:
        root: 1×1 的损失节点
        store: 若给出，未被图引用的参数以零梯度补齐

    Returns:
        参数名 -> 梯度
    """
    if root.shape != (1, 1):
        raise ShapeError("backward requires scalar")

    order = topological_order(root)
    for node in order:
        node.grad = np.zeros_like(node.value)
    root.grad = np.ones_like(root.value)

    for node in reversed(order):
        if node._backward is not None and node.requires_grad:
            node._backward(node.grad)

    gradients: Dict[str, np.ndarray] = {}
    for node in order:
        if node.op is OpTag.PARAM and node.name is not None:
            if node.name in gradients:
                gradients[node.name] = gradients[node.name] + node.grad
            else:
                gradients[node.name] = node.grad.copy()

    if store is not None:
        for name in store.names():
            if name not in gradients:
                gradients[name] = np.zeros_like(store[name])
    return gradients


def parameters_in(root: DiffNode) -> Iterable[str]:
    """列出图中出现的参数名"""
    return sorted({n.name for n in topological_order(root) if n.op is OpTag.PARAM and n.name})
