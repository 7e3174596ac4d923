"""
Child-Sum Tree-LSTM

    h~ = sum_k h_k
    i  = sigmoid(x W_i + h~ U_i + b_i)
    f_k = sigmoid(h_k U_f + b_f)
    o  = sigmoid(x W_o + h~ U_o + b_o)
    u  = tanh(x W_u + h~ U_u + b_u)
    c  = i * u + sum_k f_k * c_k
    h  = o * tanh(c)

只有叶子有词输入，内部节点 x = 0，因此叶子不含 U 项、内部节点不含 W 项，
遗忘门也不需要 W_f。子节点总按子树键排序后求和，兄弟置换得到逐位相同的结果。
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping

import numpy as np

from modules.autodiff import DiffNode, ParameterStore, constant
from modules.autodiff import graph as G
from modules.errors import DataError, ShapeError
from modules.treebank import ParseTree

PREFIX = "tree_lstm"


@dataclass
class NodeStates:
    """每个节点的隐藏状态

    Attributes:
        H: N x D_h，行按 order 排列
        order: 行 -> 节点编号（规范后序，最后一行是根）
        h_root: 根节点隐藏状态 1 x D_h
    """
    H: DiffNode
    order: List[int]
    h_root: DiffNode

    @property
    def size(self) -> int:
        return self.H.shape[0]

    def by_node_id(self) -> np.ndarray:
        """按节点编号排列的隐藏状态数值"""
        values = np.empty_like(self.H.value)
        values[self.order] = self.H.value
        return values


def init_tree_lstm(store: ParameterStore, word_dim: int, hidden: int, rng: np.random.Generator) -> None:
    """注册 Tree-LSTM 参数（遗忘门偏置初始化为 1）"""
    for gate in ("i", "o", "u"):
        store.add_uniform(f"{PREFIX}.W_{gate}", (word_dim, hidden), rng)
    for gate in ("i", "f", "o", "u"):
        store.add_uniform(f"{PREFIX}.U_{gate}", (hidden, hidden), rng)
    for gate in ("i", "o", "u"):
        store.add_uniform(f"{PREFIX}.b_{gate}", (1, hidden), rng, fan_in=hidden)
    store.add_constant(f"{PREFIX}.b_f", (1, hidden), 1.0)


def tree_lstm_encode(
    tree: ParseTree,
    word_vectors: np.ndarray,
    params: Mapping[str, DiffNode],
) -> NodeStates:
    """自底向上计算所有节点的隐藏状态

    Args:
        tree: 句法树
        word_vectors: 叶子词向量，按句子顺序每行一个（行数 = 叶子数）
        params: 参数节点表

    Returns:
        NodeStates
    """
    if tree is None or tree.size == 0:
        raise DataError("cannot encode an empty tree")
    p = {name: params[f"{PREFIX}.{name}"] for name in (
        "W_i", "W_o", "W_u", "U_i", "U_f", "U_o", "U_u", "b_i", "b_f", "b_o", "b_u")}
    dtype = p["W_i"].dtype

    leaf_ids = [node.node_id for node in tree.nodes if node.is_leaf]
    word_vectors = np.asarray(word_vectors, dtype=dtype)
    if word_vectors.shape != (len(leaf_ids), p["W_i"].shape[0]):
        raise ShapeError(
            f"expected {len(leaf_ids)} word vectors of size {p['W_i'].shape[0]}, got {word_vectors.shape}")

    order = tree.canonical_order()
    leaf_rank = {node_id: k for k, node_id in enumerate(leaf_ids)}
    canonical_leaves = [node_id for node_id in order if tree.nodes[node_id].is_leaf]

    # 叶子一次性批量计算（按规范顺序堆叠）
    X = constant(word_vectors[[leaf_rank[n] for n in canonical_leaves]])
    i = G.sigmoid(X @ p["W_i"] + p["b_i"])
    o = G.sigmoid(X @ p["W_o"] + p["b_o"])
    u = G.tanh(X @ p["W_u"] + p["b_u"])
    C_leaves = i * u
    H_leaves = o * G.tanh(C_leaves)

    h: Dict[int, DiffNode] = {}
    c: Dict[int, DiffNode] = {}
    for row, node_id in enumerate(canonical_leaves):
        h[node_id] = G.gather(H_leaves, [row])
        c[node_id] = G.gather(C_leaves, [row])

    for node_id in order:
        if node_id in h:
            continue
        children = tree.canonical_children(node_id)
        H_k = G.concat([h[k] for k in children], axis=0)
        C_k = G.concat([c[k] for k in children], axis=0)
        ones = constant(np.ones((1, len(children)), dtype=dtype))
        h_sum = ones @ H_k

        i = G.sigmoid(h_sum @ p["U_i"] + p["b_i"])
        f = G.sigmoid(H_k @ p["U_f"] + p["b_f"])
        o = G.sigmoid(h_sum @ p["U_o"] + p["b_o"])
        u = G.tanh(h_sum @ p["U_u"] + p["b_u"])
        c[node_id] = i * u + ones @ (f * C_k)
        h[node_id] = o * G.tanh(c[node_id])

    H = G.concat([h[node_id] for node_id in order], axis=0)
    return NodeStates(H=H, order=order, h_root=h[tree.root])
