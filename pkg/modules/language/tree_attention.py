"""
树节点注意力

对 n ∈ {m, c, s}：logit_j = [h_j, e_j] w_n + b_n，alpha_n = softmax(logits)，
d_n = sum_j alpha_n[j] h_j。e_j 是节点标签的可学习稠密嵌入。
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping

import numpy as np

from modules.autodiff import DiffNode, ParameterStore
from modules.autodiff import graph as G
from modules.errors import ShapeError
from modules.treebank import ParseTree, Vocabulary
from .tree_lstm import NodeStates

PREFIX = "attention"

# m: 主事件，c: 上下文事件，s: 时序信号
COMPONENTS = ("m", "c", "s")


@dataclass
class PhraseEmbeddings:
    """三个短语嵌入与根句向量

    Attributes:
        phrases: n -> d_n (1 x D_h)
        h_root: 根节点隐藏状态
        attention: n -> alpha_n (N x 1，行序同 NodeStates.order)
        order: 行 -> 节点编号
    """
    phrases: Dict[str, DiffNode]
    h_root: DiffNode
    attention: Dict[str, DiffNode]
    order: list

    @property
    def d_m(self) -> DiffNode:
        return self.phrases["m"]

    @property
    def d_c(self) -> DiffNode:
        return self.phrases["c"]

    @property
    def d_s(self) -> DiffNode:
        return self.phrases["s"]

    def node_attention(self, component: str) -> np.ndarray:
        """按节点编号排列的注意力权重"""
        weights = np.empty(len(self.order))
        weights[self.order] = self.attention[component].value[:, 0]
        return weights


def init_tree_attention(
    store: ParameterStore,
    num_labels: int,
    label_dim: int,
    hidden: int,
    rng: np.random.Generator,
) -> None:
    """注册标签嵌入和三组注意力打分参数"""
    store.add_uniform(f"{PREFIX}.label_embedding", (num_labels, label_dim), rng, fan_in=label_dim)
    for n in COMPONENTS:
        store.add_uniform(f"{PREFIX}.w_{n}", (hidden + label_dim, 1), rng)
        store.add_uniform(f"{PREFIX}.b_{n}", (1, 1), rng, fan_in=hidden + label_dim)


def tree_attention(
    states: NodeStates,
    tree: ParseTree,
    labels: Vocabulary,
    params: Mapping[str, DiffNode],
) -> PhraseEmbeddings:
    """计算 d_m, d_c, d_s

    Args:
        states: Tree-LSTM 输出
        tree: 与 states 对应的树
        labels: 标签表（未知标签映射为 <unk>）
        params: 参数节点表
    """
    if states.size != tree.size:
        raise ShapeError(f"{states.size} node states for a tree of {tree.size} nodes")

    label_ids = [labels.id_of(tree.nodes[node_id].label) for node_id in states.order]
    E = G.gather(params[f"{PREFIX}.label_embedding"], label_ids)
    HE = G.concat([states.H, E], axis=1)

    phrases: Dict[str, DiffNode] = {}
    attention: Dict[str, DiffNode] = {}
    for n in COMPONENTS:
        logits = HE @ params[f"{PREFIX}.w_{n}"] + params[f"{PREFIX}.b_{n}"]
        alpha = G.softmax(logits, axis=0)
        attention[n] = alpha
        phrases[n] = G.transpose(alpha) @ states.H
    return PhraseEmbeddings(phrases=phrases, h_root=states.h_root, attention=attention, order=list(states.order))
