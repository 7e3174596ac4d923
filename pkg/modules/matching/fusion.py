"""
融合打分块

f^m、f^c、f^loc、f^rel 共用同一结构、参数互不共享：
    z = L2Norm(text W_t + b_t + input W_in + b_in)
    score = tanh(z W_h + b_h) W_o + b_o
文本向量是 1 x D_text 行，输入可以是 R 行，得到 R x 1 分数。
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from modules.autodiff import DiffNode, ParameterStore
from modules.autodiff import graph as G
from modules.errors import ShapeError


@dataclass
class FusionBlockParams:
    """一个融合块的参数节点"""
    text_w: DiffNode
    text_b: DiffNode
    input_w: DiffNode
    input_b: DiffNode
    hidden_w: DiffNode
    hidden_b: DiffNode
    out_w: DiffNode
    out_b: DiffNode

    @classmethod
    def from_params(cls, params: Mapping[str, DiffNode], prefix: str) -> "FusionBlockParams":
        return cls(**{name: params[f"{prefix}.{name}"] for name in cls.__dataclass_fields__})

    @property
    def text_dim(self) -> int:
        return self.text_w.shape[0]

    @property
    def input_dim(self) -> int:
        return self.input_w.shape[0]


def init_fusion_block(
    store: ParameterStore,
    prefix: str,
    text_dim: int,
    input_dim: int,
    fusion_dim: int,
    rng: np.random.Generator,
) -> None:
    store.add_uniform(f"{prefix}.text_w", (text_dim, fusion_dim), rng)
    store.add_uniform(f"{prefix}.text_b", (1, fusion_dim), rng, fan_in=text_dim)
    store.add_uniform(f"{prefix}.input_w", (input_dim, fusion_dim), rng)
    store.add_uniform(f"{prefix}.input_b", (1, fusion_dim), rng, fan_in=input_dim)
    store.add_uniform(f"{prefix}.hidden_w", (fusion_dim, fusion_dim), rng)
    store.add_uniform(f"{prefix}.hidden_b", (1, fusion_dim), rng, fan_in=fusion_dim)
    store.add_uniform(f"{prefix}.out_w", (fusion_dim, 1), rng)
    store.add_uniform(f"{prefix}.out_b", (1, 1), rng, fan_in=fusion_dim)


def fusion_score(text: DiffNode, inputs: DiffNode, block: FusionBlockParams) -> DiffNode:
    """对 inputs 的每一行打分

    Args:
        text: 1 x D_text 文本向量
        inputs: R x D_in 输入
        block: 融合块参数

    Returns:
        R x 1 分数节点
    """
    if text.shape != (1, block.text_dim):
        raise ShapeError(f"fusion text vector must be 1 x {block.text_dim}, got {text.shape}")
    if inputs.shape[1] != block.input_dim:
        raise ShapeError(f"fusion input must have {block.input_dim} columns, got {inputs.shape}")
    projected = (text @ block.text_w + block.text_b) + (inputs @ block.input_w + block.input_b)
    z = G.l2_normalize(projected)
    hidden = G.tanh(z @ block.hidden_w + block.hidden_b)
    return hidden @ block.out_w + block.out_b
