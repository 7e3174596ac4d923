"""
反向自动微分模块

为 TCMN 模型提供最小可用的二维张量计算图、Adam 优化器、
有限差分梯度检查以及 TCMN1 参数检查点读写。
"""

from .graph import DiffNode, OpTag, backward, constant, parameters_in, topological_order
from .optimizer import ParameterStore, adam_step
from .gradcheck import finite_difference_check, primitive_cases, relative_error
from .checkpoint import CHECKPOINT_MAGIC, load_checkpoint, save_checkpoint

__all__ = [
    'DiffNode',
    'OpTag',
    'backward',
    'constant',
    'parameters_in',
    'topological_order',
    'ParameterStore',
    'adam_step',
    'finite_difference_check',
    'primitive_cases',
    'relative_error',
    'CHECKPOINT_MAGIC',
    'load_checkpoint',
    'save_checkpoint',
]
