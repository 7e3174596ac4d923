"""
句法树模块

括号树解析 / 序列化、树文件读写以及标签与词表。
"""

from .tree import (
    TOKEN_LABEL,
    ParseTree,
    TreeNode,
    canonical_whitespace,
    parse_bracketed,
    read_tree_file,
    serialize,
    tree_from_nested,
    write_tree_file,
)
from .vocab import UNK, Vocabulary, build_vocabularies, load_vocabulary, save_vocabulary

__all__ = [
    'TOKEN_LABEL',
    'ParseTree',
    'TreeNode',
    'canonical_whitespace',
    'parse_bracketed',
    'read_tree_file',
    'serialize',
    'tree_from_nested',
    'write_tree_file',
    'UNK',
    'Vocabulary',
    'build_vocabularies',
    'load_vocabulary',
    'save_vocabulary',
]
