"""
语言模块

Tree-LSTM 句法树编码与三路树节点注意力，以及 GloVe 词向量读写。
"""

from .embeddings import WordEmbeddings, read_embeddings, write_embeddings
from .tree_lstm import NodeStates, init_tree_lstm, tree_lstm_encode
from .tree_attention import COMPONENTS, PhraseEmbeddings, init_tree_attention, tree_attention

__all__ = [
    'WordEmbeddings',
    'read_embeddings',
    'write_embeddings',
    'NodeStates',
    'init_tree_lstm',
    'tree_lstm_encode',
    'COMPONENTS',
    'PhraseEmbeddings',
    'init_tree_attention',
    'tree_attention',
]
