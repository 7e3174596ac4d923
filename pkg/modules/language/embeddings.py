"""
词向量（GloVe 文本格式）

每行 "word f1 f2 ... fD"。词向量在训练中固定不变；
词表外或向量文件中缺失的词映射为零向量。
"""

from __future__ import annotations

import logging
import os
from typing import Dict, Iterable, Mapping

import numpy as np

from modules.errors import DataError
from modules.treebank import Vocabulary

logger = logging.getLogger(__name__)


class WordEmbeddings:
    """词 -> 向量查找表"""

    def __init__(self, vectors: Mapping[str, np.ndarray], dim: int):
        self.dim = int(dim)
        self.vectors: Dict[str, np.ndarray] = {}
        for word, vector in vectors.items():
            vector = np.asarray(vector, dtype=np.float64).reshape(-1)
            if vector.shape[0] != self.dim:
                raise DataError(f"embedding for {word!r} has dimension {vector.shape[0]}, expected {self.dim}")
            self.vectors[word] = vector

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def vector(self, word: str) -> np.ndarray:
        found = self.vectors.get(word)
        return found.copy() if found is not None else np.zeros(self.dim)

    def table_for(self, vocab: Vocabulary, dtype=np.float32) -> np.ndarray:
        """按词表编号排列的 |V| x D 矩阵，<unk> 行为零"""
        table = np.zeros((len(vocab), self.dim), dtype=dtype)
        missing = 0
        for i, word in enumerate(vocab.tokens):
            if i == vocab.unk_id:
                continue
            if word in self.vectors:
                table[i] = self.vectors[word]
            else:
                missing += 1
        if missing:
            logger.warning(f"{missing} of {len(vocab) - 1} vocabulary words have no embedding, using zeros")
        return table


def read_embeddings(path: str) -> WordEmbeddings:
    """读取 GloVe 文本文件

    Raises:
        DataError: 文件不可读、数值非法或维度不一致（附带行号）
    """
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read embeddings: {exc}", path=path) from exc

    vectors: Dict[str, np.ndarray] = {}
    dim = None
    with fh:
        for number, line in enumerate(fh, start=1):
            fields = line.split()
            if len(fields) < 2:
                if fields:
                    raise DataError("expected 'word f1 ... fD'", path=path, line=number)
                continue
            try:
                vector = np.array([float(x) for x in fields[1:]])
            except ValueError:
                raise DataError("non-numeric embedding value", path=path, line=number) from None
            if dim is None:
                dim = vector.shape[0]
            elif vector.shape[0] != dim:
                raise DataError(f"dimension {vector.shape[0]} differs from {dim}", path=path, line=number)
            vectors[fields[0]] = vector

    if dim is None:
        raise DataError("no embeddings", path=path)
    logger.info(f"Loaded {len(vectors)} word vectors of dimension {dim} from {path}")
    return WordEmbeddings(vectors, dim)


def write_embeddings(path: str, embeddings: WordEmbeddings, words: Iterable[str] = None) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    words = list(words) if words is not None else sorted(embeddings.vectors)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for word in words:
            values = " ".join(f"{x:.6f}" for x in embeddings.vectors[word])
            fh.write(f"{word} {values}\n")
