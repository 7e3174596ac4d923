"""
标签 / 词表

两张词表都把 0 号保留给 <unk>；标签表额外把 1 号保留给叶子标签 TOKEN。
其余条目按字典序排列，因此与输入树的顺序无关。
"""

from __future__ import annotations

import logging
import os
from typing import Dict, Iterable, List, Sequence, Tuple

from modules.errors import DataError
from .tree import TOKEN_LABEL, ParseTree

logger = logging.getLogger(__name__)

UNK = "<unk>"


class Vocabulary:
    """字符串与稠密整数编号的双向映射"""

    def __init__(self, tokens: Sequence[str]):
        if not tokens or tokens[0] != UNK:
            raise DataError(f"vocabulary must start with {UNK}")
        self.tokens: Tuple[str, ...] = tuple(tokens)
        self.index: Dict[str, int] = {}
        for i, token in enumerate(self.tokens):
            if token in self.index:
                raise DataError(f"duplicate vocabulary entry {token!r}")
            self.index[token] = i

    @property
    def unk_id(self) -> int:
        return 0

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id_of(self, token: str) -> int:
        return self.index.get(token, 0)

    def ids(self, tokens: Iterable[str]) -> List[int]:
        return [self.id_of(token) for token in tokens]

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def __repr__(self) -> str:
        return f"Vocabulary(size={len(self)})"


def build_vocabularies(trees: Sequence[ParseTree]) -> Tuple[Vocabulary, Vocabulary]:
    """从树集合建立 (标签表, 词表)

    Args:
        trees: 非空的树列表

    Returns:
        (LabelVocabulary, 词表)
    """
    if not trees:
        raise DataError("cannot build vocabularies from an empty tree list")

    labels = set()
    words = set()
    for tree in trees:
        for node in tree.nodes:
            if node.is_leaf:
                words.add(node.token)
            else:
                labels.add(node.label)
    labels.discard(UNK)
    labels.discard(TOKEN_LABEL)
    words.discard(UNK)

    label_vocab = Vocabulary([UNK, TOKEN_LABEL] + sorted(labels))
    word_vocab = Vocabulary([UNK] + sorted(words))
    logger.info(f"Built vocabularies from {len(trees)} trees: {len(label_vocab)} labels, {len(word_vocab)} words")
    return label_vocab, word_vocab


def save_vocabulary(path: str, vocab: Vocabulary) -> None:
    """每行 "token<TAB>id" """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, token in enumerate(vocab.tokens):
            fh.write(f"{token}\t{i}\n")


def load_vocabulary(path: str) -> Vocabulary:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read vocabulary: {exc}", path=path) from exc

    tokens: List[str] = []
    for number, line in enumerate(lines, start=1):
        if not line:
            continue
        token, sep, raw_id = line.rpartition("\t")
        if not sep or not raw_id.isdigit():
            raise DataError("expected 'token<TAB>id'", path=path, line=number)
        if int(raw_id) != len(tokens):
            raise DataError(f"ids must be dense, expected {len(tokens)} got {raw_id}", path=path, line=number)
        tokens.append(token)
    return Vocabulary(tokens)
