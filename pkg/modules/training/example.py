"""
训练样本数据模型
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from modules.errors import DataError
from modules.treebank import ParseTree


class Category(Enum):
    """查询类别"""
    DIDEMO = "didemo"
    BEFORE = "before"
    AFTER = "after"
    THEN = "then"
    WHILE = "while"

    @classmethod
    def parse(cls, value) -> "Category":
        if isinstance(value, Category):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise DataError(f"unknown category {value!r}") from None

    @property
    def has_context(self) -> bool:
        return self is not Category.DIDEMO


@dataclass
class TrainingExample:
    """一条查询

    p / q 是在该视频候选片段枚举中的下标；DiDeMo 查询没有 q。
    """

    query_id: str
    tree: ParseTree
    p: int
    q: Optional[int]
    category: Category
    video: str
    split: str = "train"

    def __post_init__(self):
        self.category = Category.parse(self.category)
        if (self.q is None) == self.category.has_context:
            raise DataError(
                f"query {self.query_id}: context segment must be present iff the category is temporal")
