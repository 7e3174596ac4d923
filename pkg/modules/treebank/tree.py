"""
括号成分句法树

解析形如 "(S (NP (DT the) (NN cat)) (VP ...))" 的单行括号树。
叶子（词）是独立节点，标签固定为 TOKEN；节点编号按句子顺序后序遍历，
子节点总在父节点之前，根节点编号为 N-1。
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import pyparsing

from modules.errors import DataError, TreeParseError

logger = logging.getLogger(__name__)

# 叶子节点的保留标签
TOKEN_LABEL = "TOKEN"

# 括号语法
LPAR, RPAR = map(pyparsing.Suppress, "()")
_symbol = pyparsing.Regex(r"[^\s()]+")
_sexp = pyparsing.Forward()
_node = pyparsing.Group(LPAR + _symbol + pyparsing.OneOrMore(_sexp) + RPAR)
_sexp <<= _node | _symbol
_grammar = _node.parse_with_tabs()


@dataclass(frozen=True)
class TreeNode:
    """树节点记录"""
    node_id: int
    label: str
    children: Tuple[int, ...] = ()
    token: Optional[str] = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


class ParseTree:
    """不可变的成分句法树

    Attributes:
        nodes: 按编号排列的节点
        root: 根节点编号（恒为 N-1）
    """

    def __init__(self, nodes: Sequence[TreeNode]):
        if not nodes:
            raise DataError("empty tree")
        self.nodes: Tuple[TreeNode, ...] = tuple(nodes)
        self.root = len(self.nodes) - 1
        self._parent = self._check_structure()
        self._keys: Optional[Tuple[str, ...]] = None

    def _check_structure(self) -> Tuple[int, ...]:
        parent = [-1] * len(self.nodes)
        for node in self.nodes:
            if (node.token is None) == (not node.children):
                raise DataError(f"node {node.node_id}: a node carries a token iff it has no children")
            for child in node.children:
                if not 0 <= child < node.node_id:
                    raise DataError(f"node {node.node_id}: child {child} does not precede its parent")
                if parent[child] != -1:
                    raise DataError(f"node {child} has two parents")
                parent[child] = node.node_id
        orphans = [i for i, p in enumerate(parent) if p == -1 and i != self.root]
        if orphans:
            raise DataError(f"nodes {orphans} are not connected to the root")
        return tuple(parent)

    # ------------------------------------------------------------------

    @property
    def size(self) -> int:
        """节点总数 N（内部节点 + 叶子）"""
        return len(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def parent(self, node_id: int) -> int:
        """父节点编号，根节点返回 -1"""
        return self._parent[node_id]

    def leaves(self) -> List[str]:
        """句子顺序的词序列"""
        return [node.token for node in self.nodes if node.is_leaf]

    def internal_count(self) -> int:
        return sum(1 for node in self.nodes if not node.is_leaf)

    def labels(self) -> List[str]:
        return [node.label for node in self.nodes]

    @property
    def subtree_keys(self) -> Tuple[str, ...]:
        """每个节点子树的规范序列化串（子节点按串排序）

        兄弟节点任意置换后，各节点的键不变。
        """
        if self._keys is None:
            keys: List[str] = []
            for node in self.nodes:
                if node.is_leaf:
                    keys.append(node.token)
                else:
                    parts = sorted(keys[c] for c in node.children)
                    keys.append(f"({node.label} {' '.join(parts)})")
            self._keys = tuple(keys)
        return self._keys

    def canonical_children(self, node_id: int) -> List[int]:
        """按子树键排序的子节点"""
        keys = self.subtree_keys
        return sorted(self.nodes[node_id].children, key=lambda c: keys[c])

    def canonical_order(self) -> List[int]:
        """与兄弟顺序无关的后序遍历"""
        order: List[int] = []
        stack: List[Tuple[int, bool]] = [(self.root, False)]
        while stack:
            node_id, expanded = stack.pop()
            if expanded:
                order.append(node_id)
                continue
            stack.append((node_id, True))
            for child in reversed(self.canonical_children(node_id)):
                stack.append((child, False))
        return order

    def structurally_equal(self, other: "ParseTree") -> bool:
        return self.nodes == other.nodes

    def __eq__(self, other) -> bool:
        return isinstance(other, ParseTree) and self.structurally_equal(other)

    def __hash__(self) -> int:
        return hash(self.nodes)

    def __repr__(self) -> str:
        return f"ParseTree({serialize(self)!r})"


# ============================================================================
# 构建
# ============================================================================


class _TreeBuilder:
    """把嵌套列表按后序编号为节点"""

    def __init__(self):
        self.nodes: List[TreeNode] = []

    def leaf(self, token: str) -> int:
        node_id = len(self.nodes)
        self.nodes.append(TreeNode(node_id, TOKEN_LABEL, (), token))
        return node_id

    def build(self, item) -> int:
        if isinstance(item, str):
            return self.leaf(item)
        label, *children = item
        child_ids = tuple(self.build(child) for child in children)
        node_id = len(self.nodes)
        self.nodes.append(TreeNode(node_id, label, child_ids))
        return node_id


def tree_from_nested(nested) -> ParseTree:
    """由嵌套列表 [label, child, ...] 构建树（叶子为字符串）"""
    if isinstance(nested, str):
        raise DataError("a tree must start with a bracketed node")
    builder = _TreeBuilder()
    builder.build(nested)
    return ParseTree(builder.nodes)


def _byte_offset(text: str, loc: int) -> int:
    return len(text[:loc].encode("utf-8"))


def parse_bracketed(text: str) -> ParseTree:
    """解析单行括号树

    Args:
        text: "(LABEL child child ...)" 形式的树，叶子为裸词

    Returns:
        ParseTree

    Raises:
        TreeParseError: 空输入、括号不匹配、空标签等，附带字节偏移
    """
    if not text.strip():
        raise TreeParseError("empty input", _byte_offset(text, len(text)))

    depth = 0
    for loc, char in enumerate(text):
        if char == "(":
            depth += 1
        elif char == ")":
            depth -= 1
            if depth < 0:
                raise TreeParseError("unbalanced parentheses: unexpected ')'", _byte_offset(text, loc))
    if depth > 0:
        raise TreeParseError("unbalanced parentheses: missing ')'", _byte_offset(text, len(text)))

    try:
        nested = _grammar.parse_string(text, parse_all=True).as_list()[0]
    except pyparsing.ParseBaseException as exc:
        raise TreeParseError(f"malformed tree: {exc.msg}", _byte_offset(text, exc.loc)) from None
    return tree_from_nested(nested)


def serialize(tree: ParseTree) -> str:
    """单行括号形式，单空格分隔"""
    parts: List[str] = []
    for node in tree.nodes:
        if node.is_leaf:
            parts.append(node.token)
        else:
            inner = " ".join(parts[c] for c in node.children)
            parts.append(f"({node.label} {inner})")
    return parts[tree.root]


def canonical_whitespace(text: str) -> str:
    """把任意合法括号串规整为 serialize 使用的空白格式"""
    spaced = text.replace("(", " ( ").replace(")", " ) ").split()
    out: List[str] = []
    for token in spaced:
        if out and out[-1] != "(" and token != ")":
            out.append(" ")
        out.append(token)
    return "".join(out)


# ============================================================================
# 文件读写
# ============================================================================


def read_tree_file(path: str) -> List[ParseTree]:
    """读取树文件：每行一棵树，行号（从 0 开始）即 tree_line

    Raises:
        DataError: 文件不可读或某行解析失败（附带行号）
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read tree file: {exc}", path=path) from exc

    trees = []
    for number, line in enumerate(lines, start=1):
        try:
            trees.append(parse_bracketed(line))
        except TreeParseError as exc:
            raise TreeParseError(exc.reason, exc.offset, path=path, line=number) from None
    logger.debug(f"Read {len(trees)} trees from {path}")
    return trees


def write_tree_file(path: str, trees: Iterable[ParseTree]) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for tree in trees:
            fh.write(serialize(tree) + "\n")
