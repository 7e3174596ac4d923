"""
合成数据集生成

每条查询由模板句及其手写句法树描述一个主事件（和一个上下文事件），
视频 clip 特征 = 模态背景向量 + 高斯噪声，再在真实片段的 clip 上叠加事件模式向量
（只叠加到 modality 规则指定的模态）。种子完全决定输出。
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from modules.errors import ConfigError, DataError
from modules.language import WordEmbeddings, write_embeddings
from modules.treebank import ParseTree, parse_bracketed, write_tree_file
from modules.video import Modality, Segment, write_feature_file

logger = logging.getLogger(__name__)

NOUNS = ("person", "dog", "girl", "man", "baby", "cat", "woman", "boy", "bird", "car", "horse", "child")
VERBS = ("jumps", "runs", "waves", "sits", "falls", "dances", "sings", "turns", "claps", "swims", "rolls", "spins")

ALL_CATEGORIES = ("didemo", "before", "after", "then", "while")
MODALITY_RULES = ("rgb", "flow", "both")


@dataclass
class SyntheticSpec:
    """合成数据规格"""

    num_videos: int = 0  # 0: 每条查询一个视频；否则轮流分配，模式叠加
    num_clips: int = 6
    rgb_dim: int = 16
    flow_dim: int = 16
    word_dim: int = 8
    num_event_types: int = 4
    queries_per_category: int = 8  # 训练集
    eval_queries_per_category: int = 4  # 验证集与测试集各自
    categories: Tuple[str, ...] = ALL_CATEGORIES
    signal_strength: float = 1.0
    noise_level: float = 0.1
    seed: int = 0
    main_modality: str = "both"
    context_modality: str = "both"
    distractor_rate: float = 0.0  # 再放一份主事件的概率，只有上下文能区分两份

    def __post_init__(self):
        self.categories = tuple(self.categories)

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSpec":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown synthetic spec fields: {sorted(unknown)}")
        spec = cls(**data)
        spec.validate()
        return spec

    @classmethod
    def from_file(cls, path: str) -> "SyntheticSpec":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read synthetic spec: {exc}", path=path) from exc
        return cls.from_dict(data)

    def validate(self) -> None:
        if self.num_clips < 1:
            raise DataError(f"num_clips must be at least 1, got {self.num_clips}")
        if min(self.rgb_dim, self.flow_dim, self.word_dim) < 1:
            raise DataError("feature and word dimensions must be positive")
        if self.num_event_types < 2 or self.num_event_types > len(NOUNS):
            raise DataError(f"num_event_types must be in [2, {len(NOUNS)}], got {self.num_event_types}")
        if self.num_videos < 0 or self.queries_per_category < 0 or self.eval_queries_per_category < 0:
            raise DataError("counts must be non-negative")
        unknown = set(self.categories) - set(ALL_CATEGORIES)
        if unknown or not self.categories:
            raise DataError(f"categories must be a non-empty subset of {ALL_CATEGORIES}")
        for rule in (self.main_modality, self.context_modality):
            if rule not in MODALITY_RULES:
                raise DataError(f"modality rule must be one of {MODALITY_RULES}, got {rule!r}")
        if not 0.0 <= self.distractor_rate <= 1.0:
            raise DataError(f"distractor_rate must be in [0, 1], got {self.distractor_rate}")
        temporal = [c for c in self.categories if c != "didemo"]
        ordered = set(temporal) & {"before", "after", "then"}
        needed = 4 if ordered and self.distractor_rate > 0 else 2
        if temporal and self.num_clips < needed:
            raise DataError(f"temporal categories need at least {needed} clips, got {self.num_clips}")
        if self.signal_strength <= self.noise_level:
            logger.warning(f"signal_strength {self.signal_strength} <= noise_level {self.noise_level}: "
                           f"the data may not be learnable")

    def carries(self, rule: str, modality: Modality) -> bool:
        return rule == "both" or rule == modality.value

    def to_dict(self) -> dict:
        data = asdict(self)
        data["categories"] = list(self.categories)
        return data


@dataclass
class SyntheticQuery:
    query_id: str
    video: str
    category: str
    split: str
    tree: ParseTree
    main: Segment
    context: Optional[Segment]
    main_event: int
    context_event: Optional[int]
    distractor: Optional[int] = None

    def annotation(self, tree_line: int) -> dict:
        return {
            "id": self.query_id,
            "video": self.video,
            "tree_line": tree_line,
            "category": self.category,
            "p": list(self.main),
            "q": list(self.context) if self.context is not None else None,
            "split": self.split,
        }


@dataclass
class SyntheticData:
    spec: SyntheticSpec
    queries: List[SyntheticQuery]
    features: Dict[str, Dict[Modality, np.ndarray]]
    embeddings: WordEmbeddings
    patterns: Dict[Modality, np.ndarray] = field(repr=False, default_factory=dict)
    background: Dict[Modality, np.ndarray] = field(repr=False, default_factory=dict)


# ============================================================================
# 模板
# ============================================================================


def _np(event: int) -> str:
    return f"(NP (DT the) (NN {NOUNS[event]}))"


def _clause(event: int) -> str:
    return f"(S {_np(event)} (VP (VBZ {VERBS[event]})))"


def _sentence(category: str, main: int, context: Optional[int], variant: int) -> str:
    if category == "didemo":
        return _clause(main)
    if category in ("before", "after"):
        signal = f"(IN {category})"
        if variant == 0:
            # "A before B"：SBAR 作为主句动词短语的修饰
            return f"(S {_np(main)} (VP (VBZ {VERBS[main]}) (SBAR {signal} {_clause(context)})))"
        if variant == 1:
            # "Before B, A"：SBAR 前置
            return f"(S (SBAR {signal} {_clause(context)}) (, ,) {_np(main)} (VP (VBZ {VERBS[main]})))"
        # "A before the B"：PP 形式
        return f"(S {_np(main)} (VP (VBZ {VERBS[main]}) (PP {signal} {_np(context)})))"
    if category == "then":
        return f"(S {_clause(main)} (ADVP (RB then)) {_clause(context)})"
    return f"(S {_np(main)} (VP (VBZ {VERBS[main]}) (SBAR (IN while) {_clause(context)})))"


_VARIANTS = {"didemo": 1, "before": 3, "after": 3, "then": 1, "while": 1}


# ============================================================================
# 片段采样
# ============================================================================


def _occurrence_pair(category: str, num_clips: int, rng: np.random.Generator):
    """before / then 方向下放置两份主事件，返回 (答案 clip, 上下文 clip, 干扰 clip)

    两份主事件的位置本身不透露哪一份是答案：答案是上下文之前最近的那一份，
    干扰以相同概率落在上下文之后或答案之前。
    """
    pairs = [(x, y) for x in range(num_clips) for y in range(x + 2, num_clips - 1)]
    if category == "then":
        weights = np.ones(len(pairs))
    else:
        # 按两份之间的间隔加权，使上下文位置不集中在答案旁边
        weights = np.array([y - x - 1 for x, y in pairs], dtype=np.float64)
    x, y = pairs[int(rng.choice(len(pairs), p=weights / weights.sum()))]
    if rng.random() < 0.5:
        c = x + 1 if category == "then" else int(rng.integers(x + 1, y))
        return x, c, y
    c = y + 1 if category == "then" else int(rng.integers(y + 1, num_clips))
    return y, c, x


def _place(category: str, num_clips: int, distract: bool, rng: np.random.Generator):
    """返回 (主事件 clip, 上下文片段, 干扰 clip)"""
    clips = list(range(num_clips))
    if category == "didemo":
        return int(rng.integers(num_clips)), None, None

    if category == "while":
        m = int(rng.integers(num_clips))
        a = max(0, m - int(rng.integers(0, 2)))
        b = min(num_clips - 1, m + int(rng.integers(0, 2)))
        if a == b:
            b = min(num_clips - 1, b + 1) if b + 1 < num_clips else b
            a = a - 1 if a == b and a > 0 else a
        outside = [k for k in clips if k < a or k > b]
        d = int(rng.choice(outside)) if distract and outside else None
        return m, (a, b), d

    if distract:
        m, c, d = _occurrence_pair("then" if category == "then" else "before", num_clips, rng)
        if category == "after":
            m, c, d = (num_clips - 1 - k for k in (m, c, d))
        return m, (c, c), d

    if category == "then":
        m = int(rng.integers(num_clips - 1))
        return m, (m + 1, m + 1), None

    # before: m < c；after: m > c
    m, c = (int(x) for x in rng.choice(num_clips, size=2, replace=False))
    if (category == "before") != (m < c):
        m, c = c, m
    return m, (c, c), None


# ============================================================================
# 生成
# ============================================================================


def _unit_patterns(rng: np.random.Generator, count: int, dim: int, strength: float) -> np.ndarray:
    patterns = rng.standard_normal((count, dim))
    patterns /= np.linalg.norm(patterns, axis=1, keepdims=True)
    return strength * np.sqrt(dim) * patterns


def build_synthetic(spec: SyntheticSpec) -> SyntheticData:
    """在内存中生成合成数据"""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    dims = {Modality.RGB: spec.rgb_dim, Modality.FLOW: spec.flow_dim}
    patterns = {m: _unit_patterns(rng, spec.num_event_types, d, spec.signal_strength) for m, d in dims.items()}
    background = {m: _unit_patterns(rng, 1, d, spec.signal_strength)[0] for m, d in dims.items()}

    plan = []
    for split, per_category in (("train", spec.queries_per_category),
                                ("val", spec.eval_queries_per_category),
                                ("test", spec.eval_queries_per_category)):
        for category in spec.categories:
            plan.extend((split, category) for _ in range(per_category))
    if not plan:
        raise DataError("synthetic spec produces no queries")

    num_videos = spec.num_videos or len(plan)
    features = {
        f"v{k:05d}": {m: np.tile(background[m], (spec.num_clips, 1)) for m in dims}
        for k in range(num_videos)
    }
    queries: List[SyntheticQuery] = []
    for index, (split, category) in enumerate(plan):
        video = f"v{index % num_videos:05d}"
        main_event, context_event = (int(x) for x in rng.choice(spec.num_event_types, size=2, replace=False))
        if category == "didemo":
            context_event = None
        distract = category != "didemo" and rng.random() < spec.distractor_rate
        m, context, d = _place(category, spec.num_clips, distract, rng)
        variant = int(rng.integers(_VARIANTS[category]))
        tree = parse_bracketed(_sentence(category, main_event, context_event, variant))

        for modality, clips in features[video].items():
            if spec.carries(spec.main_modality, modality):
                clips[m] += patterns[modality][main_event]
                if d is not None:
                    clips[d] += patterns[modality][main_event]
            if context is not None and spec.carries(spec.context_modality, modality):
                clips[context[0]:context[1] + 1] += patterns[modality][context_event]

        queries.append(SyntheticQuery(
            query_id=f"q{index:05d}", video=video, category=category, split=split, tree=tree,
            main=(m, m), context=context, main_event=main_event, context_event=context_event, distractor=d,
        ))

    for video in sorted(features):
        for modality in dims:
            clips = features[video][modality]
            clips += spec.noise_level * rng.standard_normal(clips.shape)

    words = sorted({token for query in queries for token in query.tree.leaves()})
    embeddings = WordEmbeddings({w: rng.standard_normal(spec.word_dim) for w in words}, spec.word_dim)
    logger.info(f"Generated {len(queries)} synthetic queries over {num_videos} videos")
    return SyntheticData(spec, queries, features, embeddings, patterns, background)


def write_synthetic(data: SyntheticData, out_dir: str) -> str:
    """写出全部文件，返回 manifest 路径"""
    os.makedirs(out_dir, exist_ok=True)
    write_tree_file(os.path.join(out_dir, "trees.txt"), [q.tree for q in data.queries])
    with open(os.path.join(out_dir, "annotations.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
        for line, query in enumerate(data.queries):
            fh.write(json.dumps(query.annotation(line), sort_keys=True) + "\n")
    write_embeddings(os.path.join(out_dir, "embeddings.txt"), data.embeddings)

    feature_paths = {}
    for video in sorted(data.features):
        feature_paths[video] = {}
        for modality, clips in data.features[video].items():
            relative = f"features/{video}.{modality.value}.feat"
            write_feature_file(os.path.join(out_dir, relative), clips, modality)
            feature_paths[video][modality.value] = relative

    manifest = {
        "trees": "trees.txt",
        "annotations": "annotations.jsonl",
        "embeddings": "embeddings.txt",
        "features": feature_paths,
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "spec.json"), "w", encoding="utf-8") as fh:
        json.dump(data.spec.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


def generate_synthetic(spec: SyntheticSpec, out_dir: str) -> str:
    """生成合成数据集并写入 out_dir

    Returns:
        manifest.json 路径
    """
    return write_synthetic(build_synthetic(spec), out_dir)
