"""
数据集加载

manifest.json 中的路径都相对于 manifest 所在目录：

    {"trees": "trees.txt", "annotations": "annotations.jsonl", "embeddings": "embeddings.txt",
     "features": {"<video>": {"rgb": "...", "flow": "..."}}}
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from modules.errors import DataError
from modules.language import WordEmbeddings, read_embeddings
from modules.training import Category, TrainingExample
from modules.treebank import ParseTree, read_tree_file
from modules.video import Modality, Segment, enumerate_segments, read_feature_file

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("trees", "annotations", "embeddings", "features")
SPLITS = ("train", "val", "test")


@dataclass
class DatasetBundle:
    """一次加载得到的全部输入"""

    manifest_path: str
    examples: List[TrainingExample]
    trees: List[ParseTree]
    features: Dict[str, Dict[Modality, np.ndarray]]
    embeddings: WordEmbeddings

    def split(self, name: str) -> List[TrainingExample]:
        return [e for e in self.examples if e.split == name]

    def num_clips(self, video: str) -> int:
        return int(next(iter(self.features[video].values())).shape[0])

    def segment_of(self, example: TrainingExample, which: str = "p") -> Segment:
        index = example.p if which == "p" else example.q
        return enumerate_segments(self.num_clips(example.video))[index]

    def ground_truths(self, examples: Optional[List[TrainingExample]] = None) -> Dict[str, tuple]:
        """query_id -> (p, 类别)，供集成网格搜索使用"""
        return {e.query_id: (e.p, e.category.value) for e in (examples if examples is not None else self.examples)}


def _read_manifest(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read manifest: {exc}", path=path) from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed JSON: {exc.msg}", path=path, line=exc.lineno) from None
    if not isinstance(manifest, dict):
        raise DataError("manifest must be a JSON object", path=path)
    missing = [key for key in REQUIRED_KEYS if key not in manifest]
    if missing:
        raise DataError(f"manifest is missing {missing}", path=path)
    return manifest


def _load_features(entries: dict, base: str, manifest_path: str) -> Dict[str, Dict[Modality, np.ndarray]]:
    features: Dict[str, Dict[Modality, np.ndarray]] = {}
    dims: Dict[Modality, int] = {}
    if not isinstance(entries, dict):
        raise DataError("'features' must map video ids to modality files", path=manifest_path)
    for video, files in entries.items():
        if not isinstance(files, dict):
            raise DataError(f"video {video!r} must map modalities to feature files", path=manifest_path)
        features[video] = {}
        for key, relative in files.items():
            expected = Modality.parse(key)
            path = os.path.join(base, relative)
            modality, clips = read_feature_file(path)
            if modality is not expected:
                raise DataError(f"file holds {modality.display} features, manifest says {expected.display}",
                                path=path)
            if dims.setdefault(modality, clips.shape[1]) != clips.shape[1]:
                raise DataError(f"{modality.display} dimension {clips.shape[1]} differs from "
                                f"{dims[modality]}", path=path)
            features[video][modality] = clips
        missing = [m.value for m in Modality if m not in features[video]]
        if missing:
            raise DataError(f"video {video!r} lacks {missing} features", path=manifest_path)
        lengths = {clips.shape[0] for clips in features[video].values()}
        if len(lengths) > 1:
            raise DataError(f"video {video!r} has modalities with different clip counts {sorted(lengths)}",
                            path=manifest_path)
    return features


def _segment(value, num_clips: int, path: str, line: int) -> Segment:
    try:
        a, b = (int(x) for x in value)
    except (TypeError, ValueError):
        raise DataError(f"segment must be [a, b], got {value!r}", path=path, line=line) from None
    if not 0 <= a <= b < num_clips:
        raise DataError(f"segment [{a}, {b}] is outside a video with {num_clips} clips", path=path, line=line)
    return a, b


def _load_annotations(path: str, trees: List[ParseTree], features) -> List[TrainingExample]:
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read annotations: {exc}", path=path) from exc

    examples: List[TrainingExample] = []
    seen = set()
    with fh:
        for number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                query_id = str(record["id"])
                video = str(record["video"])
                tree_line = int(record["tree_line"])
                category = record["category"]
                p, q = record["p"], record.get("q")
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed JSON: {exc.msg}", path=path, line=number) from None
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"missing or invalid field {exc}", path=path, line=number) from None

            if query_id in seen:
                raise DataError(f"duplicate query id {query_id!r}", path=path, line=number)
            seen.add(query_id)
            if video not in features:
                raise DataError(f"query {query_id}: unknown video {video!r}", path=path, line=number)
            if not 0 <= tree_line < len(trees):
                raise DataError(f"tree_line {tree_line} out of range [0, {len(trees)})", path=path, line=number)

            num_clips = int(next(iter(features[video].values())).shape[0])
            segments = enumerate_segments(num_clips)
            p_index = segments.index_of(_segment(p, num_clips, path, number))
            q_index = segments.index_of(_segment(q, num_clips, path, number)) if q is not None else None
            try:
                examples.append(TrainingExample(
                    query_id=query_id, tree=trees[tree_line], p=p_index, q=q_index,
                    category=Category.parse(category), video=video, split=str(record.get("split", "train")),
                ))
            except DataError as exc:
                raise DataError(str(exc), path=path, line=number) from None
    return examples


def load_dataset(manifest_path: str, split: Optional[str] = None) -> DatasetBundle:
    """加载 manifest 描述的数据集

    Args:
        manifest_path: manifest.json 路径
        split: 只保留该划分的样本（train / val / test），None 表示全部

    Raises:
        DataError: 任何文件缺失、格式错误、视频缺失、维度不一致或没有样本
    """
    if split is not None and split not in SPLITS:
        raise DataError(f"unknown split {split!r}, expected one of {SPLITS}")
    manifest = _read_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))

    trees = read_tree_file(os.path.join(base, manifest["trees"]))
    embeddings = read_embeddings(os.path.join(base, manifest["embeddings"]))
    features = _load_features(manifest["features"], base, manifest_path)
    annotations_path = os.path.join(base, manifest["annotations"])
    examples = _load_annotations(annotations_path, trees, features)
    if split is not None:
        examples = [e for e in examples if e.split == split]
    if not examples:
        raise DataError("no examples" if split is None else f"no examples in split {split!r}",
                        path=annotations_path)

    logger.info(f"Loaded {len(examples)} examples over {len(features)} videos from {manifest_path}")
    return DatasetBundle(manifest_path, examples, trees, features, embeddings)
