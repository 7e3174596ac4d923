"""Tests for the synthetic generator and the dataset loader."""

import json

import numpy as np
import pytest

from modules.data import SyntheticSpec, build_synthetic, generate_synthetic, load_dataset
from modules.errors import ConfigError, DataError
from modules.training import Category
from modules.video import Modality, enumerate_segments, write_feature_file


def _small_spec(**overrides):
    values = dict(num_clips=5, rgb_dim=6, flow_dim=4, word_dim=3, num_event_types=3,
                  queries_per_category=2, eval_queries_per_category=1, seed=3)
    values.update(overrides)
    return SyntheticSpec(**values)


@pytest.fixture
def dataset_dir(tmp_path):
    generate_synthetic(_small_spec(categories=("didemo", "before", "then")), str(tmp_path))
    return tmp_path


def _rewrite_annotations(path, edit):
    lines = path.read_text(encoding="utf-8").splitlines()
    path.write_text("\n".join(edit(lines)) + "\n", encoding="utf-8")


class TestSyntheticSpec:

    def test_from_dict_rejects_unknown_fields(self):
        with pytest.raises(ConfigError):
            SyntheticSpec.from_dict({"num_clips": 4, "frames": 10})

    @pytest.mark.parametrize("overrides", [
        {"num_clips": 1, "categories": ("before",)},
        {"num_clips": 2, "categories": ("after",), "distractor_rate": 0.5},
        {"num_event_types": 1},
        {"categories": ("during",)},
        {"main_modality": "depth"},
        {"distractor_rate": 1.5},
        {"queries_per_category": 0, "eval_queries_per_category": 0},
    ])
    def test_impossible_specs(self, overrides):
        with pytest.raises(DataError):
            build_synthetic(_small_spec(**overrides))

    def test_single_clip_didemo_is_allowed(self):
        data = build_synthetic(_small_spec(num_clips=1, categories=("didemo",)))
        assert all(query.main == (0, 0) for query in data.queries)

    def test_from_file(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text(json.dumps({"num_clips": 4, "categories": ["didemo", "while"]}), encoding="utf-8")
        spec = SyntheticSpec.from_file(str(path))
        assert spec.categories == ("didemo", "while")
        assert spec.to_dict()["categories"] == ["didemo", "while"]


class TestBuildSynthetic:

    def test_split_sizes_and_ids(self):
        data = build_synthetic(_small_spec(categories=("before", "while")))
        splits = [query.split for query in data.queries]
        assert splits.count("train") == 4
        assert splits.count("val") == splits.count("test") == 2
        assert [query.query_id for query in data.queries][:2] == ["q00000", "q00001"]

    def test_noise_free_events_are_separable(self):
        data = build_synthetic(_small_spec(num_event_types=2, noise_level=0.0, categories=("didemo",),
                                           queries_per_category=20))
        for query in data.queries:
            clip = data.features[query.video][Modality.RGB][query.main[0]] - data.background[Modality.RGB]
            distances = np.linalg.norm(data.patterns[Modality.RGB] - clip, axis=1)
            assert int(np.argmin(distances)) == query.main_event

    def test_main_signal_only_in_rgb(self):
        data = build_synthetic(_small_spec(main_modality="rgb", context_modality="flow",
                                           categories=("didemo",), noise_level=0.1, queries_per_category=10))
        for query in data.queries:
            flow = data.features[query.video][Modality.FLOW]
            # Flow 只有背景加噪声
            assert np.abs(flow - data.background[Modality.FLOW]).max() < 0.8
            rgb = data.features[query.video][Modality.RGB][query.main[0]]
            target = data.background[Modality.RGB] + data.patterns[Modality.RGB][query.main_event]
            assert np.linalg.norm(rgb - target) < np.linalg.norm(rgb - data.background[Modality.RGB])

    def test_bayes_scoring_per_modality(self):
        spec = _small_spec(main_modality="rgb", context_modality="flow", categories=("didemo",),
                           num_clips=6, queries_per_category=10)
        data = build_synthetic(spec)

        def log_likelihoods(query, modality):
            clips = data.features[query.video][modality]
            scores = []
            for m in range(spec.num_clips):
                mean = np.tile(data.background[modality], (spec.num_clips, 1))
                if spec.carries(spec.main_modality, modality):
                    mean[m] += data.patterns[modality][query.main_event]
                scores.append(-np.sum((clips - mean) ** 2))
            return np.array(scores)

        for query in data.queries:
            rgb = log_likelihoods(query, Modality.RGB)
            assert int(np.argmax(rgb)) == query.main[0]
            # Flow 的似然与主事件位置无关：只能随机猜
            flow = log_likelihoods(query, Modality.FLOW)
            assert np.all(flow == flow[0])

    def test_temporal_placement(self):
        data = build_synthetic(_small_spec(queries_per_category=30, distractor_rate=1.0,
                                           categories=("before", "after", "then", "while")))
        for query in data.queries:
            m, (a, b) = query.main[0], query.context
            if query.category == "before":
                assert m < a
            elif query.category == "after":
                assert m > b
            elif query.category == "then":
                assert a == b == m + 1
            else:
                assert a <= m <= b and b > a
            if query.distractor is not None:
                assert not a <= query.distractor <= b

    @pytest.mark.parametrize("category", ["before", "after", "then"])
    def test_distractor_needs_context(self, category):
        data = build_synthetic(_small_spec(num_clips=8, queries_per_category=400, eval_queries_per_category=0,
                                           distractor_rate=1.0, categories=(category,)))
        earlier = 0
        for query in data.queries:
            m, d, c = query.main[0], query.distractor, query.context[0]
            assert d is not None and d != m
            # 答案是类别方向上离上下文最近的那一份
            if category == "after":
                assert c < m and not c < d < m
            else:
                assert m < c and not m < d < c
            earlier += m < d
        # 只看两份的位置猜不出答案
        assert 0.38 < earlier / len(data.queries) < 0.62

    def test_signal_words_appear_in_trees(self):
        data = build_synthetic(_small_spec(categories=("before", "after", "then", "while"), queries_per_category=6))
        for query in data.queries:
            assert query.category in query.tree.leaves()


class TestGenerate:

    def test_same_seed_is_byte_identical(self, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        generate_synthetic(_small_spec(), str(first))
        generate_synthetic(_small_spec(), str(second))
        files = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
        assert files == sorted(p.relative_to(second) for p in second.rglob("*") if p.is_file())
        for relative in files:
            assert (first / relative).read_bytes() == (second / relative).read_bytes()

    def test_different_seed_differs(self, tmp_path):
        generate_synthetic(_small_spec(seed=1), str(tmp_path / "a"))
        generate_synthetic(_small_spec(seed=2), str(tmp_path / "b"))
        assert (tmp_path / "a" / "embeddings.txt").read_bytes() != (tmp_path / "b" / "embeddings.txt").read_bytes()

    def test_load_round_trip(self, dataset_dir):
        data = build_synthetic(_small_spec(categories=("didemo", "before", "then")))
        bundle = load_dataset(str(dataset_dir / "manifest.json"))
        assert [e.query_id for e in bundle.examples] == [q.query_id for q in data.queries]
        segments = enumerate_segments(5)
        for example, query in zip(bundle.examples, data.queries):
            assert 0 <= example.p < segments.size
            assert bundle.segment_of(example) == query.main
            if query.context is None:
                assert example.q is None
                assert example.category is Category.DIDEMO
            else:
                assert bundle.segment_of(example, "q") == query.context
            assert example.tree == query.tree
            np.testing.assert_allclose(bundle.features[example.video][Modality.FLOW],
                                       data.features[query.video][Modality.FLOW], atol=1e-6)
        assert bundle.ground_truths()[bundle.examples[0].query_id][1] == "didemo"

    def test_split_filter(self, dataset_dir):
        bundle = load_dataset(str(dataset_dir / "manifest.json"), split="val")
        assert len(bundle.examples) == 3
        assert {e.split for e in bundle.examples} == {"val"}
        with pytest.raises(DataError):
            load_dataset(str(dataset_dir / "manifest.json"), split="dev")


class TestLoaderErrors:

    def test_empty_annotations(self, dataset_dir):
        (dataset_dir / "annotations.jsonl").write_text("", encoding="utf-8")
        with pytest.raises(DataError, match="no examples"):
            load_dataset(str(dataset_dir / "manifest.json"))

    def test_unknown_video_is_named(self, dataset_dir):
        def edit(lines):
            record = json.loads(lines[0])
            record["video"] = "v99999"
            return [json.dumps(record)] + lines[1:]

        _rewrite_annotations(dataset_dir / "annotations.jsonl", edit)
        with pytest.raises(DataError, match="v99999") as info:
            load_dataset(str(dataset_dir / "manifest.json"))
        assert info.value.line == 1

    def test_malformed_line_is_numbered(self, dataset_dir):
        _rewrite_annotations(dataset_dir / "annotations.jsonl", lambda lines: lines[:1] + ["{not json"] + lines[2:])
        with pytest.raises(DataError, match="malformed JSON") as info:
            load_dataset(str(dataset_dir / "manifest.json"))
        assert info.value.line == 2

    def test_duplicate_query_id(self, dataset_dir):
        _rewrite_annotations(dataset_dir / "annotations.jsonl", lambda lines: lines + lines[:1])
        with pytest.raises(DataError, match="duplicate"):
            load_dataset(str(dataset_dir / "manifest.json"))

    def test_segment_outside_video(self, dataset_dir):
        def edit(lines):
            record = json.loads(lines[0])
            record["p"] = [2, 9]
            return [json.dumps(record)] + lines[1:]

        _rewrite_annotations(dataset_dir / "annotations.jsonl", edit)
        with pytest.raises(DataError, match="outside"):
            load_dataset(str(dataset_dir / "manifest.json"))

    def test_context_must_match_category(self, dataset_dir):
        def edit(lines):
            record = json.loads(lines[0])
            record["q"] = [0, 0]
            return [json.dumps(record)] + lines[1:]

        _rewrite_annotations(dataset_dir / "annotations.jsonl", edit)
        with pytest.raises(DataError) as info:
            load_dataset(str(dataset_dir / "manifest.json"))
        assert info.value.line == 1

    def test_feature_dimension_mismatch(self, dataset_dir):
        manifest = json.loads((dataset_dir / "manifest.json").read_text(encoding="utf-8"))
        video = sorted(manifest["features"])[1]
        write_feature_file(str(dataset_dir / manifest["features"][video]["rgb"]), np.zeros((5, 7)), Modality.RGB)
        with pytest.raises(DataError, match="dimension"):
            load_dataset(str(dataset_dir / "manifest.json"))

    @pytest.mark.parametrize("drop", [("flow",), ("rgb", "flow")])
    def test_video_needs_both_modalities(self, dataset_dir, drop):
        manifest = json.loads((dataset_dir / "manifest.json").read_text(encoding="utf-8"))
        video = sorted(manifest["features"])[0]
        for key in drop:
            del manifest["features"][video][key]
        (dataset_dir / "manifest.json").write_text(json.dumps(manifest), encoding="utf-8")
        with pytest.raises(DataError, match="lacks") as info:
            load_dataset(str(dataset_dir / "manifest.json"))
        assert video in str(info.value)

    def test_manifest_missing_key(self, dataset_dir):
        manifest = json.loads((dataset_dir / "manifest.json").read_text(encoding="utf-8"))
        del manifest["embeddings"]
        (dataset_dir / "manifest.json").write_text(json.dumps(manifest), encoding="utf-8")
        with pytest.raises(DataError, match="embeddings"):
            load_dataset(str(dataset_dir / "manifest.json"))
