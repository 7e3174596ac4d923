"""Tests for the ranking loss, training loop, model persistence and gradient checks."""

import numpy as np
import pytest

from modules.autodiff import constant
from modules.errors import ConfigError, DataError, NumericError, ShapeError
from modules.language import WordEmbeddings
from modules.training import (
    GRAD_CHECK_TOLERANCE,
    Category,
    LossConfig,
    ModelConfig,
    RunStatus,
    StreamConfig,
    TCMNModel,
    TrainingExample,
    get_loss_config,
    get_model_config,
    get_stream_config,
    parse_stream,
    ranking_loss,
    resolve_context,
    run_grad_check,
    score_examples,
    stream_key,
    train_stream,
)
from modules.training.diagnostics import check_full_loss, check_tree_lstm
from modules.treebank import parse_bracketed
from modules.video import Modality, SegmentSet, enumerate_segments

TREES = [
    "(S (NP (DT the) (NN dog)) (VP (VBZ runs) (SBAR (IN before) (S (NP (DT the) (NN cat)) (VP (VBZ sits))))))",
    "(S (NP (DT a) (NN girl)) (VP (VBZ jumps)))",
    "(S (NP (DT the) (NN man)) (VP (VBZ waves) (PP (IN after) (NP (DT the) (NN cat)))))",
]
WORDS = ("the", "a", "dog", "cat", "girl", "man", "runs", "sits", "jumps", "waves", "before", "after")


def _loss_value(S, p, q, config):
    loss = ranking_loss(constant(S), p, q, config)
    return loss.main.item(), loss.context.item(), loss.total.item()


def _oracle_loss(S, p, q, config):
    size = S.shape[0]
    best_p = S[p].max()
    loss_m = sum(max(0.0, S[i].max() - best_p + config.margin_main) for i in range(size) if i != p) / size
    loss_c = sum(max(0.0, S[p, i] - S[p, q] + config.margin_context) for i in range(size) if i != q) / size
    return loss_m, loss_c, loss_m + config.weight * loss_c


def _make_dataset(num_clips=3, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    segments = enumerate_segments(num_clips)
    features = {}
    examples = []
    for k, text in enumerate(TREES):
        video = f"v{k}"
        features[video] = {
            Modality.RGB: rng.standard_normal((num_clips, dim)),
            Modality.FLOW: rng.standard_normal((num_clips, dim)),
        }
        temporal = k != 1
        examples.append(TrainingExample(
            query_id=f"q{k}",
            tree=parse_bracketed(text),
            p=int(rng.integers(segments.size)),
            q=int(rng.integers(segments.size)) if temporal else None,
            category=Category.BEFORE if temporal else Category.DIDEMO,
            video=video,
        ))
    embeddings = WordEmbeddings({w: rng.uniform(-1, 1, 3) for w in WORDS}, 3)
    return examples, features, embeddings


def _stream(epochs=3, seed=0, lr=0.01):
    return StreamConfig(Modality.RGB, Modality.FLOW, hidden_size=4, lr=lr, epochs=epochs, seed=seed)


class TestResolveContext:

    def test_explicit_context_passes_through(self):
        examples, _, _ = _make_dataset(num_clips=4)
        example = examples[0]
        example.q = 7
        assert resolve_context(example, enumerate_segments(4)) == 7

    def test_didemo_falls_back_to_whole_video(self):
        examples, _, _ = _make_dataset()
        segments = enumerate_segments(6)
        index = resolve_context(examples[1], segments)
        assert index == 5
        assert segments[index] == (0, 5)

    def test_subset_whole_video_index(self):
        segments = SegmentSet.from_segments([(0, 0), (0, 1), (0, 2), (1, 2)], 3)
        examples, _, _ = _make_dataset()
        assert resolve_context(examples[1], segments) == 2


class TestRankingLoss:

    def test_zero_when_margins_hold(self):
        S = np.zeros((5, 5))
        S[2, 4] = 10.0
        main, context, total = _loss_value(S, 2, 4, LossConfig())
        assert main == context == total == 0.0

    def test_lambda_zero_is_main_term(self):
        rng = np.random.default_rng(1)
        S = rng.standard_normal((6, 6))
        main, _, total = _loss_value(S, 1, 3, LossConfig(weight=0.0))
        assert total == main

    def test_matches_brute_force(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            S = rng.uniform(-1, 1, (5, 5))
            p, q = (int(x) for x in rng.integers(5, size=2))
            config = LossConfig(margin_main=float(rng.uniform(0, 0.5)),
                                margin_context=float(rng.uniform(0, 0.5)),
                                weight=float(rng.uniform(0, 2)))
            got = _loss_value(S, p, q, config)
            np.testing.assert_allclose(got, _oracle_loss(S, p, q, config), atol=1e-6)
            assert min(got) >= 0.0

    def test_constant_shift_invariant(self):
        rng = np.random.default_rng(3)
        S = rng.standard_normal((6, 6))
        before = _loss_value(S, 0, 5, LossConfig())
        after = _loss_value(S + 12.5, 0, 5, LossConfig())
        np.testing.assert_allclose(before, after, atol=1e-9)

    def test_raising_true_pair_never_raises_context_loss(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            S = rng.standard_normal((4, 4))
            p, q = 2, 1
            _, before, _ = _loss_value(S, p, q, LossConfig())
            S[p, q] += float(rng.uniform(0, 1))
            _, after, _ = _loss_value(S, p, q, LossConfig())
            assert after <= before + 1e-12

    def test_self_pair_allowed(self):
        S = np.eye(3)
        _, context, _ = _loss_value(S, 1, 1, LossConfig())
        assert context == 0.0

    def test_shape_checks(self):
        with pytest.raises(ShapeError):
            ranking_loss(constant(np.zeros((2, 3))), 0, 0, LossConfig())
        with pytest.raises(ShapeError):
            ranking_loss(constant(np.zeros((3, 3))), 0, 3, LossConfig())


class TestConfig:

    def test_parse_stream(self):
        assert parse_stream("rgb,flow") == (Modality.RGB, Modality.FLOW)
        assert stream_key(Modality.FLOW, Modality.RGB) == "(Flow,RGB)"
        with pytest.raises(ConfigError):
            parse_stream("rgb")
        with pytest.raises(ConfigError):
            parse_stream("rgb,depth")

    def test_app_config_sections(self):
        app_config = {"training": {"hidden_size": 8, "lr": 0.01, "epochs": 2},
                      "loss": {"margin_main": 0.2, "lambda": 0.5}}
        stream = get_stream_config(app_config, "flow,rgb")
        assert (stream.hidden_size, stream.lr, stream.epochs) == (8, 0.01, 2)
        assert stream.key == "(Flow,RGB)"
        loss = get_loss_config(app_config)
        assert (loss.margin_main, loss.margin_context, loss.weight) == (0.2, 0.1, 0.5)

    @pytest.mark.parametrize("training", [{"lr": 0}, {"hidden_size": 0}, {"weight_decay": -1}, {"beta1": 1.0}])
    def test_invalid_stream_values(self, training):
        with pytest.raises(ConfigError):
            get_stream_config({"training": training})

    def test_invalid_loss_values(self):
        with pytest.raises(ConfigError):
            get_loss_config({"loss": {"lambda": -1}})
        with pytest.raises(ConfigError):
            get_loss_config({"loss": {"margin_context": -0.1}})

    def test_model_section(self):
        config = get_model_config({"model": {"label_dim": 5, "relationship_module": False}})
        assert config == ModelConfig(label_dim=5, segment_attention=True, relationship_module=False)
        assert get_model_config({}) == ModelConfig()
        with pytest.raises(ConfigError):
            get_model_config({"model": {"label_dim": 0}})

    def test_stream_dict_round_trip(self):
        stream = _stream()
        assert StreamConfig.from_dict(stream.to_dict()) == stream


class TestTrainingExample:

    def test_context_presence_follows_category(self):
        tree = parse_bracketed(TREES[1])
        with pytest.raises(DataError):
            TrainingExample("q", tree, p=0, q=None, category="before", video="v")
        with pytest.raises(DataError):
            TrainingExample("q", tree, p=0, q=1, category="didemo", video="v")
        assert TrainingExample("q", tree, p=0, q=1, category="While", video="v").category is Category.WHILE

    def test_unknown_category(self):
        with pytest.raises(DataError):
            Category.parse("during")


class TestTrainStream:

    def test_single_example_loss_decreases(self):
        examples, features, embeddings = _make_dataset()
        result = train_stream(examples[:1], features, embeddings, _stream(epochs=40),
                              ModelConfig(label_dim=3), LossConfig(margin_main=1.0, margin_context=1.0))
        log = result.run.epoch_log
        assert len(log) == 40
        assert log[-1].mean_loss < log[0].mean_loss
        assert result.run.status is RunStatus.COMPLETED

    def test_same_seed_is_bit_identical(self):
        examples, features, embeddings = _make_dataset()
        first = train_stream(examples, features, embeddings, _stream(seed=5), ModelConfig(label_dim=3))
        second = train_stream(examples, features, embeddings, _stream(seed=5), ModelConfig(label_dim=3))
        assert first.run.loss_log_csv() == second.run.loss_log_csv()
        for name, value in first.model.store.items():
            np.testing.assert_array_equal(second.model.store[name], value)

    def test_ablated_model_has_no_relationship_block(self):
        examples, features, embeddings = _make_dataset()
        result = train_stream(examples, features, embeddings, _stream(epochs=1),
                              ModelConfig(label_dim=3, segment_attention=False, relationship_module=False))
        assert not any(name.startswith("f_rel.") for name in result.model.store.names())

    def test_no_examples(self):
        _, features, embeddings = _make_dataset()
        with pytest.raises(DataError, match="no examples"):
            train_stream([], features, embeddings, _stream())

    def test_missing_video_names_query(self):
        examples, features, embeddings = _make_dataset()
        del features["v2"]
        with pytest.raises(DataError, match="q2"):
            train_stream(examples, features, embeddings, _stream(epochs=1))

    def test_non_finite_features(self):
        examples, features, embeddings = _make_dataset()
        features["v0"][Modality.RGB][1, 2] = np.nan
        with pytest.raises(NumericError):
            train_stream(examples[:1], features, embeddings, _stream(epochs=1))

    def test_save_and_load_scores_match(self, tmp_path):
        examples, features, embeddings = _make_dataset()
        result = train_stream(examples, features, embeddings, _stream(epochs=2), ModelConfig(label_dim=3))
        checkpoint = result.model.save(str(tmp_path / "model"))
        loaded = TCMNModel.load(checkpoint)
        assert loaded.stream == result.model.stream
        before = score_examples(result.model, examples, features)
        after = score_examples(loaded, examples, features)
        assert sorted(before) == ["q0", "q1", "q2"]
        for qid, matrix in before.items():
            assert matrix.shape == (6, 6)
            np.testing.assert_array_equal(after[qid], matrix)

    def test_run_files(self, tmp_path):
        examples, features, embeddings = _make_dataset()
        result = train_stream(examples, features, embeddings, _stream(epochs=2), ModelConfig(label_dim=3))
        result.run.save(str(tmp_path))
        lines = (tmp_path / "loss_log.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "epoch,mean_loss,mean_Lm,mean_Lc"
        assert [line.split(",")[0] for line in lines[1:]] == ["1", "2"]
        assert result.run.to_dict()["status"] == "completed"
        assert result.run.final_loss == result.run.epoch_log[-1].mean_loss


class TestGradCheck:

    def test_tree_lstm(self):
        assert check_tree_lstm(np.random.default_rng(0)) < GRAD_CHECK_TOLERANCE

    def test_full_loss(self):
        assert check_full_loss(np.random.default_rng(1)) < GRAD_CHECK_TOLERANCE

    def test_report(self):
        report = run_grad_check(seed=7, trials=2)
        assert report.passed
        assert {"tree_lstm", "full_loss"} <= set(report.errors)
        assert report.to_dict()["max_error"] == report.max_error
