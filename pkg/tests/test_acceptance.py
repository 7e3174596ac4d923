"""End-to-end training runs on the bundled synthetic specs (slow)."""

from pathlib import Path

import pytest

from modules.data import SyntheticSpec, generate_synthetic, load_dataset
from modules.ensemble import grid_search_weights, late_fusion, validation_r1
from modules.evaluation import Prediction, evaluate, rank_main_segments
from modules.training import STREAM_PAIRS, ModelConfig, StreamConfig, score_examples, train_stream
from modules.video import enumerate_segments

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"

pytestmark = pytest.mark.slow


def _make_bundle(tmp_path, spec_name):
    spec = SyntheticSpec.from_file(str(CONFIG_DIR / spec_name))
    return load_dataset(generate_synthetic(spec, str(tmp_path / "data")))


def _average_r1(scores, examples, bundle):
    predictions = []
    for example in examples:
        segments = enumerate_segments(bundle.num_clips(example.video))
        ranked = [segments[i] for i in rank_main_segments(scores[example.query_id])]
        predictions.append(Prediction(example.query_id, example.category, ranked, segments[example.p]))
    return evaluate(predictions).average.r1


def _train(bundle, pair, epochs):
    stream = StreamConfig(pair[0], pair[1], hidden_size=16, lr=0.001, epochs=epochs, seed=0)
    return train_stream(bundle.split("train"), bundle.features, bundle.embeddings, stream, ModelConfig()).model


def test_single_stream_overfits(tmp_path):
    bundle = _make_bundle(tmp_path, "synth_overfit.json")
    train = bundle.split("train")
    assert len(train) == 40
    model = _train(bundle, STREAM_PAIRS[0], epochs=300)

    assert _average_r1(score_examples(model, train, bundle.features), train, bundle) == 100.0
    test = bundle.split("test")
    assert _average_r1(score_examples(model, test, bundle.features), test, bundle) >= 80.0


def test_cross_modal_stream_wins(tmp_path):
    bundle = _make_bundle(tmp_path, "synth_modality.json")
    val, test = bundle.split("val"), bundle.split("test")
    val_scores, test_r1 = {}, {}
    for pair in STREAM_PAIRS:
        model = _train(bundle, pair, epochs=200)
        val_scores[pair] = score_examples(model, val, bundle.features)
        test_r1[pair] = _average_r1(score_examples(model, test, bundle.features), test, bundle)

    rgb_rgb, rgb_flow, _, flow_flow = STREAM_PAIRS
    assert test_r1[rgb_flow] >= test_r1[rgb_rgb] + 10.0
    assert test_r1[rgb_flow] >= test_r1[flow_flow] + 10.0

    truths = bundle.ground_truths(val)
    weights = grid_search_weights(val_scores, truths, step=0.1)
    fused = {qid: late_fusion({pair: val_scores[pair][qid] for pair in STREAM_PAIRS}, weights) for qid in truths}
    best_single = max(validation_r1(val_scores[pair], truths) for pair in STREAM_PAIRS)
    assert validation_r1(fused, truths) >= best_single
