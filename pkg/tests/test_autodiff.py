"""Tests for the autodiff graph, Adam, gradient checking and checkpoints."""

import numpy as np
import pytest

from modules.autodiff import (
    CHECKPOINT_MAGIC,
    DiffNode,
    ParameterStore,
    adam_step,
    backward,
    constant,
    finite_difference_check,
    load_checkpoint,
    parameters_in,
    primitive_cases,
    relative_error,
    save_checkpoint,
    topological_order,
)
from modules.autodiff import graph as G
from modules.errors import DataError, ShapeError


def _param(value, name):
    return DiffNode.parameter(np.array(value, dtype=np.float64).reshape(1, -1) if np.ndim(value) < 2
                              else np.array(value, dtype=np.float64), name)


def _make_store(dtype=np.float64):
    store = ParameterStore(dtype)
    rng = np.random.default_rng(0)
    store.add_uniform("w", (3, 2), rng)
    store.add_constant("b", (1, 2), 1.0)
    return store


class TestBackward:

    def test_product_rule(self):
        x, y = _param(3.0, "x"), _param(4.0, "y")
        grads = backward(x * y)
        assert grads["x"][0, 0] == 4.0
        assert grads["y"][0, 0] == 3.0

    def test_sigmoid_at_zero(self):
        x = _param(0.0, "x")
        grads = backward(G.sigmoid(x))
        assert grads["x"][0, 0] == pytest.approx(0.25)

    def test_non_scalar_root_rejected(self):
        x = _param([1.0, 2.0], "x")
        with pytest.raises(ShapeError, match="backward requires scalar"):
            backward(x)

    def test_unreachable_parameters_are_zero(self):
        store = _make_store()
        nodes = store.nodes()
        root = G.mean(nodes["w"])
        grads = backward(root, store)
        np.testing.assert_array_equal(grads["b"], np.zeros((1, 2)))
        np.testing.assert_allclose(grads["w"], np.full((3, 2), 1.0 / 6.0))

    def test_shared_node_visited_once(self):
        x = _param(2.0, "x")
        square = x * x
        root = square + square
        order = topological_order(root)
        assert len(order) == len({id(n) for n in order}) == 3
        assert backward(root)["x"][0, 0] == pytest.approx(8.0)

    def test_repeated_backward_is_deterministic(self):
        rng = np.random.default_rng(3)
        x = DiffNode.parameter(rng.uniform(-2, 2, (4, 3)), "x")
        w = DiffNode.parameter(rng.uniform(-2, 2, (3, 1)), "w")
        root = G.mean(G.tanh(x @ w))
        first = backward(root)
        second = backward(root)
        for name in first:
            np.testing.assert_array_equal(first[name], second[name])
        assert parameters_in(root) == ["w", "x"]

    def test_gradient_shape_matches_value(self):
        bias = DiffNode.parameter(np.ones((1, 3)), "bias")
        rows = DiffNode.parameter(np.ones((4, 3)), "rows")
        grads = backward(G.mean(rows + bias))
        assert grads["bias"].shape == (1, 3)
        np.testing.assert_allclose(grads["bias"], np.full((1, 3), 4.0 / 12.0))

    def test_incompatible_broadcast_rejected(self):
        with pytest.raises(ShapeError):
            G.add(constant(np.ones((2, 3))), constant(np.ones((3, 2))))

    def test_values_must_be_two_dimensional(self):
        with pytest.raises(ShapeError):
            DiffNode(np.ones(3), G.OpTag.CONST)

    def test_max_ties_route_to_first_index(self):
        x = DiffNode.parameter(np.array([[1.0, 3.0, 3.0]]), "x")
        grads = backward(G.max_over(x, axis=1))
        np.testing.assert_array_equal(grads["x"], [[0.0, 1.0, 0.0]])


class TestSoftmax:

    def test_sums_to_one_and_shift_invariant(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            logits = rng.uniform(-5, 5, (1, 7))
            y = G.softmax(constant(logits)).value
            shifted = G.softmax(constant(logits + rng.uniform(-100, 100))).value
            assert abs(y.sum() - 1.0) < 1e-9
            np.testing.assert_allclose(y, shifted, atol=1e-9)

    def test_column_softmax(self):
        y = G.softmax(constant(np.arange(6.0).reshape(3, 2)), axis=0).value
        np.testing.assert_allclose(y.sum(axis=0), [1.0, 1.0])

    def test_l2_normalize_zero_vector(self):
        y = G.l2_normalize(constant(np.zeros((1, 4)))).value
        np.testing.assert_array_equal(y, np.zeros((1, 4)))


class TestFiniteDifference:

    def test_linear_function_exact(self):
        weights = np.array([[0.5], [-1.5], [2.0]])
        error = finite_difference_check(lambda p: p["x"] @ constant(weights), {"x": np.array([[1.0, 2.0, 3.0]])})
        assert error < 1e-10

    def test_constant_function_is_zero(self):
        error = finite_difference_check(lambda p: constant(np.array([[4.0]])), {"x": np.ones((2, 2))})
        assert error == 0.0

    def test_relative_error_convention(self):
        assert relative_error(0.0, 0.0) == 0.0
        assert relative_error(1.0, 1.1) == pytest.approx(0.1 / 1.1)
        assert relative_error(1e-9, 2e-9) == pytest.approx(1e-9 / 1e-5)

    def test_nan_propagates(self):
        error = finite_difference_check(lambda p: G.mean(p["x"] * constant(np.array([[np.nan]]))),
                                        {"x": np.ones((1, 1))})
        assert np.isnan(error)

    def test_every_primitive_matches(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            for name, fn, inputs in primitive_cases(rng):
                assert finite_difference_check(fn, inputs) < 1e-4, name

    def test_three_layer_composite(self):
        rng = np.random.default_rng(5)
        inputs = {
            "x": rng.uniform(-2, 2, (1, 6)),
            "w1": rng.uniform(-1, 1, (6, 8)),
            "b1": rng.uniform(-1, 1, (1, 8)),
            "w2": rng.uniform(-1, 1, (8, 5)),
            "w3": rng.uniform(-1, 1, (5, 1)),
        }
        head = constant(rng.uniform(-1, 1, (5, 1)))

        def fn(p):
            h = G.tanh(p["x"] @ p["w1"] + p["b1"])
            y = G.softmax(h @ p["w2"])
            return (y * G.transpose(p["w3"])) @ head

        assert finite_difference_check(fn, inputs) < 1e-4


class TestAdam:

    def test_zero_gradient_is_fixed_point(self):
        store = _make_store()
        before = {name: value.copy() for name, value in store.items()}
        adam_step(store, {name: np.zeros_like(value) for name, value in store.items()})
        for name, value in store.items():
            np.testing.assert_array_equal(value, before[name])
        assert store.step == 1

    def test_first_step_moves_by_lr_sign(self):
        store = ParameterStore(np.float64)
        store.add("p", np.array([[1.0, -1.0, 0.5]]))
        adam_step(store, {"p": np.array([[0.3, -2.0, 1e-3]])}, lr=0.01, eps=1e-12)
        np.testing.assert_allclose(store["p"], [[0.99, -0.99, 0.49]], atol=1e-8)

    def test_weight_decay_scalar_oracle(self):
        store = ParameterStore(np.float64)
        store.add("p", np.array([[2.0]]))
        adam_step(store, {"p": np.array([[0.0]])}, lr=0.001, weight_decay=0.1)

        g = 0.1 * 2.0
        m = (1 - 0.9) * g
        v = (1 - 0.999) * g * g
        m_hat = m / (1 - 0.9)
        v_hat = v / (1 - 0.999)
        expected = 2.0 - 0.001 * m_hat / (np.sqrt(v_hat) + 1e-8)
        assert store["p"][0, 0] == pytest.approx(expected, abs=1e-12)

    def test_step_counter_increments(self):
        store = _make_store()
        for expected in range(1, 4):
            adam_step(store, {})
            assert store.step == expected
        m, v = store.moments("w")
        assert m.shape == v.shape == store["w"].shape

    def test_shape_mismatch_rejected(self):
        store = _make_store()
        with pytest.raises(ShapeError):
            adam_step(store, {"w": np.zeros((2, 3))})

    def test_unknown_gradient_rejected(self):
        with pytest.raises(ShapeError):
            adam_step(_make_store(), {"missing": np.zeros((1, 1))})


class TestCheckpoint:

    def test_round_trip(self, tmp_path):
        store = _make_store(np.float32)
        path = tmp_path / "model" / "checkpoint.tcmn"
        save_checkpoint(str(path), store)
        assert path.read_bytes().startswith(CHECKPOINT_MAGIC)
        loaded = load_checkpoint(str(path))
        assert list(loaded.names()) == list(store.names())
        for name, value in store.items():
            np.testing.assert_array_equal(loaded[name], value)
        assert loaded.count() == store.count() == 8

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.tcmn"
        path.write_bytes(b"NOPE")
        with pytest.raises(DataError):
            load_checkpoint(str(path))

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "checkpoint.tcmn"
        save_checkpoint(str(path), _make_store(np.float32))
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(DataError):
            load_checkpoint(str(path))
