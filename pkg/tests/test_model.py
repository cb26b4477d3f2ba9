"""LSTM cell math, stacked forward pass, initialization, persistence."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prognost import (
    ModelCorruptionError,
    ModelFormatError,
    ModelVersionError,
    TrainConfig,
    ValidationError,
    forward_window,
    init_params,
    load_model,
    lstm_cell_forward,
    save_model,
)
from prognost.model import (
    ModelParams,
    RegressionHead,
    layer_zeros,
    predict_windows,
)
from prognost.preprocess import MinMaxScaler


def zero_model(dims=(3,), loss_mode="mse"):
    layers = []
    k = 1
    for d in dims:
        layers.append(layer_zeros(k, d))
        k = d
    return ModelParams(tuple(layers), RegressionHead(np.zeros((1, k))), 1, loss_mode)


def scalar_cell_oracle(p, x, h_prev, c_prev):
    """Pure-python per-element recomputation of the gate equations."""
    d, k = p.w_i.shape

    def dot(mat, vec):
        return [math.fsum(mat[r][c] * vec[c] for c in range(len(vec))) for r in range(mat.shape[0])]

    def sig(v):
        return 1.0 / (1.0 + math.exp(-v))

    zi = [a + b + c for a, b, c in zip(dot(p.w_i, x), dot(p.v_i, h_prev), p.b_i)]
    zf = [a + b + c for a, b, c in zip(dot(p.w_f, x), dot(p.v_f, h_prev), p.b_f)]
    zo = [a + b + c for a, b, c in zip(dot(p.w_o, x), dot(p.v_o, h_prev), p.b_o)]
    zg = [a + b + c for a, b, c in zip(dot(p.w_c, x), dot(p.v_c, h_prev), p.b_c)]
    i = [sig(v) for v in zi]
    f = [sig(v) for v in zf]
    o = [sig(v) for v in zo]
    g = [math.tanh(v) for v in zg]
    c = [fv * cp + iv * gv for fv, cp, iv, gv in zip(f, c_prev, i, g)]
    h = [ov * math.tanh(cv) for ov, cv in zip(o, c)]
    return np.array(h), np.array(c)


class TestInitParams:
    def test_deterministic_for_fixed_seed(self):
        cfg = TrainConfig(hidden_dims=(4, 3))
        a = init_params(cfg, 42)
        b = init_params(cfg, 42)
        for la, lb in zip(a.layers, b.layers):
            for (_, ba), (_, bb) in zip(la.blocks(), lb.blocks()):
                assert np.array_equal(ba, bb)
        assert np.array_equal(a.head.w_r, b.head.w_r)

    def test_different_seeds_differ(self):
        cfg = TrainConfig(hidden_dims=(4,))
        a = init_params(cfg, 1)
        b = init_params(cfg, 2)
        assert not np.array_equal(a.layers[0].w_i, b.layers[0].w_i)

    def test_default_stack_shapes(self):
        params = init_params(TrainConfig(hidden_dims=(128, 64)), 0)
        l1, l2 = params.layers
        assert l1.w_i.shape == (128, 1)
        assert l1.v_i.shape == (128, 128)
        assert l1.b_i.shape == (128,)
        assert l2.w_f.shape == (64, 128)
        assert params.head.w_r.shape == (1, 64)

    def test_zero_layer_config_error(self):
        from prognost.errors import ConfigError

        with pytest.raises(ConfigError):
            TrainConfig(hidden_dims=(0,))

    def test_forget_bias_one_other_biases_zero(self):
        params = init_params(TrainConfig(hidden_dims=(6, 5)), 3)
        for layer in params.layers:
            assert np.all(layer.b_f == 1.0)
            for gate in "ioc":
                assert np.all(getattr(layer, f"b_{gate}") == 0.0)

    def test_glorot_bounds(self):
        params = init_params(TrainConfig(hidden_dims=(16,)), 4)
        layer = params.layers[0]
        lim_w = math.sqrt(6.0 / (1 + 16))
        lim_v = math.sqrt(6.0 / 32)
        assert np.all(np.abs(layer.w_i) <= lim_w)
        assert np.all(np.abs(layer.v_o) <= lim_v)


class TestCellForward:
    def test_zero_params_zero_state(self):
        p = layer_zeros(1, 3)
        h, c, cache = lstm_cell_forward(p, np.array([0.7]), np.zeros(3), np.zeros(3))
        np.testing.assert_array_equal(cache.i, [0.5] * 3)
        np.testing.assert_array_equal(cache.f, [0.5] * 3)
        np.testing.assert_array_equal(cache.o, [0.5] * 3)
        np.testing.assert_array_equal(c, np.zeros(3))
        np.testing.assert_array_equal(h, np.zeros(3))

    def test_zero_params_carries_half_cell_state(self):
        p = layer_zeros(1, 2)
        c0 = np.array([0.8, -0.4])
        h, c, _ = lstm_cell_forward(p, np.array([1.0]), np.zeros(2), c0)
        np.testing.assert_allclose(c, 0.5 * c0, rtol=0, atol=0)
        np.testing.assert_allclose(h, 0.5 * np.tanh(0.5 * c0), rtol=0, atol=1e-16)

    def test_matches_scalar_oracle(self):
        rng = np.random.Generator(np.random.PCG64(8))
        cfg = TrainConfig(hidden_dims=(3,))
        p = init_params(cfg, 8).layers[0]
        x = rng.normal(0, 1, 1)
        h_prev = rng.uniform(-0.9, 0.9, 3)
        c_prev = rng.normal(0, 1, 3)
        h, c, _ = lstm_cell_forward(p, x, h_prev, c_prev)
        h_ref, c_ref = scalar_cell_oracle(p, x, h_prev, c_prev)
        assert np.max(np.abs(h - h_ref)) < 1e-14
        assert np.max(np.abs(c - c_ref)) < 1e-14

    def test_shape_mismatch(self):
        p = layer_zeros(1, 3)
        with pytest.raises(ValueError):
            lstm_cell_forward(p, np.zeros(2), np.zeros(3), np.zeros(3))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_gates_open_interval_and_h_bounded(self, seed):
        rng = np.random.Generator(np.random.PCG64(seed))
        p = init_params(TrainConfig(hidden_dims=(4,)), seed)
        x = rng.normal(0, 5, 1)
        h_prev = rng.uniform(-1, 1, 4)
        c_prev = rng.normal(0, 5, 4)
        h, c, cache = lstm_cell_forward(p.layers[0], x, h_prev, c_prev)
        for gate in (cache.i, cache.f, cache.o):
            assert np.all(gate > 0) and np.all(gate < 1)
        assert np.all(np.abs(h) < 1)


class TestForwardWindow:
    def test_zero_model_predicts_zero(self):
        y, _ = forward_window(zero_model((4, 3)), np.array([0.2, 0.4, 0.6, 0.8, 1.0]))
        assert y == 0.0

    def test_w1_is_cell_plus_head(self):
        params = init_params(TrainConfig(hidden_dims=(3,)), 5)
        x = np.array([0.37])
        y, _ = forward_window(params, x)
        h, _, _ = lstm_cell_forward(params.layers[0], x, np.zeros(3), np.zeros(3))
        assert abs(y - float((params.head.w_r @ h)[0])) < 1e-14

    def test_matches_unrolled_scalar_oracle(self):
        params = init_params(TrainConfig(hidden_dims=(4, 3)), 12)
        window = np.array([0.1, 0.5, -0.3, 0.9, 0.2])
        y, _ = forward_window(params, window)
        states = [(np.zeros(l.hidden_size), np.zeros(l.hidden_size)) for l in params.layers]
        for value in window:
            x = np.array([value])
            for li, layer in enumerate(params.layers):
                h, c = scalar_cell_oracle(layer, x, states[li][0], states[li][1])
                states[li] = (h, c)
                x = h
        expected = math.fsum(
            float(w) * float(h) for w, h in zip(params.head.w_r[0], states[-1][0])
        )
        assert abs(y - expected) < 1e-13

    def test_time_shift_locality(self):
        params = init_params(TrainConfig(hidden_dims=(4,)), 6)
        series = np.concatenate([np.array([0.1, 0.2, 0.3]), np.array([0.1, 0.2, 0.3])])
        y1, _ = forward_window(params, series[0:3])
        y2, _ = forward_window(params, series[3:6])
        assert y1 == y2

    def test_repeated_calls_bit_identical(self):
        params = init_params(TrainConfig(hidden_dims=(4, 3)), 6)
        w = np.array([0.3, -0.1, 0.7, 0.2, 0.5])
        assert forward_window(params, w)[0] == forward_window(params, w)[0]

    def test_batch_agrees_with_reference(self):
        params = init_params(TrainConfig(hidden_dims=(5, 4)), 9)
        rng = np.random.Generator(np.random.PCG64(10))
        windows = rng.uniform(-1, 1, size=(7, 5))
        ys = predict_windows(params, windows)
        for i in range(7):
            y_ref, _ = forward_window(params, windows[i])
            assert abs(ys[i] - y_ref) < 1e-13

    def test_bce_mode_head_is_sigmoid(self):
        params = init_params(TrainConfig(hidden_dims=(3,), loss_mode="bce"), 5)
        y, cache = forward_window(params, np.array([0.2, 0.4, 0.6]))
        assert 0 < y < 1
        assert y == pytest.approx(1.0 / (1.0 + math.exp(-cache.y_raw[0])))

    def test_invalid_chain_unconstructible(self):
        with pytest.raises(ValidationError):
            ModelParams(
                (layer_zeros(1, 4), layer_zeros(3, 2)),  # 4 -> expects 4, got 3
                RegressionHead(np.zeros((1, 2))),
            )
        with pytest.raises(ValidationError):
            ModelParams((layer_zeros(1, 4),), RegressionHead(np.zeros((1, 3))))


class TestPersistence:
    def _model(self, with_scaler=True):
        params = init_params(TrainConfig(hidden_dims=(4, 3)), 42)
        if with_scaler:
            params = params.with_scaler(MinMaxScaler(0.017, 1.93))
        return params

    def test_round_trip_bitwise(self, tmp_path):
        params = self._model()
        path = tmp_path / "m.model"
        save_model(params, path)
        back = load_model(path)
        for la, lb in zip(params.layers, back.layers):
            for (_, ba), (_, bb) in zip(la.blocks(), lb.blocks()):
                assert np.array_equal(ba, bb)
        assert np.array_equal(params.head.w_r, back.head.w_r)
        assert back.scaler == params.scaler
        assert back.loss_mode == params.loss_mode

    def test_save_load_save_identical_bytes(self, tmp_path):
        params = self._model()
        p1, p2 = tmp_path / "a.model", tmp_path / "b.model"
        save_model(params, p1)
        save_model(load_model(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_no_scaler_round_trip(self, tmp_path):
        params = self._model(with_scaler=False)
        path = tmp_path / "m.model"
        save_model(params, path)
        assert load_model(path).scaler is None

    def test_version_error(self, tmp_path):
        path = tmp_path / "m.model"
        path.write_text("LSTMPROG v9\ninput 1 layers 1 hidden 2 output 1 loss mse\n")
        with pytest.raises(ModelVersionError):
            load_model(path)

    def test_format_error(self, tmp_path):
        path = tmp_path / "m.model"
        path.write_text("hello world\n")
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_truncation_reports_byte_offset(self, tmp_path):
        params = self._model()
        path = tmp_path / "m.model"
        save_model(params, path)
        text = path.read_text()
        cut = int(len(text) * 0.6)
        # cut on a line boundary so the remaining rows parse cleanly up to EOF
        cut = text.rfind("\n", 0, cut)
        path.write_text(text[:cut + 1])
        with pytest.raises(ModelCorruptionError, match="byte"):
            load_model(path)

    def test_shape_inconsistency(self, tmp_path):
        params = self._model()
        path = tmp_path / "m.model"
        save_model(params, path)
        text = path.read_text().replace("block Wi 4 1", "block Wi 3 1", 1)
        path.write_text(text)
        with pytest.raises(ModelCorruptionError):
            load_model(path)

    def test_wrong_block_order_detected(self, tmp_path):
        params = self._model()
        path = tmp_path / "m.model"
        save_model(params, path)
        text = path.read_text().replace("block Vi 4 4", "block Vf 4 4", 1)
        path.write_text(text)
        with pytest.raises(ModelCorruptionError):
            load_model(path)

    def test_trailing_data_detected(self, tmp_path):
        params = self._model()
        path = tmp_path / "m.model"
        save_model(params, path)
        path.write_text(path.read_text() + "0.5 0.5\n")
        with pytest.raises(ModelCorruptionError, match="trailing"):
            load_model(path)

    def test_non_numeric_weight(self, tmp_path):
        params = self._model()
        path = tmp_path / "m.model"
        save_model(params, path)
        lines = path.read_text().splitlines()
        lines[4] = "not_a_number"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ModelCorruptionError):
            load_model(path)
