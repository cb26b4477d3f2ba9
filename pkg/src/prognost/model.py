"""Stacked LSTM forward pass, parameter initialization and persistence.

Cell update per time step (sigma is the logistic function, * elementwise):

    i = sigma(Wi x + Vi h_prev + bi)
    f = sigma(Wf x + Vf h_prev + bf)
    o = sigma(Wo x + Vo h_prev + bo)
    c = f * c_prev + i * tanh(Wc x + Vc h_prev + bc)
    h = o * tanh(c)

A window of W scalars is fed as W one-dimensional time steps; each
layer's h feeds the next layer at the same step, and a linear head maps
the final hidden state of the top layer to the scalar prediction. In
cross-entropy mode the head output additionally passes through sigma.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import (
    ConfigError,
    ModelCorruptionError,
    ModelFormatError,
    ModelVersionError,
    ValidationError,
)
from .preprocess import MinMaxScaler
from .series import fmt_float

MODEL_MAGIC = "LSTMPROG v1"
GATES = ("i", "f", "o", "c")
LOSS_MODES = ("mse", "bce")

# Head clipping bounds for cross-entropy mode.
BCE_CLIP = 1e-7


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LayerParams:
    """Gate weights of one layer: W_g (hidden x input), V_g (hidden x hidden),
    b_g (hidden) for each gate g in i, f, o, c.

    Gradient carriers reuse this layout block for block.
    """

    w_i: np.ndarray
    v_i: np.ndarray
    b_i: np.ndarray
    w_f: np.ndarray
    v_f: np.ndarray
    b_f: np.ndarray
    w_o: np.ndarray
    v_o: np.ndarray
    b_o: np.ndarray
    w_c: np.ndarray
    v_c: np.ndarray
    b_c: np.ndarray

    def __post_init__(self):
        d, k = np.shape(self.w_i)
        for gate in GATES:
            w = _frozen(getattr(self, f"w_{gate}"))
            v = _frozen(getattr(self, f"v_{gate}"))
            b = _frozen(getattr(self, f"b_{gate}"))
            if w.shape != (d, k) or v.shape != (d, d) or b.shape != (d,):
                raise ValidationError(f"inconsistent shapes in gate {gate}")
            if not (np.isfinite(w).all() and np.isfinite(v).all() and np.isfinite(b).all()):
                raise ValidationError(f"non-finite weights in gate {gate}")
            object.__setattr__(self, f"w_{gate}", w)
            object.__setattr__(self, f"v_{gate}", v)
            object.__setattr__(self, f"b_{gate}", b)

    @property
    def input_size(self) -> int:
        return int(self.w_i.shape[1])

    @property
    def hidden_size(self) -> int:
        return int(self.w_i.shape[0])

    def blocks(self):
        """(label, array) pairs in the fixed file order Wi Vi bi ... Wc Vc bc."""
        for gate in GATES:
            yield f"W{gate}", getattr(self, f"w_{gate}")
            yield f"V{gate}", getattr(self, f"v_{gate}")
            yield f"b{gate}", getattr(self, f"b_{gate}")


def layer_zeros(input_size: int, hidden_size: int) -> LayerParams:
    """All-zero layer of the given shape (useful for closed-form checks)."""
    kw = {}
    for gate in GATES:
        kw[f"w_{gate}"] = np.zeros((hidden_size, input_size))
        kw[f"v_{gate}"] = np.zeros((hidden_size, hidden_size))
        kw[f"b_{gate}"] = np.zeros(hidden_size)
    return LayerParams(**kw)


@dataclass(frozen=True)
class RegressionHead:
    """Linear output map, one row per output (z = 1 here)."""

    w_r: np.ndarray

    def __post_init__(self):
        w = _frozen(self.w_r)
        if w.ndim != 2:
            raise ValidationError("head weights must be 2-D")
        if not np.isfinite(w).all():
            raise ValidationError("non-finite head weights")
        object.__setattr__(self, "w_r", w)

    @property
    def output_size(self) -> int:
        return int(self.w_r.shape[0])

    @property
    def input_size(self) -> int:
        return int(self.w_r.shape[1])


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set: layer stack, head, and the optional scaler baked
    in when the model is saved."""

    layers: tuple[LayerParams, ...]
    head: RegressionHead
    input_dim: int = 1
    loss_mode: str = "mse"
    scaler: MinMaxScaler | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValidationError("model needs at least one layer")
        if self.loss_mode not in LOSS_MODES:
            raise ValidationError(f"loss_mode must be one of {LOSS_MODES}")
        expected = self.input_dim
        for n, layer in enumerate(self.layers, start=1):
            if layer.input_size != expected:
                raise ValidationError(
                    f"layer {n} expects input size {layer.input_size}, "
                    f"but the chain provides {expected}"
                )
            expected = layer.hidden_size
        if self.head.input_size != expected:
            raise ValidationError(
                f"head expects input size {self.head.input_size}, "
                f"but the top layer provides {expected}"
            )
        if self.head.output_size != 1:
            raise ValidationError("this artifact predicts a single scalar (z = 1)")

    @property
    def hidden_dims(self) -> tuple[int, ...]:
        return tuple(layer.hidden_size for layer in self.layers)

    def with_scaler(self, scaler: MinMaxScaler | None) -> "ModelParams":
        return ModelParams(self.layers, self.head, self.input_dim, self.loss_mode, scaler)


@dataclass
class LstmState:
    """Per-layer hidden and cell vectors carried between time steps."""

    h: list[np.ndarray]
    c: list[np.ndarray]

    @classmethod
    def zeros(cls, hidden_dims, batch: int | None = None) -> "LstmState":
        if batch is None:
            return cls([np.zeros(d) for d in hidden_dims], [np.zeros(d) for d in hidden_dims])
        return cls(
            [np.zeros((batch, d)) for d in hidden_dims],
            [np.zeros((batch, d)) for d in hidden_dims],
        )


def init_params(config, seed: int | None = None) -> ModelParams:
    """Deterministic Glorot-uniform initialization.

    W and V blocks are drawn uniformly from +-sqrt(6 / (fan_in + fan_out))
    using numpy's PCG64 generator seeded with ``seed`` (falling back to
    config.seed). Biases start at zero except the forget gates, which
    start at 1.0 to keep early gradients flowing.
    """
    if seed is None:
        seed = config.seed
    hidden_dims = tuple(config.hidden_dims)
    if not hidden_dims or any(d < 1 for d in hidden_dims):
        raise ConfigError(f"hidden_dims must all be positive, got {hidden_dims}")
    rng = np.random.Generator(np.random.PCG64(seed))

    layers = []
    input_size = 1
    for d in hidden_dims:
        kw = {}
        for gate in GATES:
            lim_w = np.sqrt(6.0 / (input_size + d))
            lim_v = np.sqrt(6.0 / (d + d))
            kw[f"w_{gate}"] = rng.uniform(-lim_w, lim_w, size=(d, input_size))
            kw[f"v_{gate}"] = rng.uniform(-lim_v, lim_v, size=(d, d))
            kw[f"b_{gate}"] = np.ones(d) if gate == "f" else np.zeros(d)
        layers.append(LayerParams(**kw))
        input_size = d
    lim_r = np.sqrt(6.0 / (input_size + 1))
    head = RegressionHead(rng.uniform(-lim_r, lim_r, size=(1, input_size)))
    return ModelParams(tuple(layers), head, input_dim=1, loss_mode=config.loss_mode)


@dataclass
class CellCache:
    """Everything the backward pass needs from one cell step."""

    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray


def lstm_cell_forward(
    p: LayerParams,
    x: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, CellCache]:
    """One cell step on plain vectors; the reference path for oracles."""
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    d, k = p.w_i.shape
    if x.shape != (k,) or h_prev.shape != (d,) or c_prev.shape != (d,):
        raise ValueError(
            f"shape mismatch: x {x.shape}, h_prev {h_prev.shape}, c_prev {c_prev.shape} "
            f"for a {d}x{k} layer"
        )
    i = expit(p.w_i @ x + p.v_i @ h_prev + p.b_i)
    f = expit(p.w_f @ x + p.v_f @ h_prev + p.b_f)
    o = expit(p.w_o @ x + p.v_o @ h_prev + p.b_o)
    g = np.tanh(p.w_c @ x + p.v_c @ h_prev + p.b_c)
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return h, c, CellCache(x, h_prev, c_prev, i, f, o, g, c, tanh_c)


def _cell_forward_batch(p: LayerParams, x, h_prev, c_prev):
    """Same update on (batch, dim) matrices."""
    i = expit(x @ p.w_i.T + h_prev @ p.v_i.T + p.b_i)
    f = expit(x @ p.w_f.T + h_prev @ p.v_f.T + p.b_f)
    o = expit(x @ p.w_o.T + h_prev @ p.v_o.T + p.b_o)
    g = np.tanh(x @ p.w_c.T + h_prev @ p.v_c.T + p.b_c)
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return h, c, CellCache(x, h_prev, c_prev, i, f, o, g, c, tanh_c)


@dataclass
class ForwardCache:
    """Per-step, per-layer intermediates of a batch of windows."""

    params: ModelParams
    steps: list[list[CellCache]]
    head_input: np.ndarray
    y_raw: np.ndarray
    y: np.ndarray
    head_interior: np.ndarray | None


def forward_windows(
    m: ModelParams,
    windows: np.ndarray,
    want_cache: bool = True,
) -> tuple[np.ndarray, ForwardCache | None]:
    """Predict a batch of windows at once; rows are independent samples.

    State starts at zero for every window, so a window's prediction
    depends only on its own W values.
    """
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 2:
        raise ValueError("windows must be a (batch, W) matrix")
    batch, w = windows.shape
    state = LstmState.zeros(m.hidden_dims, batch)
    steps: list[list[CellCache]] = []
    for t in range(w):
        x = windows[:, t : t + 1]
        caches = []
        for li, layer in enumerate(m.layers):
            state.h[li], state.c[li], cache = _cell_forward_batch(
                layer, x, state.h[li], state.c[li]
            )
            caches.append(cache)
            x = state.h[li]
        if want_cache:
            steps.append(caches)
    head_input = state.h[-1]
    y_raw = (head_input @ m.head.w_r.T)[:, 0]
    interior = None
    if m.loss_mode == "bce":
        q = expit(y_raw)
        interior = (q > BCE_CLIP) & (q < 1.0 - BCE_CLIP)
        y = np.clip(q, BCE_CLIP, 1.0 - BCE_CLIP)
    else:
        y = y_raw
    if not want_cache:
        return y, None
    return y, ForwardCache(m, steps, head_input, y_raw, y, interior)


def forward_window(m: ModelParams, window) -> tuple[float, ForwardCache]:
    """Predict one window; returns the scalar and a cache usable for BPTT."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 1:
        raise ValueError("a window is a flat sequence of scalars")
    y, cache = forward_windows(m, window[None, :])
    return float(y[0]), cache


def predict_windows(m: ModelParams, windows: np.ndarray) -> np.ndarray:
    """Batch predictions without caches."""
    y, _ = forward_windows(m, windows, want_cache=False)
    return y


def _header_line(m: ModelParams) -> str:
    dims = " ".join(str(d) for d in m.hidden_dims)
    return (
        f"input {m.input_dim} layers {len(m.layers)} hidden {dims} "
        f"output {m.head.output_size} loss {m.loss_mode}"
    )


def save_model(m: ModelParams, path) -> None:
    """Write the line-oriented text format; load_model inverts it bitwise."""
    lines = [MODEL_MAGIC, _header_line(m)]
    if m.scaler is not None:
        lines.append(f"scaler {fmt_float(m.scaler.min)} {fmt_float(m.scaler.max)}")

    def emit(label: str, array: np.ndarray) -> None:
        mat = array if array.ndim == 2 else array[None, :]
        lines.append(f"block {label} {mat.shape[0]} {mat.shape[1]}")
        for row in mat:
            lines.append(" ".join(fmt_float(v) for v in row))

    for layer in m.layers:
        for label, block in layer.blocks():
            emit(label, block)
    emit("Wr", m.head.w_r)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class _LineReader:
    """Sequential line reader that knows its byte position for error reports."""

    def __init__(self, text: str):
        self.lines = text.split("\n")
        self.index = 0
        self.offset = 0

    def next_line(self, what: str) -> str:
        while self.index < len(self.lines):
            line = self.lines[self.index]
            self.index += 1
            self.offset += len(line.encode("utf-8")) + 1
            if line.strip():
                return line
        raise ModelCorruptionError(
            f"model file truncated at byte {self.offset}: expected {what}"
        )

    def expect_end(self) -> None:
        for line in self.lines[self.index :]:
            if line.strip():
                raise ModelCorruptionError(
                    f"trailing data at byte {self.offset}: {line.strip()[:40]!r}"
                )
            self.offset += len(line.encode("utf-8")) + 1
            self.index += 1


def _parse_header(line: str) -> tuple[int, tuple[int, ...], int, str]:
    tokens = line.split()
    try:
        if tokens[0] != "input" or tokens[2] != "layers":
            raise ValueError
        input_dim = int(tokens[1])
        n_layers = int(tokens[3])
        if tokens[4] != "hidden":
            raise ValueError
        dims = tuple(int(t) for t in tokens[5 : 5 + n_layers])
        rest = tokens[5 + n_layers :]
        if len(dims) != n_layers or rest[0] != "output" or rest[2] != "loss":
            raise ValueError
        output = int(rest[1])
        loss_mode = rest[3]
        if loss_mode not in LOSS_MODES or len(rest) != 4:
            raise ValueError
    except (ValueError, IndexError):
        raise ModelCorruptionError(f"malformed model header line: {line!r}") from None
    return input_dim, dims, output, loss_mode


def _read_block(reader: _LineReader, label: str, rows: int, cols: int) -> np.ndarray:
    line = reader.next_line(f"block {label}")
    tokens = line.split()
    if len(tokens) != 4 or tokens[0] != "block":
        raise ModelCorruptionError(f"expected a block header for {label}, got {line!r}")
    if tokens[1] != label:
        raise ModelCorruptionError(f"expected block {label}, found block {tokens[1]}")
    try:
        got_rows, got_cols = int(tokens[2]), int(tokens[3])
    except ValueError:
        raise ModelCorruptionError(f"malformed block header: {line!r}") from None
    if (got_rows, got_cols) != (rows, cols):
        raise ModelCorruptionError(
            f"block {label} declares {got_rows}x{got_cols}, expected {rows}x{cols}"
        )
    data = np.empty((rows, cols))
    for r in range(rows):
        line = reader.next_line(f"row {r + 1} of block {label}")
        parts = line.split()
        if len(parts) != cols:
            raise ModelCorruptionError(
                f"block {label} row {r + 1}: expected {cols} values, got {len(parts)}"
            )
        try:
            data[r] = [float(p) for p in parts]
        except ValueError:
            raise ModelCorruptionError(
                f"block {label} row {r + 1}: non-numeric weight"
            ) from None
    return data


def load_model(path) -> ModelParams:
    """Read a model file; raises the specific error class for each defect."""
    text = Path(path).read_text(encoding="utf-8")
    reader = _LineReader(text)
    magic = reader.next_line("magic line")
    if magic != MODEL_MAGIC:
        if magic.startswith("LSTMPROG "):
            raise ModelVersionError(
                f"unsupported model version {magic.split(' ', 1)[1]!r}; expected v1"
            )
        raise ModelFormatError(f"not a model file: first line {magic!r}")
    input_dim, dims, output, loss_mode = _parse_header(reader.next_line("header line"))
    if output != 1:
        raise ModelCorruptionError(f"unsupported output size {output}; this artifact uses 1")

    # peek for the optional scaler line
    scaler = None
    probe = reader.next_line("first block")
    if probe.split()[0] == "scaler":
        tokens = probe.split()
        if len(tokens) != 3:
            raise ModelCorruptionError(f"malformed scaler line: {probe!r}")
        try:
            scaler = MinMaxScaler(float(tokens[1]), float(tokens[2]))
        except ValueError:
            raise ModelCorruptionError(f"malformed scaler line: {probe!r}") from None
    else:
        reader.index -= 1
        reader.offset -= len(probe.encode("utf-8")) + 1

    layers = []
    in_size = input_dim
    for d in dims:
        kw = {}
        for gate in GATES:
            kw[f"w_{gate}"] = _read_block(reader, f"W{gate}", d, in_size)
            kw[f"v_{gate}"] = _read_block(reader, f"V{gate}", d, d)
            kw[f"b_{gate}"] = _read_block(reader, f"b{gate}", 1, d)[0]
        layers.append(LayerParams(**kw))
        in_size = d
    w_r = _read_block(reader, "Wr", output, in_size)
    reader.expect_end()
    try:
        return ModelParams(tuple(layers), RegressionHead(w_r), input_dim, loss_mode, scaler)
    except ValidationError as exc:
        raise ModelCorruptionError(str(exc)) from None
