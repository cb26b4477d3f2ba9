"""Loss, backpropagation through time, Adam updates and the epoch loop.

Training is bit-deterministic: seed, data and config fully determine the
final parameters. Windows are visited in chronological order, grouped
into fixed batches, and the gradient of the batch-mean loss drives one
Adam step per batch.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    ContractError,
    GradientError,
    TrainingDivergedError,
)
from .model import (
    GATES,
    BCE_CLIP,
    ForwardCache,
    LayerParams,
    ModelParams,
    RegressionHead,
    forward_windows,
    init_params,
    predict_windows,
)
from .preprocess import SplitDataset
from .series import fmt_float


@dataclass(frozen=True)
class TrainConfig:
    """Architecture and optimizer hyperparameters.

    Defaults are the stacked 128/64 model trained with Adam at learning
    rate 0.001, batches of 50, for 100 epochs, on length-5 windows.
    """

    hidden_dims: tuple[int, ...] = (128, 64)
    learning_rate: float = 0.001
    batch_size: int = 50
    epochs: int = 100
    window: int = 5
    loss_mode: str = "mse"
    seed: int = 42
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_grad_norm: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        if not self.hidden_dims or any(d < 1 for d in self.hidden_dims):
            raise ConfigError(f"hidden_dims must all be positive, got {self.hidden_dims}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.loss_mode not in ("mse", "bce"):
            raise ConfigError(f"loss_mode must be 'mse' or 'bce', got {self.loss_mode!r}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError("Adam betas must lie strictly between 0 and 1")
        if not self.epsilon > 0:
            raise ConfigError("Adam epsilon must be > 0")
        if self.max_grad_norm is not None and not self.max_grad_norm > 0:
            raise ConfigError("max_grad_norm must be > 0 when set")


_CONFIG_PARSERS = {
    "hidden_dims": lambda s: tuple(int(tok) for tok in s.replace(",", " ").split()),
    "learning_rate": float,
    "batch_size": int,
    "epochs": int,
    "window": int,
    "loss_mode": str,
    "seed": int,
    "beta1": float,
    "beta2": float,
    "epsilon": float,
    "max_grad_norm": lambda s: None if s.lower() == "none" else float(s),
}


def parse_config_file(path) -> TrainConfig:
    """Read ``key = value`` lines; keys match TrainConfig field names."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _CONFIG_PARSERS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_PARSERS[key](raw.strip())
        except ValueError:
            raise ConfigError(
                f"config line {lineno}: bad value {raw.strip()!r} for {key}"
            ) from None
    return TrainConfig(**values)


class LayerGrads:
    """Mutable per-layer blocks, attribute for attribute like LayerParams."""

    __slots__ = tuple(f"{p}_{g}" for g in GATES for p in ("w", "v", "b"))

    def __init__(self, input_size: int, hidden_size: int):
        for gate in GATES:
            setattr(self, f"w_{gate}", np.zeros((hidden_size, input_size)))
            setattr(self, f"v_{gate}", np.zeros((hidden_size, hidden_size)))
            setattr(self, f"b_{gate}", np.zeros(hidden_size))

    def blocks(self):
        for gate in GATES:
            yield f"W{gate}", getattr(self, f"w_{gate}")
            yield f"V{gate}", getattr(self, f"v_{gate}")
            yield f"b{gate}", getattr(self, f"b_{gate}")


@dataclass
class Gradients:
    """dLoss/dtheta, block for block congruent with ModelParams."""

    layers: list[LayerGrads]
    w_r: np.ndarray

    @classmethod
    def zeros_like(cls, m: ModelParams) -> "Gradients":
        return cls(
            [LayerGrads(l.input_size, l.hidden_size) for l in m.layers],
            np.zeros_like(m.head.w_r),
        )

    def named_blocks(self):
        for li, layer in enumerate(self.layers, start=1):
            for label, block in layer.blocks():
                yield f"layer{li}.{label}", block
        yield "Wr", self.w_r


def named_param_blocks(m: ModelParams):
    for li, layer in enumerate(m.layers, start=1):
        for label, block in layer.blocks():
            yield f"layer{li}.{label}", block
    yield "Wr", m.head.w_r


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    m: Gradients
    v: Gradients
    t: int = 0

    @classmethod
    def zeros(cls, params: ModelParams) -> "AdamState":
        return cls(Gradients.zeros_like(params), Gradients.zeros_like(params), 0)


@dataclass
class TrainReport:
    """Per-epoch curves plus run metadata."""

    train_loss: list[float] = field(default_factory=list)
    test_rmse: list[float] = field(default_factory=list)
    wall_time_s: float = 0.0
    model_path: str | None = None
    optimizer_steps: int = 0

    @property
    def epochs_completed(self) -> int:
        return len(self.train_loss)


def write_report_csv(report: TrainReport, path) -> None:
    lines = ["epoch,train_loss,test_rmse"]
    for epoch, (loss, rmse) in enumerate(zip(report.train_loss, report.test_rmse), 1):
        lines.append(f"{epoch},{fmt_float(loss)},{fmt_float(rmse)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def compute_loss(pred, target, mode: str = "mse") -> tuple[float, np.ndarray]:
    """Loss and its analytic gradient with respect to the predictions.

    mse: mean (y - yhat)^2. bce: mean Bernoulli cross-entropy after both
    sides are clipped into [1e-7, 1 - 1e-7]; the gradient is zero where
    the prediction sat on a clip bound.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape or pred.ndim != 1:
        raise ValueError(f"pred {pred.shape} and target {target.shape} must be equal-length vectors")
    if pred.size == 0:
        raise ValueError("cannot compute a loss over zero samples")
    n = pred.size
    if mode == "mse":
        diff = pred - target
        return float(np.mean(diff * diff)), 2.0 * diff / n
    if mode == "bce":
        q = np.clip(pred, BCE_CLIP, 1.0 - BCE_CLIP)
        p = np.clip(target, BCE_CLIP, 1.0 - BCE_CLIP)
        if not (np.isfinite(q).all() and np.isfinite(p).all()):
            raise ValueError("bce loss requires finite predictions and targets")
        loss = float(-np.mean(p * np.log(q) + (1.0 - p) * np.log1p(-q)))
        interior = (pred > BCE_CLIP) & (pred < 1.0 - BCE_CLIP)
        grad = np.where(interior, (q - p) / (q * (1.0 - q)) / n, 0.0)
        return loss, grad
    raise ValueError(f"loss mode must be 'mse' or 'bce', got {mode!r}")


def bptt_backward(m: ModelParams, cache: ForwardCache, dloss_dy) -> Gradients:
    """Exact reverse-mode gradients through all steps and layers.

    ``dloss_dy`` is dLoss/dprediction, one scalar per window in the batch
    (a bare scalar is accepted for a single window).
    """
    if cache is None or cache.params is not m:
        raise ContractError("backward pass needs the cache from a matching forward call")
    dy = np.atleast_1d(np.asarray(dloss_dy, dtype=np.float64))
    batch = cache.head_input.shape[0]
    if dy.shape != (batch,):
        raise ValueError(f"expected {batch} upstream gradients, got shape {dy.shape}")

    if m.loss_mode == "bce":
        q = cache.y
        dz = np.where(cache.head_interior, dy * q * (1.0 - q), 0.0)
    else:
        dz = dy

    grads = Gradients.zeros_like(m)
    grads.w_r += dz[None, :] @ cache.head_input

    n_layers = len(m.layers)
    dh_next = [np.zeros((batch, d)) for d in m.hidden_dims]
    dc_next = [np.zeros((batch, d)) for d in m.hidden_dims]
    dh_next[-1] = dh_next[-1] + dz[:, None] @ m.head.w_r

    for t in range(len(cache.steps) - 1, -1, -1):
        for li in range(n_layers - 1, -1, -1):
            cc = cache.steps[t][li]
            p = m.layers[li]
            gl = grads.layers[li]

            dh = dh_next[li]
            do = dh * cc.tanh_c
            dzo = do * cc.o * (1.0 - cc.o)
            dc = dc_next[li] + dh * cc.o * (1.0 - cc.tanh_c * cc.tanh_c)
            df = dc * cc.c_prev
            dzf = df * cc.f * (1.0 - cc.f)
            di = dc * cc.g
            dzi = di * cc.i * (1.0 - cc.i)
            dg = dc * cc.i
            dzg = dg * (1.0 - cc.g * cc.g)

            gl.w_i += dzi.T @ cc.x
            gl.v_i += dzi.T @ cc.h_prev
            gl.b_i += dzi.sum(axis=0)
            gl.w_f += dzf.T @ cc.x
            gl.v_f += dzf.T @ cc.h_prev
            gl.b_f += dzf.sum(axis=0)
            gl.w_o += dzo.T @ cc.x
            gl.v_o += dzo.T @ cc.h_prev
            gl.b_o += dzo.sum(axis=0)
            gl.w_c += dzg.T @ cc.x
            gl.v_c += dzg.T @ cc.h_prev
            gl.b_c += dzg.sum(axis=0)

            dh_next[li] = dzi @ p.v_i + dzf @ p.v_f + dzo @ p.v_o + dzg @ p.v_c
            dc_next[li] = dc * cc.f
            if li > 0:
                dx = dzi @ p.w_i + dzf @ p.w_f + dzo @ p.w_o + dzg @ p.w_c
                dh_next[li - 1] = dh_next[li - 1] + dx
    return grads


def adam_step(
    m: ModelParams,
    g: Gradients,
    s: AdamState,
    cfg: TrainConfig,
) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update, applied blockwise.

    theta <- theta - lr * (m_b / (1 - beta1^t)) / (sqrt(v_b / (1 - beta2^t)) + eps)
    """
    t = s.t + 1
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t

    def update(name: str, theta: np.ndarray, grad: np.ndarray, m_b: np.ndarray, v_b: np.ndarray):
        if not np.isfinite(grad).all():
            raise GradientError(f"non-finite gradient in block {name}; training aborted")
        m_new = cfg.beta1 * m_b + (1.0 - cfg.beta1) * grad
        v_new = cfg.beta2 * v_b + (1.0 - cfg.beta2) * (grad * grad)
        theta_new = theta - cfg.learning_rate * (m_new / bc1) / (np.sqrt(v_new / bc2) + cfg.epsilon)
        return theta_new, m_new, v_new

    new_layers = []
    m_layers = []
    v_layers = []
    for li, (pl, gl, ml, vl) in enumerate(zip(m.layers, g.layers, s.m.layers, s.v.layers), 1):
        kw_p = {}
        m_layer = LayerGrads(pl.input_size, pl.hidden_size)
        v_layer = LayerGrads(pl.input_size, pl.hidden_size)
        for label, attr in _layer_attrs():
            theta_new, m_new, v_new = update(
                f"layer{li}.{label}",
                getattr(pl, attr),
                getattr(gl, attr),
                getattr(ml, attr),
                getattr(vl, attr),
            )
            kw_p[attr] = theta_new
            setattr(m_layer, attr, m_new)
            setattr(v_layer, attr, v_new)
        new_layers.append(LayerParams(**kw_p))
        m_layers.append(m_layer)
        v_layers.append(v_layer)
    wr_new, m_wr, v_wr = update("Wr", m.head.w_r, g.w_r, s.m.w_r, s.v.w_r)

    params = ModelParams(
        tuple(new_layers), RegressionHead(wr_new), m.input_dim, m.loss_mode, m.scaler
    )
    state = AdamState(Gradients(m_layers, m_wr), Gradients(v_layers, v_wr), t)
    return params, state


def _layer_attrs():
    for gate in GATES:
        yield f"W{gate}", f"w_{gate}"
        yield f"V{gate}", f"v_{gate}"
        yield f"b{gate}", f"b_{gate}"


def _clip_gradients(g: Gradients, max_norm: float) -> Gradients:
    total = 0.0
    for _, block in g.named_blocks():
        total += float(np.sum(block * block))
    norm = np.sqrt(total)
    if norm <= max_norm or norm == 0.0:
        return g
    scale = max_norm / norm
    for _, block in g.named_blocks():
        block *= scale
    return g


def _test_rmse(params: ModelParams, split: SplitDataset) -> float:
    pred = predict_windows(params, split.test.windows)
    diff = pred - split.test.targets
    return float(np.sqrt(np.mean(diff * diff)))


def train(split: SplitDataset, cfg: TrainConfig) -> tuple[ModelParams, TrainReport]:
    """Run the full epoch loop on an already scaled, windowed split.

    Batches are chronological slices; the last one may be short. A
    non-finite batch loss aborts with the report up to the last
    completed epoch.
    """
    if split.train.window_length != cfg.window:
        raise ConfigError(
            f"config window {cfg.window} does not match dataset window "
            f"{split.train.window_length}"
        )
    params = init_params(cfg)
    state = AdamState.zeros(params)
    report = TrainReport()
    x_train = split.train.windows
    t_train = split.train.targets
    n = len(split.train)

    started = time.perf_counter()
    for epoch in range(cfg.epochs):
        loss_sum = 0.0
        for lo in range(0, n, cfg.batch_size):
            hi = min(lo + cfg.batch_size, n)
            y, cache = forward_windows(params, x_train[lo:hi])
            batch_loss, dldy = compute_loss(y, t_train[lo:hi], cfg.loss_mode)
            if not np.isfinite(batch_loss):
                report.wall_time_s = time.perf_counter() - started
                raise TrainingDivergedError(
                    f"non-finite loss in epoch {epoch + 1}; "
                    f"last good epoch: {report.epochs_completed}",
                    report=report,
                )
            grads = bptt_backward(params, cache, dldy)
            if cfg.max_grad_norm is not None:
                grads = _clip_gradients(grads, cfg.max_grad_norm)
            params, state = adam_step(params, grads, state, cfg)
            loss_sum += batch_loss * (hi - lo)
        report.train_loss.append(loss_sum / n)
        report.test_rmse.append(_test_rmse(params, split))
    report.wall_time_s = time.perf_counter() - started
    report.optimizer_steps = state.t
    return params, report


@dataclass(frozen=True)
class BlockCheck:
    """Worst analytic-vs-numeric disagreement within one block."""

    block: str
    max_rel_err: float
    coord: tuple[int, ...]
    analytic: float
    numeric: float


def _probe_model(cfg: TrainConfig, seed: int) -> tuple[ModelParams, np.ndarray, np.ndarray]:
    """Well-conditioned probe point for the finite-difference oracle.

    Weights, inputs and upstream loss gradients are all positive, so
    every gradient coordinate is a sum of positive terms and stays far
    from the cancellation zeros that would swamp a central difference
    with 64-bit roundoff.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    layers = []
    in_size = 1
    for d in cfg.hidden_dims:
        kw = {}
        for gate in GATES:
            kw[f"w_{gate}"] = rng.uniform(0.1, 0.4, size=(d, in_size))
            kw[f"v_{gate}"] = rng.uniform(0.05, 0.2, size=(d, d))
            kw[f"b_{gate}"] = np.full(d, 1.0 if gate == "f" else 0.1)
        layers.append(LayerParams(**kw))
        in_size = d
    head = RegressionHead(rng.uniform(0.2, 0.8, size=(1, in_size)))
    params = ModelParams(tuple(layers), head, input_dim=1, loss_mode=cfg.loss_mode)
    windows = rng.uniform(0.5, 1.5, size=(4, cfg.window))
    targets = np.full(4, 0.02) if cfg.loss_mode == "bce" else np.full(4, -1.0)
    return params, windows, targets


def grad_check(cfg: TrainConfig, seed: int = 7, eps: float = 1e-6) -> list[BlockCheck]:
    """Central-difference check of the full BPTT gradient, per block.

    Relative error is |a - n| / max(|a|, |n|, 1e-12) per parameter; each
    block reports its worst offender. The probe model and data are drawn
    deterministically from ``seed``.
    """
    if not eps > 0:
        raise ConfigError("grad_check epsilon must be > 0")
    params, windows, targets = _probe_model(cfg, seed)

    y, cache = forward_windows(params, windows)
    _, dldy = compute_loss(y, targets, cfg.loss_mode)
    analytic = bptt_backward(params, cache, dldy)

    # Mutable twin of the parameters so single coordinates can be nudged.
    arrays = {name: block.copy() for name, block in named_param_blocks(params)}

    def rebuild() -> ModelParams:
        layers = []
        for li in range(1, len(params.hidden_dims) + 1):
            kw = {}
            for label, attr in _layer_attrs():
                kw[attr] = arrays[f"layer{li}.{label}"]
            layers.append(LayerParams(**kw))
        return ModelParams(
            tuple(layers), RegressionHead(arrays["Wr"]), params.input_dim, params.loss_mode
        )

    def loss_at() -> float:
        y_probe = predict_windows(rebuild(), windows)
        loss, _ = compute_loss(y_probe, targets, cfg.loss_mode)
        return loss

    results = []
    for name, grad_block in analytic.named_blocks():
        arr = arrays[name]
        worst = BlockCheck(name, 0.0, (0,) * arr.ndim, 0.0, 0.0)
        for idx in np.ndindex(arr.shape):
            original = arr[idx]
            arr[idx] = original + eps
            up = loss_at()
            arr[idx] = original - eps
            down = loss_at()
            arr[idx] = original
            numeric = (up - down) / (2.0 * eps)
            a = float(grad_block[idx])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-12)
            if rel > worst.max_rel_err:
                worst = BlockCheck(name, rel, idx, a, numeric)
        results.append(worst)
    return results
