"""From-scratch LSTM regressor: forward pass, exact backpropagation through
time, Adam/SGD training and finite-difference gradient verification.

The cell follows the standard recursion from zero initial state: input,
forget and output gates through the sigmoid, a tanh candidate, then
c_t = f_t * c_{t-1} + i_t * g_t and h_t = o_t * tanh(c_t), with a linear
readout of the final hidden state. Gate weights act on the concatenation
[h_{t-1}, x_t] (hidden part first). All math is float64 and every run is
fully determined by (seed, data, config).
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Sequence

import numpy as np
from scipy.special import expit

from .errors import DataContractError, TrainingDiverged
from .features import Sample

PARAM_FIELDS = ("W_i", "W_f", "W_g", "W_o", "b_i", "b_f", "b_g", "b_o", "w_y", "b_y")

CHECKPOINT_MAGIC = b"LSTMRGR1"


class ShapeMismatch(DataContractError):
    pass


class NonFiniteInput(DataContractError):
    pass


class TraceMismatch(DataContractError):
    pass


class EmptyTrainingSet(DataContractError):
    pass


class DivergedLoss(TrainingDiverged):
    pass


@dataclass
class LstmModel:
    """Gate weights are (H, H+d) with hidden columns first; biases are (H,).
    The readout is w_y (H,) plus a scalar bias stored as a length-1 array."""

    d: int
    H: int
    W_i: np.ndarray
    W_f: np.ndarray
    W_g: np.ndarray
    W_o: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_g: np.ndarray
    b_o: np.ndarray
    w_y: np.ndarray
    b_y: np.ndarray

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {name: getattr(self, name).shape for name in PARAM_FIELDS}

    def copy(self) -> "LstmModel":
        kwargs = {name: getattr(self, name).copy() for name in PARAM_FIELDS}
        return LstmModel(d=self.d, H=self.H, **kwargs)


@dataclass(frozen=True)
class LstmGradients:
    W_i: np.ndarray
    W_f: np.ndarray
    W_g: np.ndarray
    W_o: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_g: np.ndarray
    b_o: np.ndarray
    w_y: np.ndarray
    b_y: np.ndarray


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 1e-3
    hidden: int = 32
    seed: int = 1
    optimizer: str = "adam"
    clip: float = 5.0
    batch_mode: str = "full"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")
        if self.hidden < 1:
            raise ValueError("hidden dim must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_mode not in ("full", "per_sample"):
            raise ValueError(f"unknown batch mode {self.batch_mode!r}")
        if self.clip is not None and self.clip <= 0:
            raise ValueError("clip threshold must be > 0")


def init(d: int, H: int, seed: int) -> LstmModel:
    """Seeded uniform init in [-1/sqrt(H+d), 1/sqrt(H+d)].

    Weight draw order is fixed (W_i, W_f, W_g, W_o, w_y) so identical
    (d, H, seed) yields bit-identical parameters. The forget-gate bias
    starts at 1.0, all other biases at 0.
    """
    if d < 1 or H < 1:
        raise ValueError("d and H must be >= 1")
    rng = np.random.default_rng(seed)
    bound = 1.0 / math.sqrt(H + d)
    weights = {name: rng.uniform(-bound, bound, (H, H + d)) for name in ("W_i", "W_f", "W_g", "W_o")}
    w_y = rng.uniform(-bound, bound, H)
    return LstmModel(
        d=d,
        H=H,
        **weights,
        b_i=np.zeros(H),
        b_f=np.ones(H),
        b_g=np.zeros(H),
        b_o=np.zeros(H),
        w_y=w_y,
        b_y=np.zeros(1),
    )


@dataclass(frozen=True)
class LstmTrace:
    """Per-step intermediates retained by the forward pass for exact BPTT.

    Arrays are (L, N, .) with N the batch size; Z holds the concatenated
    [h_{t-1}, x_t] inputs, so the trace alone reproduces the recursion.
    """

    Z: np.ndarray
    I: np.ndarray
    F: np.ndarray
    G: np.ndarray
    O: np.ndarray
    C: np.ndarray
    TC: np.ndarray
    prediction: np.ndarray


def _forward_batch(model: LstmModel, X: np.ndarray) -> tuple[np.ndarray, LstmTrace]:
    N, L, d = X.shape
    H = model.H
    Z = np.empty((L, N, H + d))
    I = np.empty((L, N, H))
    F = np.empty((L, N, H))
    G = np.empty((L, N, H))
    O = np.empty((L, N, H))
    C = np.empty((L, N, H))
    TC = np.empty((L, N, H))

    h = np.zeros((N, H))
    c = np.zeros((N, H))
    for t in range(L):
        z = np.concatenate([h, X[:, t, :]], axis=1)
        i = expit(z @ model.W_i.T + model.b_i)
        f = expit(z @ model.W_f.T + model.b_f)
        g = np.tanh(z @ model.W_g.T + model.b_g)
        o = expit(z @ model.W_o.T + model.b_o)
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        Z[t], I[t], F[t], G[t], O[t], C[t], TC[t] = z, i, f, g, o, c, tc

    prediction = h @ model.w_y + model.b_y[0]
    return prediction, LstmTrace(Z, I, F, G, O, C, TC, prediction)


def forward(model: LstmModel, window: np.ndarray) -> tuple[float, LstmTrace]:
    """Run one window (L, d) through the recursion from zero initial state."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[1] != model.d:
        raise ShapeMismatch(f"window shape {window.shape} incompatible with d={model.d}")
    if not np.all(np.isfinite(window)):
        raise NonFiniteInput("window contains non-finite values")
    prediction, trace = _forward_batch(model, window[None, :, :])
    return float(prediction[0]), trace


def _backward_batch(model: LstmModel, trace: LstmTrace, dy: np.ndarray) -> LstmGradients:
    """Exact gradients given d(loss)/d(prediction) per batch element."""
    L, N, H = trace.I.shape
    d = trace.Z.shape[2] - H

    grads = {name: np.zeros_like(getattr(model, name)) for name in PARAM_FIELDS}
    h_last = trace.O[L - 1] * trace.TC[L - 1]
    grads["w_y"] = dy @ h_last
    grads["b_y"] = np.array([dy.sum()])

    dh = np.outer(dy, model.w_y)
    dc = np.zeros((N, H))
    for t in range(L - 1, -1, -1):
        i, f, g, o = trace.I[t], trace.F[t], trace.G[t], trace.O[t]
        tc, z = trace.TC[t], trace.Z[t]
        c_prev = trace.C[t - 1] if t > 0 else np.zeros((N, H))

        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev

        da_i = di * i * (1.0 - i)
        da_f = df * f * (1.0 - f)
        da_g = dg * (1.0 - g * g)
        da_o = do * o * (1.0 - o)

        grads["W_i"] += da_i.T @ z
        grads["W_f"] += da_f.T @ z
        grads["W_g"] += da_g.T @ z
        grads["W_o"] += da_o.T @ z
        grads["b_i"] += da_i.sum(axis=0)
        grads["b_f"] += da_f.sum(axis=0)
        grads["b_g"] += da_g.sum(axis=0)
        grads["b_o"] += da_o.sum(axis=0)

        dz = da_i @ model.W_i + da_f @ model.W_f + da_g @ model.W_g + da_o @ model.W_o
        dh = dz[:, :H]
        dc = dc * f

    return LstmGradients(**grads)


def backward(
    model: LstmModel,
    trace: LstmTrace,
    window: np.ndarray,
    target: float,
) -> LstmGradients:
    """Gradients of the squared error (prediction - target)^2 for one window."""
    window = np.asarray(window, dtype=np.float64)
    L, N, hd = trace.Z.shape
    if N != 1 or window.shape != (L, hd - model.H):
        raise TraceMismatch("trace does not match the given window")
    if not np.array_equal(trace.Z[:, 0, model.H :], window):
        raise TraceMismatch("trace was produced from a different window")
    dy = 2.0 * (trace.prediction - target)
    return _backward_batch(model, trace, dy)


def params_to_vector(obj: LstmModel | LstmGradients) -> np.ndarray:
    return np.concatenate([np.ravel(getattr(obj, name)) for name in PARAM_FIELDS])


def set_params_from_vector(model: LstmModel, vec: np.ndarray) -> None:
    pos = 0
    for name in PARAM_FIELDS:
        arr = getattr(model, name)
        n = arr.size
        arr[...] = vec[pos : pos + n].reshape(arr.shape)
        pos += n
    if pos != vec.size:
        raise ShapeMismatch(f"vector of {vec.size} values does not fit the model")


def gradient_check(
    model: LstmModel,
    window: np.ndarray,
    target: float,
    h: float = 1e-5,
) -> float:
    """Max relative error between BPTT and central finite differences.

    Relative error per component is |a - b| / max(|a|, |b|, 1e-6); the floor
    makes near-zero components an absolute comparison at 1e-10 scale, where
    a pure ratio would only measure roundoff of the difference quotient.
    """
    prediction, trace = forward(model, window)
    analytic = params_to_vector(backward(model, trace, window, target))

    theta = params_to_vector(model)
    probe = model.copy()
    numeric = np.empty_like(theta)
    for j in range(theta.size):
        bumped = theta.copy()
        bumped[j] = theta[j] + h
        set_params_from_vector(probe, bumped)
        up, _ = forward(probe, window)
        bumped[j] = theta[j] - h
        set_params_from_vector(probe, bumped)
        down, _ = forward(probe, window)
        numeric[j] = ((up - target) ** 2 - (down - target) ** 2) / (2.0 * h)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / denom))


def _clip_gradients(vec: np.ndarray, threshold: float | None) -> np.ndarray:
    if threshold is None:
        return vec
    norm = float(np.sqrt(np.sum(vec * vec)))
    if norm > threshold:
        return vec * (threshold / norm)
    return vec


class _Adam:
    def __init__(self, size: int, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class _Sgd:
    def __init__(self, size: int, lr: float):
        self.lr = lr

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return theta - self.lr * grad


def _stack_windows(samples: Sequence[Sample], d: int) -> tuple[np.ndarray, np.ndarray]:
    for k, s in enumerate(samples):
        if s.window.ndim != 2 or s.window.shape[1] != d:
            raise ShapeMismatch(f"sample {k} window shape {s.window.shape} incompatible with d={d}")
    X = np.stack([s.window for s in samples]).astype(np.float64)
    y = np.array([s.target for s in samples], dtype=np.float64)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("training data contains non-finite values")
    return X, y


def train(
    model: LstmModel,
    samples: Sequence[Sample],
    cfg: TrainConfig,
) -> tuple[LstmModel, list[float]]:
    """Train on squared error over raw returns; returns (model, loss curve).

    Full-batch mode averages per-sample gradients (one deterministic batched
    pass), clips by global norm, then applies the optimizer; per-sample mode
    updates after each sample in order. The curve holds each epoch's mean
    pre-update loss.
    """
    if not samples:
        raise EmptyTrainingSet("no training samples")
    model = model.copy()
    X, y = _stack_windows(samples, model.d)
    N = len(samples)

    theta = params_to_vector(model)
    opt_cls = _Adam if cfg.optimizer == "adam" else _Sgd
    opt = opt_cls(theta.size, cfg.learning_rate)

    curve: list[float] = []
    for _ in range(cfg.epochs):
        if cfg.batch_mode == "full":
            prediction, trace = _forward_batch(model, X)
            residual = prediction - y
            with np.errstate(over="ignore"):  # overflow here IS the divergence signal
                epoch_loss = float(np.mean(residual * residual))
            if not math.isfinite(epoch_loss):
                raise DivergedLoss(f"loss became non-finite after {len(curve)} epochs")
            grads = _backward_batch(model, trace, 2.0 * residual / N)
            vec = _clip_gradients(params_to_vector(grads), cfg.clip)
            theta = opt.step(theta, vec)
            set_params_from_vector(model, theta)
        else:
            losses = []
            for k in range(N):
                prediction, trace = _forward_batch(model, X[k : k + 1])
                residual = prediction - y[k : k + 1]
                with np.errstate(over="ignore"):
                    loss = float(residual[0] ** 2)
                if not math.isfinite(loss):
                    raise DivergedLoss(f"loss became non-finite after {len(curve)} epochs")
                losses.append(loss)
                grads = _backward_batch(model, trace, 2.0 * residual)
                vec = _clip_gradients(params_to_vector(grads), cfg.clip)
                theta = opt.step(theta, vec)
                set_params_from_vector(model, theta)
            epoch_loss = float(np.mean(losses))
        curve.append(epoch_loss)

    return model, curve


def predict(model: LstmModel, samples: Sequence[Sample]) -> list[float]:
    """Pure forward pass over each sample, order-preserving."""
    if not samples:
        return []
    X, _ = _stack_windows(samples, model.d)
    prediction, _ = _forward_batch(model, X)
    return [float(v) for v in prediction]


def save_model(
    model: LstmModel,
    dest: str | Path | IO[bytes],
    *,
    seed: int | None = None,
    config_hash: str | None = None,
) -> None:
    """Versioned binary checkpoint; load(save(m)) is bitwise identical.

    Layout: 8-byte magic, little-endian u32 header length, JSON header with
    (d, H, seed, config hash, array shapes), then the parameter arrays as
    raw little-endian float64 in declared order.
    """
    header = {
        "d": model.d,
        "H": model.H,
        "seed": seed,
        "config_hash": config_hash,
        "shapes": {name: list(getattr(model, name).shape) for name in PARAM_FIELDS},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    own = isinstance(dest, (str, Path))
    out = open(dest, "wb") if own else dest
    try:
        out.write(CHECKPOINT_MAGIC)
        out.write(struct.pack("<I", len(blob)))
        out.write(blob)
        for name in PARAM_FIELDS:
            out.write(np.ascontiguousarray(getattr(model, name), dtype="<f8").tobytes())
    finally:
        if own:
            out.close()


def load_model(source: str | Path | IO[bytes]) -> tuple[LstmModel, dict]:
    own = isinstance(source, (str, Path))
    stream = open(source, "rb") if own else source
    try:
        magic = stream.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise DataContractError("not a model checkpoint (bad magic)")
        (hlen,) = struct.unpack("<I", stream.read(4))
        header = json.loads(stream.read(hlen).decode("utf-8"))
        arrays = {}
        for name in PARAM_FIELDS:
            shape = tuple(header["shapes"][name])
            count = int(np.prod(shape)) if shape else 1
            raw = stream.read(count * 8)
            if len(raw) != count * 8:
                raise DataContractError(f"checkpoint truncated while reading {name}")
            arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        model = LstmModel(d=header["d"], H=header["H"], **arrays)
        meta = {"seed": header.get("seed"), "config_hash": header.get("config_hash")}
        return model, meta
    finally:
        if own:
            stream.close()
