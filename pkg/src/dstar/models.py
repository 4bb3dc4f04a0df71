"""Classifiers with hand-written gradients, plus SGD and Adam steps.

Two model kinds, the smallest that still distinguish robust from broken
aggregation:

  logistic  softmax regression, parameters W (p x C) then b (C)
  mlp1      one tanh hidden layer, parameters W1 (p x H), b1 (H),
            W2 (H x C), b2 (C)

Parameters live in one flat float64 vector; flatten/unflatten round-trips
exactly. Loss is mean softmax cross-entropy everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .numerics import GradVector, RngStream

MODEL_KINDS = ("logistic", "mlp1")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class ModelState:
    kind: str
    theta: GradVector
    input_dim: int
    num_classes: int
    hidden_dim: int = 0  # mlp1 only

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"ModelState: unknown kind {self.kind!r}")
        theta = np.asarray(self.theta, dtype=np.float64)
        expected = param_count(self.kind, self.input_dim, self.num_classes, self.hidden_dim)
        if theta.shape != (expected,):
            raise ValueError(
                f"ModelState: theta has {theta.shape} entries, shape metadata implies {expected}"
            )
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class OptimizerState:
    """Step-size owner; adam carries first/second moments and a step counter."""

    kind: str
    eta: float
    m: GradVector | None = None
    v: GradVector | None = None
    step: int = 0

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"OptimizerState: unknown kind {self.kind!r}")
        if self.eta <= 0:
            raise ValueError("OptimizerState: eta must be positive")
        if self.step < 0:
            raise ValueError("OptimizerState: step counter must be nonnegative")


def param_count(kind: str, p: int, C: int, hidden: int = 0) -> int:
    if kind == "logistic":
        return p * C + C
    if kind == "mlp1":
        return p * hidden + hidden + hidden * C + C
    raise ValueError(f"unknown model kind {kind!r}")


def unflatten_params(model: ModelState) -> list[np.ndarray]:
    """Split theta into per-layer arrays (views where possible)."""
    p, C, H = model.input_dim, model.num_classes, model.hidden_dim
    th = model.theta
    if model.kind == "logistic":
        return [th[: p * C].reshape(p, C), th[p * C:]]
    sizes = [p * H, H, H * C, C]
    shapes = [(p, H), (H,), (H, C), (C,)]
    out, start = [], 0
    for size, shape in zip(sizes, shapes):
        out.append(th[start:start + size].reshape(shape))
        start += size
    return out


def flatten_params(arrays) -> GradVector:
    return np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays])


def _glorot(rng: RngStream, fan_in: int, fan_out: int) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return (2.0 * rng.uniform(size=(fan_in, fan_out)) - 1.0) * a


def init_model(kind: str, input_dim: int, num_classes: int, hidden_dim: int,
               rng: RngStream) -> ModelState:
    """Uniform [-a, a] weight init with a = sqrt(6/(fan_in+fan_out)); zero biases."""
    if kind == "logistic":
        theta = flatten_params([_glorot(rng, input_dim, num_classes),
                                np.zeros(num_classes)])
    elif kind == "mlp1":
        if hidden_dim < 1:
            raise ValueError("init_model: mlp1 needs hidden_dim >= 1")
        theta = flatten_params([
            _glorot(rng, input_dim, hidden_dim), np.zeros(hidden_dim),
            _glorot(rng, hidden_dim, num_classes), np.zeros(num_classes),
        ])
    else:
        raise ValueError(f"init_model: unknown kind {kind!r}")
    return ModelState(kind, theta, input_dim, num_classes, hidden_dim)


def _check_batch(model: ModelState, x: np.ndarray, y: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("batch must be a nonempty 2-D matrix")
    if x.shape[1] != model.input_dim:
        raise ValueError(
            f"feature width {x.shape[1]} does not match model input width {model.input_dim}"
        )
    if y.shape != (x.shape[0],):
        raise ValueError("need one label per batch row")
    return x, y


def _forward(model: ModelState, x: np.ndarray):
    """Returns (logits, hidden activations or None)."""
    if model.kind == "logistic":
        W, b = unflatten_params(model)
        return x @ W + b, None
    W1, b1, W2, b2 = unflatten_params(model)
    h = np.tanh(x @ W1 + b1)
    return h @ W2 + b2, h


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def gradient(model: ModelState, x: np.ndarray, y: np.ndarray) -> GradVector:
    """Mean per-example cross-entropy gradient, flattened in theta layout."""
    x, y = _check_batch(model, x, y)
    m = x.shape[0]
    logits, h = _forward(model, x)
    dlogits = _softmax(logits)
    dlogits[np.arange(m), y] -= 1.0
    dlogits /= m
    if model.kind == "logistic":
        return flatten_params([x.T @ dlogits, dlogits.sum(axis=0)])
    _, _, W2, _ = unflatten_params(model)
    gW2 = h.T @ dlogits
    gb2 = dlogits.sum(axis=0)
    dh = (dlogits @ W2.T) * (1.0 - h * h)
    return flatten_params([x.T @ dh, dh.sum(axis=0), gW2, gb2])


def loss_and_accuracy(model: ModelState, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Mean cross-entropy and argmax accuracy; argmax ties go to the lowest class."""
    x, y = _check_batch(model, x, y)
    logits, _ = _forward(model, x)
    zmax = logits.max(axis=1)
    logsumexp = zmax + np.log(np.exp(logits - zmax[:, None]).sum(axis=1))
    loss = float(np.mean(logsumexp - logits[np.arange(x.shape[0]), y]))
    accuracy = float(np.mean(np.argmax(logits, axis=1) == y))
    return loss, accuracy


def make_optimizer(kind: str, eta: float, dim: int) -> OptimizerState:
    if kind == "adam":
        return OptimizerState("adam", eta, m=np.zeros(dim), v=np.zeros(dim), step=0)
    return OptimizerState(kind, eta)


def optimizer_step(opt: OptimizerState, theta: GradVector,
                   g: GradVector) -> tuple[GradVector, OptimizerState]:
    theta = np.asarray(theta, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if theta.shape != g.shape:
        raise ValueError(f"optimizer_step: shape mismatch {theta.shape} vs {g.shape}")
    if opt.kind == "sgd":
        return theta - opt.eta * g, opt
    if opt.m is None or opt.v is None or opt.m.shape != theta.shape:
        raise ValueError("optimizer_step: adam moments missing or mismatched")
    t = opt.step + 1
    m = ADAM_BETA1 * opt.m + (1.0 - ADAM_BETA1) * g
    v = ADAM_BETA2 * opt.v + (1.0 - ADAM_BETA2) * (g * g)
    m_hat = m / (1.0 - ADAM_BETA1 ** t)
    v_hat = v / (1.0 - ADAM_BETA2 ** t)
    theta_next = theta - opt.eta * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return theta_next, replace(opt, m=m, v=v, step=t)


def with_theta(model: ModelState, theta: GradVector) -> ModelState:
    return replace(model, theta=theta)
