"""Dense layers, ReLU, Adam and a central-difference gradient checker.

Everything runs in float64. Layers accept a single vector of shape ``(p,)``
or a batch of shape ``(B, p)``; parameter gradients are summed over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class ShapeError(ValueError):
    pass


class StateError(RuntimeError):
    pass


class NumericError(ArithmeticError):
    pass


def _as_input(x, p: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != p:
        raise ShapeError(f"expected input with trailing dimension {p}, got shape {x.shape}")
    return x


def _accumulate(upstream: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if upstream.ndim == 1:
        return np.outer(upstream, x), upstream.copy()
    return upstream.T @ x, upstream.sum(axis=0)


class DenseLayer:
    """Plain fully connected layer ``y = W x + b`` with ``W`` of shape (q, p)."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator | None = None):
        self.in_features = in_features
        self.out_features = out_features
        bound = 1.0 / np.sqrt(in_features)
        if rng is None:
            self.weights = np.zeros((out_features, in_features))
            self.bias = np.zeros(out_features)
        else:
            self.weights = rng.uniform(-bound, bound, (out_features, in_features))
            self.bias = rng.uniform(-bound, bound, out_features)
        self.cached_input: np.ndarray | None = None
        self.grads: dict[str, np.ndarray] = {}

    def parameters(self) -> dict[str, np.ndarray]:
        return {"weights": self.weights, "bias": self.bias}

    def forward(self, x) -> np.ndarray:
        x = _as_input(x, self.in_features)
        self.cached_input = x
        return x @ self.weights.T + self.bias

    def backward(self, upstream) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(grad_w, grad_b, grad_x)`` and store the parameter grads on the layer."""
        if self.cached_input is None:
            raise StateError("backward called before forward")
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape[-1] != self.out_features:
            raise ShapeError(f"upstream has trailing dimension {upstream.shape[-1]}, expected {self.out_features}")
        grad_w, grad_b = _accumulate(upstream, self.cached_input)
        grad_x = upstream @ self.weights
        self.grads = {"weights": grad_w, "bias": grad_b}
        return grad_w, grad_b, grad_x


class ReLU:
    """Elementwise ``max(0, x)``; the subgradient at exactly 0 is 0."""

    def __init__(self):
        self.mask: np.ndarray | None = None

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        self.mask = x > 0
        return np.where(self.mask, x, 0.0)

    def backward(self, upstream) -> np.ndarray:
        if self.mask is None:
            raise StateError("backward called before forward")
        return np.where(self.mask, upstream, 0.0)

    def parameters(self) -> dict[str, np.ndarray]:
        return {}


def relu(x) -> np.ndarray:
    return ReLU().forward(x)


@dataclass
class AdamState:
    """Moment estimates for one parameter array."""

    shape: tuple[int, ...]
    alpha: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 0.0
    first_moment: np.ndarray = field(init=False)
    second_moment: np.ndarray = field(init=False)
    step_count: int = 0

    def __post_init__(self):
        self.shape = tuple(self.shape)
        self.first_moment = np.zeros(self.shape)
        self.second_moment = np.zeros(self.shape)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """Apply one bias-corrected Adam update to ``params`` in place and return it.

    With ``epsilon == 0`` a coordinate whose corrected second moment is exactly
    zero gets no update instead of 0/0.
    """
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != state.shape or grads.shape != state.shape:
        raise ShapeError(f"adam shapes differ: state {state.shape}, params {params.shape}, grads {grads.shape}")
    state.step_count += 1
    t = state.step_count
    m, v = state.first_moment, state.second_moment
    m *= state.beta1
    m += (1.0 - state.beta1) * grads
    v *= state.beta2
    v += (1.0 - state.beta2) * (grads * grads)
    denom = np.sqrt(v / (1.0 - state.beta2**t))
    if state.epsilon:
        denom += state.epsilon
    step = np.divide(m, denom, out=np.zeros_like(m), where=denom > 0)
    step *= state.alpha / (1.0 - state.beta1**t)
    params -= step
    return params


def finite_diff_check(
    network,
    loss_fn: Callable[[], tuple[float, dict[str, np.ndarray]]],
    step: float = 1e-6,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``network.parameters()`` must return a name -> array mapping whose arrays
    are the live parameters. ``loss_fn()`` evaluates the loss at the current
    parameters and returns ``(loss, grads)`` keyed like ``parameters()``; any
    noise must be frozen so that it is deterministic.
    """
    params = network.parameters()
    loss, analytic = loss_fn()
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss {loss}")
    analytic = {name: np.array(g, dtype=np.float64) for name, g in analytic.items()}

    worst = 0.0
    for name, value in params.items():
        grad = analytic.get(name)
        if grad is None:
            grad = np.zeros_like(value)
        flat = value.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up, _ = loss_fn()
            flat[i] = orig - step
            down, _ = loss_fn()
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericError(f"non-finite loss while perturbing {name}[{i}]")
            numeric = (up - down) / (2.0 * step)
            a = grad.reshape(-1)[i]
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, err)
    return worst
