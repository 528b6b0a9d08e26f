"""Factorised-Gaussian noisy linear layer and the output-layer noise level D."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn_core import ShapeError, StateError, _accumulate, _as_input


def factorise(x):
    """``sgn(x) * sqrt(|x|)``, elementwise."""
    return np.sign(x) * np.sqrt(np.abs(x))


@dataclass
class NoiseDraw:
    eps_in: np.ndarray
    eps_out: np.ndarray


class NoisyLinear:
    """Linear layer with learnable noise scale.

    Effective weights are ``mu_w + sigma_w * eps_w`` and effective bias is
    ``mu_b + sigma_b * eps_b``. The noise stays fixed until ``sample_noise``
    (or ``set_noise``) is called again.
    """

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator | None = None,
        sigma_0: float = 0.4,
    ):
        self.in_features = in_features
        self.out_features = out_features
        bound = 1.0 / np.sqrt(in_features)
        if rng is None:
            self.mu_w = np.zeros((out_features, in_features))
            self.mu_b = np.zeros(out_features)
        else:
            self.mu_w = rng.uniform(-bound, bound, (out_features, in_features))
            self.mu_b = rng.uniform(-bound, bound, out_features)
        self.sigma_w = np.full((out_features, in_features), sigma_0 / np.sqrt(in_features))
        self.sigma_b = np.full(out_features, sigma_0 / np.sqrt(in_features))
        self.eps_w = np.zeros((out_features, in_features))
        self.eps_b = np.zeros(out_features)
        self.cached_input: np.ndarray | None = None
        self._cached_w: np.ndarray | None = None
        self._cached_eps: tuple[np.ndarray, np.ndarray] | None = None
        self.grads: dict[str, np.ndarray] = {}

    def parameters(self) -> dict[str, np.ndarray]:
        return {"mu_w": self.mu_w, "sigma_w": self.sigma_w, "mu_b": self.mu_b, "sigma_b": self.sigma_b}

    def set_noise(self, draw: NoiseDraw) -> None:
        eps_in = np.asarray(draw.eps_in, dtype=np.float64)
        eps_out = np.asarray(draw.eps_out, dtype=np.float64)
        if eps_in.shape != (self.in_features,) or eps_out.shape != (self.out_features,):
            raise ShapeError(f"noise shapes {eps_in.shape}, {eps_out.shape} do not fit layer")
        f_out = factorise(eps_out)
        # f(a*b) == f(a)*f(b), so the rank-1 product equals the per-entry formula
        self.eps_w = np.outer(f_out, factorise(eps_in))
        self.eps_b = f_out

    def sample_noise(self, rng: np.random.Generator) -> NoiseDraw:
        draw = NoiseDraw(rng.standard_normal(self.in_features), rng.standard_normal(self.out_features))
        self.set_noise(draw)
        return draw

    def zero_noise(self) -> None:
        self.eps_w = np.zeros_like(self.eps_w)
        self.eps_b = np.zeros_like(self.eps_b)

    def forward(self, x) -> np.ndarray:
        x = _as_input(x, self.in_features)
        w = self.mu_w + self.sigma_w * self.eps_w
        b = self.mu_b + self.sigma_b * self.eps_b
        self.cached_input = x
        self._cached_w = w
        self._cached_eps = (self.eps_w, self.eps_b)
        return x @ w.T + b

    def backward(self, upstream) -> np.ndarray:
        """Store gradients for mu/sigma in ``self.grads`` and return the input gradient."""
        if self.cached_input is None:
            raise StateError("backward called before forward")
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape[-1] != self.out_features:
            raise ShapeError(f"upstream has trailing dimension {upstream.shape[-1]}, expected {self.out_features}")
        eps_w, eps_b = self._cached_eps
        grad_w, grad_b = _accumulate(upstream, self.cached_input)
        self.grads = {
            "mu_w": grad_w,
            "sigma_w": grad_w * eps_w,
            "mu_b": grad_b,
            "sigma_b": grad_b * eps_b,
        }
        return upstream @ self._cached_w


def compute_D(layer: NoisyLinear) -> float:
    """Mean absolute noise scale over the output layer's weights and biases."""
    count = (layer.in_features + 1) * layer.out_features
    return float((np.abs(layer.sigma_w).sum() + np.abs(layer.sigma_b).sum()) / count)


def grad_D(layer: NoisyLinear) -> dict[str, np.ndarray]:
    count = (layer.in_features + 1) * layer.out_features
    return {"sigma_w": np.sign(layer.sigma_w) / count, "sigma_b": np.sign(layer.sigma_b) / count}
