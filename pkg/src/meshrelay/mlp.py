"""Single-hidden-layer perceptron with softmax cross-entropy, operated on a
flat parameter vector so node estimates can be mixed as plain arrays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int = 784
    hidden_dim: int = 25
    output_dim: int = 10
    activation: str = "relu"  # "relu" or "tanh"

    def __post_init__(self):
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def num_params(self) -> int:
        return (self.input_dim * self.hidden_dim + self.hidden_dim
                + self.hidden_dim * self.output_dim + self.output_dim)


class Mlp:
    """Forward pass, loss and full-batch gradient over flat parameter vectors."""

    def __init__(self, config: MlpConfig = MlpConfig()):
        self.config = config
        c = config
        self._splits = np.cumsum([c.input_dim * c.hidden_dim, c.hidden_dim,
                                  c.hidden_dim * c.output_dim])

    @property
    def num_params(self) -> int:
        return self.config.num_params

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        """Glorot-uniform weights, zero biases."""
        c = self.config
        params = np.zeros(c.num_params)
        w1, b1, w2, b2 = self.unpack(params)
        lim1 = np.sqrt(6.0 / (c.input_dim + c.hidden_dim))
        lim2 = np.sqrt(6.0 / (c.hidden_dim + c.output_dim))
        w1[:] = rng.uniform(-lim1, lim1, w1.shape)
        w2[:] = rng.uniform(-lim2, lim2, w2.shape)
        return params

    def unpack(self, params: np.ndarray):
        """Views (w1, b1, w2, b2) into the flat vector."""
        c = self.config
        if params.shape != (c.num_params,):
            raise ValueError(f"expected {c.num_params} parameters, got {params.shape}")
        w1, b1, w2, b2 = np.split(params, self._splits)
        return (w1.reshape(c.input_dim, c.hidden_dim), b1,
                w2.reshape(c.hidden_dim, c.output_dim), b2)

    def _hidden(self, z):
        if self.config.activation == "relu":
            return np.maximum(z, 0.0)
        return np.tanh(z)

    def forward(self, params: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Logits for a batch of inputs (n, input_dim)."""
        w1, b1, w2, b2 = self.unpack(params)
        return self._hidden(x @ w1 + b1) @ w2 + b2

    def predict(self, params: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Argmax class per row; ties break toward the lowest class index."""
        return np.argmax(self.forward(params, x), axis=1)

    def loss(self, params: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
        """Mean softmax cross-entropy."""
        logits = self.forward(params, x)
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_z = np.log(np.sum(np.exp(shifted), axis=1))
        return float(np.mean(log_z - shifted[np.arange(len(y)), y]))

    def gradient(self, params: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Gradient of the mean cross-entropy, flattened like the parameters."""
        c = self.config
        w1, b1, w2, b2 = self.unpack(params)
        z1 = x @ w1 + b1
        h = self._hidden(z1)
        logits = h @ w2 + b2
        shifted = logits - logits.max(axis=1, keepdims=True)
        ez = np.exp(shifted)
        probs = ez / ez.sum(axis=1, keepdims=True)
        probs[np.arange(len(y)), y] -= 1.0
        probs /= len(y)

        grad = np.empty(c.num_params)
        gw1, gb1, gw2, gb2 = self.unpack(grad)
        gw2[:] = h.T @ probs
        gb2[:] = probs.sum(axis=0)
        dh = probs @ w2.T
        if c.activation == "relu":
            dz1 = dh * (z1 > 0.0)
        else:
            dz1 = dh * (1.0 - h ** 2)
        gw1[:] = x.T @ dz1
        gb1[:] = dz1.sum(axis=0)
        return grad
