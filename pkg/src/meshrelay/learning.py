"""Asynchronous decentralized SGD: local updates with straggling/staleness,
Metropolis-Hastings gossip over the sampled graph, the parameter-server mode,
and the disagreement metric."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .mlp import Mlp


@dataclass(frozen=True)
class LearningRateSchedule:
    """Geometrically decaying step size eta(t) = base * decay^t."""

    base: float = 0.1
    decay: float = 0.995

    def __call__(self, t: int) -> float:
        if self.base <= 0:
            raise ValueError("learning rate must be positive")
        return self.base * self.decay ** t


@dataclass(frozen=True)
class OracleBounds:
    """Recorded variance / magnitude bounds of a stochastic gradient oracle."""

    sigma_sq: float = 0.0
    g_sq: float = float("inf")

    def __post_init__(self):
        if self.sigma_sq < 0 or self.g_sq < 0:
            raise ValueError("oracle bounds must be nonnegative")


@dataclass
class NodeState:
    """Per-device estimate plus the snapshot buffer that backs stale gradients."""

    params: np.ndarray
    straggle_prob: float = 0.0
    staleness: int = 0
    lr: LearningRateSchedule = LearningRateSchedule()
    history_capacity: int = 10
    history: deque = field(init=False)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        self.history = deque(maxlen=self.history_capacity + 1)


def local_update(node: NodeState, t: int, is_straggler: bool, gradient_fn,
                 rng: np.random.Generator | None = None) -> NodeState:
    """One computation phase: skip (and grow staleness) when straggling,
    otherwise descend along the gradient evaluated at the snapshot from
    `staleness` rounds back."""
    node.history.append(node.params.copy())
    if is_straggler:
        node.staleness = min(node.staleness + 1, node.history_capacity)
        return node
    tau = min(node.staleness, len(node.history) - 1)
    stale = node.history[-1 - tau]
    node.params = node.params - node.lr(t) * np.asarray(gradient_fn(stale, rng))
    node.staleness = 0
    return node


# ---------------------------------------------------------------------------
# gossip


def metropolis_weights(a: np.ndarray) -> np.ndarray:
    """Metropolis-Hastings mixing matrix for a symmetric unit-diagonal
    adjacency: w_ij = 1/(1 + max(deg_i, deg_j)) on edges, self weight fills
    the row to one. Symmetric and doubly stochastic."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got {a.shape}")
    if not np.array_equal(a, a.T):
        raise ValueError("adjacency must be symmetric")
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    deg = off.sum(axis=1)
    w = off / (1.0 + np.maximum(deg[:, None], deg[None, :]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return w


def mix(estimates, w: np.ndarray) -> np.ndarray:
    """Communication phase: every node averages its neighbors' estimates."""
    p = np.atleast_2d(np.asarray(estimates, dtype=float))
    if w.shape[0] != w.shape[1] or w.shape[1] != p.shape[0]:
        raise ValueError(f"mixing matrix {w.shape} does not match {p.shape[0]} estimates")
    return w @ p


def mean_estimate(estimates) -> np.ndarray:
    """Average network estimate."""
    return np.mean(np.atleast_2d(np.asarray(estimates, dtype=float)), axis=0)


def consensus_error(estimates) -> float:
    """Disagreement metric: sqrt of the total squared deviation from the mean
    estimate, scaled by 1/(d*m)."""
    p = np.atleast_2d(np.asarray(estimates, dtype=float))
    m, d = p.shape
    dev = p - p.mean(axis=0)
    return float(np.sqrt(np.sum(dev ** 2)) / (d * m))


# ---------------------------------------------------------------------------
# oracles and evaluation


def gradient_oracle(model: Mlp, params: np.ndarray, images: np.ndarray,
                    labels: np.ndarray, rng: np.random.Generator | None = None,
                    batch_size: int | None = None) -> np.ndarray:
    """Cross-entropy gradient over a local shard: deterministic full batch by
    default, or an unbiased minibatch estimate when batch_size is given."""
    if len(images) == 0:
        raise ValueError("empty data shard")
    if batch_size is not None and batch_size < len(images):
        if rng is None:
            raise ValueError("minibatch mode needs a random generator")
        pick = rng.choice(len(images), size=batch_size, replace=False)
        return model.gradient(params, images[pick], labels[pick])
    return model.gradient(params, images, labels)


def evaluate_accuracy(model: Mlp, params: np.ndarray, images: np.ndarray,
                      labels: np.ndarray) -> float:
    """Fraction of argmax-correct predictions."""
    if len(images) == 0:
        raise ValueError("empty test set")
    return float(np.mean(model.predict(params, images) == labels))


class QuadraticOracle:
    """Synthetic oracle family f_i(theta) = 0.5 * ||theta - c_i||^2, optionally
    with Gaussian gradient noise to exercise the variance bound."""

    def __init__(self, centers, noise_std: float = 0.0):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.noise_std = float(noise_std)

    @property
    def bounds(self) -> OracleBounds:
        return OracleBounds(sigma_sq=self.noise_std ** 2 * self.centers.shape[1])

    def loss(self, i: int, params: np.ndarray) -> float:
        return 0.5 * float(np.sum((params - self.centers[i]) ** 2))

    def gradient(self, i: int, params: np.ndarray,
                 rng: np.random.Generator | None = None) -> np.ndarray:
        g = params - self.centers[i]
        if self.noise_std > 0.0:
            if rng is None:
                raise ValueError("noisy oracle needs a random generator")
            g = g + rng.normal(0.0, self.noise_std, g.shape)
        return g

    def gradient_fn(self, i: int):
        return lambda params, rng: self.gradient(i, params, rng)


def quadratic_oracle(centers, noise_std: float = 0.0) -> QuadraticOracle:
    return QuadraticOracle(centers, noise_std)


# ---------------------------------------------------------------------------
# parameter-server mode


def federated_round(ps_params: np.ndarray, nodes: list[NodeState], uav_links,
                    t: int, gradient_fns, straggler_flags=None,
                    rng: np.random.Generator | None = None):
    """One orchestrated round: local updates everywhere, then UAV-connected
    nodes upload and get overwritten by the refreshed server average. No
    device-to-device mixing in this mode."""
    links = np.asarray(uav_links, dtype=float)
    if straggler_flags is None:
        straggler_flags = [False] * len(nodes)
    for i, node in enumerate(nodes):
        local_update(node, t, bool(straggler_flags[i]), gradient_fns[i], rng)
    connected = np.flatnonzero(links)
    if connected.size > 0:
        ps_params = np.mean([nodes[i].params for i in connected], axis=0)
        for i in connected:
            nodes[i].params = ps_params.copy()
    return ps_params, nodes
