"""Per-round connectivity sampling and its expectation.

The ground mesh is a symmetric Bernoulli adjacency with unit diagonal; the
UAV contributes a rank-one relay adjacency (outer product of its link vector).
The aggregated matrix is the entrywise OR of the two.
"""

from __future__ import annotations

import numpy as np

from .geometry import (
    AirChannelParams,
    Deployment,
    GroundChannelParams,
    air_link_probabilities,
    expected_ground_gain,
    ground_link_probability,
)


def ground_probability_matrix(dep: Deployment, gp: GroundChannelParams) -> np.ndarray:
    """Expected ground adjacency: activation probability per pair, ones on
    the diagonal. Static nodes make this time-invariant, compute it once."""
    m = dep.num_nodes
    probs = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            p = float(ground_link_probability(expected_ground_gain(i, j, dep, gp), gp))
            probs[i, j] = probs[j, i] = p
    return probs


def sample_ground_adjacency(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One Bernoulli draw per upper-triangle entry, mirrored, unit diagonal."""
    m = probs.shape[0]
    u = rng.random((m, m))
    upper = np.triu(u < probs, k=1).astype(float)
    return upper + upper.T + np.eye(m)


def uav_probability_vector(p_uav_xy, altitude: float, dep: Deployment,
                           ap: AirChannelParams, g_th: float) -> np.ndarray:
    """Per-node UAV link activation probabilities at the given position."""
    return np.asarray(air_link_probabilities(p_uav_xy, altitude, dep, ap, g_th), dtype=float)


def sample_uav_links(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli draw per UAV-user link."""
    p = np.asarray(probs, dtype=float)
    return (rng.random(p.shape) < p).astype(float)


def relay_adjacency(a_uav: np.ndarray) -> np.ndarray:
    """Rank-one relay matrix: entry (i, j) = 1 iff the UAV reaches both i and j."""
    a = np.asarray(a_uav, dtype=float)
    return np.outer(a, a)


def expected_relay_matrix(probs: np.ndarray) -> np.ndarray:
    """Expectation of the relay adjacency: p_i * p_j off the diagonal and p_i
    on it (binary entries are idempotent, so E[a_i^2] = p_i)."""
    p = np.asarray(probs, dtype=float)
    expected = np.outer(p, p)
    np.fill_diagonal(expected, p)
    return expected


def aggregate(a_gr: np.ndarray, a_uav: np.ndarray) -> np.ndarray:
    """Entrywise OR of the ground and relay adjacencies."""
    if a_gr.shape != a_uav.shape:
        raise ValueError(f"shape mismatch {a_gr.shape} vs {a_uav.shape}")
    ones = np.ones_like(a_gr)
    return ones - (ones - a_uav) * (ones - a_gr)


def expected_aggregate_matrix(e_ground: np.ndarray, e_relay: np.ndarray) -> np.ndarray:
    """Expectation of the aggregated adjacency; exact because ground and air
    links are drawn independently."""
    if e_ground.shape != e_relay.shape:
        raise ValueError(f"shape mismatch {e_ground.shape} vs {e_relay.shape}")
    return 1.0 - (1.0 - e_ground) * (1.0 - e_relay)


def neighborhoods(a: np.ndarray) -> list[set[int]]:
    """Neighbor index sets, one per node (self always included for unit-diagonal
    adjacencies)."""
    return [set(np.flatnonzero(row).tolist()) for row in np.asarray(a)]
