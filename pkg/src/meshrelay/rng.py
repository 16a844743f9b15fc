"""Named random substreams derived from one master seed.

Every consumer of randomness gets its own substream keyed by (purpose, round),
so e.g. the sampled ground adjacency sequence is identical across trajectory
policies and the waypoint solver can be re-run in isolation.
"""

from __future__ import annotations

import numpy as np

# Stable purpose -> spawn-key prefix map. Never reorder: changing a value
# changes every stream derived from it.
PURPOSES = {
    "ground_links": 0,
    "uav_links": 1,
    "straggler": 2,
    "init": 3,
    "partition": 4,
    "solver_restarts": 5,
    "deployment": 6,
    "dataset": 7,
    "oracle": 8,
}


def substream(master_seed: int, purpose: str, round_index: int = 0) -> np.random.Generator:
    """Generator for (purpose, round), reproducible from the master seed."""
    key = PURPOSES[purpose]
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(key, int(round_index)))
    return np.random.default_rng(seq)
