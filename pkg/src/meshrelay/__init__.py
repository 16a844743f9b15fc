"""UAV-relay-aided decentralized learning over sparse ground mesh networks."""

from .geometry import (
    AirChannelParams,
    Arena,
    Deployment,
    GroundChannelParams,
    ObstacleSegment,
    Position3,
    distance,
    elevation_angle_deg,
    expected_ground_gain,
    ground_link_probability,
    los_probability,
    normal_cdf,
    uav_link_probability,
)
from .connectivity import (
    aggregate,
    expected_aggregate_matrix,
    expected_relay_matrix,
    ground_probability_matrix,
    neighborhoods,
    relay_adjacency,
    sample_ground_adjacency,
    sample_uav_links,
    uav_probability_vector,
)
from .trajectory import (
    ActivityRate,
    SolverConfig,
    UavController,
    advance_uav,
    barycenter,
    cluster_midpoints,
    kmeans,
    max_connectivity_placement,
    sigmoid_cdf,
    solve_next_waypoint,
    update_activity_rate,
    waypoint_objective,
    waypoint_objective_gradient,
)
from .mlp import Mlp, MlpConfig
from .learning import (
    LearningRateSchedule,
    NodeState,
    OracleBounds,
    QuadraticOracle,
    consensus_error,
    evaluate_accuracy,
    federated_round,
    gradient_oracle,
    local_update,
    mean_estimate,
    metropolis_weights,
    mix,
    quadratic_oracle,
)
from .data import (
    LabeledDataset,
    PartitionSpec,
    load_idx,
    partition,
    synthetic_blobs,
    synthetic_split,
    write_idx,
)

__version__ = "0.1.0"
