"""Positions, distances, channel gains and link activation probabilities.

Ground-to-ground links follow a log-distance path loss with log-normal
shadowing; a link is active when the instantaneous gain exceeds a threshold,
which makes each link a Bernoulli draw with probability given by the Gaussian
tail of the shadowing. Air-to-ground links mix a LoS and an NLoS gain model,
weighted by an elevation-angle logistic (s-model) LoS probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, ndtr

RAD_TO_DEG = 180.0 / math.pi

# Tolerance for the obstacle crossing predicate (orientation tests).
SEGMENT_EPS = 1e-9


def normal_cdf(x):
    """Standard normal CDF, accurate to better than 1e-12 (erf-based)."""
    return ndtr(x)


@dataclass(frozen=True)
class Position3:
    """A 3-D position in meters. Ground nodes sit at z = 0; the UAV flies
    at a fixed altitude above its safety minimum."""

    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite position ({self.x}, {self.y}, {self.z})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class ObstacleSegment:
    """A 2-D wall segment that attenuates every ground link crossing it."""

    endpoint_a: tuple[float, float]
    endpoint_b: tuple[float, float]
    attenuation_db: float

    def __post_init__(self):
        a, b = self.endpoint_a, self.endpoint_b
        if abs(a[0] - b[0]) <= SEGMENT_EPS and abs(a[1] - b[1]) <= SEGMENT_EPS:
            raise ValueError("obstacle endpoints must be distinct")
        if not (math.isfinite(self.attenuation_db) and self.attenuation_db > 0):
            raise ValueError(f"attenuation must be finite positive, got {self.attenuation_db}")


@dataclass(frozen=True)
class Arena:
    """Axis-aligned rectangle bounding the deployment (meters)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max >= self.x_min and self.y_max >= self.y_min):
            raise ValueError("arena must satisfy x_max >= x_min and y_max >= y_min")

    def contains(self, x: float, y: float, eps: float = 1e-9) -> bool:
        return (self.x_min - eps <= x <= self.x_max + eps
                and self.y_min - eps <= y <= self.y_max + eps)

    def clip(self, points: np.ndarray) -> np.ndarray:
        """Project 2-D points onto the rectangle (componentwise clamp)."""
        p = np.asarray(points, dtype=float)
        return np.clip(p, [self.x_min, self.y_min], [self.x_max, self.y_max])


@dataclass
class Deployment:
    """Static ground nodes, obstacle walls and the arena they live in."""

    positions: np.ndarray  # (m, 3) ground node coordinates
    obstacles: list[ObstacleSegment] = field(default_factory=list)
    arena: Arena = Arena(0.0, 0.0, 60.0, 30.0)

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.positions.shape[1] == 2:  # pad ground-level z
            z = np.zeros((self.positions.shape[0], 1))
            self.positions = np.hstack([self.positions, z])
        if self.positions.shape[1] != 3:
            raise ValueError(f"positions must be (m, 2) or (m, 3), got {self.positions.shape}")
        if self.positions.shape[0] < 1:
            raise ValueError("deployment needs at least one ground node")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("non-finite ground position")
        for k, (x, y) in enumerate(self.positions[:, :2]):
            if not self.arena.contains(x, y):
                raise ValueError(f"ground node {k} at ({x}, {y}) lies outside the arena")

    @property
    def num_nodes(self) -> int:
        return self.positions.shape[0]

    @property
    def positions_xy(self) -> np.ndarray:
        return self.positions[:, :2]


@dataclass(frozen=True)
class GroundChannelParams:
    """Log-distance ground channel: mean gain beta - 10*alpha*log10(d) dB,
    shadowing std dev sigma dB, on-off threshold g_th dB."""

    alpha: float = 3.0
    beta: float = -30.0
    sigma: float = 1.0
    g_th: float = -60.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("path-loss exponent must be positive")
        if self.sigma <= 0:
            raise ValueError("shadowing std dev must be positive")


@dataclass(frozen=True)
class AirChannelParams:
    """LoS/NLoS air-to-ground channel plus s-model LoS coefficients.

    los_a is the per-degree logistic slope, los_b the offset; the LoS
    probability crosses 1/2 at elevation los_b / los_a degrees.
    """

    alpha_los: float = 2.5
    beta_los: float = -30.0
    sigma_los: float = 1.0
    alpha_nlos: float = 3.0
    beta_nlos: float = -30.0
    sigma_nlos: float = 1.0
    los_a: float = 0.5
    los_b: float = 5.0

    def __post_init__(self):
        if self.alpha_los <= 0 or self.alpha_nlos <= 0:
            raise ValueError("path-loss exponents must be positive")
        if self.sigma_los <= 0 or self.sigma_nlos <= 0:
            raise ValueError("shadowing std devs must be positive")


def distance(p, q) -> float:
    """Euclidean 3-D distance in meters."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return float(np.linalg.norm(p - q))


# ---------------------------------------------------------------------------
# obstacle crossing


def _orient(a, b, c) -> float:
    """Signed twice-area of triangle (a, b, c)."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, c, eps: float) -> bool:
    """Whether c lies within the bounding box of segment (a, b)."""
    return (min(a[0], b[0]) - eps <= c[0] <= max(a[0], b[0]) + eps
            and min(a[1], b[1]) - eps <= c[1] <= max(a[1], b[1]) + eps)


def segments_intersect(p1, p2, q1, q2, eps: float = SEGMENT_EPS) -> bool:
    """Whether 2-D segments (p1, p2) and (q1, q2) intersect.

    Shared endpoints and collinear touching count as an intersection.
    """
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and \
       ((d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)):
        return True
    if abs(d1) <= eps and _on_segment(q1, q2, p1, eps):
        return True
    if abs(d2) <= eps and _on_segment(q1, q2, p2, eps):
        return True
    if abs(d3) <= eps and _on_segment(p1, p2, q1, eps):
        return True
    if abs(d4) <= eps and _on_segment(p1, p2, q2, eps):
        return True
    return False


def obstacle_loss_db(p, q, obstacles) -> float:
    """Total attenuation of obstacles crossed by the 2-D segment (p, q)."""
    p2 = (float(p[0]), float(p[1]))
    q2 = (float(q[0]), float(q[1]))
    loss = 0.0
    for obs in obstacles:
        if segments_intersect(p2, q2, obs.endpoint_a, obs.endpoint_b):
            loss += obs.attenuation_db
    return loss


# ---------------------------------------------------------------------------
# ground links


def expected_ground_gain(i: int, j: int, dep: Deployment, gp: GroundChannelParams) -> float:
    """Mean channel gain in dB between ground nodes i and j (shadowing excluded),
    reduced by the attenuation of every obstacle the link crosses."""
    if i == j:
        raise ValueError("ground gain is defined for distinct nodes")
    d = distance(dep.positions[i], dep.positions[j])
    if d <= 0.0:
        raise ValueError(f"nodes {i} and {j} are coincident")
    gain = gp.beta - gp.alpha * 10.0 * math.log10(d)
    gain -= obstacle_loss_db(dep.positions[i], dep.positions[j], dep.obstacles)
    return gain


def ground_link_probability(mean_gain, gp: GroundChannelParams):
    """Probability that the shadowed gain exceeds the activation threshold."""
    return 1.0 - normal_cdf((gp.g_th - np.asarray(mean_gain, dtype=float)) / gp.sigma)


# ---------------------------------------------------------------------------
# air links


def elevation_angle_deg(p_uav, p_ground) -> float:
    """Elevation angle (degrees, in (0, 90]) from a ground node to the UAV."""
    p_uav = np.asarray(p_uav, dtype=float)
    p_ground = np.asarray(p_ground, dtype=float)
    dz = p_uav[2] - p_ground[2]
    if dz <= 0:
        raise ValueError("UAV must be strictly above the ground node")
    horizontal = math.hypot(p_uav[0] - p_ground[0], p_uav[1] - p_ground[1])
    return RAD_TO_DEG * math.atan2(dz, horizontal)


def los_probability(theta_deg, ap: AirChannelParams):
    """s-model LoS probability: logistic in the elevation angle (degrees)."""
    return expit(ap.los_a * np.asarray(theta_deg, dtype=float) - ap.los_b)


def air_mean_gains(dist_3d, ap: AirChannelParams):
    """Mean LoS and NLoS gains (dB) at 3-D distance dist_3d."""
    d = np.asarray(dist_3d, dtype=float)
    log_d = np.log10(d)
    return (ap.beta_los - ap.alpha_los * 10.0 * log_d,
            ap.beta_nlos - ap.alpha_nlos * 10.0 * log_d)


def uav_user_geometry(points_xy, altitude: float, dep: Deployment):
    """Geometry of a batch of UAV positions against all ground nodes.

    points_xy: (2,) or (B, 2) horizontal UAV coordinates at the given altitude.
    Returns (delta, horiz, dist3d, theta_deg) with shapes (B, m, 2) and (B, m).
    """
    pts = np.atleast_2d(np.asarray(points_xy, dtype=float))
    nodes = dep.positions
    delta = pts[:, None, :] - nodes[None, :, :2]  # (B, m, 2)
    horiz = np.sqrt(np.sum(delta ** 2, axis=-1))  # (B, m)
    dz = altitude - nodes[None, :, 2]
    if np.any(dz <= 0):
        raise ValueError("UAV altitude must exceed every ground node elevation")
    dist3d = np.sqrt(horiz ** 2 + dz ** 2)
    theta = RAD_TO_DEG * np.arctan2(dz, horiz)
    return delta, horiz, dist3d, theta


def air_link_probabilities(points_xy, altitude: float, dep: Deployment,
                           ap: AirChannelParams, g_th: float, cdf=normal_cdf):
    """Per-node activation probabilities of UAV links at one or many positions.

    The LoS/NLoS mixture weighted by the s-model probability; `cdf` is the
    Gaussian CDF (exact by default, or a smooth surrogate for the trajectory
    solver). Returns shape (m,) for a single point, (B, m) for a batch.
    """
    single = np.asarray(points_xy).ndim == 1
    _, _, dist3d, theta = uav_user_geometry(points_xy, altitude, dep)
    rho = los_probability(theta, ap)
    g_los, g_nlos = air_mean_gains(dist3d, ap)
    p = (1.0
         - (1.0 - rho) * cdf((g_th - g_nlos) / ap.sigma_nlos)
         - rho * cdf((g_th - g_los) / ap.sigma_los))
    return p[0] if single else p


def uav_link_probability(p_uav, i: int, dep: Deployment, ap: AirChannelParams,
                         g_th: float) -> float:
    """Activation probability of the link between the UAV and ground node i."""
    p_uav = np.asarray(p_uav, dtype=float)
    probs = air_link_probabilities(p_uav[:2], float(p_uav[2]), dep, ap, g_th)
    return float(probs[i])
