"""UAV trajectory policies and the waypoint optimizer.

The proposed policy tracks an exponentially averaged link activity matrix and
repeatedly hovers where the expected relay mass toward under-served links is
largest. The exact objective involves Gaussian CDFs; the solver optimizes a
smooth logistic surrogate with multi-start projected gradient ascent, restart
points drawn uniformly inside the convex hull of the ground nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .geometry import (
    RAD_TO_DEG,
    AirChannelParams,
    Arena,
    Deployment,
    GroundChannelParams,
    air_mean_gains,
    los_probability,
    uav_user_geometry,
)
from .connectivity import ground_probability_matrix

LOG10 = math.log(10.0)

# Logistic slope matching the standard normal CDF (max error < 0.0095).
SIGMOID_SLOPE = 1.702


def sigmoid_cdf(x):
    """Smooth logistic stand-in for the standard normal CDF."""
    return expit(SIGMOID_SLOPE * np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# link activity rate


@dataclass
class ActivityRate:
    """Exponentially averaged expected connectivity, R(0) = 0."""

    matrix: np.ndarray
    gamma: float = 0.9

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"forgetting factor must lie in (0, 1), got {self.gamma}")

    @classmethod
    def zeros(cls, m: int, gamma: float = 0.9) -> "ActivityRate":
        return cls(np.zeros((m, m)), gamma)


def update_activity_rate(rate: ActivityRate, expected_adjacency: np.ndarray) -> ActivityRate:
    """One recursion step: gamma * R + (1 - gamma) * E[A]."""
    e = np.asarray(expected_adjacency, dtype=float)
    if e.shape != rate.matrix.shape:
        raise ValueError(f"shape mismatch {e.shape} vs {rate.matrix.shape}")
    return ActivityRate(rate.gamma * rate.matrix + (1.0 - rate.gamma) * e, rate.gamma)


# ---------------------------------------------------------------------------
# surrogate objective


def _surrogate_link_probs(points_xy, altitude, dep, ap, g_th, with_grad=False):
    """UAV link probabilities under the logistic surrogate, batched over
    candidate positions; optionally their gradient w.r.t. (x, y)."""
    delta, horiz, dist3d, theta = uav_user_geometry(points_xy, altitude, dep)
    rho = los_probability(theta, ap)
    g_los, g_nlos = air_mean_gains(dist3d, ap)
    c_los = (g_th - g_los) / ap.sigma_los
    c_nlos = (g_th - g_nlos) / ap.sigma_nlos
    s_los = sigmoid_cdf(c_los)
    s_nlos = sigmoid_cdf(c_nlos)
    q = 1.0 - (1.0 - rho) * s_nlos - rho * s_los
    if not with_grad:
        return q

    # d(c)/d(dist): the mean gain drops by 10*alpha*log10(d).
    dc_los = 10.0 * ap.alpha_los / (ap.sigma_los * LOG10 * dist3d)
    dc_nlos = 10.0 * ap.alpha_nlos / (ap.sigma_nlos * LOG10 * dist3d)
    ds_los = SIGMOID_SLOPE * s_los * (1.0 - s_los)
    ds_nlos = SIGMOID_SLOPE * s_nlos * (1.0 - s_nlos)
    dq_ddist = -(1.0 - rho) * ds_nlos * dc_nlos - rho * ds_los * dc_los
    dq_dtheta = (s_nlos - s_los) * ap.los_a * rho * (1.0 - rho)

    ddist_dp = delta / dist3d[..., None]
    # theta = atan2(dz, r): d(theta)/dr = -(180/pi) dz / d^2; singular directly
    # overhead (r = 0) where the symmetric limit contributes nothing.
    dz = altitude - dep.positions[:, 2]
    safe_r = np.maximum(horiz, 1e-12)
    coef = np.where(horiz > 1e-9, RAD_TO_DEG * dz / (dist3d ** 2 * safe_r), 0.0)
    dtheta_dp = -coef[..., None] * delta

    grad_q = dq_ddist[..., None] * ddist_dp + dq_dtheta[..., None] * dtheta_dp
    return q, grad_q


def _relay_mass(q, weights):
    """sum_ij w_ij E[A_uav]_ij for batched link probabilities q (B, m)."""
    wq = q @ weights
    diag = np.diagonal(weights)
    quad = np.sum(wq * q, axis=-1) - np.sum(diag * q ** 2, axis=-1)
    return quad + q @ diag


def _relay_mass_grad(q, grad_q, weights):
    """Gradient of the weighted relay mass w.r.t. the UAV position."""
    coef = 2.0 * (q @ weights) + np.diagonal(weights) * (1.0 - 2.0 * q)
    return np.einsum("bi,bix->bx", coef, grad_q)


def waypoint_objective(point_xy, rate: ActivityRate, dep: Deployment,
                       ap: AirChannelParams, g_th: float, altitude: float) -> float:
    """Expected relay mass toward under-served links, smooth surrogate."""
    weights = 1.0 - rate.matrix
    q = _surrogate_link_probs(np.atleast_2d(point_xy), altitude, dep, ap, g_th)
    return float(_relay_mass(q, weights)[0])


def waypoint_objective_gradient(point_xy, rate: ActivityRate, dep: Deployment,
                                ap: AirChannelParams, g_th: float, altitude: float) -> np.ndarray:
    """Exact gradient of the surrogate objective w.r.t. (x, y)."""
    weights = 1.0 - rate.matrix
    q, grad_q = _surrogate_link_probs(np.atleast_2d(point_xy), altitude, dep, ap,
                                      g_th, with_grad=True)
    return _relay_mass_grad(q, grad_q, weights)[0]


# ---------------------------------------------------------------------------
# convex hull sampling


def convex_hull(points_xy: np.ndarray) -> np.ndarray:
    """Convex hull vertices in counter-clockwise order (monotone chain)."""
    pts = np.unique(np.asarray(points_xy, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def half(points):
        chain = []
        for p in points:
            while len(chain) >= 2 and cross(chain[-2], chain[-1], p) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3:  # collinear input collapses to a segment
        return np.array([pts[0], pts[-1]])
    return hull


def _inside_convex(points, hull, eps=1e-9):
    """Vectorized point-in-convex-polygon test (hull CCW, boundary counts)."""
    a = hull
    b = np.roll(hull, -1, axis=0)
    edge = b - a  # (h, 2)
    rel = points[:, None, :] - a[None, :, :]  # (n, h, 2)
    cross = edge[None, :, 0] * rel[:, :, 1] - edge[None, :, 1] * rel[:, :, 0]
    return np.all(cross >= -eps, axis=1)


def sample_in_hull(points_xy: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """n points uniform in the convex hull of the ground nodes (rejection
    sampling in the hull's bounding box; degenerate hulls handled directly)."""
    hull = convex_hull(points_xy)
    if len(hull) == 1:
        return np.tile(hull[0], (n, 1))
    if len(hull) == 2:
        t = rng.random(n)
        return hull[0] + t[:, None] * (hull[1] - hull[0])
    lo = hull.min(axis=0)
    hi = hull.max(axis=0)
    out = np.empty((n, 2))
    filled = 0
    while filled < n:
        cand = lo + rng.random((max(2 * n, 32), 2)) * (hi - lo)
        cand = cand[_inside_convex(cand, hull)]
        take = min(n - filled, len(cand))
        out[filled:filled + take] = cand[:take]
        filled += take
    return out


# ---------------------------------------------------------------------------
# multi-start solver


@dataclass(frozen=True)
class SolverConfig:
    restarts: int = 20
    iterations: int = 300
    step_size: float = 1.0
    step_decay: float = 0.98
    convergence_tol: float = 1e-9

    def __post_init__(self):
        if self.restarts < 1 or self.iterations < 1:
            raise ValueError("restarts and iterations must be >= 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not 0.0 < self.step_decay <= 1.0:
            raise ValueError("step_decay must lie in (0, 1]")


def maximize_relay_mass(weights: np.ndarray, cfg: SolverConfig, rng: np.random.Generator,
                        dep: Deployment, ap: AirChannelParams, g_th: float,
                        altitude: float) -> tuple[np.ndarray, float]:
    """Multi-start projected gradient ascent of the weighted relay mass.

    All restarts advance in lockstep as one batch; steps move a fixed
    (decaying) number of meters along the normalized gradient and are clipped
    to the arena. Returns the best iterate seen and its surrogate objective.
    """
    def value(points):
        return _relay_mass(_surrogate_link_probs(points, altitude, dep, ap, g_th), weights)

    p = sample_in_hull(dep.positions_xy, cfg.restarts, rng)
    f = value(p)
    best_p = p.copy()
    best_f = f.copy()
    active = np.ones(len(p), dtype=bool)
    for k in range(cfg.iterations):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        q, grad_q = _surrogate_link_probs(p[idx], altitude, dep, ap, g_th, with_grad=True)
        grad = _relay_mass_grad(q, grad_q, weights)
        norms = np.linalg.norm(grad, axis=1)
        moving = norms > 1e-12
        active[idx[~moving]] = False
        idx = idx[moving]
        if idx.size == 0:
            break
        step = cfg.step_size * cfg.step_decay ** k
        cand = dep.arena.clip(p[idx] + step * grad[moving] / norms[moving, None])
        f_cand = value(cand)
        improved = f_cand > best_f[idx]
        best_p[idx[improved]] = cand[improved]
        best_f[idx[improved]] = f_cand[improved]
        converged = np.abs(f_cand - f[idx]) < cfg.convergence_tol
        p[idx] = cand
        f[idx] = f_cand
        active[idx[converged]] = False
    winner = int(np.argmax(best_f))
    return best_p[winner].copy(), float(best_f[winner])


def solve_next_waypoint(rate: ActivityRate, cfg: SolverConfig, rng: np.random.Generator,
                        dep: Deployment, ap: AirChannelParams, g_th: float,
                        altitude: float) -> np.ndarray:
    """Next waypoint: argmax of the relay mass weighted by (1 - R)."""
    point, _ = maximize_relay_mass(1.0 - rate.matrix, cfg, rng, dep, ap, g_th, altitude)
    return point


# ---------------------------------------------------------------------------
# baseline placements


def kmeans(points: np.ndarray, k: int, rng: np.random.Generator,
           restarts: int = 10, max_iter: int = 200) -> np.ndarray:
    """Lloyd iterations with k-means++ seeding; best of `restarts` runs."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if k > n:
        raise ValueError(f"k = {k} exceeds the number of points ({n})")
    best_centers = None
    best_inertia = np.inf
    for _ in range(restarts):
        centers = _kmeans_pp_init(pts, k, rng)
        labels = None
        for _ in range(max_iter):
            d2 = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=2)
            new_labels = np.argmin(d2, axis=1)
            if labels is not None and np.array_equal(new_labels, labels):
                break
            labels = new_labels
            for j in range(k):
                mask = labels == j
                if mask.any():
                    centers[j] = pts[mask].mean(axis=0)
                else:  # re-seed an empty cluster
                    centers[j] = pts[rng.integers(n)]
        inertia = float(np.sum((pts - centers[labels]) ** 2))
        if inertia < best_inertia:
            best_inertia = inertia
            best_centers = centers.copy()
    return best_centers


def _kmeans_pp_init(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty((k, pts.shape[1]))
    centers[0] = pts[rng.integers(len(pts))]
    for j in range(1, k):
        d2 = np.min(np.sum((pts[:, None, :] - centers[None, :j, :]) ** 2, axis=2), axis=1)
        total = d2.sum()
        if total <= 0:
            centers[j] = pts[rng.integers(len(pts))]
        else:
            centers[j] = pts[rng.choice(len(pts), p=d2 / total)]
    return centers


def cluster_midpoints(centers: np.ndarray) -> np.ndarray:
    """All pairwise midpoints of the cluster centers in lexicographic order."""
    c = np.asarray(centers, dtype=float)
    if len(c) < 2:
        raise ValueError("need at least two cluster centers")
    mids = [(c[i] + c[j]) / 2.0 for i in range(len(c)) for j in range(i + 1, len(c))]
    mids = np.array(mids)
    return mids[np.lexsort((mids[:, 1], mids[:, 0]))]


def barycenter(points: np.ndarray) -> np.ndarray:
    """Mean horizontal ground node location."""
    return np.asarray(points, dtype=float)[:, :2].mean(axis=0)


def max_connectivity_placement(dep: Deployment, gp: GroundChannelParams,
                               ap: AirChannelParams, g_th: float, cfg: SolverConfig,
                               rng: np.random.Generator, altitude: float) -> np.ndarray:
    """Static placement maximizing relay mass weighted by how unlikely each
    ground link is (1 - expected ground adjacency)."""
    weights = 1.0 - ground_probability_matrix(dep, gp)
    point, _ = maximize_relay_mass(weights, cfg, rng, dep, ap, g_th, altitude)
    return point


# ---------------------------------------------------------------------------
# motion model and policies


def advance_uav(position: np.ndarray, waypoint: np.ndarray, speed: float) -> np.ndarray:
    """Move straight toward the waypoint by min(speed, remaining distance);
    infinite speed teleports."""
    position = np.asarray(position, dtype=float)
    waypoint = np.asarray(waypoint, dtype=float)
    delta = waypoint - position
    dist = float(np.linalg.norm(delta))
    if not math.isfinite(speed) or speed >= dist:
        return waypoint.copy()
    if dist == 0.0:
        return position.copy()
    return position + delta * (speed / dist)


class TrajectoryPolicy:
    """Supplies the next waypoint whenever the dwell at the current one ends."""

    name = "static"
    uses_activity_rate = False
    # When True the activity recursion folds in the expected ground adjacency;
    # the parameter-server comparison drives R with the relay expectation only.
    ground_links_in_rate = True

    def next_waypoint(self, rate: ActivityRate, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


class StaticPolicy(TrajectoryPolicy):
    def __init__(self, point, name: str = "static"):
        self.point = np.asarray(point, dtype=float)
        self.name = name

    def next_waypoint(self, rate, rng):
        return self.point.copy()


class CyclePolicy(TrajectoryPolicy):
    """Visits a fixed waypoint list cyclically (cluster mid-points traversal)."""

    def __init__(self, waypoints, name: str = "cluster_midpoints"):
        self.waypoints = np.asarray(waypoints, dtype=float)
        self.name = name
        self._cursor = 0

    def next_waypoint(self, rate, rng):
        wp = self.waypoints[self._cursor % len(self.waypoints)]
        self._cursor += 1
        return wp.copy()


class ProposedPolicy(TrajectoryPolicy):
    """Waypoints from the activity-rate weighted relay-mass maximization."""

    name = "proposed"
    uses_activity_rate = True

    def __init__(self, dep: Deployment, ap: AirChannelParams, g_th: float,
                 altitude: float, solver: SolverConfig):
        self.dep = dep
        self.ap = ap
        self.g_th = g_th
        self.altitude = altitude
        self.solver = solver

    def next_waypoint(self, rate, rng):
        return solve_next_waypoint(rate, self.solver, rng, self.dep, self.ap,
                                   self.g_th, self.altitude)


class FederatedPsPolicy(ProposedPolicy):
    """Same solver, but R tracks the relay expectation alone (ground links
    zeroed), steering the parameter-server UAV toward large stale groups."""

    name = "federated_ps"
    ground_links_in_rate = False


@dataclass
class WaypointEvent:
    round_reached: int
    x: float
    y: float
    objective: float
    policy: str


@dataclass
class UavController:
    """Round-level motion state machine: travel, dwell, request next waypoint.

    `objective_fn(point, rate)`, when given, is evaluated at each arrival to
    annotate the waypoint log.
    """

    policy: TrajectoryPolicy
    start: np.ndarray
    speed: float
    dwell_rounds: int
    objective_fn: object = None
    position: np.ndarray = field(init=False)
    waypoint: np.ndarray = field(init=False)
    dwell_remaining: int = field(init=False)
    events: list[WaypointEvent] = field(default_factory=list)

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float)
        self.position = self.start.copy()
        self.waypoint = self.start.copy()  # w0 = initial UAV location
        self.dwell_remaining = self.dwell_rounds
        self._log_arrival(0, None)

    def step(self, round_index: int, rate: ActivityRate,
             rng: np.random.Generator) -> np.ndarray:
        """Advance one round; returns the position the UAV relays from."""
        if self._at_waypoint():
            self.dwell_remaining -= 1
            if self.dwell_remaining <= 0:
                self.waypoint = np.asarray(self.policy.next_waypoint(rate, rng), dtype=float)
                if self._at_waypoint():  # next waypoint is the current spot
                    self.dwell_remaining = self.dwell_rounds
                    self._log_arrival(round_index, rate)
        if not self._at_waypoint():
            self.position = advance_uav(self.position, self.waypoint, self.speed)
            if self._at_waypoint():
                self.dwell_remaining = self.dwell_rounds
                self._log_arrival(round_index, rate)
        return self.position

    def _at_waypoint(self) -> bool:
        return bool(np.linalg.norm(self.position - self.waypoint) < 1e-9)

    def _log_arrival(self, round_index: int, rate):
        value = math.nan
        if self.objective_fn is not None and rate is not None:
            value = float(self.objective_fn(self.waypoint, rate))
        self.events.append(WaypointEvent(round_index, float(self.waypoint[0]),
                                         float(self.waypoint[1]), value, self.policy.name))
