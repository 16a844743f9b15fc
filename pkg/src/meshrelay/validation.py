"""Self-check property suites: Monte-Carlo channel/connectivity agreement,
mixing-matrix structure, solver gradient and recovery checks, and a DSGD
sanity run. Behind the `validate` CLI subcommand and reused by the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .connectivity import (
    ground_probability_matrix,
    uav_probability_vector,
)
from .geometry import AirChannelParams, Arena, Deployment, GroundChannelParams, normal_cdf
from .learning import (
    QuadraticOracle,
    consensus_error,
    local_update,
    LearningRateSchedule,
    mean_estimate,
    metropolis_weights,
    mix,
    NodeState,
)
from .trajectory import (
    ActivityRate,
    SolverConfig,
    _relay_mass,
    _surrogate_link_probs,
    sigmoid_cdf,
    solve_next_waypoint,
    waypoint_objective,
    waypoint_objective_gradient,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


# ---------------------------------------------------------------------------
# Monte-Carlo channel / connectivity agreement


def _random_scenario(rng: np.random.Generator):
    m = int(rng.integers(3, 7))
    arena = Arena(0.0, 0.0, 40.0, 40.0)
    while True:  # resample until nodes are pairwise separated
        pos = rng.uniform(2.0, 38.0, size=(m, 2))
        d = np.linalg.norm(pos[:, None] - pos[None, :], axis=2)
        if np.min(d[~np.eye(m, dtype=bool)]) > 1.0:
            break
    dep = Deployment(pos, arena=arena)
    gp = GroundChannelParams(alpha=float(rng.uniform(2.0, 3.5)),
                             beta=float(rng.uniform(-35.0, -25.0)),
                             sigma=float(rng.uniform(0.5, 2.0)),
                             g_th=float(rng.uniform(-62.0, -55.0)))
    ap = AirChannelParams(alpha_los=float(rng.uniform(2.0, 3.0)),
                          beta_los=float(rng.uniform(-33.0, -28.0)),
                          sigma_los=float(rng.uniform(0.5, 2.0)),
                          alpha_nlos=float(rng.uniform(2.5, 3.5)),
                          beta_nlos=float(rng.uniform(-33.0, -28.0)),
                          sigma_nlos=float(rng.uniform(0.5, 2.0)))
    uav = rng.uniform(0.0, 40.0, size=2)
    altitude = float(rng.uniform(8.0, 20.0))
    return dep, gp, ap, uav, altitude


def check_link_frequencies(n_configs: int = 20, n_rounds: int = 100_000,
                           seed: int = 2024) -> CheckResult:
    """Empirical link frequencies vs the analytic activation probabilities,
    3-sigma binomial bounds, for ground, relay and aggregated matrices."""
    rng = np.random.default_rng(seed)
    worst = 0.0  # worst |freq - p| as a multiple of its bound
    for _ in range(n_configs):
        dep, gp, ap, uav, altitude = _random_scenario(rng)
        m = dep.num_nodes
        iu, ju = np.triu_indices(m, 1)
        p_gr = ground_probability_matrix(dep, gp)[iu, ju]
        q = uav_probability_vector(uav, altitude, dep, ap, gp.g_th)

        g_draw = rng.random((n_rounds, len(iu))) < p_gr           # ground edges
        a_draw = rng.random((n_rounds, m)) < q                    # UAV link vector
        rel_pairs = a_draw[:, iu] & a_draw[:, ju]
        agg_pairs = g_draw | rel_pairs

        def margin(freq, p):
            bound = 3.0 * np.sqrt(p * (1.0 - p) / n_rounds) + 1e-12
            return np.max(np.abs(freq - p) / bound)

        worst = max(worst,
                    margin(g_draw.mean(axis=0), p_gr),
                    margin(a_draw.mean(axis=0), q),
                    margin(rel_pairs.mean(axis=0), q[iu] * q[ju]),
                    margin(agg_pairs.mean(axis=0),
                           1.0 - (1.0 - p_gr) * (1.0 - q[iu] * q[ju])))
    return CheckResult("link frequencies vs analytic probabilities", worst <= 1.0,
                       f"worst deviation {worst:.3f} of its 3-sigma bound "
                       f"({n_configs} scenarios x {n_rounds} rounds)")


# ---------------------------------------------------------------------------
# mixing matrices


def random_connected_adjacency(rng: np.random.Generator, max_nodes: int = 25) -> np.ndarray:
    """Erdos-Renyi graph overlaid with a random spanning path, unit diagonal."""
    m = int(rng.integers(2, max_nodes + 1))
    p = rng.uniform(0.1, 0.9)
    a = (rng.random((m, m)) < p).astype(float)
    a = np.triu(a, 1)
    a = a + a.T
    order = rng.permutation(m)
    for u, v in zip(order[:-1], order[1:]):
        a[u, v] = a[v, u] = 1.0
    np.fill_diagonal(a, 1.0)
    return a


def check_metropolis_suite(n_graphs: int = 1000, seed: int = 7) -> CheckResult:
    """Structure of Metropolis-Hastings matrices over random connected graphs,
    plus gossip mean preservation and weak consensus contraction."""
    rng = np.random.default_rng(seed)
    worst_stochastic = 0.0
    worst_mean = 0.0
    for _ in range(n_graphs):
        a = random_connected_adjacency(rng)
        m = a.shape[0]
        w = metropolis_weights(a)
        if not np.array_equal(w, w.T):
            return CheckResult("metropolis mixing suite", False, "asymmetric matrix")
        if w.min() < 0:
            return CheckResult("metropolis mixing suite", False, "negative weight")
        if np.any((w > 0) & (a == 0)):
            return CheckResult("metropolis mixing suite", False,
                               "weight outside the adjacency pattern")
        worst_stochastic = max(worst_stochastic,
                               float(np.max(np.abs(w.sum(axis=0) - 1.0))),
                               float(np.max(np.abs(w.sum(axis=1) - 1.0))))
        theta = rng.normal(size=(m, 3))
        mixed = mix(theta, w)
        worst_mean = max(worst_mean, float(np.max(np.abs(
            mean_estimate(mixed) - mean_estimate(theta)))))
        if consensus_error(mixed) > consensus_error(theta) + 1e-12:
            return CheckResult("metropolis mixing suite", False,
                               "gossip expanded the consensus error")
    ok = worst_stochastic <= 1e-12 and worst_mean <= 1e-10
    return CheckResult("metropolis mixing suite", ok,
                       f"{n_graphs} graphs, max row/col sum error {worst_stochastic:.2e}, "
                       f"max mean drift {worst_mean:.2e}")


# ---------------------------------------------------------------------------
# waypoint solver


def _solver_test_scene(rng: np.random.Generator):
    pos = np.array([(6, 4), (11, 3), (14, 6), (9, 6), (5, 8), (12, 9),
                    (8, 10), (15, 11)], dtype=float)
    dep = Deployment(pos, arena=Arena(0.0, 0.0, 30.0, 20.0))
    r = rng.random((len(pos), len(pos))) * 0.9
    rate = ActivityRate((r + r.T) / 2.0, 0.9)
    return dep, rate


def check_gradient_finite_differences(n_points: int = 100, seed: int = 11,
                                      tol: float = 1e-4) -> CheckResult:
    """Analytic surrogate gradient vs central finite differences."""
    rng = np.random.default_rng(seed)
    dep, rate = _solver_test_scene(rng)
    ap = AirChannelParams()
    g_th = GroundChannelParams().g_th
    h = 1e-4
    worst = 0.0
    for _ in range(n_points):
        p = rng.uniform([0.0, 0.0], [30.0, 20.0])
        grad = waypoint_objective_gradient(p, rate, dep, ap, g_th, 10.0)
        fd = np.array([
            (waypoint_objective(p + [h, 0], rate, dep, ap, g_th, 10.0)
             - waypoint_objective(p - [h, 0], rate, dep, ap, g_th, 10.0)) / (2 * h),
            (waypoint_objective(p + [0, h], rate, dep, ap, g_th, 10.0)
             - waypoint_objective(p - [0, h], rate, dep, ap, g_th, 10.0)) / (2 * h),
        ])
        rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12)
        worst = max(worst, rel)
    return CheckResult("waypoint gradient vs finite differences", worst <= tol,
                       f"worst relative error {worst:.2e} over {n_points} points")


def _grid_argmax(weights, dep, ap, g_th, altitude, resolution=0.1):
    xs = np.arange(dep.arena.x_min, dep.arena.x_max + 1e-9, resolution)
    ys = np.arange(dep.arena.y_min, dep.arena.y_max + 1e-9, resolution)
    best_val, best_pt = -np.inf, None
    for x0 in np.array_split(xs, max(1, len(xs) // 200)):
        gx, gy = np.meshgrid(x0, ys, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        vals = _relay_mass(_surrogate_link_probs(pts, altitude, dep, ap, g_th), weights)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_pt = float(vals[k]), pts[k]
    return best_pt, best_val


def check_solver_recovery(seed: int = 13, tol_m: float = 0.5) -> CheckResult:
    """Solver vs a 0.1 m grid-search oracle on the one-user and symmetric
    two-user instances."""
    ap = AirChannelParams()
    g_th = GroundChannelParams().g_th
    cfg = SolverConfig()
    errs = []
    dep1 = Deployment(np.array([[20.0, 12.0]]), arena=Arena(0.0, 0.0, 40.0, 24.0))
    wp1 = solve_next_waypoint(ActivityRate.zeros(1), cfg, np.random.default_rng(seed),
                              dep1, ap, g_th, 10.0)
    errs.append(float(np.linalg.norm(wp1 - [20.0, 12.0])))
    grid1, _ = _grid_argmax(np.ones((1, 1)), dep1, ap, g_th, 10.0)
    errs.append(float(np.linalg.norm(wp1 - grid1)))

    dep2 = Deployment(np.array([[-10.0, 0.0], [10.0, 0.0]]),
                      arena=Arena(-30.0, -15.0, 30.0, 15.0))
    wp2 = solve_next_waypoint(ActivityRate.zeros(2), cfg, np.random.default_rng(seed + 1),
                              dep2, ap, g_th, 10.0)
    grid2, _ = _grid_argmax(np.ones((2, 2)), dep2, ap, g_th, 10.0)
    errs.append(float(np.linalg.norm(wp2 - grid2)))
    errs.append(abs(float(wp2[0])))  # symmetric optimum sits on x = 0
    worst = max(errs)
    return CheckResult("solver recovers analytic optima", worst <= tol_m,
                       f"worst placement error {worst:.3f} m")


def check_sigmoid_bound() -> CheckResult:
    """Logistic surrogate within 0.0095 of the exact normal CDF on [-6, 6]."""
    x = np.arange(-6.0, 6.0 + 1e-12, 1e-3)
    err = float(np.max(np.abs(sigmoid_cdf(x) - normal_cdf(x))))
    return CheckResult("sigmoid approximation of the normal CDF", err <= 0.0095,
                       f"max |S - Phi| = {err:.5f} on [-6, 6]")


# ---------------------------------------------------------------------------
# DSGD sanity


def check_quadratic_dsgd(m: int = 10, dim: int = 5, rounds: int = 500,
                         seed: int = 3, tol: float = 1e-3) -> CheckResult:
    """Fully connected gossip SGD on quadratic losses drives every node to the
    mean of the centers."""
    rng = np.random.default_rng(seed)
    oracle = QuadraticOracle(rng.normal(size=(m, dim)))
    target = oracle.centers.mean(axis=0)
    lr = LearningRateSchedule(0.1, 0.995)
    nodes = [NodeState(rng.normal(size=dim), 0.0, 0, lr) for _ in range(m)]
    w = metropolis_weights(np.ones((m, m)))
    for t in range(rounds):
        for i, node in enumerate(nodes):
            local_update(node, t, False, oracle.gradient_fn(i))
        mixed = mix([node.params for node in nodes], w)
        for i, node in enumerate(nodes):
            node.params = mixed[i]
    worst = max(float(np.linalg.norm(node.params - target)) for node in nodes)
    return CheckResult("quadratic DSGD converges to the centers' mean", worst <= tol,
                       f"max node distance {worst:.2e} after {rounds} rounds")


def run_all(fast: bool = False) -> list[CheckResult]:
    """Every property suite; `fast` trims the Monte-Carlo sizes."""
    return [
        check_link_frequencies(n_configs=5 if fast else 20,
                               n_rounds=20_000 if fast else 100_000),
        check_metropolis_suite(n_graphs=200 if fast else 1000),
        check_gradient_finite_differences(n_points=20 if fast else 100),
        check_solver_recovery(),
        check_sigmoid_bound(),
        check_quadratic_dsgd(rounds=500),
    ]
