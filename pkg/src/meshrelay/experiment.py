"""Round-loop orchestration: sample connectivity, move the UAV, run local
updates and gossip (or the parameter-server round), and record metrics."""

from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig, dump_config
from .connectivity import (
    aggregate,
    expected_aggregate_matrix,
    expected_relay_matrix,
    ground_probability_matrix,
    relay_adjacency,
    sample_ground_adjacency,
    sample_uav_links,
    uav_probability_vector,
)
from .data import load_idx, partition, synthetic_split
from .learning import (
    LearningRateSchedule,
    NodeState,
    QuadraticOracle,
    consensus_error,
    evaluate_accuracy,
    federated_round,
    local_update,
    mean_estimate,
    metropolis_weights,
    mix,
)
from .mlp import Mlp, MlpConfig
from .rng import substream
from .trajectory import (
    ActivityRate,
    CyclePolicy,
    FederatedPsPolicy,
    ProposedPolicy,
    StaticPolicy,
    UavController,
    WaypointEvent,
    barycenter,
    cluster_midpoints,
    kmeans,
    max_connectivity_placement,
    update_activity_rate,
    waypoint_objective,
)

CHECKPOINT_MAGIC = b"MRSM"
CHECKPOINT_VERSION = 1

METRICS_FIELDS = ("round", "policy", "seed", "test_accuracy_mean_estimate",
                  "consensus_error", "n_ground_links", "n_relay_links", "uav_x", "uav_y")


@dataclass
class MetricsRecord:
    round: int
    policy: str
    seed: int
    test_accuracy_mean_estimate: float
    consensus_error: float
    n_ground_links: int
    n_relay_links: int
    uav_x: float
    uav_y: float

    def row(self) -> list:
        return [self.round, self.policy, self.seed, self.test_accuracy_mean_estimate,
                self.consensus_error, self.n_ground_links, self.n_relay_links,
                self.uav_x, self.uav_y]


@dataclass
class RunResult:
    policy: str
    seed: int
    metrics: list[MetricsRecord]
    waypoints: list[WaypointEvent]
    final_mean: np.ndarray
    shards: list = field(default_factory=list)

    def accuracy_series(self) -> dict[int, float]:
        return {r.round: r.test_accuracy_mean_estimate for r in self.metrics}

    def final_accuracy(self) -> float:
        return self.metrics[-1].test_accuracy_mean_estimate

    def final_consensus(self) -> float:
        return self.metrics[-1].consensus_error


def _prepare_data(cfg: ExperimentConfig, seed: int, m: int):
    """Dataset, evaluation split and per-node shard indices."""
    d = cfg.data
    if d.source == "quadratic":
        return None, None, None, None
    if d.source == "synthetic":
        gen = substream(d.dataset_seed, "dataset", 0)
        train, test = synthetic_split(d.classes, d.train_per_class, d.test_per_class,
                                      d.dim, d.separation, gen, d.spread)
    else:
        train = load_idx(d.train_images, d.train_labels)
        test = load_idx(d.test_images, d.test_labels)
    shards = partition(train, m, d.partition_spec(), substream(seed, "partition"))
    if 0 < d.test_subsample < len(test):
        pick = substream(d.dataset_seed, "dataset", 1).choice(
            len(test), size=d.test_subsample, replace=False)
        eval_set = test.subset(np.sort(pick))
    else:
        eval_set = test
    return train, test, eval_set, shards


def _build_policy(cfg: ExperimentConfig, dep, seed: int, start: np.ndarray):
    gp, apc = cfg.ground_channel, cfg.air_channel
    alt = cfg.uav.altitude
    name = cfg.policy.name
    rng0 = substream(seed, "solver_restarts", 0)
    if name == "proposed":
        return ProposedPolicy(dep, apc, gp.g_th, alt, cfg.solver)
    if name == "federated_ps":
        return FederatedPsPolicy(dep, apc, gp.g_th, alt, cfg.solver)
    if name == "cluster_midpoints":
        centers = kmeans(dep.positions_xy, cfg.policy.kmeans_k, rng0)
        return CyclePolicy(cluster_midpoints(centers))
    if name == "barycenter":
        return StaticPolicy(barycenter(dep.positions), "barycenter")
    if name == "max_connectivity":
        point = max_connectivity_placement(dep, gp, apc, gp.g_th, cfg.solver, rng0, alt)
        return StaticPolicy(point, "max_connectivity")
    if name == "static":
        return StaticPolicy(cfg.static_point(), "static")
    if name == "fully_connected":
        return StaticPolicy(start, "fully_connected")
    raise ValueError(f"unknown policy {name!r}")


def run_experiment(cfg: ExperimentConfig, seed: int, out_dir: str | None = None,
                   dump_links: bool = False) -> RunResult:
    """One full run: deterministic given (cfg, seed)."""
    cfg.validate()
    dep = cfg.build_deployment()
    m = dep.num_nodes
    gp, apc = cfg.ground_channel, cfg.air_channel
    lc = cfg.learning
    alt = cfg.uav.altitude
    name = cfg.policy.name

    train, test, eval_set, shards = _prepare_data(cfg, seed, m)
    lr = LearningRateSchedule(lc.lr_base, lc.lr_decay)
    init_rng = substream(seed, "init")
    if cfg.data.source == "quadratic":
        model = None
        oracle = QuadraticOracle(substream(cfg.data.dataset_seed, "dataset", 0)
                                 .normal(size=(m, cfg.data.dim)))
        theta0 = init_rng.normal(size=cfg.data.dim)
        gradient_fns = [oracle.gradient_fn(i) for i in range(m)]
    else:
        n_classes = int(max(train.labels.max(), test.labels.max())) + 1
        model = Mlp(MlpConfig(input_dim=train.images.shape[1], hidden_dim=lc.hidden_dim,
                              output_dim=n_classes, activation=lc.activation))
        theta0 = model.init_params(init_rng)
        gradient_fns = []
        for shard in shards:
            x, y = train.images[shard], train.labels[shard]
            gradient_fns.append(lambda p, rng, x=x, y=y: model.gradient(p, x, y))

    # identical initialization across devices: consensus error starts at zero
    nodes = [NodeState(theta0.copy(), lc.straggle_prob, 0, lr, lc.staleness_cap)
             for _ in range(m)]
    ps_params = theta0.copy()

    start = cfg.uav_start(dep.arena)
    policy = _build_policy(cfg, dep, seed, start)
    controller = UavController(
        policy, start, cfg.uav.speed, cfg.uav.dwell_rounds,
        objective_fn=lambda p, r: waypoint_objective(p, r, dep, apc, gp.g_th, alt))

    rate = ActivityRate.zeros(m, cfg.policy.gamma)
    ground_probs = ground_probability_matrix(dep, gp)
    no_ground = np.zeros((m, m))

    metrics: list[MetricsRecord] = []
    link_rows: list[tuple] = []
    for t in range(lc.rounds):
        pos = controller.step(t, rate, substream(seed, "solver_restarts", t))
        q = uav_probability_vector(pos, alt, dep, apc, gp.g_th)
        if policy.uses_activity_rate:
            base = ground_probs if policy.ground_links_in_rate else no_ground
            expected = expected_aggregate_matrix(base, expected_relay_matrix(q))
            rate = update_activity_rate(rate, expected)
        a_gr = sample_ground_adjacency(ground_probs, substream(seed, "ground_links", t))
        a_uav = sample_uav_links(q, substream(seed, "uav_links", t))
        a_rel = relay_adjacency(a_uav)
        stragglers = substream(seed, "straggler", t).random(m) < lc.straggle_prob

        if name == "federated_ps":
            ps_params, nodes = federated_round(ps_params, nodes, a_uav, t,
                                               gradient_fns, stragglers)
        else:
            for i, node in enumerate(nodes):
                local_update(node, t, bool(stragglers[i]), gradient_fns[i])
            adjacency = np.ones((m, m)) if name == "fully_connected" else aggregate(a_gr, a_rel)
            mixed = mix([node.params for node in nodes], metropolis_weights(adjacency))
            for i, node in enumerate(nodes):
                node.params = mixed[i]

        if dump_links:
            for i, j in zip(*np.triu_indices(m, 1)):
                if a_gr[i, j]:
                    link_rows.append((t + 1, int(i), int(j), "ground"))
                if a_rel[i, j]:
                    link_rows.append((t + 1, int(i), int(j), "relay"))

        if (t + 1) % lc.eval_cadence == 0 or t == lc.rounds - 1:
            estimates = np.stack([node.params for node in nodes])
            mean = mean_estimate(estimates)
            if model is None:
                acc = float("nan")
            else:  # final round scored on the full test split
                ds = test if t == lc.rounds - 1 else eval_set
                acc = evaluate_accuracy(model, mean, ds.images, ds.labels)
            metrics.append(MetricsRecord(
                t + 1, name, seed, acc, consensus_error(estimates),
                int(np.sum(np.triu(a_gr, 1))), int(np.sum(np.triu(a_rel, 1))),
                float(pos[0]), float(pos[1])))

    result = RunResult(name, seed, metrics, list(controller.events),
                       mean_estimate(np.stack([node.params for node in nodes])),
                       shards if shards is not None else [])
    if out_dir is not None:
        _write_run_outputs(cfg, seed, result, out_dir, link_rows if dump_links else None)
    return result


def run_waypoints(cfg: ExperimentConfig, seed: int) -> RunResult:
    """Trajectory only: the UAV motion and activity-rate recursion without any
    learning, reproducing exactly the waypoints of the full run (the
    trajectory depends only on expectations and the solver substreams)."""
    cfg.validate()
    dep = cfg.build_deployment()
    gp, apc = cfg.ground_channel, cfg.air_channel
    alt = cfg.uav.altitude
    start = cfg.uav_start(dep.arena)
    policy = _build_policy(cfg, dep, seed, start)
    controller = UavController(
        policy, start, cfg.uav.speed, cfg.uav.dwell_rounds,
        objective_fn=lambda p, r: waypoint_objective(p, r, dep, apc, gp.g_th, alt))
    rate = ActivityRate.zeros(dep.num_nodes, cfg.policy.gamma)
    ground_probs = ground_probability_matrix(dep, gp)
    no_ground = np.zeros_like(ground_probs)
    for t in range(cfg.learning.rounds):
        pos = controller.step(t, rate, substream(seed, "solver_restarts", t))
        if policy.uses_activity_rate:
            q = uav_probability_vector(pos, alt, dep, apc, gp.g_th)
            base = ground_probs if policy.ground_links_in_rate else no_ground
            rate = update_activity_rate(
                rate, expected_aggregate_matrix(base, expected_relay_matrix(q)))
    return RunResult(cfg.policy.name, seed, [], list(controller.events),
                     np.zeros(0), [])


# ---------------------------------------------------------------------------
# output files


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def write_metrics_csv(path: str, results) -> None:
    rows = [rec.row() for res in results for rec in res.metrics]
    _write_csv(path, METRICS_FIELDS, rows)


def write_waypoints_csv(path: str, results) -> None:
    rows = [(e.round_reached, e.x, e.y, e.objective, e.policy)
            for res in results for e in res.waypoints]
    _write_csv(path, ("round_reached", "x", "y", "objective_value", "policy"), rows)


def write_checkpoint(path: str, params: np.ndarray) -> None:
    """Flat little-endian float32 vector with a 16-byte header."""
    vec = np.asarray(params, dtype="<f4")
    with open(path, "wb") as f:
        f.write(struct.pack("<4sIII", CHECKPOINT_MAGIC, CHECKPOINT_VERSION, vec.size, 0))
        f.write(vec.tobytes())


def read_checkpoint(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.read(16)
        if len(header) < 16:
            raise ValueError(f"{path}: truncated checkpoint header")
        magic, version, dim, _ = struct.unpack("<4sIII", header)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: bad checkpoint magic {magic!r}")
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        payload = f.read(4 * dim)
        if len(payload) < 4 * dim:
            raise ValueError(f"{path}: truncated checkpoint payload")
        return np.frombuffer(payload, dtype="<f4").astype(float)


def _write_run_outputs(cfg, seed, result: RunResult, out_dir: str, link_rows) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_metrics_csv(os.path.join(out_dir, "metrics.csv"), [result])
    write_waypoints_csv(os.path.join(out_dir, "waypoints.csv"), [result])
    _write_csv(os.path.join(out_dir, "partition.csv"), ("node", "sample_index"),
               [(i, int(s)) for i, shard in enumerate(result.shards) for s in shard])
    with open(os.path.join(out_dir, "effective.ini"), "w") as f:
        f.write(dump_config(cfg))
    write_checkpoint(os.path.join(out_dir, "checkpoint.bin"), result.final_mean)
    if link_rows is not None:
        _write_csv(os.path.join(out_dir, "links.csv"), ("round", "i", "j", "source"), link_rows)


# ---------------------------------------------------------------------------
# sweeps and comparisons


def sweep(cfg: ExperimentConfig, seeds, out_dir: str | None = None) -> dict:
    """run_experiment per seed; per-round mean and std of the tracked metrics."""
    seeds = list(seeds)
    if len(seeds) != len(set(seeds)):
        raise ValueError("duplicate seeds in sweep")
    results = [run_experiment(cfg, s) for s in seeds]
    rounds = [rec.round for rec in results[0].metrics]
    acc = np.array([[rec.test_accuracy_mean_estimate for rec in res.metrics] for res in results])
    cons = np.array([[rec.consensus_error for rec in res.metrics] for res in results])
    agg = {
        "policy": cfg.policy.name,
        "seeds": seeds,
        "rounds": rounds,
        "accuracy_mean": acc.mean(axis=0),
        "accuracy_std": acc.std(axis=0),
        "consensus_mean": cons.mean(axis=0),
        "consensus_std": cons.std(axis=0),
        "results": results,
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_metrics_csv(os.path.join(out_dir, "metrics.csv"), results)
        write_waypoints_csv(os.path.join(out_dir, "waypoints.csv"), results)
        rows = [(r, cfg.policy.name, len(seeds), am, asd, cm, csd)
                for r, am, asd, cm, csd in zip(rounds, agg["accuracy_mean"],
                                               agg["accuracy_std"], agg["consensus_mean"],
                                               agg["consensus_std"])]
        _write_csv(os.path.join(out_dir, "aggregated.csv"),
                   ("round", "policy", "n_seeds", "accuracy_mean", "accuracy_std",
                    "consensus_error_mean", "consensus_error_std"), rows)
        with open(os.path.join(out_dir, "effective.ini"), "w") as f:
            f.write(dump_config(cfg))
    return agg


def rounds_to_reach(result: RunResult, target: float) -> int:
    """First evaluation round whose accuracy reaches the target (the final
    round if it never does)."""
    for rec in result.metrics:
        if rec.test_accuracy_mean_estimate >= target:
            return rec.round
    return result.metrics[-1].round


def compare_fl(cfg: ExperimentConfig, seeds) -> dict:
    """Proposed relay scheme vs the UAV-as-parameter-server baseline: how many
    rounds the relay scheme needs to first match the server's final accuracy."""
    from copy import deepcopy

    rows = []
    for seed in seeds:
        cfg_prop = deepcopy(cfg)
        cfg_prop.policy.name = "proposed"
        cfg_fl = deepcopy(cfg)
        cfg_fl.policy.name = "federated_ps"
        prop = run_experiment(cfg_prop, seed)
        fl = run_experiment(cfg_fl, seed)
        target = fl.final_accuracy()
        rows.append({
            "seed": seed,
            "federated_final_accuracy": target,
            "proposed_final_accuracy": prop.final_accuracy(),
            "proposed_rounds_to_target": rounds_to_reach(prop, target),
            "reached": prop.final_accuracy() >= target,
        })
    mean_rounds = float(np.mean([r["proposed_rounds_to_target"] for r in rows]))
    return {"per_seed": rows, "mean_rounds_to_target": mean_rounds,
            "total_rounds": cfg.learning.rounds}
