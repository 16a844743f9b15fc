"""Experiment configuration: sectioned key = value files, defaults matching
the reference scenario, and the bundled 23-node deployment fixture."""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields

import numpy as np

from .data import PartitionSpec
from .geometry import AirChannelParams, Arena, Deployment, GroundChannelParams, ObstacleSegment
from .rng import PURPOSES, substream
from .trajectory import SolverConfig

POLICIES = ("proposed", "cluster_midpoints", "barycenter", "max_connectivity",
            "static", "fully_connected", "federated_ps")

# Hand-placed 23-node deployment in a 60 x 30 arena: two dense blobs in the
# bottom corners split by an attenuating wall, plus a sparse line of relays
# along the top edge. Cross-group ground links are active with negligible
# probability under the default channel, so the mesh has three components.
PAPER_POSITIONS = (
    (2.0, 2.0), (10.0, 2.0), (3.0, 5.0), (7.0, 4.0), (11.0, 5.0), (4.0, 8.0),
    (8.0, 7.0), (10.0, 9.0),
    (58.0, 2.0), (50.0, 2.0), (57.0, 5.0), (53.0, 4.0), (49.0, 5.0), (56.0, 8.0),
    (52.0, 7.0), (50.0, 9.0),
    (11.0, 29.0), (13.6, 29.0), (21.4, 29.0), (30.0, 29.0), (38.6, 29.0),
    (46.4, 29.0), (49.0, 29.0),
)
PAPER_ARENA = (0.0, 0.0, 60.0, 30.0)
PAPER_OBSTACLES = ((30.0, 0.0, 30.0, 16.0, 35.0),)


class ConfigError(ValueError):
    """Configuration validation failure, naming the offending field."""


@dataclass
class DeploymentConfig:
    source: str = "paper"  # paper | explicit | uniform
    positions: tuple = PAPER_POSITIONS
    obstacles: tuple = PAPER_OBSTACLES
    arena: tuple = PAPER_ARENA
    num_nodes: int = 23
    generator_seed: int = 1


@dataclass
class UavConfig:
    altitude: float = 10.0
    min_altitude: float = 10.0
    speed: float = 5.0  # meters per round; inf teleports
    dwell_rounds: int = 20
    start: str = "center"  # "center" or "x,y"


@dataclass
class PolicyConfig:
    name: str = "proposed"
    gamma: float = 0.9
    kmeans_k: int = 3
    static_point: str = "30,15"


@dataclass
class LearningConfig:
    rounds: int = 500
    lr_base: float = 0.1
    lr_decay: float = 0.995
    straggle_prob: float = 0.0
    staleness_cap: int = 10
    eval_cadence: int = 5
    hidden_dim: int = 25
    activation: str = "relu"


@dataclass
class DataConfig:
    source: str = "synthetic"  # synthetic | idx
    per_node: int = 10
    scheme: str = "iid"
    classes_per_node: int = 1
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    test_subsample: int = 2000
    classes: int = 10
    dim: int = 784
    separation: float = 1.63
    spread: float = 0.18
    train_per_class: int = 23
    test_per_class: int = 200
    dataset_seed: int = 7

    def partition_spec(self) -> PartitionSpec:
        return PartitionSpec(per_node=self.per_node, scheme=self.scheme,
                             classes_per_node=self.classes_per_node)


@dataclass
class ExperimentConfig:
    deployment: DeploymentConfig = field(default_factory=DeploymentConfig)
    ground_channel: GroundChannelParams = field(default_factory=GroundChannelParams)
    air_channel: AirChannelParams = field(default_factory=AirChannelParams)
    uav: UavConfig = field(default_factory=UavConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    learning: LearningConfig = field(default_factory=LearningConfig)
    data: DataConfig = field(default_factory=DataConfig)
    seeds: tuple = (0, 1, 2, 3, 4)
    out_dir: str = "runs"

    def build_deployment(self) -> Deployment:
        d = self.deployment
        arena = Arena(*d.arena)
        obstacles = [ObstacleSegment((o[0], o[1]), (o[2], o[3]), o[4]) for o in d.obstacles]
        if d.source in ("paper", "explicit"):
            positions = np.asarray(d.positions, dtype=float)
        elif d.source == "uniform":
            rng = substream(d.generator_seed, "deployment")
            lo = np.array([arena.x_min, arena.y_min])
            hi = np.array([arena.x_max, arena.y_max])
            positions = lo + rng.random((d.num_nodes, 2)) * (hi - lo)
        else:
            raise ConfigError(f"[deployment] source: unknown value {d.source!r}")
        return Deployment(positions, obstacles, arena)

    def uav_start(self, arena: Arena) -> np.ndarray:
        if self.uav.start.strip() == "center":
            return np.array([(arena.x_min + arena.x_max) / 2.0,
                             (arena.y_min + arena.y_max) / 2.0])
        return _parse_point(self.uav.start, "[uav] start")

    def static_point(self) -> np.ndarray:
        return _parse_point(self.policy.static_point, "[policy] static_point")

    def validate(self) -> None:
        """Raise ConfigError naming the first offending field."""
        if self.policy.name not in POLICIES:
            raise ConfigError(f"[policy] name: unknown policy {self.policy.name!r}")
        if not 0.0 < self.policy.gamma < 1.0:
            raise ConfigError("[policy] gamma: must lie in (0, 1)")
        if self.learning.rounds < 1:
            raise ConfigError("[learning] rounds: must be >= 1")
        if self.learning.eval_cadence < 1:
            raise ConfigError("[learning] eval_cadence: must be >= 1")
        if not 0.0 <= self.learning.straggle_prob <= 1.0:
            raise ConfigError("[learning] straggle_prob: must lie in [0, 1]")
        if self.learning.staleness_cap < 0:
            raise ConfigError("[learning] staleness_cap: must be >= 0")
        if self.uav.speed <= 0:
            raise ConfigError("[uav] speed: must be positive (inf teleports)")
        if self.uav.altitude < self.uav.min_altitude:
            raise ConfigError("[uav] altitude: below the safety altitude")
        if self.uav.dwell_rounds < 1:
            raise ConfigError("[uav] dwell_rounds: must be >= 1")
        if self.data.source not in ("synthetic", "idx", "quadratic"):
            raise ConfigError(f"[data] source: unknown value {self.data.source!r}")
        if self.data.per_node < 1:
            raise ConfigError("[data] per_node: must be >= 1")
        if self.data.source == "idx":
            for key in ("train_images", "train_labels", "test_images", "test_labels"):
                if not getattr(self.data, key):
                    raise ConfigError(f"[data] {key}: required when source = idx")
        if len(self.seeds) != len(set(self.seeds)):
            raise ConfigError("[experiment] seeds: duplicate seeds")
        dep = self.build_deployment()
        if dep.num_nodes < 2:
            raise ConfigError("[deployment] positions: need at least two ground nodes")
        arena = dep.arena
        start = self.uav_start(arena)
        if not arena.contains(start[0], start[1]):
            raise ConfigError("[uav] start: outside the arena")
        if self.policy.name == "cluster_midpoints" and self.policy.kmeans_k > dep.num_nodes:
            raise ConfigError("[policy] kmeans_k: exceeds the number of nodes")
        if self.policy.name == "cluster_midpoints" and self.policy.kmeans_k < 2:
            raise ConfigError("[policy] kmeans_k: need at least two clusters")


def _parse_point(text: str, label: str) -> np.ndarray:
    try:
        x, y = (float(v) for v in text.split(","))
    except Exception as exc:
        raise ConfigError(f"{label}: expected 'x,y', got {text!r}") from exc
    return np.array([x, y])


def _parse_tuples(text: str, width: int, label: str) -> tuple:
    rows = []
    for chunk in text.replace("\n", ";").split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        vals = tuple(float(v) for v in chunk.split(","))
        if len(vals) != width:
            raise ConfigError(f"{label}: expected {width} values per entry, got {chunk!r}")
        rows.append(vals)
    return tuple(rows)


# section name -> (attribute on ExperimentConfig, dataclass)
_SECTIONS = {
    "deployment": "deployment",
    "ground_channel": "ground_channel",
    "air_channel": "air_channel",
    "uav": "uav",
    "policy": "policy",
    "solver": "solver",
    "learning": "learning",
    "data": "data",
}


def _coerce(value: str, kind, key: str, section: str):
    try:
        if kind is bool:
            return value.strip().lower() in ("1", "true", "yes", "on")
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
        return value
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {value!r} as {kind.__name__}") from exc


def load_config(path_or_text, is_text: bool = False) -> ExperimentConfig:
    """Parse a sectioned key = value file over the defaults."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if is_text:
        parser.read_string(path_or_text)
    else:
        with open(path_or_text) as f:
            parser.read_file(f)

    cfg = ExperimentConfig()
    for section, attr in _SECTIONS.items():
        if not parser.has_section(section):
            continue
        current = getattr(cfg, attr)
        kwargs = {}
        spec = {f.name: f for f in fields(current)}
        for key, raw in parser.items(section):
            if key not in spec:
                raise ConfigError(f"[{section}] {key}: unknown key")
            if section == "deployment" and key == "positions":
                kwargs[key] = _parse_tuples(raw, 2, "[deployment] positions")
            elif section == "deployment" and key == "obstacles":
                kwargs[key] = _parse_tuples(raw, 5, "[deployment] obstacles")
            elif section == "deployment" and key == "arena":
                vals = _parse_tuples(raw, 4, "[deployment] arena")
                kwargs[key] = vals[0] if vals else PAPER_ARENA
            else:
                default = getattr(current, key)
                kind = type(default) if default is not None else str
                kwargs[key] = _coerce(raw, kind, key, section)
        replaced = {f.name: kwargs.get(f.name, getattr(current, f.name)) for f in fields(current)}
        setattr(cfg, attr, type(current)(**replaced))

    if parser.has_section("experiment"):
        for key, raw in parser.items("experiment"):
            if key == "seeds":
                try:
                    cfg.seeds = tuple(int(s) for s in raw.replace(";", ",").split(",") if s.strip())
                except ValueError as exc:
                    raise ConfigError(f"[experiment] seeds: cannot parse {raw!r}") from exc
            elif key == "out_dir":
                cfg.out_dir = raw.strip()
            else:
                raise ConfigError(f"[experiment] {key}: unknown key")
    cfg.validate()
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    """Serialize the effective configuration (all defaults resolved) so that
    re-running from the dump reproduces the run."""
    parser = configparser.ConfigParser()
    for section, attr in _SECTIONS.items():
        obj = getattr(cfg, attr)
        parser.add_section(section)
        for f in fields(obj):
            value = getattr(obj, f.name)
            if section == "deployment" and f.name in ("positions", "obstacles"):
                value = "; ".join(",".join(repr(float(v)) for v in row) for row in value)
            elif section == "deployment" and f.name == "arena":
                value = ",".join(repr(float(v)) for v in value)
            parser.set(section, f.name, str(value))
    parser.add_section("experiment")
    parser.set("experiment", "seeds", ",".join(str(s) for s in cfg.seeds))
    parser.set("experiment", "out_dir", cfg.out_dir)
    buf = io.StringIO()
    buf.write("; effective configuration, reproduces the run byte-for-byte\n")
    buf.write("; random substreams per (purpose, round) from the master seed: "
              + ", ".join(f"{k}={v}" for k, v in PURPOSES.items()) + "\n")
    parser.write(buf)
    return buf.getvalue()


def default_config() -> ExperimentConfig:
    """The bundled reference scenario: the paper-like deployment with a faster
    relay UAV (12 m/round) than the library's conservative 5 m/round default."""
    cfg = ExperimentConfig()
    cfg.uav = UavConfig(speed=12.0)
    cfg.validate()
    return cfg
