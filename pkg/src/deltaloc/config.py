"""Experiment configuration, stored as TOML.

Example::

    seed = 7
    epsilon = 1.0
    delta = 0.01
    mechanism = "PIM"
    repetitions = 20
    initial = "visited"          # "visited" | "uniform" | "first"

    [grid]
    min_x = 0.0
    min_y = 0.0
    cell_size = 0.34
    rows = 40
    cols = 40

    [data]
    trajectories = ["traj/*.csv"]   # globs are expanded, sorted
    format = "latlon-csv"           # or "cell-csv"
    training = []                   # defaults to the trajectories themselves
    transition = ""                 # triplet file; learned from training when empty
    alpha = 0.0
    pois = ""                       # CSV x,y in map units

    [projection]                    # only used by latlon-csv
    origin_lat = 39.85
    origin_lon = 116.25
    ref_lat = 39.9

    [synthetic]                     # used when data.trajectories is empty
    kind = "random_walk"            # or "corridor"
    n_trajectories = 5
    length = 100
    stay = 0.2

    [knn]
    k = 5
    k_prime = [5, 10, 15, 20]

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import tomli_w

from .grid import GridConfig
from .mechanism import MECHANISMS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TRAJECTORY_FORMATS = ("cell-csv", "latlon-csv")
INITIAL_POSTERIORS = ("visited", "uniform", "first")
SYNTHETIC_KINDS = ("random_walk", "corridor")


@dataclass
class DataConfig:
    trajectories: list[str] = field(default_factory=list)
    format: str = "cell-csv"
    training: list[str] = field(default_factory=list)
    transition: str = ""
    alpha: float = 0.0
    pois: str = ""

    def __post_init__(self):
        if self.format not in TRAJECTORY_FORMATS:
            raise ValueError(f"data.format must be one of {TRAJECTORY_FORMATS}, got {self.format!r}")
        if self.alpha < 0:
            raise ValueError("data.alpha must be non-negative")


@dataclass
class ProjectionConfig:
    origin_lat: float = 0.0
    origin_lon: float = 0.0
    ref_lat: float | None = None

    @property
    def reference_latitude(self) -> float:
        return self.origin_lat if self.ref_lat is None else self.ref_lat


@dataclass
class SyntheticConfig:
    kind: str = "random_walk"
    n_trajectories: int = 5
    length: int = 100
    stay: float = 0.2

    def __post_init__(self):
        if self.kind not in SYNTHETIC_KINDS:
            raise ValueError(f"synthetic.kind must be one of {SYNTHETIC_KINDS}, got {self.kind!r}")
        if self.n_trajectories < 1 or self.length < 1:
            raise ValueError("synthetic.n_trajectories and synthetic.length must be positive")
        if not 0 <= self.stay < 1:
            raise ValueError("synthetic.stay must lie in [0, 1)")


@dataclass
class KnnConfig:
    k: int = 5
    k_prime: list[int] = field(default_factory=lambda: [5, 10, 15, 20])

    def __post_init__(self):
        if self.k < 1 or any(kp < self.k for kp in self.k_prime):
            raise ValueError("knn requires 1 <= k <= every k_prime")


@dataclass
class ExperimentConfig:
    grid: GridConfig
    epsilon: float = 1.0
    delta: float = 0.01
    mechanism: str = "PIM"
    seed: int = 0
    repetitions: int = 1
    initial: str = "visited"
    data: DataConfig = field(default_factory=DataConfig)
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    knn: KnnConfig = field(default_factory=KnnConfig)
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"mechanism must be one of {MECHANISMS}, got {self.mechanism!r}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.initial not in INITIAL_POSTERIORS:
            raise ValueError(f"initial must be one of {INITIAL_POSTERIORS}, got {self.initial!r}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        if d["projection"]["ref_lat"] is None:
            del d["projection"]["ref_lat"]
        return d

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | os.PathLike = ".") -> ExperimentConfig:
        d = dict(d)
        known = {"grid", "epsilon", "delta", "mechanism", "seed", "repetitions", "initial",
                 "data", "projection", "synthetic", "knn"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "grid" not in d:
            raise ValueError("config needs a [grid] table")
        return cls(
            grid=GridConfig(**d.pop("grid")),
            data=DataConfig(**d.pop("data", {})),
            projection=ProjectionConfig(**d.pop("projection", {})),
            synthetic=SyntheticConfig(**d.pop("synthetic", {})),
            knn=KnnConfig(**d.pop("knn", {})),
            base_dir=str(base_dir),
            **d,
        )

    @classmethod
    def from_toml(cls, text: str, base_dir: str | os.PathLike = ".") -> ExperimentConfig:
        return cls.from_dict(tomllib.loads(text), base_dir)


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    path = Path(path)
    try:
        return ExperimentConfig.from_toml(path.read_text(encoding="utf-8"), path.parent)
    except TypeError as exc:
        raise ValueError(f"{path}: {exc}") from None


def save_config(cfg: ExperimentConfig, path: str | os.PathLike) -> None:
    Path(path).write_text(cfg.to_toml(), encoding="utf-8")
