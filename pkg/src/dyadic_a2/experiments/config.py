"""Run configuration, space/system construction and per-cell seeds."""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..dyadic import AdjacentSystems, DyadicSystem, build_adjacent_systems, build_dyadic_system
from ..operators.kernels import Kernel, cz_matrix, get_kernel
from ..space import (
    QuasiMetricSpace,
    grid_2d,
    load_distance_csv,
    load_points_csv,
    random_cloud,
    uniform_grid,
)

__all__ = [
    "SpaceSpec",
    "DyadicSpec",
    "WeightSpec",
    "FuzzSpec",
    "RunConfig",
    "build_space",
    "cell_seed",
    "Context",
    "build_context",
    "parse_cell",
]


@dataclass
class SpaceSpec:
    kind: str = "grid1d"  # grid1d | grid2d | cloud | points_csv | distance_csv
    n: int = 1024  # number of points (grid2d: rounded to a square)
    dim: int = 1
    metric: str = "euclidean"
    path: str | None = None
    seed: int = 0


@dataclass
class DyadicSpec:
    delta: float | None = None  # default 1 / (8 c0^2)
    seed: int = 0
    adjacent_seed: int = 1
    trials: int = 32


@dataclass
class WeightSpec:
    alphas: list[float] = field(default_factory=lambda: [0.0, 0.3, 0.5, 0.7, 0.9, 0.95])
    pole: list[float] | None = None


@dataclass
class FuzzSpec:
    median: int = 10_000
    sparse: int = 1_000
    oscillation: int = 1_000
    operator: int = 40
    families_tg: int = 40
    families_chain: int = 40
    sweep_tg: int = 1


@dataclass
class RunConfig:
    space: SpaceSpec = field(default_factory=SpaceSpec)
    dyadic: DyadicSpec = field(default_factory=DyadicSpec)
    weights: WeightSpec = field(default_factory=WeightSpec)
    kernel: str = "hilbert"
    complexities: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    fuzz: FuzzSpec = field(default_factory=FuzzSpec)
    seed: int = 0
    out: str = "out"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        nested = {"space": SpaceSpec, "dyadic": DyadicSpec, "weights": WeightSpec, "fuzz": FuzzSpec}
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        for key, value in data.items():
            if key in nested:
                sub = nested[key]
                bad = set(value) - {f.name for f in fields(sub)}
                if bad:
                    raise ValueError(f"unknown keys in {key!r}: {sorted(bad)}")
                kw[key] = sub(**value)
            else:
                kw[key] = value
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def validate(self):
        get_kernel(self.kernel)
        if self.space.kind not in ("grid1d", "grid2d", "cloud", "points_csv", "distance_csv"):
            raise ValueError(f"unknown space kind {self.space.kind!r}")
        if self.space.kind in ("points_csv", "distance_csv") and not self.space.path:
            raise ValueError("csv spaces need a path")
        dim = 2 if self.space.kind == "grid2d" else self.space.dim
        for a in self.weights.alphas:
            if not -dim < a < dim:
                raise ValueError(f"alpha={a} gives a weight outside A2 in dimension {dim}")
        if any(int(k) != k or k < 0 for k in self.complexities):
            raise ValueError("complexities must be nonnegative integers")
        d = self.dyadic.delta
        if d is not None and not 0 < d < 1:
            raise ValueError("delta must lie in (0, 1)")

    def with_space(self, **changes) -> "RunConfig":
        data = self.to_dict()
        data["space"].update(changes)
        return RunConfig.from_dict(data)


def build_space(spec: SpaceSpec) -> QuasiMetricSpace:
    if spec.kind == "grid1d":
        return uniform_grid(spec.n, metric=spec.metric)
    if spec.kind == "grid2d":
        return grid_2d(int(round(np.sqrt(spec.n))), metric=spec.metric)
    if spec.kind == "cloud":
        return random_cloud(spec.n, dim=spec.dim, seed=spec.seed, metric=spec.metric)
    if spec.kind == "points_csv":
        return load_points_csv(spec.path, metric=spec.metric)
    if spec.kind == "distance_csv":
        return load_distance_csv(spec.path)
    raise ValueError(f"unknown space kind {spec.kind!r}")


def cell_seed(seed: int, **coords) -> int:
    """Stable 63-bit seed for one sweep cell, independent of evaluation order."""
    key = json.dumps({"seed": seed, **{k: _plain(v) for k, v in coords.items()}}, sort_keys=True)
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big") >> 1


def _plain(v):
    if isinstance(v, (np.floating, float)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def parse_cell(text: str | None) -> dict:
    """``"alpha=0.9,k=3"`` -> ``{"alpha": 0.9, "k": 3}``."""
    if not text:
        return {}
    out = {}
    for part in text.split(","):
        key, sep, value = part.partition("=")
        if not sep:
            raise ValueError(f"bad cell coordinate {part!r}")
        key = key.strip().replace("α", "alpha")
        value = value.strip()
        try:
            out[key] = int(value)
        except ValueError:
            try:
                out[key] = float(value)
            except ValueError:
                out[key] = value
    return out


@dataclass(eq=False)
class Context:
    space: QuasiMetricSpace
    system: DyadicSystem
    adjacent: AdjacentSystems
    kernel: Kernel
    T: np.ndarray


def default_delta(space: QuasiMetricSpace) -> float:
    return 1.0 / (8 * space.c0**2)


@lru_cache(maxsize=8)
def _context(key: str) -> Context:
    cfg = RunConfig.from_dict(json.loads(key))
    space = build_space(cfg.space)
    delta = cfg.dyadic.delta or default_delta(space)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        system = build_dyadic_system(space, delta, seed=cfg.dyadic.seed)
        adjacent = build_adjacent_systems(
            space, delta, trials=cfg.dyadic.trials, seed=cfg.dyadic.adjacent_seed, base=system
        )
    kernel = get_kernel(cfg.kernel)
    return Context(space, system, adjacent, kernel, cz_matrix(kernel, space))


def build_context(cfg: RunConfig) -> Context:
    """Space, base system, adjacent family and kernel matrix (cached per config)."""
    key = {k: v for k, v in cfg.to_dict().items() if k in ("space", "dyadic", "kernel")}
    return _context(json.dumps(key, sort_keys=True))
