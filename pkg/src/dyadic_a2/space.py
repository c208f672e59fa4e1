"""Finite quasi-metric measure spaces.

A space is a finite point set with a symmetric distance table ``rho``, a
positive mass per point and a quasi-triangle constant ``c0``.  Integrals over
the space are mass-weighted sums.  Balls are open: ``B(x, r) = {y : rho(x, y) < r}``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "QuasiMetricSpace",
    "Ball",
    "QuasiMetricReport",
    "ball_members",
    "measure",
    "validate_quasimetric",
    "doubling_constant",
    "geometric_radii",
    "parse_metric",
    "from_points",
    "from_distance_table",
    "uniform_grid",
    "grid_2d",
    "snowflake_grid",
    "power_grid",
    "random_cloud",
    "load_points_csv",
    "load_distance_csv",
]


@dataclass(frozen=True, eq=False)
class QuasiMetricSpace:
    rho: np.ndarray
    mass: np.ndarray
    c0: float = 1.0
    coords: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        mass = np.array(self.mass, dtype=float).ravel()
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"rho must be square, got shape {rho.shape}")
        if mass.shape[0] != rho.shape[0]:
            raise ValueError("mass length does not match rho")
        if rho.shape[0] == 0:
            raise ValueError("space must contain at least one point")
        if not np.all(np.isfinite(mass)) or np.any(mass <= 0):
            raise ValueError("every mass must be finite and strictly positive")
        if self.c0 < 1:
            raise ValueError("c0 must be >= 1")
        rho.setflags(write=False)
        mass.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "mass", mass)
        if self.coords is not None:
            coords = np.array(self.coords, dtype=float)
            if coords.ndim == 1:
                coords = coords[:, None]
            coords.setflags(write=False)
            object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return self.rho.shape[0]

    @cached_property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    @cached_property
    def diameter(self) -> float:
        return float(self.rho.max())

    @cached_property
    def min_separation(self) -> float:
        """Smallest distance between two distinct points (inf for one point)."""
        if self.n == 1:
            return float("inf")
        off = self.rho[~np.eye(self.n, dtype=bool)]
        return float(off.min())

    @cached_property
    def sorted_rows(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-center point order by distance (stable, ties by index) and the sorted distances."""
        order = np.argsort(self.rho, axis=1, kind="stable")
        return order, np.take_along_axis(self.rho, order, axis=1)


@dataclass(frozen=True)
class Ball:
    center: int
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")


@dataclass
class QuasiMetricReport:
    c0_observed: float
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def ball_members(space: QuasiMetricSpace, ball: Ball) -> np.ndarray:
    """Indices ``y`` with ``rho(center, y) < radius``, ascending."""
    if not 0 <= ball.center < space.n:
        raise IndexError(f"center {ball.center} out of range for {space.n} points")
    return np.flatnonzero(space.rho[ball.center] < ball.radius)


def measure(space: QuasiMetricSpace, points) -> float:
    idx = np.asarray(points, dtype=int)
    if idx.size == 0:
        return 0.0
    return float(space.mass[idx].sum())


def validate_quasimetric(space: QuasiMetricSpace, tol: float = 1e-12) -> QuasiMetricReport:
    """Check the quasi-metric axioms exhaustively and measure the tightest ``c0``."""
    rho = space.rho
    n = space.n
    violations = []
    diag = np.diag(rho)
    if np.any(diag != 0):
        violations.append(f"nonzero diagonal at points {np.flatnonzero(diag != 0)[:10].tolist()}")
    off = ~np.eye(n, dtype=bool)
    if np.any(rho[off] <= 0):
        bad = np.argwhere((rho <= 0) & off)[:10]
        violations.append(f"zero distance between distinct points {bad.tolist()}")
    asym = np.abs(rho - rho.T) > tol * np.maximum(np.abs(rho), 1.0)
    if np.any(asym):
        bad = np.argwhere(asym)[:10]
        violations.append(f"asymmetric entries {bad.tolist()}")

    c0_obs = 0.0
    for y in range(n):
        denom = rho[:, y][:, None] + rho[y, :][None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(denom > 0, rho / denom, 0.0)
        c0_obs = max(c0_obs, float(ratio.max()))
    if c0_obs > space.c0 + tol:
        violations.append(f"quasi-triangle constant {c0_obs:.6g} exceeds declared c0={space.c0:.6g}")
    return QuasiMetricReport(c0_observed=c0_obs, violations=violations)


def geometric_radii(space: QuasiMetricSpace, ratio: float = 2.0) -> np.ndarray:
    """Radii ``diam * ratio**-i`` from just above the diameter down to the minimum separation."""
    if space.n == 1:
        return np.array([1.0])
    top = space.diameter * ratio
    lo = space.min_separation
    count = int(np.ceil(np.log(top / lo) / np.log(ratio))) + 1
    return top / ratio ** np.arange(count)


def doubling_constant(space: QuasiMetricSpace, radii=None) -> float:
    """``max |B(x, 2r)| / |B(x, r)|`` over all centers and the given radii."""
    radii = geometric_radii(space) if radii is None else np.asarray(radii, dtype=float)
    if radii.size == 0 or np.any(radii <= 0):
        raise ValueError("radius grid must be nonempty and positive")
    order, dist = space.sorted_rows
    cum = np.cumsum(space.mass[order], axis=1)
    best = 1.0
    for x in range(space.n):
        small = np.searchsorted(dist[x], radii, side="left")
        big = np.searchsorted(dist[x], 2 * radii, side="left")
        best = max(best, float(np.max(cum[x, big - 1] / cum[x, small - 1])))
    return best


# --- constructors -----------------------------------------------------------


def parse_metric(descriptor: str) -> tuple[str, float]:
    """Parse ``"euclidean"``, ``"snowflake:s"`` or ``"power:p"`` into (kind, exponent)."""
    kind, _, arg = descriptor.partition(":")
    kind = kind.strip().lower()
    if kind == "euclidean":
        return "power", 1.0
    if kind in ("snowflake", "power"):
        if not arg:
            raise ValueError(f"metric {descriptor!r} needs an exponent")
        p = float(arg)
        if p <= 0 or (kind == "snowflake" and p > 1):
            raise ValueError(f"bad exponent in metric {descriptor!r}")
        return "power", p
    raise ValueError(f"unknown metric descriptor {descriptor!r}")


def from_points(points, mass=None, metric: str = "euclidean", name: str = "") -> QuasiMetricSpace:
    """Build a space from coordinates with ``rho = |x - y| ** p``.

    ``c0`` is ``2 ** (p - 1)`` for ``p > 1`` and ``1`` otherwise.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    _, p = parse_metric(metric)
    diff = pts[:, None, :] - pts[None, :, :]
    rho = np.sqrt((diff**2).sum(axis=-1)) ** p
    if mass is None:
        mass = np.full(len(pts), 1.0 / len(pts))
    c0 = 2.0 ** (p - 1) if p > 1 else 1.0
    return QuasiMetricSpace(rho=rho, mass=mass, c0=c0, coords=pts, name=name or metric)


def from_distance_table(rho, mass=None, c0: float | None = None, name: str = "table") -> QuasiMetricSpace:
    rho = np.asarray(rho, dtype=float)
    if mass is None:
        mass = np.full(rho.shape[0], 1.0 / rho.shape[0])
    space = QuasiMetricSpace(rho=rho, mass=mass, c0=1.0 if c0 is None else c0, name=name)
    if c0 is None:
        observed = validate_quasimetric(space).c0_observed
        space = QuasiMetricSpace(rho=rho, mass=mass, c0=max(1.0, observed), name=name)
    return space


def uniform_grid(n: int, metric: str = "euclidean") -> QuasiMetricSpace:
    """Points ``i / n`` in ``[0, 1)`` with Lebesgue-like masses ``1 / n``."""
    return from_points(np.arange(n) / n, metric=metric, name=f"grid1d-{n}-{metric}")


def grid_2d(side: int, metric: str = "euclidean") -> QuasiMetricSpace:
    """``side x side`` lattice in ``[0, 1)^2`` with masses ``1 / side**2``."""
    g = np.arange(side) / side
    xx, yy = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return from_points(pts, metric=metric, name=f"grid2d-{side}x{side}-{metric}")


def snowflake_grid(n: int, s: float = 0.5) -> QuasiMetricSpace:
    return uniform_grid(n, metric=f"snowflake:{s}")


def power_grid(n: int, p: float = 2.0) -> QuasiMetricSpace:
    return uniform_grid(n, metric=f"power:{p}")


def random_cloud(n: int, dim: int = 2, seed: int = 0, metric: str = "euclidean") -> QuasiMetricSpace:
    """Uniform random points in the unit cube with integer masses in 1..4."""
    rng = np.random.default_rng(seed)
    pts = rng.random((n, dim))
    mass = rng.integers(1, 5, size=n).astype(float)
    return from_points(pts, mass=mass, metric=metric, name=f"cloud{dim}d-{n}-s{seed}")


def load_points_csv(path, metric: str = "euclidean") -> QuasiMetricSpace:
    """Read ``x1..xd,mass`` rows (a header row is skipped if present)."""
    rows = _read_numeric_csv(path)
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValueError(f"{path}: expected columns x1..xd,mass")
    return from_points(data[:, :-1], mass=data[:, -1], metric=metric, name=Path(path).stem)


def load_distance_csv(path, mass=None, c0: float | None = None) -> QuasiMetricSpace:
    rho = np.asarray(_read_numeric_csv(path), dtype=float)
    return from_distance_table(rho, mass=mass, c0=c0, name=Path(path).stem)


def _read_numeric_csv(path) -> list[list[float]]:
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if i == 0:
                    continue
                raise
    return rows
