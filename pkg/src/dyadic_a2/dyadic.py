"""Dyadic decompositions of finite quasi-metric spaces.

Systems are built from nested nets: the level-``k`` centers are a maximal
``s * delta**k``-separated set (``s`` is the net scale) containing all level
``k - 1`` centers, picked greedily in a seeded order.  Each new center joins
its nearest coarser center (ties go to the smaller point index) and a cube
is the set of points whose chain of centers passes through it.  Nothing is
assumed about the result; :func:`verify_system` checks the five structural
properties exhaustively.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .space import Ball, QuasiMetricSpace, ball_members

__all__ = [
    "Cube",
    "DyadicSystem",
    "SystemReport",
    "AdjacentSystems",
    "CoverageError",
    "default_net_scale",
    "build_dyadic_system",
    "standard_dyadic_system",
    "shifted_dyadic_system",
    "verify_system",
    "dilate",
    "locate",
    "as_cube",
    "descendants",
    "cover_ball",
    "cover_table",
    "build_adjacent_systems",
    "system_to_json",
    "system_from_json",
]


@dataclass(frozen=True, eq=False)
class Cube:
    id: int
    level: int
    center: int
    members: np.ndarray
    parent: int | None
    children: tuple[int, ...]

    @property
    def size(self) -> int:
        return int(self.members.size)

    def __repr__(self):
        return f"Cube(id={self.id}, level={self.level}, center={self.center}, size={self.size})"


@dataclass(eq=False)
class DyadicSystem:
    cubes: list[Cube]
    labels: np.ndarray  # (levels, n): cube id containing each point
    k_min: int
    k_max: int
    delta: float
    cover_constant: float
    eps_observed: float
    diameters: np.ndarray
    net_scale: float = 1.0
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.labels.shape[1]

    @property
    def root(self) -> Cube:
        return self.cubes[0]

    @property
    def num_levels(self) -> int:
        return self.k_max - self.k_min + 1

    def _row(self, k: int) -> int:
        if not self.k_min <= k <= self.k_max:
            raise IndexError(f"level {k} outside [{self.k_min}, {self.k_max}]")
        return k - self.k_min

    def labels_at(self, k: int) -> np.ndarray:
        return self.labels[self._row(k)]

    def cubes_at(self, k: int) -> list[Cube]:
        return [self.cubes[i] for i in np.unique(self.labels_at(k))]

    def diam(self, cube) -> float:
        return float(self.diameters[as_cube(self, cube).id])

    def scale(self, cube) -> float:
        """``delta ** k(Q)``."""
        return self.delta ** as_cube(self, cube).level


@dataclass
class SystemReport:
    p1: bool
    p2: bool
    p3: bool
    p4: bool
    p5: bool
    c_observed: float
    inner_observed: float
    eps_observed: float
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.p1 and self.p2 and self.p3 and self.p4 and self.p5


class CoverageError(RuntimeError):
    """No cube of an adjacent family covers a ball within the allowed diameter."""

    def __init__(self, message, balls=()):
        super().__init__(message)
        self.balls = list(balls)


def as_cube(system: DyadicSystem, cube) -> Cube:
    return cube if isinstance(cube, Cube) else system.cubes[int(cube)]


def default_net_scale(delta: float, c0: float) -> float:
    """Smallest net scale (times 1.05) for which the nearest-center rule keeps
    ``B(center, delta**k)`` inside its cube."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    slack = 1.0 - 2.0 * c0**3 * delta / (1.0 - c0 * delta)
    if c0 * delta >= 1 or slack <= 0:
        raise ValueError(
            f"delta={delta} too large for c0={c0}; pass net_scale explicitly or lower delta"
        )
    return 1.05 * 2.0 * c0**2 / slack


def _natural_levels(space: QuasiMetricSpace, delta: float, s: float) -> tuple[int, int]:
    if space.n == 1:
        return 0, 0
    # coarsest level with a single center: s * delta**k > diam
    k_root = math.ceil(math.log(space.diameter / s) / math.log(delta)) - 1
    while s * delta ** (k_root + 1) > space.diameter:
        k_root += 1
    while s * delta**k_root <= space.diameter:
        k_root -= 1
    # finest level needed for singletons: s * delta**k <= min separation
    k_leaf = math.ceil(math.log(space.min_separation / s) / math.log(delta))
    while s * delta ** (k_leaf - 1) <= space.min_separation:
        k_leaf -= 1
    while s * delta**k_leaf > space.min_separation:
        k_leaf += 1
    return k_root, max(k_leaf, k_root)


def _point_order(n: int, seed, order) -> np.ndarray:
    if order is None:
        return np.random.default_rng(seed).permutation(n)
    if isinstance(order, str):
        if order == "index":
            return np.arange(n)
        if order == "random":
            return np.random.default_rng(seed).permutation(n)
        raise ValueError(f"unknown order {order!r}")
    order = np.asarray(order, dtype=int)
    if sorted(order.tolist()) != list(range(n)):
        raise ValueError("order must be a permutation of the points")
    return order


def build_dyadic_system(
    space: QuasiMetricSpace,
    delta: float = 0.125,
    k_min: int | None = None,
    k_max: int | None = None,
    seed: int | None = 0,
    order=None,
    net_scale: float | None = None,
) -> DyadicSystem:
    """Build a dyadic system from greedy nested nets.

    ``order`` is ``None``/``"random"`` (seeded permutation), ``"index"`` or an
    explicit permutation of the points.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if delta > 1.0 / (8 * space.c0**2):
        warnings.warn(
            f"delta={delta} exceeds 1/(8 c0^2); the dyadic properties are only checked post hoc",
            stacklevel=2,
        )
    s = default_net_scale(delta, space.c0) if net_scale is None else float(net_scale)
    n = space.n
    rho = space.rho
    k_root, k_leaf = _natural_levels(space, delta, s)
    k_min = k_root if k_min is None else k_min
    k_max = k_leaf if k_max is None else k_max
    if k_min > k_root:
        raise ValueError(f"k_min={k_min} too fine: the coarsest level needs k <= {k_root}")
    if k_max < k_min:
        raise ValueError("k_max must be >= k_min")
    if k_max < k_leaf:
        warnings.warn(f"k_max={k_max} < {k_leaf}: leaves are not singletons", stacklevel=2)

    perm = _point_order(n, seed, order)
    levels = list(range(k_min, k_max + 1))
    in_net = np.zeros(n, dtype=bool)
    dmin = np.full(n, np.inf)
    parent_of = []  # per level: dict new point -> coarser center
    nets = []
    for k in levels:
        r = s * delta**k
        prev = np.flatnonzero(in_net)
        added = []
        for y in perm:
            if not in_net[y] and dmin[y] >= r:
                in_net[y] = True
                added.append(y)
                dmin = np.minimum(dmin, rho[y])
        added = np.array(sorted(added), dtype=int)
        link = {}
        if prev.size and added.size:
            nearest = prev[np.argmin(rho[np.ix_(added, prev)], axis=1)]
            link = dict(zip(added.tolist(), nearest.tolist()))
        parent_of.append(link)
        nets.append(np.flatnonzero(in_net))

    # owners at the finest level: nearest center (each net point owns itself)
    finest = nets[-1]
    owner = finest[np.argmin(rho[:, finest], axis=1)]
    owner[finest] = finest
    owners = [owner]
    for i in range(len(levels) - 1, 0, -1):
        link = parent_of[i]
        owner = np.array([link.get(c, c) for c in owner], dtype=int)
        owners.append(owner)
    owners.reverse()
    return _assemble(space, np.array(owners), k_min, delta, net_scale=s, seed=seed)


def _assemble(space, owners, k_min, delta, net_scale=1.0, seed=None, cover_constant=None) -> DyadicSystem:
    """Turn per-level owner arrays (center index of each point's cube) into a system."""
    n_levels, n = owners.shape
    labels = np.empty_like(owners)
    cubes_raw = []  # (level, center, members)
    for i in range(n_levels):
        centers, inv = np.unique(owners[i], return_inverse=True)
        base = len(cubes_raw)
        labels[i] = base + inv
        order = np.argsort(inv, kind="stable")
        splits = np.cumsum(np.bincount(inv, minlength=centers.size))[:-1]
        for c, mem in zip(centers, np.split(order, splits)):
            cubes_raw.append((k_min + i, int(c), np.sort(mem)))

    parents = [None] * len(cubes_raw)
    children = [[] for _ in cubes_raw]
    for cid, (k, c, mem) in enumerate(cubes_raw):
        if k > k_min:
            p = int(labels[k - k_min - 1][mem[0]])
            parents[cid] = p
            children[p].append(cid)

    cubes = []
    diam = np.zeros(len(cubes_raw))
    c_obs = 0.0
    eps = 1.0
    for cid, (k, c, mem) in enumerate(cubes_raw):
        mem.setflags(write=False)
        cubes.append(Cube(cid, k, c, mem, parents[cid], tuple(children[cid])))
        if mem.size > 1:
            diam[cid] = float(space.rho[np.ix_(mem, mem)].max())
        c_obs = max(c_obs, float(space.rho[c, mem].max()) / delta**k)
        if parents[cid] is not None:
            pm = cubes_raw[parents[cid]][2]
            eps = min(eps, space.mass[mem].sum() / space.mass[pm].sum())
    if cover_constant is None:
        cover_constant = c_obs * (1 + 1e-9) if c_obs > 0 else 1.0
    return DyadicSystem(
        cubes=cubes,
        labels=labels,
        k_min=k_min,
        k_max=k_min + n_levels - 1,
        delta=delta,
        cover_constant=cover_constant,
        eps_observed=float(eps),
        diameters=diam,
        net_scale=net_scale,
        seed=seed,
    )


def _interval_system(space, starts_for_level, m_min, m_max, delta=0.5):
    """1-D interval systems; ``starts_for_level(m)`` gives sorted left endpoints at level m."""
    if space.coords is None or space.coords.shape[1] != 1:
        raise ValueError("interval systems need a one-dimensional space")
    x = space.coords[:, 0]
    owners = []
    for m in range(m_min, m_max + 1):
        starts = starts_for_level(m)
        slot = np.searchsorted(starts, x, side="right") - 1
        owner = np.empty(space.n, dtype=int)
        for sl in np.unique(slot):
            mem = np.flatnonzero(slot == sl)
            mid = starts[sl] + 0.5 * 2.0**-m
            owner[mem] = mem[np.argmin(np.abs(x[mem] - mid))]
        owners.append(owner)
    return np.array(owners)


def standard_dyadic_system(space: QuasiMetricSpace) -> DyadicSystem:
    """Standard dyadic intervals on a grid ``i / 2**p`` of ``[0, 1)``.

    An interval of length ``2**-m`` sits at level ``m + 1`` with ``delta = 1/2``
    and is centered at the grid point nearest its midpoint, so
    ``B(center, 2**-(m+1))`` lies inside it.
    """
    n = space.n
    p = int(round(math.log2(n)))
    if 2**p != n or not np.allclose(space.coords[:, 0], np.arange(n) / n):
        raise ValueError("standard dyadic system needs the grid i/2**p on [0, 1)")
    owners = _interval_system(space, lambda m: np.arange(2**m) / 2.0**m, 0, p)
    return _assemble(space, owners, k_min=1, delta=0.5)


def shifted_dyadic_system(space: QuasiMetricSpace, shift: float = 1.0 / 3) -> DyadicSystem:
    """Intervals ``2**-m [j + (-1)**m shift, j + 1 + (-1)**m shift)`` restricted to a 1-D space."""
    x = space.coords[:, 0]
    lo, hi = float(x.min()), float(x.max())
    span = max(hi - lo, 1e-300)
    gaps = np.diff(np.sort(x))
    min_gap = float(gaps.min()) if gaps.size else 1.0

    def starts(m):
        step = 2.0**-m
        off = (-1) ** (m % 2) * shift * step
        j0 = math.floor((lo - off) / step) - 1
        j1 = math.ceil((hi - off) / step) + 1
        return np.arange(j0, j1 + 1) * step + off

    m = math.floor(-math.log2(span)) - 1
    while len(np.unique(np.searchsorted(starts(m), x, side="right"))) > 1:
        m -= 1
    m_min = m
    m = max(m_min, 0)
    while True:
        slots = np.searchsorted(starts(m), x, side="right")
        if len(np.unique(slots)) == space.n or 2.0**-m < min_gap / 4:
            break
        m += 1
    owners = _interval_system(space, starts, m_min, m)
    return _assemble(space, owners, k_min=m_min + 1, delta=0.5)


def verify_system(system: DyadicSystem, space: QuasiMetricSpace, inner_scale: float = 1.0) -> SystemReport:
    """Exhaustively check the five dyadic properties from the cube member lists.

    p5 is checked as ``B(x_c, inner_scale * delta**k) subset Q subset B(x_c, C delta**k)``.
    """
    n = space.n
    rho = space.rho
    violations = []
    levels = {}
    for cube in system.cubes:
        levels.setdefault(cube.level, []).append(cube)
    ks = sorted(levels)

    # p1: every level covers the space; also build per-level point labels
    p1 = True
    level_labels = {}
    for k in ks:
        lab = np.full(n, -1)
        hits = np.zeros(n, dtype=int)
        for cube in levels[k]:
            lab[cube.members] = cube.id
            hits[cube.members] += 1
        if np.any(hits == 0):
            p1 = False
            violations.append(f"p1: level {k} misses points {np.flatnonzero(hits == 0)[:10].tolist()}")
        level_labels[k] = (lab, hits)

    # p2: disjoint or nested; parent containment via grouped label ranges
    p2 = True
    for k in ks:
        lab, hits = level_labels[k]
        if np.any(hits > 1):
            p2 = False
            violations.append(f"p2: overlapping cubes at level {k}, points {np.flatnonzero(hits > 1)[:10].tolist()}")
    for i, k in enumerate(ks):
        for k2 in ks[:i]:
            ids, lo, hi = _group_range(level_labels[k][0], level_labels[k2][0])
            for cid in ids[lo != hi][:5]:
                p2 = False
                violations.append(f"p2: cube {cid} (level {k}) straddles level-{k2} cubes")

    # p3: every cube has a child below and exactly one parent above
    # p4: child measure ratio
    p3 = True
    eps = 1.0
    cube_mass = {c.id: space.mass[c.members].sum() for c in system.cubes}
    for i, k in enumerate(ks):
        if i + 1 < len(ks):
            ids, lo, hi = _group_range(level_labels[ks[i + 1]][0], level_labels[k][0])
            nested = lo == hi
            has_child = set(lo[nested].tolist())
            for cube in levels[k]:
                if cube.id not in has_child:
                    p3 = False
                    violations.append(f"p3: cube {cube.id} has no child")
            for cid, pid in zip(ids[nested], lo[nested]):
                if cid >= 0 and pid >= 0:
                    eps = min(eps, cube_mass[int(cid)] / cube_mass[int(pid)])
        if i > 0:
            ids, lo, hi = _group_range(level_labels[k][0], level_labels[ks[i - 1]][0])
            for cid in ids[lo != hi][:5]:
                p3 = False
                violations.append(f"p3: cube {cid} has more than one parent")
    p4 = eps > 0 and eps >= system.eps_observed * (1 - 1e-12)
    if not p4:
        violations.append(f"p4: child ratio {eps:.3g} below recorded eps {system.eps_observed:.3g}")

    # p5: ball sandwich
    p5 = True
    c_obs = 0.0
    inner_obs = np.inf
    for cube in system.cubes:
        scale = system.delta**cube.level
        row = rho[cube.center]
        inside = np.zeros(n, dtype=bool)
        inside[cube.members] = True
        if not inside[cube.center]:
            p5 = False
            violations.append(f"p5: center of cube {cube.id} is not a member")
        c_obs = max(c_obs, float(row[cube.members].max()) / scale)
        if np.any(~inside):
            inner_obs = min(inner_obs, float(row[~inside].min()) / scale)
        if np.any(row[~inside] < inner_scale * scale):
            p5 = False
            violations.append(f"p5: inner ball of cube {cube.id} leaves the cube")
        if np.any(row[cube.members] >= system.cover_constant * scale):
            p5 = False
            violations.append(f"p5: cube {cube.id} not inside B(x_c, C delta^k)")
    return SystemReport(p1, p2, p3, p4, p5, c_obs, float(inner_obs), float(eps), violations)


def _group_range(groups: np.ndarray, values: np.ndarray):
    """Per group of ``groups``: (group id, min value, max value)."""
    order = np.lexsort((values, groups))
    g = groups[order]
    v = values[order]
    starts = np.flatnonzero(np.r_[True, g[1:] != g[:-1]])
    ends = np.r_[starts[1:], g.size] - 1
    return g[starts], v[starts], v[ends]


def dilate(system: DyadicSystem, cube, lam: float) -> Ball:
    """The dilated set ``B(x_c(Q), lam * C * delta**k(Q))``."""
    if not lam > 1:
        raise ValueError("dilation factor must exceed 1")
    cube = as_cube(system, cube)
    return Ball(cube.center, lam * system.cover_constant * system.delta**cube.level)


def locate(system: DyadicSystem, x: int, k: int) -> Cube:
    """The unique level-``k`` cube containing point ``x``."""
    cid = system.labels_at(k)[x]
    cube = system.cubes[cid]
    assert cube.level == k and np.any(cube.members == x), "point not carried at this level"
    return cube


def descendants(system: DyadicSystem, cube, strict: bool = True) -> list[Cube]:
    """Cubes inside ``cube`` at its level and below, coarse to fine."""
    cube = as_cube(system, cube)
    out = []
    for k in range(cube.level + (1 if strict else 0), system.k_max + 1):
        out.extend(system.cubes[i] for i in np.unique(system.labels_at(k)[cube.members]))
    return out


# --- adjacent systems ---------------------------------------------------------


@dataclass(eq=False)
class AdjacentSystems:
    systems: list[DyadicSystem]
    d_constant: float
    seeds: list[int] = field(default_factory=list)

    @property
    def J(self) -> int:
        return len(self.systems)


def _smallest_cover(system: DyadicSystem, members: np.ndarray) -> Cube:
    lab = system.labels[:, members]
    same = np.all(lab == lab[:, :1], axis=1)
    row = int(np.flatnonzero(same)[-1])
    return system.cubes[int(lab[row, 0])]


def cover_ball(adjacent: AdjacentSystems, space: QuasiMetricSpace, ball: Ball, check: bool = True):
    """Smallest-diameter cube over all systems containing ``ball``.

    Returns ``(j, cube)``.  Raises :class:`CoverageError` when the best
    diameter exceeds ``D * radius``.
    """
    members = ball_members(space, ball)
    best = None
    for j, system in enumerate(adjacent.systems):
        cube = _smallest_cover(system, members)
        d = system.diam(cube)
        if best is None or d < best[2]:
            best = (j, cube, d)
    j, cube, d = best
    if check and d > adjacent.d_constant * ball.radius * (1 + 1e-12):
        raise CoverageError(
            f"ball (center={ball.center}, r={ball.radius:.4g}) needs diameter ratio "
            f"{d / ball.radius:.4g} > D={adjacent.d_constant:.4g}",
            balls=[ball],
        )
    return j, cube


def cover_table(system: DyadicSystem, space: QuasiMetricSpace) -> np.ndarray:
    """Diameter of the smallest cube covering each ball.

    Entry ``[x, p - 1]`` is for the ball made of the ``p`` nearest points of
    ``x`` (distance order of :attr:`QuasiMetricSpace.sorted_rows`).
    """
    order, _ = space.sorted_rows
    n = space.n
    out = np.empty((n, n))
    ar = np.arange(n)
    for row in range(system.num_levels):
        lab = system.labels[row][order]
        differs = lab != lab[:, :1]
        reach = np.where(differs.any(axis=1), np.argmax(differs, axis=1), n)
        d = system.diameters[system.labels[row]]
        mask = ar[None, :] < reach[:, None]
        out[mask] = np.broadcast_to(d[:, None], (n, n))[mask]
    return out


def _ball_ratios(table: np.ndarray, space: QuasiMetricSpace, radii=None):
    """Diameter-to-radius ratios for the battery (all balls when ``radii`` is None)."""
    order, dist = space.sorted_rows
    n = space.n
    if radii is None:
        # prefix p is a ball iff its tie group is complete; worst radius is just above dist[p-1]
        complete = np.ones((n, n), dtype=bool)
        complete[:, :-1] = dist[:, 1:] > dist[:, :-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0, table / dist, np.where(table > 0, np.inf, 0.0))
        return np.where(complete, ratio, 0.0)
    radii = np.asarray(radii, dtype=float)
    out = np.empty((n, radii.size))
    for x in range(n):
        p = np.searchsorted(dist[x], radii, side="left")
        out[x] = table[x, p - 1] / radii
    return out


def build_adjacent_systems(
    space: QuasiMetricSpace,
    delta: float = 0.125,
    trials: int = 16,
    seed: int = 0,
    d_target: float = 64.0,
    radii=None,
    net_scale: float | None = None,
    base: DyadicSystem | None = None,
) -> AdjacentSystems:
    """Randomized adjacent family: add seeded systems until every battery ball
    is covered by some cube of diameter at most ``d_target * r``.

    The battery is every ball of the space when ``radii`` is None, otherwise all
    centers times ``radii``.  ``base`` (if given) is tried first.  The recorded
    ``D`` is the largest ratio actually needed.
    """
    systems, seeds = [], []
    best = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        candidates = ([(None, base)] if base is not None else []) + [
            (seed + t, None) for t in range(trials)
        ]
        for s, system in candidates:
            if system is None:
                system = build_dyadic_system(space, delta, seed=s, net_scale=net_scale)
            ratio = _ball_ratios(cover_table(system, space), space, radii)
            if best is None:
                improved = True
                best = ratio
            else:
                newbest = np.minimum(best, ratio)
                improved = np.count_nonzero(newbest > d_target) < np.count_nonzero(best > d_target)
                if improved:
                    best = newbest
            if improved:
                systems.append(system)
                seeds.append(system.seed)
            if not np.any(best > d_target):
                break
    bad = np.argwhere(best > d_target)
    if bad.size:
        balls = [(int(x), int(p)) for x, p in bad[:20]]
        raise CoverageError(
            f"{len(bad)} battery balls uncovered at D={d_target} after {trials} trials; "
            f"first (center, index): {balls[:5]}",
            balls=balls,
        )
    return AdjacentSystems(systems=systems, d_constant=float(best.max()), seeds=seeds)


# --- JSON ---------------------------------------------------------------------


def system_to_json(system: DyadicSystem) -> dict:
    return {
        "delta": system.delta,
        "k_min": system.k_min,
        "k_max": system.k_max,
        "cover_constant": system.cover_constant,
        "eps_observed": system.eps_observed,
        "net_scale": system.net_scale,
        "seed": system.seed,
        "n": system.n,
        "levels": [
            {
                "k": k,
                "cubes": [
                    {"id": c.id, "center": c.center, "parent": c.parent, "members": c.members.tolist()}
                    for c in system.cubes_at(k)
                ],
            }
            for k in range(system.k_min, system.k_max + 1)
        ],
    }


def system_from_json(data: dict, space: QuasiMetricSpace) -> DyadicSystem:
    if data["n"] != space.n:
        raise ValueError("system and space sizes differ")
    owners = []
    for level in data["levels"]:
        owner = np.full(space.n, -1)
        for c in level["cubes"]:
            owner[np.asarray(c["members"], dtype=int)] = c["center"]
        owners.append(owner)
    owners = np.array(owners)
    if np.any(owners < 0):
        raise ValueError("levels in the snapshot do not cover the space")
    system = _assemble(
        space,
        owners,
        data["k_min"],
        data["delta"],
        net_scale=data.get("net_scale", 1.0),
        seed=data.get("seed"),
        cover_constant=data["cover_constant"],
    )
    return system
