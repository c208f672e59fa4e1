"""Maximal functions, weights and A2 characteristics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dyadic import DyadicSystem
from ..space import QuasiMetricSpace

__all__ = [
    "Weight",
    "power_weight",
    "maximal_function",
    "dyadic_maximal",
    "weighted_dyadic_maximal",
    "multi_dyadic_maximal",
    "a2_characteristic",
    "a2_dyadic",
    "MaximalNorm",
    "maximal_norm",
    "dyadic_maximal_operator",
]


@dataclass(frozen=True, eq=False)
class Weight:
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("weights must be finite and strictly positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def inverse(self) -> "Weight":
        return Weight(1.0 / self.values, label=f"1/({self.label})" if self.label else "")

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _values(w) -> np.ndarray:
    return w.values if isinstance(w, Weight) else np.asarray(w, dtype=float)


def power_weight(space: QuasiMetricSpace, alpha: float, pole=None) -> Weight:
    """``w(x) = |x - pole|**alpha`` (Euclidean distance in the coordinates).

    The default pole is the midpoint of the bounding box, moved by half the
    smallest coordinate step along the first axis if it hits a point.
    """
    if space.coords is None:
        raise ValueError("power weights need point coordinates")
    pts = space.coords
    d = pts.shape[1]
    if not -d < alpha < d:
        raise ValueError(f"alpha={alpha} leaves A2 in dimension {d}")
    if pole is None:
        pole = (pts.min(axis=0) + pts.max(axis=0)) / 2
        if np.any(np.all(pts == pole[None, :], axis=1)):
            steps = np.diff(np.unique(pts[:, 0]))
            pole[0] += 0.5 * (steps.min() if steps.size else 1.0)
    pole = np.atleast_1d(np.asarray(pole, dtype=float))
    dist = np.sqrt(((pts - pole[None, :]) ** 2).sum(axis=1))
    if np.any(dist == 0) and alpha != 0:
        raise ValueError("pole coincides with a point")
    return Weight(dist**alpha if alpha != 0 else np.ones(space.n), label=f"|x-p|^{alpha:g}")


def _prefix_ball_table(space: QuasiMetricSpace, values):
    """Cumulative sums of ``values * mass`` and of ``mass`` in distance order,
    plus a mask of prefixes that are genuine balls (complete tie groups)."""
    order, dist = space.sorted_rows
    m = space.mass[order]
    cm = np.cumsum(m, axis=1)
    cv = [np.cumsum(np.asarray(v)[order] * m, axis=1) for v in values]
    complete = np.ones(dist.shape, dtype=bool)
    complete[:, :-1] = dist[:, 1:] > dist[:, :-1]
    return cm, cv, complete, dist


def maximal_function(space: QuasiMetricSpace, f, radius_grid=None) -> np.ndarray:
    """Centered Hardy-Littlewood maximal function over open balls.

    With ``radius_grid=None`` every ball around every point is used (all
    distinct radii occur at pairwise distances).
    """
    g = np.abs(np.asarray(f, dtype=float))
    if radius_grid is None:
        cm, (cf,), complete, _ = _prefix_ball_table(space, [g])
        avg = np.where(complete, cf / cm, -np.inf)
        return avg.max(axis=1)
    radii = np.asarray(radius_grid, dtype=float)
    order, dist = space.sorted_rows
    m = space.mass[order]
    cm = np.cumsum(m, axis=1)
    cf = np.cumsum(g[order] * m, axis=1)
    out = np.empty(space.n)
    for x in range(space.n):
        p = np.searchsorted(dist[x], radii, side="left")
        p = p[p > 0]
        out[x] = np.max(cf[x, p - 1] / cm[x, p - 1]) if p.size else g[x]
    return out


def weighted_dyadic_maximal(system: DyadicSystem, space: QuasiMetricSpace, w, f) -> np.ndarray:
    """``sup_{Q containing x} (1 / w(Q)) sum_Q |f| w mass``."""
    wv = _values(w)
    g = np.abs(np.asarray(f, dtype=float))
    out = np.zeros(space.n)
    size = len(system.cubes)
    for lab in system.labels:
        num = np.bincount(lab, weights=g * wv * space.mass, minlength=size)
        den = np.bincount(lab, weights=wv * space.mass, minlength=size)
        out = np.maximum(out, num[lab] / den[lab])
    return out


def dyadic_maximal(system: DyadicSystem, space: QuasiMetricSpace, f) -> np.ndarray:
    return weighted_dyadic_maximal(system, space, np.ones(space.n), f)


def multi_dyadic_maximal(systems, space: QuasiMetricSpace, f, w=None) -> np.ndarray:
    """Pointwise max of the (weighted) dyadic maximal functions of several systems."""
    w = np.ones(space.n) if w is None else w
    out = np.zeros(space.n)
    for system in systems:
        out = np.maximum(out, weighted_dyadic_maximal(system, space, w, f))
    return out


def a2_characteristic(space: QuasiMetricSpace, w, radius_grid=None) -> float:
    """``sup_B (avg_B w)(avg_B 1/w)`` over all balls (or the given radii)."""
    wv = _values(w)
    if np.all(wv == wv[0]):
        return 1.0
    if radius_grid is None:
        cm, (cw, ci), complete, _ = _prefix_ball_table(space, [wv, 1.0 / wv])
        return float(np.max(np.where(complete, (cw / cm) * (ci / cm), 0.0)))
    radii = np.asarray(radius_grid, dtype=float)
    order, dist = space.sorted_rows
    m = space.mass[order]
    cm = np.cumsum(m, axis=1)
    cw = np.cumsum(wv[order] * m, axis=1)
    ci = np.cumsum(1.0 / wv[order] * m, axis=1)
    best = 0.0
    for x in range(space.n):
        p = np.searchsorted(dist[x], radii, side="left")
        p = p[p > 0] - 1
        if p.size:
            best = max(best, float(np.max(cw[x, p] * ci[x, p] / cm[x, p] ** 2)))
    return best


def a2_dyadic(system: DyadicSystem, space: QuasiMetricSpace, w) -> float:
    """``sup_Q (avg_Q w)(avg_Q 1/w)`` over the cubes of ``system``."""
    wv = _values(w)
    size = len(system.cubes)
    best = 0.0
    for lab in system.labels:
        m = np.bincount(lab, weights=space.mass, minlength=size)
        a = np.bincount(lab, weights=wv * space.mass, minlength=size)
        b = np.bincount(lab, weights=space.mass / wv, minlength=size)
        used = m > 0
        best = max(best, float(np.max(a[used] * b[used] / m[used] ** 2)))
    return best


@dataclass
class MaximalNorm:
    norm: float
    iterations: int
    best_start: str


def maximal_norm(
    maximal,
    space: QuasiMetricSpace,
    w,
    starts=None,
    seed: int = 0,
    iters: int = 60,
) -> MaximalNorm:
    """Lower estimate of ``||M||_{L2(w)}`` for a sublinear maximal operator.

    Each start ``f`` is improved by a linearized power step: the maximizing
    cube at each point freezes ``M`` into a positive linear map ``L``, and
    ``f`` is replaced by the ``L2(w)`` adjoint applied to ``L f``.  Every
    iterate's ratio ``||M f|| / ||f||`` is exact, so the reported value is
    a certified lower bound.  ``maximal(f)`` must return ``Mf`` together
    with the adjoint of the frozen linearization; see
    :func:`dyadic_maximal_operator`.
    """
    wv = _values(w)
    dm = wv * space.mass
    rng = np.random.default_rng(seed)
    if starts is None:
        starts = {
            "random": rng.random(space.n),
            "inverse-weight": 1.0 / wv,
            "constant": np.ones(space.n),
        }

    def ratio(f, Mf):
        return float(np.sqrt(np.sum(Mf**2 * dm) / np.sum(f**2 * dm)))

    best, best_name, total = 0.0, "", 0
    for name, f0 in starts.items():
        f = np.abs(np.asarray(f0, dtype=float))
        prev = 0.0
        for it in range(iters):
            Mf, adjoint = maximal(f)
            r = ratio(f, Mf)
            total += 1
            if r > best:
                best, best_name = r, name
            if abs(r - prev) <= 1e-12 * r:
                break
            prev = r
            f = adjoint(Mf)
            f = f / np.sqrt(np.sum(f**2 * dm))
    return MaximalNorm(norm=best, iterations=total, best_start=best_name)


def dyadic_maximal_operator(systems, space: QuasiMetricSpace, w):
    """``f -> (M_w f, adjoint of the frozen linearization)`` for the weighted
    dyadic maximal operator of one or several systems."""
    wv = _values(w)
    dm = wv * space.mass
    if isinstance(systems, DyadicSystem):
        systems = [systems]
    tables = []
    for s in systems:
        size = len(s.cubes)
        for lab in s.labels:
            den = np.bincount(lab, weights=dm, minlength=size)
            tables.append((lab, den, size))

    def apply(f):
        g = np.abs(f)
        best = np.zeros(space.n)
        arg = np.zeros(space.n, dtype=int)
        for i, (lab, den, size) in enumerate(tables):
            avg = np.bincount(lab, weights=g * dm, minlength=size)[lab] / den[lab]
            better = avg > best
            best = np.where(better, avg, best)
            arg = np.where(better, i, arg)

        def adjoint(h):
            # L f(x) = avg^w_{Q(x)} f, so L* h(y) = sum over x with y in Q(x) of h(x) w(x) m(x) / w(Q(x))
            out = np.zeros(space.n)
            for i, (lab, den, size) in enumerate(tables):
                sel = arg == i
                if not np.any(sel):
                    continue
                mass_h = np.bincount(lab[sel], weights=(h * dm)[sel], minlength=size)
                out += (mass_h / np.where(den > 0, den, 1.0))[lab]
            return out

        return best, adjoint

    return apply
