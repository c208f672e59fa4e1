"""Randomized checks of the median and omega_lambda properties.

Cases are stored as padded blocks: row ``i`` holds ``sizes[i]`` real points
followed by zero-mass padding, so a whole lemma is evaluated with a few
vectorized calls.  Zero-mass points never influence a distribution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..dyadic import build_dyadic_system
from ..median import median as true_median
from ..median import omega_lambda
from ..space import uniform_grid

__all__ = [
    "CaseBlock",
    "LemmaResult",
    "make_block",
    "min_window_radius",
    "nonsubadditive_example",
    "LEMMAS",
    "run_median_lemmas",
    "mutant_positive_sup",
    "mutant_off_by_one",
    "mutation_self_test",
]

WIDTH = 32


@dataclass
class CaseBlock:
    f: np.ndarray
    g: np.ndarray
    mass: np.ndarray
    lam: np.ndarray
    c: np.ndarray
    live: np.ndarray  # bool mask of real points

    def __len__(self):
        return self.f.shape[0]

    def row(self, i: int) -> dict:
        keep = self.live[i]
        return {
            "f": self.f[i, keep].tolist(),
            "g": self.g[i, keep].tolist(),
            "mass": self.mass[i, keep].tolist(),
            "lam": float(self.lam[i]),
            "c": float(self.c[i]),
        }


@dataclass
class LemmaResult:
    lemma: str
    cases: int
    violations: int
    worst_margin: float  # max (lhs - rhs) / scale, negative when strictly satisfied
    first_failure: int  # case index, -1 when none
    seed: int


def _values(rng, shape):
    """Mixture of tie-heavy integers, Gaussians and heavy-tailed values."""
    kind = rng.integers(0, 3, size=(shape[0], 1))
    ints = rng.integers(-4, 5, size=shape).astype(float)
    gauss = rng.standard_normal(shape)
    heavy = rng.standard_cauchy(shape)
    scale = 10.0 ** rng.integers(-3, 4, size=(shape[0], 1))
    return np.where(kind == 0, ints, np.where(kind == 1, gauss, heavy)) * scale


def make_block(n_cases: int, seed: int, width: int = WIDTH) -> CaseBlock:
    rng = np.random.default_rng(seed)
    sizes = rng.integers(1, width + 1, size=n_cases)
    live = np.arange(width)[None, :] < sizes[:, None]
    equal = rng.random(n_cases) < 0.5
    mass = np.where(equal[:, None], 1.0, rng.integers(1, 6, size=(n_cases, width)).astype(float))
    mass = np.where(live, mass, 0.0)
    f = np.where(live, _values(rng, (n_cases, width)), 0.0)
    g = np.where(live, _values(rng, (n_cases, width)), 0.0)
    lam = rng.choice(np.r_[np.arange(1, 20) / 20, rng.random(8)], size=n_cases)
    c = _values(rng, (n_cases, 1))[:, 0]
    return CaseBlock(f, g, mass, lam, c, live)


# --- exact helpers -------------------------------------------------------------


def _fraction_below(values, mass, a, strict=True):
    hit = values < a[:, None] if strict else values <= a[:, None]
    return np.sum(np.where(hit, mass, 0.0), axis=1), np.sum(mass, axis=1)


def _weak_norm_normalized(h, mass):
    """``sup_a a mu(|h| > a)`` per row with normalized measure."""
    h = np.abs(h)
    order = np.argsort(-h, axis=1, kind="stable")
    v = np.take_along_axis(h, order, axis=1)
    m = np.take_along_axis(mass, order, axis=1)
    cum = np.cumsum(m, axis=1)
    last = np.ones_like(v, dtype=bool)
    last[:, :-1] = v[:, 1:] != v[:, :-1]
    val = np.where(last & (m >= 0), v * cum, 0.0)
    return val.max(axis=1) / mass.sum(axis=1)


def min_window_radius(values, mass, lam):
    """``inf_c omega_lam(|f - c|)`` and a minimizer, per row.

    ``omega_lam(|f - c|)`` is the smallest ``r`` with ``mu(|f - c| <= r) > 1 - lam``,
    so the optimum is the shortest window ``[v_i, v_j]`` of sorted values
    holding more than ``1 - lam`` of the mass, centered at its midpoint.
    """
    order = np.argsort(values, axis=1, kind="stable")
    v = np.take_along_axis(values, order, axis=1)
    m = np.take_along_axis(mass, order, axis=1)
    cum = np.cumsum(m, axis=1)
    total = cum[:, -1:]
    need = (1.0 - np.asarray(lam, dtype=float))[:, None] * total
    before = cum - m  # mass strictly before position i
    n, w = v.shape
    best = np.full(n, np.inf)
    center = np.zeros(n)
    for i in range(w):
        target = before[:, i : i + 1] + need
        j = np.argmax(cum > target, axis=1)
        ok = (cum[np.arange(n), j] > target[:, 0]) & (m[:, i] > 0) & (j >= i)
        r = (v[np.arange(n), j] - v[:, i]) / 2
        better = ok & (r < best)
        best = np.where(better, r, best)
        center = np.where(better, (v[np.arange(n), j] + v[:, i]) / 2, center)
    return best, center


# --- lemma definitions ------------------------------------------------------------
# Each returns (lhs, rhs, scale); the case passes when lhs - rhs <= tol * scale.


def _l32(b, med):
    m = med(b.f, b.mass)
    below, total = _fraction_below(b.f, b.mass, m)
    return below, 0.5 * total, total


def _l33(b, med):
    m = med(b.f, b.mass)
    below, total = _fraction_below(b.f, b.mass, m, strict=False)
    return 0.5 * total, below, total


def _l34(b, med):
    bump = np.abs(b.g) * (np.abs(b.g) > 0.5)
    upper = b.f + bump
    return med(b.f, b.mass), med(upper, b.mass), _scale(b.f, upper)


def _l35(b, med):
    return np.abs(med(b.f, b.mass)), med(np.abs(b.f), b.mass), _scale(b.f)


def _l36(b, med):
    shifted = b.f - b.c[:, None]
    lhs = np.abs(med(shifted, b.mass) - (med(b.f, b.mass) - b.c))
    return lhs, np.zeros_like(lhs), _scale(b.f, shifted)


def _l37(b, med):
    m = med(b.f, b.mass)
    lhs = med(np.abs(b.f - m[:, None]), b.mass)
    _, c = min_window_radius(_masked(b.f, b.live), b.mass, np.full(len(b), 0.5))
    rhs = 2 * med(np.abs(b.f - c[:, None]), b.mass)
    return lhs, rhs, _scale(b.f)


def _omega_analogues(b, med):
    """The omega_lam versions of the three distribution facts, combined."""
    w = omega_lambda(b.f, b.mass, b.lam)
    below, total = _fraction_below(b.f, b.mass, w)
    at_most, _ = _fraction_below(b.f, b.mass, w, strict=False)
    upper = b.f + np.abs(b.g)
    gap_a = below - (1 - b.lam) * total
    gap_b = (1 - b.lam) * total - at_most
    gap_c = (omega_lambda(b.f, b.mass, b.lam) - omega_lambda(upper, b.mass, b.lam)) / _scale(b.f, upper) * total
    lhs = np.maximum(np.maximum(gap_a, gap_b), gap_c)
    return lhs, np.zeros_like(lhs), total


def _l310(b, med):
    sup = np.max(np.where(b.live, np.abs(b.f - b.g), 0.0), axis=1)
    lhs = omega_lambda(np.abs(b.f), b.mass, b.lam)
    rhs = sup + omega_lambda(np.abs(b.g), b.mass, b.lam)
    return lhs, rhs, _scale(b.f, b.g)


def _changing_constant_w(b, med):
    lam = np.minimum(b.lam, 0.5)
    m = med(b.f, b.mass)
    lhs = omega_lambda(np.abs(b.f - m[:, None]), b.mass, lam)
    _, c = min_window_radius(_masked(b.f, b.live), b.mass, lam)
    rhs = 2 * omega_lambda(np.abs(b.f - c[:, None]), b.mass, lam)
    return lhs, rhs, _scale(b.f)


def _wtomaximal(b, med):
    lhs = b.lam * omega_lambda(np.abs(b.f), b.mass, b.lam)
    rhs = np.sum(np.abs(b.f) * b.mass, axis=1) / b.mass.sum(axis=1)
    return lhs, rhs, _scale(b.f)


def _wtoweak(b, med):
    lhs = omega_lambda(np.abs(b.f), b.mass, b.lam)
    rhs = _weak_norm_normalized(b.f, b.mass) / b.lam
    return lhs, rhs, _scale(b.f)


def _lambda_monotone(b, med):
    lam2 = b.lam + (1 - b.lam) * np.abs(np.tanh(b.c))
    lam2 = np.clip(lam2, b.lam, 1 - 1e-9)
    gap = omega_lambda(b.f, b.mass, lam2) - omega_lambda(b.f, b.mass, b.lam)
    low = np.minimum(b.lam, 0.5)
    gap2 = med(b.f, b.mass) - omega_lambda(b.f, b.mass, low)
    lhs = np.maximum(gap, gap2)
    return lhs, np.zeros_like(lhs), _scale(b.f)


_LDT_CACHE = {}


def _ldt_system():
    if "sys" not in _LDT_CACHE:
        space = uniform_grid(WIDTH * 2)
        _LDT_CACHE["sys"] = (space, build_dyadic_system(space, 0.125, seed=0))
    return _LDT_CACHE["sys"]


def _ldt(b, med):
    """Along the chain Q_k(x): ``|omega(f, Q_k) - f(x)| <= avg_{Q_k} |f - f(x)| / min(lam, 1 - lam)``,
    with ``omega(f, Q_k) = f(x)`` once ``Q_k`` is a singleton.

    A positive ``omega_lam(f - f(x))`` is bounded through Chebyshev with
    ``lam``; a negative one leaves mass ``>= 1 - lam`` below it, which brings
    in ``1 - lam``.
    """
    space, system = _ldt_system()
    n = space.n
    f = np.concatenate([b.f, b.g], axis=1)[:, :n]
    x = (np.abs(b.c * 1e3).astype(np.int64)) % n
    fx = f[np.arange(len(b)), x]
    worst = np.full(len(b), -np.inf)
    for k in range(system.k_min, system.k_max + 1):
        lab = system.labels_at(k)
        own = lab[x]
        inside = lab[None, :] == own[:, None]
        mass = np.where(inside, space.mass[None, :], 0.0)
        w = omega_lambda(f, mass, b.lam)
        avg = np.sum(np.abs(f - fx[:, None]) * mass, axis=1) / mass.sum(axis=1)
        worst = np.maximum(worst, np.abs(w - fx) - avg / np.minimum(b.lam, 1 - b.lam))
    leaf = system.labels_at(system.k_max)
    single = np.array([system.cubes[c].size == 1 for c in leaf[x]])
    mass = np.where(leaf[None, :] == leaf[x][:, None], space.mass[None, :], 0.0)
    exact = np.where(single, np.abs(omega_lambda(f, mass, b.lam) - fx), 0.0)
    lhs = np.maximum(worst, exact)
    return lhs, np.zeros_like(lhs), _scale(f)


def _masked(values, live):
    return np.where(live, values, 0.0)


def _scale(*arrays):
    s = np.zeros(arrays[0].shape[0])
    for a in arrays:
        s = np.maximum(s, np.max(np.abs(a), axis=1))
    return np.maximum(s, 1e-300)


LEMMAS: dict[str, Callable] = {
    "median_attained": _l32,
    "median_upper_mass": _l33,
    "median_monotone": _l34,
    "median_abs": _l35,
    "median_shift": _l36,
    "median_recentering": _l37,
    "omega_analogues": _omega_analogues,
    "omega_sup_perturbation": _l310,
    "omega_recentering": _changing_constant_w,
    "omega_chebyshev": _wtomaximal,
    "omega_weak": _wtoweak,
    "omega_differentiation": _ldt,
    "omega_lambda_monotone": _lambda_monotone,
}


def run_median_lemmas(n_cases: int = 10_000, seed: int = 0, tol: float = 1e-12, med=None, lemmas=None) -> list[LemmaResult]:
    med = true_median if med is None else med
    results = []
    for idx, name in enumerate(lemmas or LEMMAS):
        block_seed = seed * 1000 + idx
        block = make_block(n_cases, block_seed)
        lhs, rhs, scale = LEMMAS[name](block, med)
        margin = (np.asarray(lhs, dtype=float) - np.asarray(rhs, dtype=float)) / scale
        bad = np.flatnonzero(margin > tol)
        results.append(
            LemmaResult(
                lemma=name,
                cases=n_cases,
                violations=int(bad.size),
                worst_margin=float(np.max(margin)),
                first_failure=int(bad[0]) if bad.size else -1,
                seed=block_seed,
            )
        )
    return results


# --- worked example -------------------------------------------------------------------


def nonsubadditive_example(n: int = 1000) -> dict:
    """The two step functions whose medians are 1/4 but whose sum has median 5/4."""
    x = np.arange(n) / (n - 1)
    f = 1.0 * (x <= 3 / 8) + 0.25 * (x >= 3 / 8)
    g = 0.25 * (x <= 5 / 8) + 1.0 * (x >= 5 / 8)
    mass = np.full(n, 1.0 / n)
    return {
        "m_f": float(true_median(f, mass)),
        "m_g": float(true_median(g, mass)),
        "m_fg": float(true_median(f + g, mass)),
        "F_f_half": float(np.sum(mass[f < 0.5])),
    }


# --- mutants ----------------------------------------------------------------------------


def mutant_positive_sup(f, mass=None):
    """Median restricted to ``a > 0`` (empty sup read as 0)."""
    return np.maximum(true_median(f, mass), 0.0)


def mutant_off_by_one(f, mass=None):
    """Takes the sorted value one position after the true median."""
    f = np.asarray(f, dtype=float)
    units = np.ones_like(f) if mass is None else np.broadcast_to(np.asarray(mass, dtype=float), f.shape)
    order = np.argsort(f, axis=-1, kind="stable")
    vals = np.take_along_axis(f, order, axis=-1)
    cum = np.cumsum(np.take_along_axis(units, order, axis=-1), axis=-1)
    first = np.argmax(cum > 0.5 * cum[..., -1:], axis=-1)
    live = np.take_along_axis(units, order, axis=-1) > 0
    # next position carrying mass, if any
    idx = np.arange(f.shape[-1])
    nxt = np.where(live & (idx > first[..., None]), idx, f.shape[-1])
    pick = np.minimum(nxt.min(axis=-1), f.shape[-1] - 1)
    pick = np.where(np.take_along_axis(live, pick[..., None], axis=-1)[..., 0], pick, first)
    return np.take_along_axis(vals, pick[..., None], axis=-1)[..., 0]


def mutation_self_test(max_cases: int = 100, seed: int = 0) -> dict[str, dict[str, int]]:
    """Run the median lemmas against deliberately wrong medians; returns, per
    mutant, the violation count of each lemma within ``max_cases`` cases."""
    out = {}
    for name, mutant in (("positive_sup", mutant_positive_sup), ("off_by_one", mutant_off_by_one)):
        res = run_median_lemmas(max_cases, seed=seed, med=mutant, lemmas=[k for k in LEMMAS if k.startswith("median_")])
        out[name] = {r.lemma: r.violations for r in res}
    return out
