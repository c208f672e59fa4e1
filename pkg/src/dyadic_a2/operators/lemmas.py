"""Quantities from the proof of the linear A2 bound, evaluated numerically.

Each function returns the two sides of an inequality (or their ratio) so a
battery can record the observed constant instead of trusting the proof.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..dyadic import DyadicSystem, as_cube, dilate
from ..median import median, omega_lambda
from ..space import QuasiMetricSpace, ball_members
from ..sparse import SparseFamily, exclusive_sets
from .discrete import BOperators, DiscreteOperator
from .maximal import maximal_function, multi_dyadic_maximal

__all__ = [
    "MeasuredConstants",
    "oscillation_bound_ratio",
    "discretization_constant",
    "median_term_norm",
    "median_term_ratio",
    "EltwoChain",
    "eltwo_chain",
    "WeakDecomposition",
    "weak11_decomposition",
    "biw_ratio",
    "constant_part_on",
]


@dataclass
class MeasuredConstants:
    """Observed constants of one run; ``None`` means not measured."""

    D0: float | None = None
    D1: float | None = None
    d2_discretization: float | None = None
    d2_weak11: float | None = None
    D3: float | None = None
    D4: float | None = None
    D5: float | None = None
    D6: float | None = None
    D7: float | None = None
    beta: float | None = None
    gamma: float | None = None

    def update_max(self, name: str, value: float):
        cur = getattr(self, name)
        setattr(self, name, value if cur is None else max(cur, value))

    def as_dict(self) -> dict:
        return asdict(self)


# --- linearization ------------------------------------------------------------


def oscillation_bound_ratio(T: np.ndarray, system: DyadicSystem, space: QuasiMetricSpace, f, q, eta: float, lam=None):
    """``omega_lam(|Tf - m(Tf,Q)|, Q)`` over ``sum_l 2^{-l eta} avg_{2^l Q} |f|``.

    ``T`` is the matrix of the operator on point values.  The series stops at
    the first ``l`` with ``2^l Q`` covering the whole space.  Returns
    ``(ratio, lhs, rhs)``; ``0/0`` counts as ratio 0.
    """
    lam = system.eps_observed / 4 if lam is None else lam
    cube = as_cube(system, q)
    f = np.asarray(f, dtype=float)
    Tf = T @ f
    vals = Tf[cube.members]
    mass = space.mass[cube.members]
    lhs = float(omega_lambda(np.abs(vals - median(vals, mass)), mass, lam))
    g = np.abs(f) * space.mass
    rhs = 0.0
    l = 1
    while True:
        ball = ball_members(space, dilate(system, cube, 2.0**l))
        rhs += 2.0 ** (-l * eta) * g[ball].sum() / space.mass[ball].sum()
        if ball.size == space.n:
            break
        l += 1
    if rhs == 0.0:
        return (0.0 if lhs == 0.0 else math.inf), lhs, rhs
    return lhs / rhs, lhs, rhs


def discretization_constant(T: np.ndarray, system: DyadicSystem, space: QuasiMetricSpace, f, family: SparseFamily, d1: float, eta: float) -> float:
    """Smallest ``D`` with ``|Tf| <= |m(Tf,Q0)| + D Mf + d1 sum_k 2^{-k eta} A_k f`` on ``Q0``.

    ``A_k f`` is summed until every family cube has ``2^k Q`` equal to the
    whole space; from there on it is constant in ``k`` and the geometric
    tail is added in closed form.
    """
    from .discrete import build_A_k

    f = np.asarray(f, dtype=float)
    q0 = system.cubes[family.q0].members
    Tf = T @ f
    m = abs(float(median(Tf[q0], space.mass[q0])))
    series = np.zeros(space.n)
    k = 1
    while True:
        op = build_A_k(family, system, space, k)
        Af = op.apply(f)
        series += 2.0 ** (-k * eta) * Af
        if all(t.source.size == space.n for t in op.terms):
            series += Af * 2.0 ** (-k * eta) / (2.0**eta - 1)
            break
        k += 1
    Mf = maximal_function(space, f)
    excess = np.abs(Tf[q0]) - m - d1 * series[q0]
    pos = (excess > 0) & (Mf[q0] > 0)
    return float(np.max(excess[pos] / Mf[q0][pos])) if np.any(pos) else 0.0


# --- median term --------------------------------------------------------------


def median_term_norm(opf, q, w, space: QuasiMetricSpace, system: DyadicSystem | None = None) -> float:
    """``||m(opf, Q)||_{L2(w, Q)} = |m(opf, Q)| w(Q)^{1/2}``."""
    members = as_cube(system, q).members if system is not None else np.asarray(q, dtype=int)
    vals = np.asarray(opf, dtype=float)[members]
    m = median(vals, space.mass[members])
    wq = float(np.sum(np.asarray(w, dtype=float)[members] * space.mass[members]))
    return abs(m) * math.sqrt(wq)


def median_term_ratio(opf, f, q, w, space: QuasiMetricSpace, beta_k: float, a2: float, system=None) -> float:
    """Median term over its bound ``beta k ||f||_{L2(w, Q)} [w]_A2``."""
    members = as_cube(system, q).members if system is not None else np.asarray(q, dtype=int)
    wv = np.asarray(w, dtype=float)
    f = np.asarray(f, dtype=float)
    fnorm = math.sqrt(float(np.sum(f[members] ** 2 * wv[members] * space.mass[members])))
    top = median_term_norm(opf, members, wv, space)
    if top == 0.0:
        return 0.0
    return top / (beta_k * fnorm * a2)


# --- L2 bound mechanism ---------------------------------------------------------


@dataclass
class EltwoChain:
    """``pairing <= s1 <= 2 s2 <= 2 s3 <= 2 integral`` for one (f, g)."""

    pairing: float
    s1: float
    s2: float
    s3: float
    integral: float

    def holds(self, rtol: float = 1e-12) -> bool:
        steps = [self.pairing, self.s1, 2 * self.s2, 2 * self.s3, 2 * self.integral]
        return all(a <= b * (1 + rtol) + 1e-300 for a, b in zip(steps, steps[1:]))


def eltwo_chain(op: DiscreteOperator, family: SparseFamily, system: DyadicSystem, space, f, g, maximal_systems) -> EltwoChain:
    """Evaluate each step of the L2 bound for ``B`` term by term.

    ``M`` is the maximal function over the cubes of ``maximal_systems`` (the
    family's system together with the grid of the ``Q*``), which dominates
    the averages over ``Q`` and ``Q*`` at every point of them.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    mass = space.mass
    pairing = abs(float(np.sum(op.apply(f) * g * mass)))
    E = exclusive_sets(family, system)
    Mf = multi_dyadic_maximal(maximal_systems, space, f)
    Mg = multi_dyadic_maximal(maximal_systems, space, g)
    s1 = s2 = s3 = 0.0
    for t in op.terms:
        af = np.sum(np.abs(f[t.source]) * mass[t.source]) / mass[t.source].sum()
        ag = np.sum(np.abs(g[t.target]) * mass[t.target]) / mass[t.target].sum()
        e = E[t.cube]
        s1 += af * ag * mass[t.target].sum()
        s2 += af * ag * mass[e].sum()
        s3 += float(np.sum(Mf[e] * Mg[e] * mass[e]))
    integral = float(np.sum(Mf * Mg * mass))
    return EltwoChain(pairing, s1, s2, s3, integral)


# --- weak (1,1) decomposition ----------------------------------------------------


@dataclass
class WeakDecomposition:
    a: float
    omega: np.ndarray = field(repr=False)
    whitney: list[int]
    d2: float  # |Omega| a / ||f||_1
    d3: float  # max |g| / a
    max_level_gap: int  # max k(Q) - k(W) over contributing pairs
    pairs: int
    bad_l1_ratio: float  # ||B* b||_{L1(Omega^c)} / ||f||_1
    covers_omega: bool
    disjoint: bool
    whitney_ok: bool


def _distance_to_set(space: QuasiMetricSpace, members: np.ndarray, outside: np.ndarray) -> float:
    if outside.size == 0:
        return math.inf
    return float(space.rho[np.ix_(members, outside)].min())


def weak11_decomposition(
    f, a: float, system: DyadicSystem, space: QuasiMetricSpace, family: SparseFamily, bops: BOperators, j: int
) -> WeakDecomposition:
    """Run the Calderon-Zygmund steps for ``B_{j,k}^*`` at height ``a``.

    ``Omega = {Mf > a}`` with the centered maximal function over all balls;
    the ``W_i`` are the maximal cubes of ``system`` inside ``Omega`` with
    ``diam(W) <= dist(W, Omega^c)``.  Contributing pairs are ``Q`` strictly
    inside some ``W_i`` whose ``Q*`` meets ``Omega^c``.
    """
    f = np.asarray(f, dtype=float)
    mass = space.mass
    Mf = maximal_function(space, f)
    omega = Mf > a
    outside = np.flatnonzero(~omega)
    taken = np.zeros(space.n, dtype=bool)
    whitney = []
    for k in range(system.k_min, system.k_max + 1):
        for cube in system.cubes_at(k):
            mem = cube.members
            if taken[mem[0]] or not np.all(omega[mem]):
                continue
            if system.diam(cube) <= _distance_to_set(space, mem, outside):
                whitney.append(cube.id)
                taken[mem] = True
    covers = bool(np.array_equal(taken, omega))
    count = np.zeros(space.n, dtype=int)
    for c in whitney:
        count[system.cubes[c].members] += 1
    disjoint = bool(np.all(count <= 1))
    whitney_ok = all(
        system.diam(c) <= _distance_to_set(space, system.cubes[c].members, outside) for c in whitney
    )

    norm1 = float(np.sum(np.abs(f) * mass))
    g = f.copy()
    b_parts = {}
    for c in whitney:
        mem = system.cubes[c].members
        avg = float(np.sum(f[mem] * mass[mem]) / mass[mem].sum())
        g[mem] = avg
        b_parts[c] = (mem, f[mem] - avg)
    d3 = float(np.max(np.abs(g)) / a) if g.size else 0.0
    d2 = float(mass[omega].sum() * a / norm1) if norm1 > 0 else 0.0

    op = bops.operators[j]
    wlab = np.full(space.n, -1)
    for c in whitney:
        wlab[system.cubes[c].members] = c
    out_mask = ~omega
    gap = 0
    pairs = 0
    Bb = np.zeros(space.n)
    for t in op.terms:  # B term: source = Q*, target = Q
        q = system.cubes[t.cube]
        c = int(wlab[q.members[0]])
        if c < 0 or not np.all(wlab[q.members] == c) or q.size == system.cubes[c].size:
            continue
        if not np.any(out_mask[t.source]):
            continue
        mem, bvals = b_parts[c]
        integral = float(np.sum(bvals[np.isin(mem, q.members, assume_unique=True)] * mass[q.members]))
        pairs += 1
        gap = max(gap, q.level - system.cubes[c].level)
        Bb[t.source] += t.coefficient * integral
    bad = float(np.sum(np.abs(Bb[out_mask]) * mass[out_mask]) / norm1) if norm1 > 0 else 0.0
    return WeakDecomposition(
        a=a,
        omega=omega,
        whitney=whitney,
        d2=d2,
        d3=d3,
        max_level_gap=int(gap),
        pairs=pairs,
        bad_l1_ratio=bad,
        covers_omega=covers,
        disjoint=disjoint,
        whitney_ok=whitney_ok,
    )


# --- local oscillation of B* ------------------------------------------------------


def constant_part_on(op_star: DiscreteOperator, q1_members: np.ndarray, f) -> np.ndarray:
    """Partial sum of ``B* f`` over terms whose ``Q*`` strictly contains ``Q1``."""
    f = np.asarray(f, dtype=float)
    out = np.zeros(op_star.n)
    for t in op_star.terms:  # B* term: source = Q, target = Q*
        if t.target.size > q1_members.size and np.all(np.isin(q1_members, t.target, assume_unique=True)):
            out[t.target] += t.coefficient * float(np.sum(f[t.source] * op_star.mass[t.source]))
    return out


def biw_ratio(op_star: DiscreteOperator, space: QuasiMetricSpace, q1_members: np.ndarray, f, lam: float) -> tuple[float, bool]:
    """``omega_lam(|B*f - m(B*f)|, Q1) / avg_{Q1} |f|`` and whether the
    strict-superset partial sum is constant on ``Q1``."""
    f = np.asarray(f, dtype=float)
    mass = space.mass[q1_members]
    Bf = op_star.apply(f)[q1_members]
    lhs = float(omega_lambda(np.abs(Bf - median(Bf, mass)), mass, lam))
    avg = float(np.sum(np.abs(f[q1_members]) * mass) / mass.sum())
    part = constant_part_on(op_star, q1_members, f)[q1_members]
    constant = bool(np.all(part == part[0])) if part.size else True
    if avg == 0.0:
        return (0.0 if lhs == 0.0 else math.inf), constant
    return lhs / avg, constant
