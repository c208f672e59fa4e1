"""Stopping-time construction and sparse families of dyadic cubes.

Given ``f`` on a cube ``Q0`` and ``f_m = |f - m(f, Q0)|``, the stopping cubes
``M`` are the inclusion-maximal strict descendants ``Q`` of ``Q0`` with
``m(f_m, Q) > omega_lam(f_m, Q0)``; ``M_hat`` are the maximal parents of
``M``.  Repeating the step inside every ``M_hat`` cube generates the sparse
family ``C_0 = {Q0}, C_1, ...``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicSystem, as_cube
from .median import grouped_median, median, omega_lambda, sharp_maximal
from .space import QuasiMetricSpace

__all__ = [
    "StoppingReport",
    "SparseFamily",
    "DominationReport",
    "SparsenessError",
    "stopping_step",
    "build_sparse_family",
    "nested_family",
    "check_sparseness",
    "verify_domination",
    "exclusive_sets",
    "family_to_json",
    "family_from_json",
]


class SparsenessError(AssertionError):
    """The stopping step produced ``Q0`` among its maximal parents."""


@dataclass
class StoppingReport:
    q0: int
    m_cubes: list[int]
    mhat_cubes: list[int]
    omega_threshold: float
    median_q0: float
    lam: float
    mhat_mass: float = 0.0
    q0_mass: float = 0.0


@dataclass
class SparseFamily:
    q0: int
    generations: list[list[int]]
    lam: float
    truncated: bool = False

    @property
    def cubes(self) -> list[int]:
        return [c for gen in self.generations for c in gen]

    def generation_of(self) -> dict[int, int]:
        return {c: i for i, gen in enumerate(self.generations) for c in gen}

    def __len__(self):
        return sum(len(g) for g in self.generations)


@dataclass
class DominationReport:
    max_violation: float
    scale: float
    passed: bool
    lhs: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)


def _default_lam(system: DyadicSystem) -> float:
    return system.eps_observed / 4


def stopping_step(f, q0, system: DyadicSystem, space: QuasiMetricSpace, lam: float | None = None) -> StoppingReport:
    """One stopping-time step inside ``q0``."""
    lam = _default_lam(system) if lam is None else lam
    cube = as_cube(system, q0)
    members = cube.members
    mass = space.mass[members]
    vals = np.asarray(f, dtype=float)[members]
    m0 = median(vals, mass)
    fm = np.abs(vals - m0)
    threshold = omega_lambda(fm, mass, lam)

    # top-down: the first cube to exceed the threshold on each branch is maximal
    taken = np.zeros(members.size, dtype=bool)
    m_cubes = []
    for level in range(cube.level + 1, system.k_max + 1):
        labels = system.labels_at(level)[members]
        ids, med = grouped_median(fm, mass, labels)
        hot = ids[med > threshold]
        if hot.size == 0:
            continue
        pos = np.isin(labels, hot) & ~taken
        new = np.unique(labels[pos])
        m_cubes.extend(int(c) for c in new)
        taken |= pos

    # maximal parents, coarse first; a parent inside an earlier one is dropped
    parents = sorted({system.cubes[c].parent for c in m_cubes}, key=lambda c: (system.cubes[c].level, c))
    covered = np.zeros(space.n, dtype=bool)
    mhat = []
    for p in parents:
        pc = system.cubes[p]
        if np.all(covered[pc.members]):
            continue
        mhat.append(p)
        covered[pc.members] = True
    q0_mass = float(mass.sum())
    mhat_mass = float(sum(space.mass[system.cubes[c].members].sum() for c in mhat))
    if any(system.cubes[c].size == cube.size for c in mhat):
        raise SparsenessError(
            f"stopping step in cube {cube.id} returned the cube itself (lam={lam:.4g} too large?)"
        )
    return StoppingReport(
        q0=cube.id,
        m_cubes=sorted(m_cubes),
        mhat_cubes=sorted(mhat),
        omega_threshold=float(threshold),
        median_q0=float(m0),
        lam=lam,
        mhat_mass=mhat_mass,
        q0_mass=q0_mass,
    )


def build_sparse_family(
    f, q0, system: DyadicSystem, space: QuasiMetricSpace, lam: float | None = None, max_depth: int = 64
) -> SparseFamily:
    lam = _default_lam(system) if lam is None else lam
    q0 = as_cube(system, q0).id
    generations = [[q0]]
    truncated = False
    while True:
        nxt = []
        for c in generations[-1]:
            nxt.extend(stopping_step(f, c, system, space, lam).mhat_cubes)
        if not nxt:
            break
        if len(generations) > max_depth:
            truncated = True
            break
        generations.append(sorted(nxt))
    return SparseFamily(q0=q0, generations=generations, lam=lam, truncated=truncated)


def nested_family(system: DyadicSystem, space: QuasiMetricSpace, point: int, q0=None) -> SparseFamily:
    """Deepest chain of cubes around ``point`` in which each cube has at most
    half the measure of the previous one."""
    q0 = system.root if q0 is None else as_cube(system, q0)
    chain = [q0.id]
    current = space.mass[q0.members].sum()
    for level in range(q0.level + 1, system.k_max + 1):
        cid = int(system.labels_at(level)[point])
        m = space.mass[system.cubes[cid].members].sum()
        if m <= current / 2:
            chain.append(cid)
            current = m
    return SparseFamily(q0=q0.id, generations=[[c] for c in chain], lam=_default_lam(system))


def check_sparseness(family: SparseFamily, system: DyadicSystem, space: QuasiMetricSpace, rtol: float = 1e-12) -> list[str]:
    """Violations of the family invariants (empty list when sparse)."""
    problems = []
    if family.generations[0] != [family.q0]:
        problems.append("first generation is not {Q0}")
    owner = None
    for n, gen in enumerate(family.generations):
        mark = np.full(space.n, -1)
        for c in gen:
            mem = system.cubes[c].members
            if np.any(mark[mem] >= 0):
                problems.append(f"generation {n}: cube {c} overlaps another cube")
            mark[mem] = c
            if owner is not None:
                parents = np.unique(owner[mem])
                if parents.size != 1 or parents[0] < 0:
                    problems.append(f"generation {n}: cube {c} not inside a generation-{n - 1} cube")
        if owner is not None:
            for p in family.generations[n - 1]:
                pm = system.cubes[p].members
                inner = space.mass[pm[mark[pm] >= 0]].sum()
                if inner > space.mass[pm].sum() / 2 * (1 + rtol):
                    problems.append(f"generation {n}: children of cube {p} carry more than half its measure")
        owner = mark
    return problems


def _family_oscillations(f, family: SparseFamily, system: DyadicSystem, space: QuasiMetricSpace) -> dict[int, float]:
    out = {}
    for c in family.cubes:
        mem = system.cubes[c].members
        vals = np.asarray(f, dtype=float)[mem]
        mass = space.mass[mem]
        out[c] = float(omega_lambda(np.abs(vals - median(vals, mass)), mass, family.lam))
    return out


def verify_domination(
    f, q0, system: DyadicSystem, space: QuasiMetricSpace, family: SparseFamily, rtol: float = 1e-9
) -> DominationReport:
    """Check ``|f - m(f, Q0)| <= M#f + sum_Q omega(|f - m(f,Q)|, Q) chi_Q`` on ``Q0``."""
    f = np.asarray(f, dtype=float)
    cube = as_cube(system, q0)
    mem = cube.members
    lhs = np.abs(f[mem] - median(f[mem], space.mass[mem]))
    rhs = sharp_maximal(f, cube, family.lam, system, space)[mem]
    for c, osc in _family_oscillations(f, family, system, space).items():
        inside = np.isin(mem, system.cubes[c].members, assume_unique=True)
        rhs[inside] += osc
    scale = float(np.max(np.abs(f[mem]))) if mem.size else 0.0
    scale = scale if scale > 0 else 1.0
    gap = float(np.max(lhs - rhs))
    return DominationReport(
        max_violation=gap, scale=scale, passed=gap <= rtol * scale, lhs=lhs, rhs=rhs
    )


def exclusive_sets(family: SparseFamily, system: DyadicSystem) -> dict[int, np.ndarray]:
    """``E(Q) = Q minus the union of the next generation``, for every family cube."""
    out = {}
    gens = family.generations
    for n, gen in enumerate(gens):
        nxt = gens[n + 1] if n + 1 < len(gens) else []
        taken = np.concatenate([system.cubes[c].members for c in nxt]) if nxt else np.array([], dtype=int)
        for c in gen:
            mem = system.cubes[c].members
            out[c] = np.setdiff1d(mem, taken, assume_unique=True)
    return out


def family_to_json(family: SparseFamily) -> dict:
    return {"q0": family.q0, "lam": family.lam, "truncated": family.truncated, "generations": family.generations}


def family_from_json(data: dict) -> SparseFamily:
    return SparseFamily(
        q0=int(data["q0"]),
        generations=[[int(c) for c in g] for g in data["generations"]],
        lam=float(data["lam"]),
        truncated=bool(data.get("truncated", False)),
    )
