import numpy as np
import pytest

from dyadic_a2.dyadic import descendants
from dyadic_a2.median import median, omega_lambda
from dyadic_a2.sparse import (
    build_sparse_family,
    check_sparseness,
    exclusive_sets,
    family_from_json,
    family_to_json,
    nested_family,
    stopping_step,
    verify_domination,
)


def brute_stopping(f, q0, system, space, lam):
    """Maximal strict descendants Q with m(f_m, Q) > omega_lam(f_m, Q0)."""
    mem = q0.members
    fm = np.abs(f - median(f[mem], space.mass[mem]))
    thr = omega_lambda(fm[mem], space.mass[mem], lam)
    hits = [c for c in descendants(system, q0) if median(fm[c.members], space.mass[c.members]) > thr]
    ids = {c.id for c in hits}
    maximal = []
    for c in hits:
        p, inside = c.parent, False
        while p is not None and p != q0.id:
            if p in ids:
                inside = True
                break
            p = system.cubes[p].parent
        if not inside:
            maximal.append(c.id)
    return sorted(maximal)


def test_stopping_cubes_match_brute_force(small_spaces, rng):
    for space, system in small_spaces:
        lam = system.eps_observed / 4
        for i in range(6):
            f = rng.standard_normal(space.n) if i % 2 else np.cumsum(rng.standard_normal(space.n))
            rep = stopping_step(f, system.root, system, space)
            assert sorted(rep.m_cubes) == brute_stopping(f, system.root, system, space, lam)
            assert rep.mhat_mass <= rep.q0_mass / 2 * (1 + 1e-12)


def test_mhat_are_disjoint_parents(grid128, rng):
    space, system = grid128
    f = rng.standard_normal(space.n)
    rep = stopping_step(f, system.root, system, space)
    for m in rep.m_cubes:
        parent = system.cubes[m].parent
        covered = [h for h in rep.mhat_cubes if np.all(np.isin(system.cubes[parent].members, system.cubes[h].members))]
        assert len(covered) == 1
    seen = np.zeros(space.n, dtype=int)
    for h in rep.mhat_cubes:
        seen[system.cubes[h].members] += 1
        assert h != system.root.id
    assert seen.max() <= 1


def test_constant_function_gives_single_cube(grid128):
    space, system = grid128
    fam = build_sparse_family(np.full(space.n, 2.0), system.root, system, space)
    assert fam.generations == [[system.root.id]]


def test_families_are_sparse_and_dominate(small_spaces, rng):
    for space, system in small_spaces:
        for i in range(8):
            f = rng.standard_normal(space.n) * (10.0 ** rng.integers(-3, 4))
            fam = build_sparse_family(f, system.root, system, space)
            assert check_sparseness(fam, system, space) == []
            rep = verify_domination(f, system.root, system, space, fam)
            assert rep.passed and rep.max_violation <= 1e-9 * rep.scale


def test_exclusive_sets_disjoint_and_large(small_spaces, rng):
    for space, system in small_spaces:
        f = np.cumsum(rng.standard_normal(space.n))
        fam = build_sparse_family(f, system.root, system, space)
        E = exclusive_sets(fam, system)
        count = np.zeros(space.n, dtype=int)
        for c, e in E.items():
            count[e] += 1
            assert space.mass[e].sum() >= space.mass[system.cubes[c].members].sum() / 2
        assert count.max() <= 1


def test_nested_family_halves(grid128):
    space, system = grid128
    fam = nested_family(system, space, 40)
    masses = [space.mass[system.cubes[c].members].sum() for c in fam.cubes]
    assert all(b <= a / 2 for a, b in zip(masses, masses[1:]))
    assert check_sparseness(fam, system, space) == []
    assert len(fam.generations) >= 3


def test_family_json_round_trip(grid128, rng):
    space, system = grid128
    fam = build_sparse_family(rng.standard_normal(space.n), system.root, system, space)
    again = family_from_json(family_to_json(fam))
    assert again.generations == fam.generations and again.lam == fam.lam


def test_lambda_is_tied_to_child_ratio(grid128):
    space, system = grid128
    fam = build_sparse_family(np.arange(space.n, dtype=float), system.root, system, space)
    assert fam.lam == pytest.approx(system.eps_observed / 4)
