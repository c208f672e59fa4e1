import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyadic_a2.dyadic import AdjacentSystems, CoverageError, build_adjacent_systems, dilate, locate
from dyadic_a2.operators import (
    apply_cz,
    a2_characteristic,
    a2_dyadic,
    build_A_k,
    build_B,
    dyadic_maximal_operator,
    eltwo_chain,
    get_kernel,
    kernel_matrix,
    l2_norm,
    maximal_function,
    maximal_norm,
    power_weight,
    svd_norm,
    validate_kernel,
    weak11_decomposition,
    weak_11_ratio,
    weighted_dyadic_maximal,
    weighted_l2_norm,
    zero_kernel,
    biw_ratio,
    oscillation_bound_ratio,
)
from dyadic_a2.space import ball_members, uniform_grid
from dyadic_a2.sparse import build_sparse_family, nested_family


@pytest.fixture(scope="module")
def setup(grid128):
    space, system = grid128
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        adj = build_adjacent_systems(space, system.delta, trials=16, seed=1)
    T = kernel_matrix(get_kernel("hilbert"), space) * space.mass[None, :]
    fam = build_sparse_family(T @ np.random.default_rng(3).standard_normal(space.n), system.root, system, space)
    return space, system, adj, T, fam


# --- kernels ------------------------------------------------------------------


def test_zero_kernel_gives_zero_operator(grid64):
    f = np.random.default_rng(0).standard_normal(grid64.n)
    assert np.all(apply_cz(zero_kernel(), grid64, f) == 0)
    assert validate_kernel(zero_kernel(), grid64).ok


def test_apply_cz_matches_double_loop(grid64):
    k = get_kernel("hilbert")
    f = np.random.default_rng(1).standard_normal(grid64.n)
    x = grid64.coords[:, 0]
    ref = np.array([sum(f[j] * grid64.mass[j] / (x[i] - x[j]) for j in range(grid64.n) if j != i) for i in range(grid64.n)])
    assert np.allclose(apply_cz(k, grid64, f), ref, rtol=1e-12, atol=1e-12)


def test_hilbert_decay_constant_matches_brute_force(grid64):
    rep = validate_kernel(get_kernel("hilbert"), grid64)
    x = grid64.coords[:, 0]
    best = 0.0
    for a in range(grid64.n):
        for b in range(grid64.n):
            if a != b:
                r = abs(x[a] - x[b])
                ball = grid64.mass[np.abs(x - x[a]) < r].sum()
                best = max(best, ball / r)
    assert rep.c_decay_observed == pytest.approx(best, rel=1e-12)
    assert rep.ok


def test_corrupted_entry_is_localized(grid64):
    k = get_kernel("hilbert")
    table = kernel_matrix(k, grid64)
    table[10, 40] *= 50
    rep = validate_kernel(k, grid64, table=table)
    assert (10, 40) in rep.decay_violations
    assert all(10 in v or 40 in v for v in rep.decay_violations)
    assert all(40 in v or 10 in v for v in rep.smooth_violations)


def test_unknown_kernel_rejected():
    with pytest.raises(ValueError):
        get_kernel("nope")


# --- maximal functions and weights --------------------------------------------


def test_maximal_function_matches_all_radii(grid64):
    f = np.random.default_rng(2).standard_normal(grid64.n)
    rho = grid64.rho
    ref = np.empty(grid64.n)
    for x in range(grid64.n):
        ref[x] = max(
            np.sum(np.abs(f[b]) * grid64.mass[b]) / grid64.mass[b].sum()
            for r in np.unique(rho[x])[1:]
            for b in [np.flatnonzero(rho[x] < r)]
        )
        ref[x] = max(ref[x], np.mean(np.abs(f)))
    assert np.allclose(maximal_function(grid64, f), ref, rtol=1e-12)


def test_weighted_dyadic_maximal_matches_ancestors(grid128):
    space, system = grid128
    rng = np.random.default_rng(4)
    f, w = rng.standard_normal(space.n), rng.random(space.n) + 0.1
    out = weighted_dyadic_maximal(system, space, w, f)
    for x in (0, 31, 64, 127):
        vals = []
        for k in range(system.k_min, system.k_max + 1):
            m = locate(system, x, k).members
            vals.append(np.sum(np.abs(f[m]) * w[m] * space.mass[m]) / np.sum(w[m] * space.mass[m]))
        assert out[x] == pytest.approx(max(vals), rel=1e-12)


def test_a2_characteristic_brute_force_and_symmetry(grid64):
    w = power_weight(grid64, 0.7)
    rho = grid64.rho
    best = 0.0
    for x in range(grid64.n):
        for r in np.unique(rho[x])[1:]:
            b = rho[x] < r
            best = max(best, np.mean(w.values[b]) * np.mean(1 / w.values[b]))
    assert a2_characteristic(grid64, w) == pytest.approx(best, rel=1e-12)
    assert a2_characteristic(grid64, w.inverse()) == pytest.approx(best, rel=1e-12)
    assert a2_characteristic(grid64, np.full(grid64.n, 3.0)) == 1.0


def test_a2_grows_with_alpha(grid64):
    vals = [a2_characteristic(grid64, power_weight(grid64, a)) for a in (0.0, 0.3, 0.6, 0.9)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_power_weight_rejects_non_a2_exponent(grid64):
    with pytest.raises(ValueError):
        power_weight(grid64, 1.0)


def test_dyadic_a2_bounded_by_ball_a2_times_doubling(grid128):
    space, system = grid128
    w = power_weight(space, 0.5)
    assert a2_dyadic(system, space, w) <= a2_characteristic(space, w) * system.cover_constant**2 * 4


def test_maximal_norm_between_one_and_brute_bound(grid128):
    space, system = grid128
    w = power_weight(space, 0.5)
    res = maximal_norm(dyadic_maximal_operator([system], space, w), space, w)
    assert 1.0 <= res.norm <= 2.0 + 1e-9  # the weighted dyadic maximal operator has norm at most 2


# --- discrete operators -------------------------------------------------------


def test_A_k_is_positive_and_monotone_sources(setup):
    space, system, _, _, fam = setup
    f = np.random.default_rng(5).standard_normal(space.n)
    a1, a3 = build_A_k(fam, system, space, 1), build_A_k(fam, system, space, 3)
    assert np.all(a1.apply(f) >= 0)
    for t1, t3 in zip(a1.terms, a3.terms):
        assert np.all(np.isin(t1.source, t3.source))
    with pytest.raises(ValueError):
        build_A_k(fam, system, space, 0)


def test_A_k_matches_loop(setup):
    space, system, _, _, fam = setup
    f = np.random.default_rng(6).standard_normal(space.n)
    ref = np.zeros(space.n)
    for c in fam.cubes:
        cube = system.cubes[c]
        b = ball_members(space, dilate(system, cube, 4.0))
        ref[cube.members] += np.abs(f[b]).mean()
    assert np.allclose(build_A_k(fam, system, space, 2).apply(f), ref, rtol=1e-12)


def test_adjoint_pairing(setup):
    space, system, adj, _, fam = setup
    rng = np.random.default_rng(7)
    f, g = rng.standard_normal(space.n), rng.standard_normal(space.n)
    for k in (0, 1, 2):
        op = build_B(fam, system, adj, space, k).total()
        lhs = np.sum(op.apply(f) * g * space.mass)
        rhs = np.sum(f * op.adjoint().apply(g) * space.mass)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_B_partitions_family_and_covers_dilates(setup):
    space, system, adj, _, fam = setup
    bops = build_B(fam, system, adj, space, 2)
    assert sorted(bops.assignment) == sorted(fam.cubes)
    seen = [t.cube for op in bops.operators for t in op.terms]
    assert sorted(seen) == sorted(fam.cubes)
    for op in bops.operators:
        for t in op.terms:
            ball = ball_members(space, dilate(system, system.cubes[t.cube], 4.0))
            assert np.all(np.isin(ball, t.source))
            assert t.coefficient == pytest.approx(1 / space.mass[t.source].sum())


def test_B_raises_named_coverage_error(setup):
    space, system, _, _, fam = setup
    bad = AdjacentSystems([system], d_constant=1e-6)
    with pytest.raises(CoverageError, match="family cube"):
        build_B(fam, system, bad, space, 2)


def test_B_with_zero_complexity_averages_over_q(setup):
    space, system, adj, _, fam = setup
    op = build_B(fam, system, adj, space, 0).total()
    f = np.ones(space.n)
    ref = np.zeros(space.n)
    for c in fam.cubes:
        ref[system.cubes[c].members] += 1
    assert np.allclose(op.apply(f), ref)


# --- norms ---------------------------------------------------------------------


def test_power_norm_matches_svd(setup):
    space, system, adj, T, fam = setup
    w = power_weight(space, 0.6).values
    op = build_B(fam, system, adj, space, 1).total()
    for A in (op, T):
        assert weighted_l2_norm(A, space, w).norm == pytest.approx(svd_norm(A, space, w), rel=1e-6)


def test_norm_scales_linearly(setup):
    space, system, adj, _, fam = setup
    op = build_A_k(fam, system, space, 1)
    op.absolute = False
    assert l2_norm(op.scaled(3.0), space).norm == pytest.approx(3 * l2_norm(op, space).norm, rel=1e-8)


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=30), st.lists(st.floats(0.1, 5), min_size=4, max_size=30))
def test_weak_ratio_matches_level_scan(vals, f):
    n = min(len(vals), len(f))
    space = uniform_grid(n)
    g, f = np.array(vals[:n]), np.array(f[:n])
    levels = np.unique(np.abs(g))
    eps = 1e-9
    ref = max([0.0] + [(a * (1 - eps)) * space.mass[np.abs(g) > a * (1 - eps)].sum() for a in levels if a > 0])
    got = weak_11_ratio(g, f, space) * np.sum(f * space.mass)
    assert got == pytest.approx(ref, rel=1e-6, abs=1e-12)


def test_weak_ratio_rejects_zero_input(grid64):
    with pytest.raises(ValueError):
        weak_11_ratio(np.ones(grid64.n), np.zeros(grid64.n), grid64)


# --- proof mechanisms ------------------------------------------------------------


def test_eltwo_chain_holds(setup):
    space, system, adj, _, fam = setup
    rng = np.random.default_rng(8)
    bops = build_B(fam, system, adj, space, 2)
    for j, op in bops.nonempty():
        ch = eltwo_chain(op, fam, system, space, rng.standard_normal(space.n), rng.standard_normal(space.n), [system, adj.systems[j]])
        assert ch.holds()


def test_weak11_decomposition_structure(setup):
    space, system, adj, _, _ = setup
    fam = nested_family(system, space, 60)
    f = np.zeros(space.n)
    f[60] = 1.0
    bops = build_B(fam, system, adj, space, 2)
    for j, _ in bops.nonempty():
        dec = weak11_decomposition(f, 2 * np.sum(f * space.mass), system, space, fam, bops, j)
        assert dec.covers_omega and dec.disjoint and dec.whitney_ok
        assert np.all(np.abs(f[~dec.omega]) <= dec.a)
        assert dec.d2 <= 5.0 and np.isfinite(dec.d3)


def test_oscillation_ratio_finite_and_zero_for_constants(setup):
    space, system, _, T, _ = setup
    f = np.random.default_rng(9).standard_normal(space.n)
    for c in system.cubes[::7]:
        r, lhs, rhs = oscillation_bound_ratio(T, system, space, f, c.id, eta=0.5)
        assert np.isfinite(r) and lhs >= 0 and rhs > 0
    r, lhs, _ = oscillation_bound_ratio(np.zeros((space.n, space.n)), system, space, f, system.root.id, eta=0.5)
    assert lhs == 0 and r == 0


def test_biw_constant_part(setup):
    space, system, adj, _, fam = setup
    star = build_B(fam, system, adj, space, 1).total().adjoint()
    f = np.abs(np.random.default_rng(10).standard_normal(space.n))
    for c in system.cubes_at(system.k_min + 2):
        ratio, constant = biw_ratio(star, space, c.members, f, system.eps_observed / 4)
        assert constant and np.isfinite(ratio)
