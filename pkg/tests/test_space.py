import itertools

import numpy as np
import pytest

from dyadic_a2.space import (
    Ball,
    QuasiMetricSpace,
    ball_members,
    doubling_constant,
    from_distance_table,
    from_points,
    grid_2d,
    load_distance_csv,
    load_points_csv,
    measure,
    parse_metric,
    power_grid,
    random_cloud,
    snowflake_grid,
    uniform_grid,
    validate_quasimetric,
)


def brute_c0(rho):
    n = rho.shape[0]
    best = 0.0
    for x, y, z in itertools.product(range(n), repeat=3):
        d = rho[x, y] + rho[y, z]
        if d > 0:
            best = max(best, rho[x, z] / d)
    return best


def test_uniform_grid_layout():
    s = uniform_grid(8)
    assert s.n == 8
    assert np.allclose(s.coords[:, 0], np.arange(8) / 8)
    assert np.isclose(s.total_mass, 1.0)
    assert s.c0 == 1.0
    assert np.isclose(s.min_separation, 1 / 8)


def test_balls_are_open():
    s = uniform_grid(8)
    members = ball_members(s, Ball(0, 2 / 8))
    assert members.tolist() == [0, 1]
    assert ball_members(s, Ball(3, 1e-9)).tolist() == [3]


def test_ball_radius_must_be_positive():
    with pytest.raises(ValueError):
        Ball(0, 0.0)


def test_measure_sums_masses():
    s = random_cloud(20, seed=1)
    assert measure(s, [0, 3]) == s.mass[0] + s.mass[3]
    assert measure(s, []) == 0.0


@pytest.mark.parametrize("space,expected", [(uniform_grid(12), 1.0), (snowflake_grid(12), 1.0), (power_grid(12), 2.0)])
def test_declared_c0_bounds_brute_force(space, expected):
    observed = brute_c0(space.rho)
    assert observed <= space.c0 + 1e-12
    assert space.c0 == expected
    rep = validate_quasimetric(space)
    assert rep.ok
    assert np.isclose(rep.c0_observed, observed)


def test_validate_reports_asymmetry_and_diagonal():
    rho = np.array([[0.0, 1.0], [2.0, 0.0]])
    rep = validate_quasimetric(QuasiMetricSpace(rho=rho, mass=[1, 1], c0=5))
    assert not rep.ok and any("asymmetric" in v for v in rep.violations)
    rho = np.array([[1.0, 1.0], [1.0, 0.0]])
    rep = validate_quasimetric(QuasiMetricSpace(rho=rho, mass=[1, 1], c0=5))
    assert any("diagonal" in v for v in rep.violations)


def test_c0_too_small_is_reported():
    s = uniform_grid(10, metric="power:2")
    rep = validate_quasimetric(QuasiMetricSpace(rho=s.rho, mass=s.mass, c0=1.0))
    assert not rep.ok


def test_distance_table_infers_c0():
    s = power_grid(10)
    t = from_distance_table(s.rho)
    assert np.isclose(t.c0, brute_c0(s.rho))


@pytest.mark.parametrize("mass", [[1.0, 0.0], [1.0, -1.0], [1.0, np.inf]])
def test_bad_masses_rejected(mass):
    with pytest.raises(ValueError):
        QuasiMetricSpace(rho=np.array([[0.0, 1.0], [1.0, 0.0]]), mass=mass)


def test_parse_metric():
    assert parse_metric("euclidean") == ("power", 1.0)
    assert parse_metric("snowflake:0.5") == ("power", 0.5)
    assert parse_metric("power:2") == ("power", 2.0)
    for bad in ("snowflake", "snowflake:2", "manhattan"):
        with pytest.raises(ValueError):
            parse_metric(bad)


def test_doubling_constant_matches_brute_force():
    s = random_cloud(25, seed=3)
    radii = np.array([0.05, 0.1, 0.2, 0.4])
    best = 1.0
    for x in range(s.n):
        for r in radii:
            small = s.mass[s.rho[x] < r].sum()
            big = s.mass[s.rho[x] < 2 * r].sum()
            best = max(best, big / small)
    assert np.isclose(doubling_constant(s, radii), best)


def test_grid_2d_and_snowflake_distances():
    g = grid_2d(4)
    assert g.n == 16 and g.coords.shape == (16, 2)
    sf = snowflake_grid(8)
    assert np.isclose(sf.rho[0, 4], np.sqrt(0.5))


def test_csv_loading(tmp_path):
    pts = tmp_path / "pts.csv"
    pts.write_text("x1,x2,mass\n0,0,1\n1,0,2\n0,1,1\n")
    s = load_points_csv(pts)
    assert s.n == 3 and s.mass.tolist() == [1.0, 2.0, 1.0]
    assert np.isclose(s.rho[1, 2], np.sqrt(2))
    table = tmp_path / "rho.csv"
    table.write_text("0,1,2\n1,0,1\n2,1,0\n")
    t = load_distance_csv(table)
    assert t.n == 3 and np.isclose(t.total_mass, 1.0)


def test_from_points_power_metric_c0():
    s = from_points(np.linspace(0, 1, 6), metric="power:3")
    assert s.c0 == 4.0
