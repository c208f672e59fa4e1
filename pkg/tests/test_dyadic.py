import warnings

import numpy as np
import pytest

from dyadic_a2.dyadic import (
    AdjacentSystems,
    CoverageError,
    build_adjacent_systems,
    build_dyadic_system,
    cover_ball,
    default_net_scale,
    descendants,
    dilate,
    locate,
    shifted_dyadic_system,
    standard_dyadic_system,
    system_from_json,
    system_to_json,
    verify_system,
)
from dyadic_a2.space import Ball, ball_members, uniform_grid


def test_small_spaces_satisfy_all_properties(small_spaces):
    for space, system in small_spaces:
        rep = verify_system(system, space)
        assert rep.ok, (space.name, rep.violations[:5])
        assert rep.eps_observed > 0


def test_levels_partition_and_nest(small_spaces):
    for space, system in small_spaces:
        for k in range(system.k_min, system.k_max + 1):
            cubes = system.cubes_at(k)
            members = np.concatenate([c.members for c in cubes])
            assert np.array_equal(np.sort(members), np.arange(space.n))
        for k in range(system.k_min, system.k_max):
            up, down = system.labels_at(k), system.labels_at(k + 1)
            for c in np.unique(down):
                assert np.unique(up[down == c]).size == 1


def test_root_is_whole_space_and_leaves_are_points(small_spaces):
    for space, system in small_spaces:
        assert system.root.size == space.n and system.root.parent is None
        assert all(c.size == 1 for c in system.cubes_at(system.k_max))


def test_sandwich_between_balls(grid128):
    space, system = grid128
    for cube in system.cubes:
        r = system.delta**cube.level
        inner = ball_members(space, Ball(cube.center, r))
        outer = ball_members(space, Ball(cube.center, system.cover_constant * r))
        assert np.all(np.isin(inner, cube.members))
        assert np.all(np.isin(cube.members, outer))


def test_standard_dyadic_intervals_reproduced():
    space = uniform_grid(256)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        built = build_dyadic_system(space, 0.5, order="index", net_scale=1.0)
    std = standard_dyadic_system(space)
    sets = lambda s: {tuple(c.members) for c in s.cubes}
    assert sets(built) == sets(std)
    for c in std.cubes:
        length = 2.0 ** -(c.level - 1)
        start = space.coords[c.members[0], 0]
        assert np.isclose(start / length, round(start / length))
        assert c.size == round(length * 256)


def test_standard_system_requires_dyadic_grid():
    with pytest.raises(ValueError):
        standard_dyadic_system(uniform_grid(100))


def test_locate_and_descendants(grid128):
    space, system = grid128
    for x in (0, 17, 127):
        for k in range(system.k_min, system.k_max + 1):
            c = locate(system, x, k)
            assert x in c.members
            if k > system.k_min:
                assert c.parent == locate(system, x, k - 1).id
    sub = descendants(system, system.root)
    assert len(sub) == len(system.cubes) - 1


def test_dilate_contains_cube(grid128, rng):
    space, system = grid128
    for _ in range(300):
        c = system.cubes[int(rng.integers(len(system.cubes)))]
        lam = 1 + 4 * rng.random()
        ball = dilate(system, c, lam)
        assert np.all(np.isin(c.members, ball_members(space, ball)))
    with pytest.raises(ValueError):
        dilate(system, system.root, 1.0)


def test_json_round_trip(grid128):
    space, system = grid128
    again = system_from_json(system_to_json(system), space)
    assert np.array_equal(again.labels, system.labels)
    assert again.delta == system.delta and again.cover_constant == system.cover_constant


def test_adjacent_family_covers_every_ball():
    space = uniform_grid(96)
    adj = build_adjacent_systems(space, 0.125, trials=24, seed=1)
    order, dist = space.sorted_rows
    for x in range(0, space.n, 5):
        for r in np.unique(dist[x])[1:]:
            ball = Ball(x, float(r))
            j, cube = cover_ball(adj, space, ball)
            assert np.all(np.isin(ball_members(space, ball), cube.members))
            assert adj.systems[j].diam(cube) <= adj.d_constant * r * (1 + 1e-12)


def test_cover_ball_raises_when_constant_too_small(grid128):
    space, system = grid128
    adj = AdjacentSystems([system], d_constant=1e-3)
    with pytest.raises(CoverageError):
        cover_ball(adj, space, Ball(5, 0.05))


def test_shifted_system_is_nested():
    space = uniform_grid(64)
    s = shifted_dyadic_system(space)
    for k in range(s.k_min, s.k_max):
        up, down = s.labels_at(k), s.labels_at(k + 1)
        for c in np.unique(down):
            assert np.unique(up[down == c]).size == 1


def test_net_scale_is_positive():
    assert default_net_scale(0.125, 1.0) > 0
