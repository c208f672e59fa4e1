"""Dyadic cubes, medians and sparse operators on finite quasi-metric spaces,
with numerical checks of the linear A2 bound for Calderon-Zygmund operators."""

from . import dyadic, experiments, median, operators, space, sparse
from .dyadic import (
    AdjacentSystems,
    CoverageError,
    DyadicSystem,
    build_adjacent_systems,
    build_dyadic_system,
    cover_ball,
    standard_dyadic_system,
    verify_system,
)
from .median import median as median_of, omega_lambda, oscillation
from .space import QuasiMetricSpace, from_points, grid_2d, power_grid, snowflake_grid, uniform_grid
from .sparse import SparseFamily, build_sparse_family, exclusive_sets, stopping_step, verify_domination

__version__ = "0.1.0"
