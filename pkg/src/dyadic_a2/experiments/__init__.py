"""Sweeps, check batteries, report writers and the command line."""

from .batteries import (
    BatteryReport,
    constants_battery,
    eltwo_battery,
    kernel_battery,
    maximal_battery,
    median_battery,
    oscillation_battery,
    run_lemma_battery,
    sparse_battery,
    standard_spaces,
    structure_battery,
)
from .config import RunConfig, build_context, build_space, cell_seed, parse_cell
from .median_battery import nonsubadditive_example, mutation_self_test, run_median_lemmas
from .output import csv_text, fit_slope, svg_chart, write_csv, write_svg
from .sweeps import SweepResult, run_a2_sweep, run_complexity_sweep
