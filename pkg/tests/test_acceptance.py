"""Acceptance criteria 1-10, each at its stated size, tolerance and time budget.

Every test prints one ``criterion NN: PASS/FAIL`` line (also collected in
the terminal summary) before asserting, so a failing criterion still
reports its measured values.
"""

import time

import pytest

from conftest import record
from dyadic_a2.experiments import (
    RunConfig,
    eltwo_battery,
    nonsubadditive_example,
    maximal_battery,
    median_battery,
    oscillation_battery,
    run_a2_sweep,
    run_complexity_sweep,
    sparse_battery,
    standard_spaces,
    structure_battery,
)

pytestmark = pytest.mark.slow

ALPHAS = [0.0, 0.3, 0.5, 0.7, 0.9, 0.95]


def grid_config(n: int, **extra) -> RunConfig:
    data = {"space": {"kind": "grid1d", "n": n}, "weights": {"alphas": ALPHAS}}
    data.update(extra)
    return RunConfig.from_dict(data)


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def test_criterion_01_median_counterexample():
    ex, secs = timed(nonsubadditive_example, 1000)
    passed = ex["m_f"] == 0.25 and ex["m_g"] == 0.25 and ex["m_fg"] == 1.25 and secs < 1
    record(1, passed, f"m(f)={ex['m_f']!r} m(g)={ex['m_g']!r} m(f+g)={ex['m_fg']!r} in {secs:.2f} s (< 1 s)")
    assert passed


def test_criterion_02_median_lemma_fuzz():
    rows, secs = timed(median_battery, 10_000, 0)
    lemmas = [r for r in rows if r["check"] not in ("example_nonsubadditive", "mutant_positive_sup_detected")]
    bad = [r["check"] for r in lemmas if r["violations"]]
    cases = min(r["cases"] for r in lemmas)
    passed = not bad and cases >= 10_000 and secs < 30
    record(2, passed, f"{len(lemmas)} lemma groups x {cases} cases, violations in {bad or 'none'}, {secs:.1f} s (< 30 s)")
    assert passed


def test_criterion_03_dyadic_structure():
    rows, secs = timed(structure_battery, standard_spaces())
    bad = [r["check"] for r in rows if not r["passed"]]
    std = next(r for r in rows if r["check"] == "standard_dyadic_intervals")
    passed = not bad and secs < 60
    record(3, passed, f"{len(rows)} checks on 4 spaces, failing {bad or 'none'}, standard intervals {std['passed']}, {secs:.1f} s (< 60 s)")
    assert passed


def test_criterion_04_sparseness_and_domination():
    rows, secs = timed(sparse_battery, standard_spaces(), 1000)
    bad = [r["check"] for r in rows if not r["passed"]]
    worst = max(r["value"] for r in rows if r["check"].endswith("domination"))
    passed = not bad and worst <= 1e-9 and secs < 120
    record(4, passed, f"1000 f per space, failing {bad or 'none'}, worst violation/scale {worst:.3g} (<= 1e-9), {secs:.1f} s (< 120 s)")
    assert passed


def test_criterion_05_eltwo():
    t0 = time.perf_counter()
    coarse = eltwo_battery(grid_config(512))
    fine = eltwo_battery(grid_config(1024))
    secs = time.perf_counter() - t0
    change = abs(fine["gamma"] - coarse["gamma"]) / coarse["gamma"]
    passed = (
        max(coarse["max_rel_diff"], fine["max_rel_diff"]) <= 1e-8
        and coarse["max_norm"] <= coarse["gamma"]
        and fine["max_norm"] <= fine["gamma"]
        and change < 0.25
        and coarse["chain_violations"] == fine["chain_violations"] == 0
        and secs < 120
    )
    record(
        5,
        passed,
        f"|B| vs |B*| rel diff {max(coarse['max_rel_diff'], fine['max_rel_diff']):.2g} (<= 1e-8); "
        f"max norm {coarse['max_norm']:.4g}/{fine['max_norm']:.4g} <= gamma {coarse['gamma']:.4g}/{fine['gamma']:.4g}; "
        f"gamma change {change:.1%} (< 25%); {secs:.1f} s (< 120 s)",
    )
    assert passed


def test_criterion_06_weak11_linear_in_complexity():
    res, secs = timed(run_complexity_sweep, grid_config(1024))
    spread, ok_spread = res.checks["beta_spread"]
    slope, ok_slope = res.checks["growth_slope"]
    sups = ", ".join(f"{r['weak_sup']:.3g}" for r in res.rows if r["k"] >= 1)
    passed = ok_spread and ok_slope and secs < 300
    record(6, passed, f"beta_k k = [{sups}] for k=1..6; beta spread {spread:.3g} (<= 3); slope {slope:.3g} (<= 1.3); {secs:.1f} s (< 300 s)")
    assert passed


@pytest.fixture(scope="module")
def desk_scale():
    cfg = grid_config(2048)
    res, secs = timed(run_a2_sweep, cfg)
    return cfg, res, secs


def test_criterion_07_a2_linearity(desk_scale):
    _, res, secs = desk_scale
    parts = [f"{name} {value:.3g}{'' if ok else ' FAIL'}" for name, (value, ok) in res.checks.items()]
    passed = res.ok and secs < 600
    record(7, passed, "; ".join(parts) + f"; {secs:.1f} s (< 600 s)")
    assert passed


def test_criterion_08_weighted_maximal(desk_scale):
    cfg, _, _ = desk_scale
    rows, secs = timed(maximal_battery, cfg)
    norms = [r["norm"] for r in rows]
    spread = max(norms) / min(norms)
    passed = max(norms) <= 2.2 and spread <= 1.5 and secs < 120
    record(8, passed, f"|M_w| in [{min(norms):.4g}, {max(norms):.4g}] (<= 2.2), spread {spread:.3g} (<= 1.5), {secs:.1f} s (< 120 s)")
    assert passed


def test_criterion_09_oscillation_stability():
    t0 = time.perf_counter()
    coarse = oscillation_battery(grid_config(256), 1000)
    fine = oscillation_battery(grid_config(1024), 1000)
    secs = time.perf_counter() - t0
    change = abs(fine["D1"] - coarse["D1"]) / coarse["D1"]
    passed = coarse["finite"] and fine["finite"] and change < 0.25 and secs < 180
    record(9, passed, f"D1 {coarse['D1']:.4g} (n=256) -> {fine['D1']:.4g} (n=1024), change {change:.1%} (< 25%), {secs:.1f} s (< 180 s)")
    assert passed


def test_criterion_10_determinism(tmp_path):
    cfg = grid_config(512, complexities=[1, 2, 3])
    names = []
    for runner, stem in ((run_a2_sweep, "a2_sweep"), (run_complexity_sweep, "complexity_sweep")):
        runner(cfg, out=tmp_path / "first")
        runner(cfg, out=tmp_path / "second")
        names += [f"{stem}.csv", f"{stem}_slopes.csv", f"{stem}_checks.csv"]
    differ = [n for n in names if (tmp_path / "first" / n).read_bytes() != (tmp_path / "second" / n).read_bytes()]
    passed = not differ
    record(10, passed, f"{len(names)} CSV files rerun with the same seed, differing: {differ or 'none'}")
    assert passed
