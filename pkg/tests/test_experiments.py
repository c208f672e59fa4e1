import json
import math

import numpy as np
import pytest

from dyadic_a2.experiments import (
    RunConfig,
    csv_text,
    fit_slope,
    parse_cell,
    run_a2_sweep,
    run_complexity_sweep,
    svg_chart,
)
from dyadic_a2.experiments.cli import main
from dyadic_a2.experiments.config import cell_seed


def small_config(**extra) -> RunConfig:
    data = {
        "space": {"kind": "grid1d", "n": 128},
        "weights": {"alphas": [0.0, 0.5, 0.9]},
        "complexities": [1, 2],
        "fuzz": {"median": 200, "sparse": 20, "oscillation": 10, "operator": 4, "families_tg": 2, "families_chain": 2},
    }
    data.update(extra)
    return RunConfig.from_dict(data)


def test_config_round_trip(tmp_path):
    cfg = small_config()
    path = tmp_path / "cfg.json"
    path.write_text(cfg.dumps())
    assert RunConfig.load(path).to_dict() == cfg.to_dict()


@pytest.mark.parametrize(
    "data",
    [
        {"bogus": 1},
        {"space": {"kind": "torus"}},
        {"space": {"size": 3}},
        {"weights": {"alphas": [1.0]}},
        {"kernel": "nope"},
        {"complexities": [1.5]},
        {"dyadic": {"delta": 1.5}},
        {"space": {"kind": "points_csv"}},
    ],
)
def test_config_rejects_bad_input(data):
    with pytest.raises(ValueError):
        RunConfig.from_dict(data)


def test_cell_seed_is_stable_and_order_free():
    a = cell_seed(0, alpha=0.9, k=3)
    assert a == cell_seed(0, k=3, alpha=np.float64(0.9))
    assert a != cell_seed(1, alpha=0.9, k=3)
    assert 0 <= a < 2**63


def test_parse_cell():
    assert parse_cell("alpha=0.9,k=3,operator=B_0_2") == {"alpha": 0.9, "k": 3, "operator": "B_0_2"}
    assert parse_cell(None) == {}
    with pytest.raises(ValueError):
        parse_cell("alpha")


def test_fit_slope_recovers_power_law():
    x = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    slope, se = fit_slope(x, 3 * x**1.0)
    assert slope == pytest.approx(1.0, abs=1e-12) and se < 1e-10
    assert math.isnan(fit_slope([2.0, 2.0], [1.0, 3.0])[0])


def test_csv_is_deterministic_and_round_trips_floats():
    rows = [{"a": 0.1 + 0.2, "b": True, "c": float("nan")}]
    text = csv_text(rows, ["a", "b", "c"])
    assert text == csv_text(rows, ["a", "b", "c"])
    assert float(text.splitlines()[1].split(",")[0]) == 0.1 + 0.2
    assert text.splitlines()[1].endswith("true,nan")


def test_svg_has_one_polyline_per_series():
    svg = svg_chart({"a": ([1, 10], [1, 10]), "b": ([1, 10], [2, 3])}, "t", "x", "y")
    assert svg.count("<polyline") == 2 and svg.startswith("<svg")


def test_constant_weight_single_row_has_unit_a2():
    cfg = small_config(weights={"alphas": [0.0]})
    res = run_a2_sweep(cfg, cell={"operator": "T"})
    assert len(res.rows) == 1 and res.rows[0]["a2"] == 1.0


def test_sweep_is_byte_identical(tmp_path):
    cfg = small_config()
    run_a2_sweep(cfg, out=tmp_path / "a")
    run_a2_sweep(cfg, out=tmp_path / "b")
    for name in ("a2_sweep.csv", "a2_sweep_slopes.csv", "a2_sweep_checks.csv", "a2_sweep.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cell_reproduces_full_sweep_row():
    cfg = small_config()
    full = run_a2_sweep(cfg)
    row = next(r for r in full.rows if r["operator"].startswith("B") and r["alpha"] == 0.9)
    cell = {"alpha": 0.9, "k": row["k"], "operator": row["operator"], "family": row["family"]}
    again = run_a2_sweep(cfg, cell=cell).rows
    assert len(again) == 1
    assert abs(again[0]["norm"] - row["norm"]) <= 1e-12 * row["norm"]


def test_complexity_sweep_rows():
    res = run_complexity_sweep(small_config())
    assert [r["k"] for r in res.rows] == [0, 1, 2]
    assert all(r["weak_sup"] > 0 and r["cases"] > 0 for r in res.rows)
    assert "beta_spread" in res.checks


def test_cli_build_verify_and_sweep(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(small_config().dumps())
    assert main(["build-grid", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    snap = json.loads((tmp_path / "system.json").read_text())
    assert snap["space"]["n"] == 128
    assert main(["verify", "--system", str(tmp_path / "system.json")]) == 0
    code = main(["sweep-a2", "--config", str(cfg), "--out", str(tmp_path), "--cell", "alpha=0.5,operator=T"])
    out = capsys.readouterr().out
    assert code in (0, 1) and '"operator": "T"' in out
    assert (tmp_path / "a2_sweep.csv").exists()


def test_cli_verify_rejects_snapshot_without_space(tmp_path):
    p = tmp_path / "s.json"
    p.write_text("{}")
    assert main(["verify", "--system", str(p)]) == 2


def test_cli_fuzz_small(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(small_config().dumps())
    assert main(["fuzz", "--config", str(cfg), "--out", str(tmp_path)]) in (0, 1)
    assert any(p.suffix == ".csv" for p in tmp_path.iterdir())
