"""Weighted-norm sweep over A2 weights and weak-type sweep over complexity."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..operators.discrete import build_A_k, build_B
from ..operators.maximal import a2_characteristic, power_weight
from ..operators.norms import l2_norm, weak_11_ratio, weighted_l2_norm
from ..sparse import SparseFamily, build_sparse_family, nested_family
from .config import Context, RunConfig, build_context, cell_seed
from .output import fit_slope, write_csv, write_svg

__all__ = [
    "SweepResult",
    "sweep_families",
    "pole_point",
    "run_a2_sweep",
    "run_complexity_sweep",
    "A2_COLUMNS",
    "COMPLEXITY_COLUMNS",
]

A2_COLUMNS = ["operator", "family", "j", "alpha", "a2", "k", "norm", "ratio", "iterations"]
COMPLEXITY_COLUMNS = ["k", "weak_sup", "beta", "l2_max", "families", "cases"]


@dataclass
class SweepResult:
    rows: list[dict]
    slopes: list[dict] = field(default_factory=list)
    checks: dict[str, tuple[float, bool]] = field(default_factory=dict)
    columns: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(passed for _, passed in self.checks.values())

    def write(self, out, stem: str) -> list[Path]:
        out = Path(out)
        paths = [write_csv(out / f"{stem}.csv", self.rows, self.columns)]
        if self.slopes:
            cols = list(self.slopes[0])
            paths.append(write_csv(out / f"{stem}_slopes.csv", self.slopes, cols))
        checks = [{"check": k, "value": v, "passed": p} for k, (v, p) in self.checks.items()]
        paths.append(write_csv(out / f"{stem}_checks.csv", checks, ["check", "value", "passed"]))
        return paths


def pole_point(ctx: Context, pole=None) -> int:
    """Index of the point nearest the weight pole (the bounding-box midpoint by default)."""
    pts = ctx.space.coords
    if pts is None:
        return 0
    p = (pts.min(axis=0) + pts.max(axis=0)) / 2 if pole is None else np.asarray(pole, dtype=float)
    return int(np.argmin(((pts - p[None, :]) ** 2).sum(axis=1)))


def sweep_families(ctx: Context, seed: int, tg: int, chain: int, chain_points=None) -> list[tuple[str, SparseFamily, int]]:
    """Families from ``f = T g`` for seeded random ``g`` plus maximal-depth chains.

    Returns ``(label, family, point)`` where ``point`` is a point of the
    deepest cube (used for point-mass test functions).
    """
    n = ctx.space.n
    out = []
    for i in range(tg):
        rng = np.random.default_rng(cell_seed(seed, family="tg", index=i))
        g = rng.standard_normal(n)
        fam = build_sparse_family(ctx.T @ g, ctx.system.root, ctx.system, ctx.space)
        p = int(rng.integers(n))
        out.append((f"tg{i}", fam, p))
    points = list(chain_points or [])
    for i in range(chain - len(points)):
        points.append(int(np.random.default_rng(cell_seed(seed, family="chain", index=i)).integers(n)))
    for i, p in enumerate(points[:chain] if chain else points):
        out.append((f"chain{i}", nested_family(ctx.system, ctx.space, p), p))
    return out


def _matches(cell: dict, **coords) -> bool:
    for key, value in cell.items():
        if key not in coords:
            continue
        mine = coords[key]
        if isinstance(value, float) or isinstance(mine, float):
            if not math.isclose(float(value), float(mine), rel_tol=0, abs_tol=1e-12):
                return False
        elif str(value) != str(mine):
            return False
    return True


def run_a2_sweep(cfg: RunConfig, cell: dict | None = None, out=None, ctx: Context | None = None) -> SweepResult:
    """Weighted norms of ``T``, ``A_k`` and every nonempty ``B_{j,k}`` across power weights.

    ``T`` rows carry ``k = 0`` and ``ratio = norm / [w]``; the other rows use
    ``norm / ([w] k)``.  Slopes of ``log norm`` against ``log [w]`` are fitted
    per operator.
    """
    cell = cell or {}
    ctx = ctx or build_context(cfg)
    space = ctx.space
    weights = []
    for a in cfg.weights.alphas:
        if not _matches(cell, alpha=float(a)):
            continue
        w = power_weight(space, a, pole=cfg.weights.pole)
        weights.append((float(a), w, a2_characteristic(space, w)))
    fams = sweep_families(ctx, cfg.seed, cfg.fuzz.sweep_tg, 1, chain_points=[pole_point(ctx, cfg.weights.pole)])

    ops = []  # (operator, family, j, k, linear operator)
    if _matches(cell, operator="T", k=0, family="-"):
        ops.append(("T", "-", -1, 0, ctx.T))
    for k in cfg.complexities:
        if k < 1 or not _matches(cell, k=k):
            continue
        for label, fam, _ in fams:
            if _matches(cell, operator=f"A_{k}", family=label):
                ops.append((f"A_{k}", label, -1, k, build_A_k(fam, ctx.system, space, k)))
            for j, op in build_B(fam, ctx.system, ctx.adjacent, space, k).nonempty():
                name = f"B_{j}_{k}"
                if _matches(cell, operator=name, family=label, j=j):
                    ops.append((name, label, j, k, op))

    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name, label, j, k, op in ops:
            for a, w, a2 in weights:
                s = cell_seed(cfg.seed, operator=name, family=label, alpha=a, k=k)
                res = weighted_l2_norm(op, space, w.values, seed=s % (2**32))
                rows.append(
                    {
                        "operator": name,
                        "family": label,
                        "j": j,
                        "alpha": a,
                        "a2": a2,
                        "k": k,
                        "norm": res.norm,
                        "ratio": res.norm / (a2 * max(k, 1)),
                        "iterations": res.iterations,
                    }
                )

    result = SweepResult(rows=rows, columns=A2_COLUMNS)
    groups = {}
    for r in rows:
        groups.setdefault((r["operator"], r["family"]), []).append(r)
    for (name, label), rs in groups.items():
        slope, se = fit_slope([r["a2"] for r in rs], [r["norm"] for r in rs])
        result.slopes.append({"operator": name, "family": label, "k": rs[0]["k"], "slope": slope, "stderr": se, "points": len(rs)})
    _a2_checks(result, [a2 for _, _, a2 in weights])
    if out is not None:
        result.write(out, "a2_sweep")
        series = {f"{s['operator']} {s['family']}": ([r["a2"] for r in groups[(s["operator"], s["family"])]], [r["norm"] for r in groups[(s["operator"], s["family"])]]) for s in result.slopes if s["operator"] == "T" or s["operator"].startswith("B")}
        write_svg(Path(out) / "a2_sweep.svg", series, "weighted norm against A2 characteristic", "[w]_A2", "norm")
    return result


def _a2_checks(result: SweepResult, a2s: list[float]):
    if len(a2s) < 2:
        return
    span = math.log10(max(a2s) / min(a2s))
    result.checks["a2_span_decades"] = (span, span >= 1.5)
    t = [s for s in result.slopes if s["operator"] == "T"]
    if t:
        result.checks["T_slope"] = (t[0]["slope"], 0.5 <= t[0]["slope"] <= 1.1)
        tr = [r["ratio"] for r in result.rows if r["operator"] == "T"]
        result.checks["T_ratio_spread"] = (max(tr) / min(tr), max(tr) / min(tr) <= 4)
    b = [s for s in result.slopes if s["operator"].startswith("B")]
    if b:
        lo = min(s["slope"] for s in b)
        hi = max(s["slope"] for s in b)
        result.checks["B_slope_min"] = (lo, lo >= 0.5)
        result.checks["B_slope_max"] = (hi, hi <= 1.1)
        br = [r["ratio"] for r in result.rows if r["operator"].startswith("B")]
        result.checks["B_ratio_spread"] = (max(br) / min(br), max(br) / min(br) <= 4)


def run_complexity_sweep(cfg: RunConfig, cell: dict | None = None, out=None, ctx: Context | None = None) -> SweepResult:
    """``beta_k = sup weak_11_ratio(B_{j,k}^* f, f) / k`` over a family and ``f`` battery.

    The battery crosses ``T g`` families and maximal-depth chains with a
    point mass and a positive random function.  ``k = 0`` (``Q* = Q``) is a
    baseline row whose ``beta`` is the raw supremum.
    """
    cell = cell or {}
    ctx = ctx or build_context(cfg)
    space, n = ctx.space, ctx.space.n
    fams = sweep_families(ctx, cfg.seed, cfg.fuzz.families_tg, cfg.fuzz.families_chain)
    battery = []
    for label, fam, p in fams:
        rng = np.random.default_rng(cell_seed(cfg.seed, battery=label))
        spike = np.zeros(n)
        spike[p] = 1.0
        battery.append((fam, [spike, np.abs(rng.standard_normal(n))]))
    ks = [0] + [k for k in cfg.complexities if k >= 1]
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k in ks:
            if not _matches(cell, k=k):
                continue
            best, l2max, cases = 0.0, 0.0, 0
            for fam, fs in battery:
                bops = build_B(fam, ctx.system, ctx.adjacent, space, k)
                for _, op in bops.nonempty():
                    star = op.adjoint()
                    for f in fs:
                        best = max(best, weak_11_ratio(star.apply(f), f, space))
                        cases += 1
                l2max = max(l2max, l2_norm(bops.total(), space, seed=cell_seed(cfg.seed, k=k) % (2**32)).norm)
            rows.append(
                {"k": k, "weak_sup": best, "beta": best / max(k, 1), "l2_max": l2max, "families": len(battery), "cases": cases}
            )
    result = SweepResult(rows=rows, columns=COMPLEXITY_COLUMNS)
    main = [r for r in rows if r["k"] >= 1]
    if len(main) >= 2:
        slope, se = fit_slope([r["k"] for r in main], [r["weak_sup"] for r in main])
        result.slopes.append({"quantity": "beta_k*k", "slope": slope, "stderr": se, "points": len(main)})
        betas = [r["beta"] for r in main]
        spread = max(betas) / min(betas)
        result.checks["beta_spread"] = (spread, spread <= 3)
        result.checks["growth_slope"] = (slope, slope <= 1.3)
    if out is not None:
        result.write(out, "complexity_sweep")
        write_svg(
            Path(out) / "complexity_sweep.svg",
            {"beta_k k": ([r["k"] for r in main], [r["weak_sup"] for r in main]), "beta_k": ([r["k"] for r in main], [r["beta"] for r in main])},
            "weak (1,1) constant against complexity",
            "k",
            "constant",
        )
    return result
