"""Check batteries for dyadic structure, sparse families and operator lemmas.

Each battery returns plain rows ``{battery, check, cases, violations, value,
passed, seed}`` so reports from different batteries share one CSV layout.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dyadic import build_dyadic_system, dilate, standard_dyadic_system, verify_system
from ..operators.discrete import build_B
from ..operators.kernels import get_kernel, validate_kernel
from ..operators.lemmas import (
    MeasuredConstants,
    biw_ratio,
    discretization_constant,
    eltwo_chain,
    median_term_ratio,
    oscillation_bound_ratio,
    weak11_decomposition,
)
from ..operators.maximal import (
    a2_characteristic,
    a2_dyadic,
    dyadic_maximal_operator,
    maximal_norm,
    power_weight,
)
from ..operators.norms import l2_norm, weak_11_ratio, weighted_l2_norm
from ..space import QuasiMetricSpace, ball_members, grid_2d, power_grid, snowflake_grid, uniform_grid
from ..sparse import build_sparse_family, check_sparseness, exclusive_sets, verify_domination
from .config import RunConfig, build_context, cell_seed, default_delta
from .median_battery import nonsubadditive_example, mutation_self_test, run_median_lemmas
from .output import write_csv
from .sweeps import sweep_families

__all__ = [
    "REPORT_COLUMNS",
    "BatteryReport",
    "standard_spaces",
    "median_battery",
    "structure_battery",
    "sparse_battery",
    "eltwo_battery",
    "maximal_battery",
    "oscillation_battery",
    "kernel_battery",
    "constants_battery",
    "run_lemma_battery",
]

REPORT_COLUMNS = ["battery", "check", "cases", "violations", "value", "passed", "seed"]


def _row(battery, check, passed, value=math.nan, cases=1, violations=None, seed=""):
    if violations is None:
        violations = 0 if passed else 1
    return {
        "battery": battery,
        "check": check,
        "cases": int(cases),
        "violations": int(violations),
        "value": float(value),
        "passed": bool(passed),
        "seed": seed,
    }


@dataclass
class BatteryReport:
    rows: list[dict] = field(default_factory=list)
    constants: MeasuredConstants = field(default_factory=MeasuredConstants)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(r["passed"] for r in self.rows)

    def failures(self) -> list[dict]:
        return [r for r in self.rows if not r["passed"]]

    def write(self, out, stem: str = "lemma_battery") -> Path:
        return write_csv(Path(out) / f"{stem}.csv", self.rows, REPORT_COLUMNS)


def standard_spaces(small: bool = False) -> list[QuasiMetricSpace]:
    """Uniform [0,1], the unit square, a snowflake line and the squared-distance line."""
    if small:
        return [uniform_grid(128), grid_2d(12), snowflake_grid(96), power_grid(96)]
    return [uniform_grid(1024), grid_2d(32), snowflake_grid(512), power_grid(512)]


# --- medians ----------------------------------------------------------------------


def median_battery(cases: int = 10_000, seed: int = 0) -> list[dict]:
    rows = []
    for r in run_median_lemmas(cases, seed=seed):
        rows.append(
            _row("median", r.lemma, r.violations == 0, r.worst_margin, r.cases, r.violations, f"{r.seed}:{r.first_failure}")
        )
    ex = nonsubadditive_example()
    exact = ex["m_f"] == 0.25 and ex["m_g"] == 0.25 and ex["m_fg"] == 1.25
    rows.append(_row("median", "example_nonsubadditive", exact, ex["m_fg"]))
    mut = mutation_self_test(100, seed=seed)
    caught = mut["positive_sup"]["median_shift"]
    rows.append(_row("median", "mutant_positive_sup_detected", caught > 0, caught, 100))
    return rows


# --- dyadic structure ---------------------------------------------------------------


def structure_battery(spaces=None, draws: int = 1000, seed: int = 0) -> list[dict]:
    rows = []
    rng = np.random.default_rng(seed)
    for space in spaces or standard_spaces():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            system = build_dyadic_system(space, default_delta(space), seed=seed)
        rep = verify_system(system, space)
        for p in ("p1", "p2", "p3", "p4", "p5"):
            rows.append(_row("structure", f"{space.name}:{p}", getattr(rep, p), cases=len(system.cubes)))
        rows.append(_row("structure", f"{space.name}:eps_positive", rep.eps_observed > 0, rep.eps_observed))
        # containment Q in lambda Q and parent consistency
        bad = 0
        for _ in range(draws):
            c = system.cubes[int(rng.integers(len(system.cubes)))]
            lam = 1.0 + 3.0 * rng.random()
            inside = ball_members(space, dilate(system, c, lam))
            bad += int(not np.all(np.isin(c.members, inside)))
        rows.append(_row("structure", f"{space.name}:dilate_contains", bad == 0, cases=draws, violations=bad))
        bad = 0
        for k in range(system.k_min, system.k_max):
            up, down = system.labels_at(k), system.labels_at(k + 1)
            parents = np.array([system.cubes[c].parent for c in down])
            bad += int(np.sum(parents != up))
        rows.append(_row("structure", f"{space.name}:parent_consistent", bad == 0, cases=space.n, violations=bad))
    grid = uniform_grid(1024)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        built = build_dyadic_system(grid, 0.5, order="index", net_scale=1.0)
    std = standard_dyadic_system(grid)
    same = {tuple(c.members) for c in built.cubes} == {tuple(c.members) for c in std.cubes}
    rows.append(_row("structure", "standard_dyadic_intervals", same, cases=len(std.cubes)))
    return rows


# --- sparse families -------------------------------------------------------------------


def _sparse_inputs(space: QuasiMetricSpace, rng, i: int) -> np.ndarray:
    n = space.n
    kind = i % 4
    if kind == 0:
        return rng.standard_normal(n)
    if kind == 1:
        f = np.zeros(n)
        f[rng.integers(n, size=rng.integers(1, 4))] = rng.exponential(100.0)
        return f
    if kind == 2:
        return np.cumsum(rng.standard_normal(n))
    return rng.integers(-2, 3, size=n).astype(float)


def sparse_battery(spaces=None, cases: int = 1000, seed: int = 0) -> list[dict]:
    rows = []
    for space in spaces or standard_spaces():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            system = build_dyadic_system(space, default_delta(space), seed=seed)
        rng = np.random.default_rng(cell_seed(seed, battery="sparse", space=space.name))
        half = dom = excl = 0
        worst = -math.inf
        first = -1
        for i in range(cases):
            f = _sparse_inputs(space, rng, i)
            fam = build_sparse_family(f, system.root, system, space)
            bad_half = bool(check_sparseness(fam, system, space))
            rep = verify_domination(f, system.root, system, space, fam)
            worst = max(worst, rep.max_violation / rep.scale)
            E = exclusive_sets(fam, system)
            count = np.zeros(space.n, dtype=int)
            ok_e = True
            for c, e in E.items():
                count[e] += 1
                ok_e &= space.mass[e].sum() >= space.mass[system.cubes[c].members].sum() / 2 * (1 - 1e-12)
            ok_e &= bool(np.all(count <= 1))
            half += bad_half
            dom += not rep.passed
            excl += not ok_e
            if first < 0 and (bad_half or not rep.passed or not ok_e):
                first = i
        tag = f"{seed}:{first}"
        rows.append(_row("sparse", f"{space.name}:half_measure", half == 0, cases=cases, violations=half, seed=tag))
        rows.append(_row("sparse", f"{space.name}:domination", dom == 0, worst, cases, dom, tag))
        rows.append(_row("sparse", f"{space.name}:exclusive_sets", excl == 0, cases=cases, violations=excl, seed=tag))
    return rows


# --- L2 bound of B ------------------------------------------------------------------------


def eltwo_battery(cfg: RunConfig, families: int = 5, complexities=(1, 3, 6)) -> dict:
    """``||B||`` against ``||B*||``, the constant ``gamma`` and the proof chain.

    ``gamma = 2 max_j ||M_j||^2`` where ``M_j`` is the dyadic maximal function
    over the base system together with grid ``j``.
    """
    ctx = build_context(cfg)
    space, n = ctx.space, ctx.space.n
    ones = np.ones(n)
    gamma = 0.0
    for s in ctx.adjacent.systems:
        systems = [ctx.system] if s is ctx.system else [ctx.system, s]
        mn = maximal_norm(dyadic_maximal_operator(systems, space, ones), space, ones, seed=cfg.seed)
        gamma = max(gamma, 2 * mn.norm**2)
    fams = sweep_families(ctx, cfg.seed, families, families)
    max_norm = max_diff = 0.0
    chains = chain_bad = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for label, fam, _ in fams:
            for k in complexities:
                for j, op in build_B(fam, ctx.system, ctx.adjacent, space, k).nonempty():
                    a = l2_norm(op, space).norm
                    b = l2_norm(op.adjoint(), space).norm
                    max_norm = max(max_norm, a, b)
                    max_diff = max(max_diff, abs(a - b) / max(a, b))
                    rng = np.random.default_rng(cell_seed(cfg.seed, eltwo=label, k=k, j=j))
                    grid = ctx.adjacent.systems[j]
                    systems = [ctx.system] if grid is ctx.system else [ctx.system, grid]
                    ch = eltwo_chain(op, fam, ctx.system, space, rng.standard_normal(n), rng.standard_normal(n), systems)
                    chains += 1
                    chain_bad += not ch.holds()
    return {
        "n": n,
        "gamma": gamma,
        "max_norm": max_norm,
        "max_rel_diff": max_diff,
        "chains": chains,
        "chain_violations": chain_bad,
    }


# --- weighted dyadic maximal ---------------------------------------------------------------


def maximal_battery(cfg: RunConfig) -> list[dict]:
    ctx = build_context(cfg)
    out = []
    for a in cfg.weights.alphas:
        w = power_weight(ctx.space, a, pole=cfg.weights.pole)
        res = maximal_norm(dyadic_maximal_operator(ctx.system, ctx.space, w), ctx.space, w, seed=cell_seed(cfg.seed, maximal=a) % (2**32))
        out.append({"alpha": float(a), "a2": a2_characteristic(ctx.space, w), "norm": res.norm, "start": res.best_start})
    return out


# --- linearization constant -----------------------------------------------------------------


def oscillation_battery(cfg: RunConfig, cases: int | None = None) -> dict:
    """Largest observed ratio in the linearization bound over an (f, Q) battery.

    Cube levels are drawn uniformly, then a cube within the level; ``f``
    cycles through a Gaussian, a spike inside ``Q``, a far-field function
    vanishing near ``Q`` and a step function.
    """
    ctx = build_context(cfg)
    space, system, n = ctx.space, ctx.system, ctx.space.n
    cases = cfg.fuzz.oscillation if cases is None else cases
    eta = ctx.kernel.eta
    rng = np.random.default_rng(cfg.seed)
    best, worst_case = 0.0, -1
    for i in range(cases):
        level = int(rng.integers(system.k_min, system.k_max))
        cubes = system.cubes_at(level)
        q = cubes[int(rng.integers(len(cubes)))]
        kind = i % 4
        if kind == 0:
            f = rng.standard_normal(n)
        elif kind == 1:
            f = np.zeros(n)
            f[q.members[rng.integers(q.size)]] = 1.0
        elif kind == 2:
            far = np.flatnonzero(space.rho[q.center] >= 2 * system.cover_constant * system.delta**q.level)
            f = np.zeros(n)
            if far.size:
                f[far] = rng.standard_normal(far.size)
        else:
            x = space.coords[:, 0] if space.coords is not None else np.arange(n) / n
            f = (x < rng.random()).astype(float)
        r, _, _ = oscillation_bound_ratio(ctx.T, system, space, f, q, eta)
        if r > best:
            best, worst_case = r, i
    return {"n": n, "D1": float(best), "cases": cases, "worst_case": worst_case, "finite": math.isfinite(best)}


# --- kernels -----------------------------------------------------------------------------------


def kernel_battery(sizes=(128, 256), names=("hilbert", "signed_inverse")) -> list[dict]:
    out = []
    for name in names:
        kernel = get_kernel(name)
        for n in sizes:
            rep = validate_kernel(kernel, uniform_grid(n))
            out.append(
                {
                    "kernel": name,
                    "n": n,
                    "c_decay": rep.c_decay_observed,
                    "c_smooth": rep.c_smooth_observed,
                    "ok": rep.ok,
                }
            )
    return out


# --- measured constants ------------------------------------------------------------------------


def constants_battery(cfg: RunConfig, cases: int | None = None, d1: float | None = None) -> tuple[MeasuredConstants, list[dict]]:
    """Observed D0, D2 (both), D3, D4, D5, D6, beta, gamma over small batteries,
    with the structural facts of the weak (1,1) and local oscillation proofs."""
    ctx = build_context(cfg)
    space, system, n = ctx.space, ctx.system, ctx.space.n
    cases = cfg.fuzz.operator if cases is None else cases
    consts = MeasuredConstants()
    rows = []
    # D0: dyadic against ball characteristic
    for a in cfg.weights.alphas:
        w = power_weight(space, a, pole=cfg.weights.pole)
        consts.update_max("D0", a2_dyadic(system, space, w) / a2_characteristic(space, w))
    if d1 is None:
        d1 = oscillation_battery(cfg, cases=min(cfg.fuzz.oscillation, 200))["D1"]
    consts.D1 = d1
    fams = sweep_families(ctx, cfg.seed, max(1, cases // 8), max(1, cases // 8))
    weights = [power_weight(space, a, pole=cfg.weights.pole) for a in (min(cfg.weights.alphas), max(cfg.weights.alphas))]
    a2s = [a2_characteristic(space, w) for w in weights]
    duality = median_ratio = 0.0
    gaps = {}
    whitney_bad = decomposition_count = biw_bad = biw_count = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for idx, (label, fam, p) in enumerate(fams):
            rng = np.random.default_rng(cell_seed(cfg.seed, constants=label))
            g = rng.standard_normal(n)
            if label.startswith("tg"):
                consts.update_max(
                    "d2_discretization", discretization_constant(ctx.T, system, space, ctx.T @ g, fam, d1, ctx.kernel.eta)
                )
            f = np.zeros(n)
            f[p] = 1.0
            f += 0.1 * np.abs(rng.standard_normal(n))
            for k in cfg.complexities:
                if k < 1:
                    continue
                bops = build_B(fam, system, ctx.adjacent, space, k)
                for j, op in bops.nonempty():
                    star = op.adjoint()
                    consts.update_max("beta", weak_11_ratio(star.apply(f), f, space) / k)
                    avg = float(np.sum(np.abs(f) * space.mass))
                    for a in (2 * avg, 8 * avg):
                        dec = weak11_decomposition(f, a, system, space, fam, bops, j)
                        decomposition_count += 1
                        whitney_bad += not (dec.covers_omega and dec.disjoint and dec.whitney_ok)
                        consts.update_max("d2_weak11", dec.d2)
                        consts.update_max("D3", dec.d3)
                        gaps[k] = max(gaps.get(k, 0), dec.max_level_gap)
                    for w in weights:
                        fwd = weighted_l2_norm(op, space, w.values).norm
                        back = weighted_l2_norm(star, space, 1.0 / w.values).norm
                        duality = max(duality, abs(fwd - back) / fwd)
                    bstar_f = star.apply(f)
                    for w, a2 in zip(weights, a2s):
                        root_j = ctx.adjacent.systems[j].root.members
                        median_ratio = max(median_ratio, median_term_ratio(bstar_f, f, root_j, w.values, space, k, a2))
                    grid = ctx.adjacent.systems[j]
                    lam = grid.eps_observed / 4
                    targets = sorted({int(t.target[0]) for t in star.terms})
                    for y in targets[:4] + [int(rng.integers(n))]:
                        level = int(rng.integers(grid.k_min, grid.k_max + 1))
                        q1 = grid.cubes[int(grid.labels_at(level)[y])]
                        ratio, constant = biw_ratio(star, space, q1.members, f, lam)
                        biw_bad += not constant
                        biw_count += 1
                        if math.isfinite(ratio):
                            consts.update_max("D6", ratio / k)
    if gaps:
        # k(Q) - k(W) <= D4 k holds for every pair, so the strict window needs D5 = 1
        consts.D4 = max(g / k for k, g in gaps.items())
        consts.D5 = 1.0
    rows.append(_row("constants", "whitney_cover", whitney_bad == 0, cases=decomposition_count, violations=whitney_bad))
    rows.append(_row("constants", "duality_transfer", duality <= 1e-6, duality))
    rows.append(_row("constants", "median_term_over_k_a2", math.isfinite(median_ratio), median_ratio))
    rows.append(_row("constants", "biw_partial_sum_constant", biw_bad == 0, cases=biw_count, violations=biw_bad))
    for name, value in consts.as_dict().items():
        if value is not None:
            rows.append(_row("constants", name, math.isfinite(value) and value >= 0, value))
    return consts, rows


# --- combined ------------------------------------------------------------------------------------


def run_lemma_battery(cfg: RunConfig, out=None, include_operators: bool = False) -> BatteryReport:
    """Median lemmas, dyadic structure and sparse families (and, optionally,
    the operator constants on the configured space)."""
    report = BatteryReport()
    t = time.perf_counter()
    report.rows += median_battery(cfg.fuzz.median, cfg.seed)
    report.timings["median"] = time.perf_counter() - t
    t = time.perf_counter()
    report.rows += structure_battery(seed=cfg.dyadic.seed)
    report.timings["structure"] = time.perf_counter() - t
    t = time.perf_counter()
    report.rows += sparse_battery(cases=cfg.fuzz.sparse, seed=cfg.seed)
    report.timings["sparse"] = time.perf_counter() - t
    if include_operators:
        t = time.perf_counter()
        consts, rows = constants_battery(cfg)
        report.constants = consts
        report.rows += rows
        report.timings["operators"] = time.perf_counter() - t
    if out is not None:
        report.write(out)
    return report
