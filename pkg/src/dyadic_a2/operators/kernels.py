"""Calderon-Zygmund kernels on finite spaces and the truncated singular operator.

A kernel is evaluated once into a dense ``n x n`` table with a zero diagonal;
``apply_cz`` is then ``(Tf)(x) = sum_{y != x} K(x, y) f(y) mass(y)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..space import QuasiMetricSpace

__all__ = [
    "Kernel",
    "KernelReport",
    "hilbert_kernel",
    "signed_inverse_kernel",
    "riesz_kernel",
    "zero_kernel",
    "get_kernel",
    "kernel_matrix",
    "validate_kernel",
    "apply_cz",
    "cz_matrix",
]


@dataclass(frozen=True)
class Kernel:
    """Off-diagonal kernel with declared decay and smoothness constants.

    ``table(space)`` must return the full ``n x n`` matrix ``K(x_i, y_j)``;
    the diagonal is ignored.
    """

    name: str
    table: Callable[[QuasiMetricSpace], np.ndarray]
    eta: float = 1.0
    c_decay: float = 1.0
    c_smooth: float = 1.0

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")


@dataclass
class KernelReport:
    c_decay_observed: float
    c_smooth_observed: float
    pairs_checked: int
    decay_violations: list[tuple[int, int]] = field(default_factory=list)
    smooth_violations: list[tuple[int, int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.decay_violations and not self.smooth_violations


def _first_coordinate(space: QuasiMetricSpace) -> np.ndarray:
    if space.coords is None:
        raise ValueError("this kernel needs point coordinates")
    return space.coords[:, 0]


def _hilbert_table(space):
    x = _first_coordinate(space)
    diff = x[:, None] - x[None, :]
    with np.errstate(divide="ignore"):
        return np.where(diff != 0, 1.0 / np.where(diff != 0, diff, 1.0), 0.0)


def _signed_inverse_table(space):
    x = _first_coordinate(space)
    sign = np.sign(x[:, None] - x[None, :])
    with np.errstate(divide="ignore"):
        return np.where(space.rho > 0, sign / np.where(space.rho > 0, space.rho, 1.0), 0.0)


def _riesz_table(space):
    if space.coords is None:
        raise ValueError("the Riesz kernel needs point coordinates")
    pts = space.coords
    d = pts.shape[1]
    diff = pts[:, None, 0] - pts[None, :, 0]
    dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(dist > 0, diff / np.where(dist > 0, dist, 1.0) ** (d + 1), 0.0)


def hilbert_kernel() -> Kernel:
    """``1 / (x - y)`` on the first coordinate."""
    return Kernel("hilbert", _hilbert_table, eta=0.5, c_decay=2.0, c_smooth=4.0)


def signed_inverse_kernel() -> Kernel:
    """``sign(x - y) / rho(x, y)``: the Hilbert kernel written through the distance table."""
    return Kernel("signed_inverse", _signed_inverse_table, eta=0.5, c_decay=2.0, c_smooth=4.0)


def riesz_kernel() -> Kernel:
    """First Riesz kernel ``(x_1 - y_1) / |x - y|^(d + 1)``."""
    return Kernel("riesz", _riesz_table, eta=0.5, c_decay=8.0, c_smooth=32.0)


def zero_kernel() -> Kernel:
    return Kernel("zero", lambda space: np.zeros((space.n, space.n)), eta=1.0, c_decay=0.0, c_smooth=0.0)


_REGISTRY = {
    "hilbert": hilbert_kernel,
    "signed_inverse": signed_inverse_kernel,
    "riesz": riesz_kernel,
    "zero": zero_kernel,
}


def get_kernel(name: str) -> Kernel:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; choose from {sorted(_REGISTRY)}") from None


def kernel_matrix(kernel: Kernel, space: QuasiMetricSpace) -> np.ndarray:
    table = np.array(kernel.table(space), dtype=float)
    if table.shape != (space.n, space.n):
        raise ValueError(f"kernel {kernel.name} returned shape {table.shape}")
    np.fill_diagonal(table, 0.0)
    return table


def _open_ball_masses(space: QuasiMetricSpace) -> np.ndarray:
    """``|B(x, rho(x, y))|`` for every pair (open balls)."""
    order, dist = space.sorted_rows
    cum = np.cumsum(space.mass[order], axis=1)
    out = np.empty((space.n, space.n))
    for x in range(space.n):
        pos = np.searchsorted(dist[x], space.rho[x], side="left")
        out[x] = cum[x, np.maximum(pos - 1, 0)]
    return out


def validate_kernel(
    kernel: Kernel,
    space: QuasiMetricSpace,
    sample_pairs=None,
    table: np.ndarray | None = None,
    max_pairs: int = 20000,
    seed: int = 0,
    rtol: float = 1e-9,
) -> KernelReport:
    """Measure the tightest decay and smoothness constants over sampled pairs.

    ``sample_pairs`` is an array of ``(x0, y)`` with ``x0 != y``; by default all
    off-diagonal pairs are used when there are at most ``max_pairs`` of them,
    otherwise a seeded random subset.  For each pair every ``x`` with
    ``rho(x0, x) <= eta * rho(x0, y)`` enters the smoothness check, in both
    the ``K(., y)`` and the transposed ``K(y, .)`` form.  ``table`` overrides
    the kernel's own values (used to audit corrupted tables).
    """
    K = kernel_matrix(kernel, space) if table is None else np.asarray(table, dtype=float)
    n = space.n
    rho = space.rho
    if sample_pairs is None:
        if n * (n - 1) <= max_pairs:
            xs, ys = np.nonzero(~np.eye(n, dtype=bool))
        else:
            rng = np.random.default_rng(seed)
            xs = rng.integers(0, n, size=max_pairs)
            ys = (xs + rng.integers(1, n, size=max_pairs)) % n
        pairs = np.column_stack([xs, ys])
    else:
        pairs = np.asarray(sample_pairs, dtype=int).reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            raise ValueError("sample pairs must avoid the diagonal")
    ball = _open_ball_masses(space)

    x0, y = pairs[:, 0], pairs[:, 1]
    decay = np.abs(K[x0, y]) * ball[x0, y]
    c_decay = float(decay.max()) if decay.size else 0.0
    decay_bad = pairs[decay > kernel.c_decay * (1 + rtol)]

    c_smooth = 0.0
    smooth_bad = []
    for (a, b) in pairs:
        r = rho[a, b]
        near = np.flatnonzero((rho[a] <= kernel.eta * r) & (np.arange(n) != a))
        near = near[near != b]
        if near.size == 0:
            continue
        scale = (rho[a, near] / r) ** kernel.eta / ball[a, b]
        diff = np.maximum(np.abs(K[near, b] - K[a, b]), np.abs(K[b, near] - K[b, a]))
        ratio = diff / scale
        worst = int(np.argmax(ratio))
        c_smooth = max(c_smooth, float(ratio[worst]))
        for x in near[ratio > kernel.c_smooth * (1 + rtol)]:
            smooth_bad.append((int(a), int(x), int(b)))
    return KernelReport(
        c_decay_observed=c_decay,
        c_smooth_observed=c_smooth,
        pairs_checked=int(len(pairs)),
        decay_violations=[tuple(map(int, p)) for p in decay_bad],
        smooth_violations=smooth_bad,
    )


def cz_matrix(kernel_or_table, space: QuasiMetricSpace) -> np.ndarray:
    """Matrix of the truncated operator acting on point values: ``K * mass``."""
    K = kernel_matrix(kernel_or_table, space) if isinstance(kernel_or_table, Kernel) else np.asarray(kernel_or_table)
    return K * space.mass[None, :]


def apply_cz(kernel_or_table, space: QuasiMetricSpace, f) -> np.ndarray:
    """``(Tf)(x) = sum_{y != x} K(x, y) f(y) mass(y)``."""
    f = np.asarray(f, dtype=float)
    return cz_matrix(kernel_or_table, space) @ f
