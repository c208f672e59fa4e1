"""Operator norms on weighted L2 spaces and weak-(1,1) ratios.

For an operator ``T`` on point values, the norm on ``L2(w mass)`` equals the
spectral norm of ``D T D^-1`` with ``D = diag(sqrt(w mass))``; it is found
by power iteration on the normal operator.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from ..space import QuasiMetricSpace
from .discrete import DiscreteOperator

__all__ = [
    "NormResult",
    "ConvergenceWarning",
    "as_linear_operator",
    "power_norm",
    "l2_norm",
    "weighted_l2_norm",
    "svd_norm",
    "weak_11_ratio",
]


class ConvergenceWarning(RuntimeWarning):
    pass


@dataclass
class NormResult:
    norm: float
    iterations: int
    converged: bool
    trace: list[float] = field(default_factory=list, repr=False)
    vector: np.ndarray | None = field(default=None, repr=False)

    def __float__(self):
        return self.norm


def as_linear_operator(op, n: int | None = None) -> LinearOperator:
    """Wrap a :class:`DiscreteOperator`, a dense or sparse matrix or a LinearOperator."""
    if isinstance(op, DiscreteOperator):
        return aslinearoperator(op.matrix)
    if isinstance(op, LinearOperator):
        return op
    if sp.issparse(op) or isinstance(op, np.ndarray):
        return aslinearoperator(op)
    raise TypeError(f"cannot use {type(op).__name__} as an operator")


def _weighted(op, space: QuasiMetricSpace, w) -> LinearOperator:
    A = as_linear_operator(op)
    d = np.sqrt(np.asarray(w, dtype=float) * space.mass)
    return LinearOperator(
        A.shape,
        matvec=lambda v: d * A.matvec(v / d),
        rmatvec=lambda v: A.rmatvec(d * v) / d,
        dtype=float,
    )


def power_norm(
    A: LinearOperator, seed: int = 0, tol: float = 1e-10, max_iter: int = 20000, starts=None
) -> NormResult:
    """Spectral norm of ``A`` by power iteration on ``A^T A``.

    Two starts (seeded random and constant) run to convergence; the larger
    Rayleigh quotient wins.
    """
    n = A.shape[1]
    if starts is None:
        starts = [np.random.default_rng(seed).standard_normal(n), np.ones(n)]
    best = None
    for v in starts:
        v = np.asarray(v, dtype=float)
        nv = np.linalg.norm(v)
        if nv == 0:
            continue
        v = v / nv
        trace = []
        prev = None
        converged = False
        for it in range(1, max_iter + 1):
            u = A.matvec(v)
            rq = float(u @ u)
            trace.append(rq)
            if rq == 0.0:
                converged = True
                break
            if prev is not None and abs(rq - prev) < tol * rq:
                converged = True
                break
            prev = rq
            v = A.rmatvec(u)
            v = v / np.linalg.norm(v)
        res = NormResult(float(np.sqrt(rq)), it, converged, trace, v)
        if best is None or res.norm > best.norm:
            best = res
    if best is None:
        return NormResult(0.0, 0, True)
    if not best.converged:
        warnings.warn(f"power iteration stopped after {max_iter} steps without converging", ConvergenceWarning, stacklevel=2)
    return best


def weighted_l2_norm(op, space: QuasiMetricSpace, w=None, **kwargs) -> NormResult:
    """Norm of ``op`` on ``L2(w mass)``; ``w=None`` is the plain ``L2(mass)`` norm."""
    w = np.ones(space.n) if w is None else np.asarray(w, dtype=float)
    return power_norm(_weighted(op, space, w), **kwargs)


def l2_norm(op, space: QuasiMetricSpace, **kwargs) -> NormResult:
    return weighted_l2_norm(op, space, None, **kwargs)


def svd_norm(op, space: QuasiMetricSpace, w=None) -> float:
    """Dense singular-value reference for small problems."""
    w = np.ones(space.n) if w is None else np.asarray(w, dtype=float)
    if isinstance(op, DiscreteOperator):
        M = op.matrix.toarray()
    elif sp.issparse(op):
        M = op.toarray()
    else:
        M = np.asarray(op, dtype=float)
    d = np.sqrt(w * space.mass)
    return float(np.linalg.norm(d[:, None] * M / d[None, :], 2))


def weak_11_ratio(opf, f, space: QuasiMetricSpace) -> float:
    """``sup_{a>0} a |{|opf| > a}| / ||f||_1``.

    ``a |{|g| > a}|`` increases between jumps, so the supremum is the largest
    ``v |{|g| >= v}|`` over the distinct values ``v`` of ``|g|``.
    """
    f = np.asarray(f, dtype=float)
    norm1 = float(np.sum(np.abs(f) * space.mass))
    if norm1 == 0:
        raise ValueError("f vanishes identically; the weak ratio is undefined")
    g = np.abs(np.asarray(opf, dtype=float))
    order = np.argsort(-g, kind="stable")
    vals = g[order]
    cum = np.cumsum(space.mass[order])
    # last index of each tie group gives |{|g| >= v}|
    last = np.r_[vals[1:] != vals[:-1], True]
    best = np.max(vals[last] * cum[last]) if vals.size else 0.0
    return float(max(best, 0.0)) / norm1
