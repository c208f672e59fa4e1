"""Discrete averaging operators built from a sparse family.

An operator is a list of terms ``(source, target, coefficient)`` acting as::

    f -> sum_t coefficient_t * (sum_{y in source_t} f(y) mass(y)) * chi_{target_t}

The ``L2(mass)`` adjoint swaps source and target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..dyadic import AdjacentSystems, CoverageError, DyadicSystem, as_cube, cover_ball, dilate
from ..space import QuasiMetricSpace, ball_members
from ..sparse import SparseFamily

__all__ = [
    "Term",
    "DiscreteOperator",
    "BOperators",
    "build_A_k",
    "build_B",
    "operator_to_json",
]


@dataclass(frozen=True, eq=False)
class Term:
    source: np.ndarray
    target: np.ndarray
    coefficient: float
    cube: int = -1


@dataclass(eq=False)
class DiscreteOperator:
    n: int
    mass: np.ndarray
    terms: list[Term] = field(default_factory=list)
    absolute: bool = False
    name: str = ""

    def __post_init__(self):
        self._matrix = None

    def adjoint(self) -> "DiscreteOperator":
        swapped = [Term(t.target, t.source, t.coefficient, t.cube) for t in self.terms]
        name = self.name[:-1] if self.name.endswith("*") else self.name + "*"
        return DiscreteOperator(self.n, self.mass, swapped, absolute=self.absolute, name=name)

    def scaled(self, c: float) -> "DiscreteOperator":
        terms = [Term(t.source, t.target, c * t.coefficient, t.cube) for t in self.terms]
        return DiscreteOperator(self.n, self.mass, terms, absolute=self.absolute, name=self.name)

    @property
    def matrix(self) -> sp.csr_matrix:
        """Sparse matrix acting on point values (the absolute value is not included)."""
        if self._matrix is None:
            m = len(self.terms)
            if m == 0:
                self._matrix = sp.csr_matrix((self.n, self.n))
                return self._matrix
            src_rows = np.concatenate([np.full(t.source.size, i) for i, t in enumerate(self.terms)])
            src_cols = np.concatenate([t.source for t in self.terms])
            tgt_rows = np.concatenate([t.target for t in self.terms])
            tgt_cols = np.concatenate([np.full(t.target.size, i) for i, t in enumerate(self.terms)])
            coef = np.array([t.coefficient for t in self.terms])
            S = sp.csr_matrix((self.mass[src_cols], (src_rows, src_cols)), shape=(m, self.n))
            T = sp.csr_matrix((coef[tgt_cols], (tgt_rows, tgt_cols)), shape=(self.n, m))
            self._matrix = (T @ S).tocsr()
        return self._matrix

    def apply(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if self.absolute:
            f = np.abs(f)
        return self.matrix @ f

    __call__ = apply


@dataclass(eq=False)
class BOperators:
    """The operators ``B_{j,k}`` for one family and complexity."""

    operators: list[DiscreteOperator]
    assignment: dict[int, tuple[int, int]]  # family cube -> (j, Q* cube id in system j)
    complexity: int

    def total(self) -> DiscreteOperator:
        ops = self.operators
        terms = [t for op in ops for t in op.terms]
        return DiscreteOperator(ops[0].n, ops[0].mass, terms, name=f"B_k{self.complexity}")

    def nonempty(self) -> list[tuple[int, DiscreteOperator]]:
        return [(j, op) for j, op in enumerate(self.operators) if op.terms]


def build_A_k(family: SparseFamily, system: DyadicSystem, space: QuasiMetricSpace, complexity: int) -> DiscreteOperator:
    """``A_k f = sum_Q avg_{2^k Q} |f| chi_Q`` over the family."""
    if complexity < 1:
        raise ValueError("complexity must be a positive integer")
    terms = []
    for c in family.cubes:
        cube = as_cube(system, c)
        ball = ball_members(space, dilate(system, cube, 2.0**complexity))
        assert ball.size > 0, "dilated ball contains its own center"
        terms.append(Term(ball, cube.members, 1.0 / float(space.mass[ball].sum()), cube.id))
    return DiscreteOperator(space.n, space.mass, terms, absolute=True, name=f"A_{complexity}")


def build_B(
    family: SparseFamily,
    system: DyadicSystem,
    adjacent: AdjacentSystems,
    space: QuasiMetricSpace,
    complexity: int,
) -> BOperators:
    """``B_{j,k} f = sum_Q avg_{Q*} f chi_Q`` with ``Q*`` the best cover of ``2^k Q``.

    Every family cube is assigned to exactly one grid ``j``; a cube whose
    dilate cannot be covered within ``D * 2^k C delta^k(Q)`` raises
    :class:`CoverageError` naming it.
    """
    if complexity < 0:
        raise ValueError("complexity must be nonnegative")
    per_j = [[] for _ in adjacent.systems]
    assignment = {}
    for c in family.cubes:
        cube = as_cube(system, c)
        if complexity == 0:
            j, star = None, cube
            members = cube.members
        else:
            ball = dilate(system, cube, 2.0**complexity)
            try:
                j, star = cover_ball(adjacent, space, ball)
            except CoverageError as err:
                raise CoverageError(f"family cube {cube.id}: {err}", balls=err.balls) from None
            members = star.members
            inside = ball_members(space, ball)
            if not np.all(np.isin(inside, members)):
                raise CoverageError(f"family cube {cube.id}: cover does not contain 2^k Q")
        coef = 1.0 / float(space.mass[members].sum())
        jj = 0 if j is None else j
        per_j[jj].append(Term(members, cube.members, coef, cube.id))
        assignment[cube.id] = (jj, star.id)
    ops = [
        DiscreteOperator(space.n, space.mass, terms, name=f"B_{j}_{complexity}")
        for j, terms in enumerate(per_j)
    ]
    return BOperators(ops, assignment, complexity)


def operator_to_json(op: DiscreteOperator) -> dict:
    return {
        "name": op.name,
        "n": op.n,
        "absolute": op.absolute,
        "terms": [
            {
                "cube": t.cube,
                "coefficient": t.coefficient,
                "source": t.source.tolist(),
                "target": t.target.tolist(),
            }
            for t in op.terms
        ],
    }
