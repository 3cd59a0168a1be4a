"""Jacobian-minor equations for the homogenized program.

For each index set ``J`` of inequality constraints, the bordered Jacobian
``[grad p~, grad h^hom, grad(q~-1), grad g^hom_J]`` drops rank exactly where
all its maximal minors vanish.  Those minors, multiplied by the inequality
constraints outside ``J``, are added as equalities.  Minors whose row set
avoids the ``x0`` row also define the variety for ``J + {x0}`` and are
emitted with the ``x0`` factor removed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product
from math import comb
from typing import Sequence

from .homogenize import HomogenizedProgram
from .poly import (Polynomial, PolyMatrix, gradient, maximal_minors, prod)

MAX_PRODUCT_FACTORS = 7


class ProductCapError(ValueError):
    pass


@dataclass(frozen=True)
class IndexSetPlan:
    J: tuple[int, ...]
    base_minor_count: int
    primed_count: int
    primed_active: bool


@dataclass(frozen=True)
class PhiEquation:
    polynomial: Polynomial
    J: tuple[int, ...]
    primed: bool
    rows: tuple[int, ...]
    multiplier_product: tuple[int, ...]


@dataclass
class JacobianAugmentedProgram:
    """Polynomial program with the minor equations appended.

    ``equalities`` are the source constraints (for the rational path these are
    the homogenized ``h`` plus ``q~ - 1``); ``inequalities`` are the
    generators whose products form ``nu_products``.
    """

    nvars: int
    objective: Polynomial
    equalities: tuple[Polynomial, ...]
    inequalities: tuple[Polynomial, ...]
    phis: list[PhiEquation]
    nu_products: list[tuple[tuple[int, ...], Polynomial]]
    base: HomogenizedProgram | None = None
    plans: list[IndexSetPlan] = field(default_factory=list)
    dropped: list[tuple[PhiEquation, PhiEquation]] = field(default_factory=list)

    @property
    def all_equalities(self) -> list[Polynomial]:
        return list(self.equalities) + [phi.polynomial for phi in self.phis]


def _rational_counts(hp: HomogenizedProgram) -> tuple[int, int]:
    m = min(hp.m1 + hp.m2 + 2, hp.n)
    l = min(m - hp.m1 - 1, hp.m2)
    return m, l


def enumerate_index_sets(hp: HomogenizedProgram) -> list[IndexSetPlan]:
    m, l = _rational_counts(hp)
    plans = []
    for k in range(0, l + 1):
        for J in combinations(range(hp.m2), k):
            cols = hp.m1 + 2 + k
            primed = hp.x0_included and k + 1 <= m - hp.m1 - 1
            plans.append(IndexSetPlan(
                J, comb(hp.nvars, cols), comb(hp.n, cols) if primed else 0, primed))
    return plans


def bordered_jacobian(hp: HomogenizedProgram, J: Sequence[int], primed: bool = False) -> PolyMatrix:
    cols = [gradient(hp.objective)]
    cols += [gradient(h) for h in hp.equalities]
    cols += [gradient(hp.inequalities[j]) for j in J]
    if primed:
        cols.append(gradient(Polynomial.variable(hp.nvars, 0)))
    return PolyMatrix.from_columns(cols)


def _degree_bound(columns_deg: Sequence[int], extra: Sequence[Polynomial]) -> int:
    return sum(columns_deg) - len(columns_deg) + sum(int(g.degree) for g in extra)


def nu_products(gens: Sequence[Polynomial], nvars: int) -> list[tuple[tuple[int, ...], Polynomial]]:
    if len(gens) > MAX_PRODUCT_FACTORS:
        raise ProductCapError(
            f"{len(gens)} inequality generators give 2^{len(gens)} products; "
            f"the cap is {MAX_PRODUCT_FACTORS}. Drop or merge inequality constraints.")
    out = []
    for nu in product((0, 1), repeat=len(gens)):
        out.append((nu, prod((g for g, b in zip(gens, nu) if b), nvars)))
    out.sort(key=lambda t: (sum(t[0]), t[0]))
    return out


def build_augmented(hp: HomogenizedProgram) -> JacobianAugmentedProgram:
    n1 = hp.nvars
    x0 = Polynomial.variable(n1, 0)
    phis: list[PhiEquation] = []
    dropped: list[tuple[PhiEquation, PhiEquation]] = []
    plans = enumerate_index_sets(hp)
    col_degrees_base = [int(hp.objective.degree)] + [int(e.degree) for e in hp.equalities]
    for plan in plans:
        J = plan.J
        B = bordered_jacobian(hp, J)
        outside = tuple(j for j in range(hp.m2) if j not in J)
        g_out = prod((hp.inequalities[j] for j in outside), n1)
        col_deg = col_degrees_base + [int(hp.inequalities[j].degree) for j in J]
        x0_factor = [x0] if hp.x0_included else []
        bound = _degree_bound(col_deg, [hp.inequalities[j] for j in outside] + x0_factor)
        for rows, eta in maximal_minors(B):
            if eta.is_zero():
                continue
            if plan.primed_active and 0 not in rows:
                phi = PhiEquation(eta * g_out, J, True, rows, outside)
                base_version = PhiEquation(phi.polynomial * x0, J, False, rows,
                                           outside + (hp.m2,))
                dropped.append((base_version, phi))
            elif hp.x0_included:
                phi = PhiEquation(eta * g_out * x0, J, False, rows, outside + (hp.m2,))
            else:
                phi = PhiEquation(eta * g_out, J, False, rows, outside)
            assert phi.polynomial.degree <= bound, "minor degree exceeds bound"
            phis.append(phi)
    return JacobianAugmentedProgram(
        n1, hp.objective, tuple(hp.equalities), tuple(hp.inequalities), phis,
        nu_products(hp.inequalities, n1), base=hp, plans=plans, dropped=dropped)


def build_augmented_general(objective: Polynomial, h: Sequence[Polynomial],
                            g: Sequence[Polynomial]) -> JacobianAugmentedProgram:
    """Jacobian augmentation of a plain polynomial program (no homogenization)."""
    n = objective.nvars
    m1, m2 = len(h), len(g)
    if m1 > n:
        raise ValueError(f"more equality constraints ({m1}) than variables ({n})")
    m = min(m1 + m2, n - 1)
    phis: list[PhiEquation] = []
    plans: list[IndexSetPlan] = []
    base_cols = [gradient(objective)] + [gradient(hi) for hi in h]
    for k in range(0, max(m - m1, 0) + 1):
        for J in combinations(range(m2), k):
            ncols = m1 + k + 1
            plans.append(IndexSetPlan(J, comb(n, ncols) if ncols <= n else 0, 0, False))
            if ncols > n:
                # rank condition is vacuous
                continue
            B = PolyMatrix.from_columns(base_cols + [gradient(g[j]) for j in J])
            outside = tuple(j for j in range(m2) if j not in J)
            g_out = prod((g[j] for j in outside), n)
            for rows, eta in maximal_minors(B):
                if not eta.is_zero():
                    phis.append(PhiEquation(eta * g_out, J, False, rows, outside))
    return JacobianAugmentedProgram(n, objective, tuple(h), tuple(g), phis,
                                    nu_products(g, n), plans=plans)
