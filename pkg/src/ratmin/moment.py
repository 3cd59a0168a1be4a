"""Moment relaxation assembly.

The relaxation variable is a moment vector ``y`` indexed by monomials of
degree at most ``2N``.  Each polynomial ``psi`` contributes a localizing
block ``sum_alpha A_alpha y_alpha`` with ``A_alpha`` collecting the
coefficients of ``psi * [x]_d [x]_d^T``; equalities contribute scalar rows
``L(e * x^delta) = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement
from math import ceil, comb

import numpy as np
import scipy.sparse as sp

from .jacobian import JacobianAugmentedProgram
from .poly import Monomial, Polynomial


class OrderTooLowError(ValueError):
    pass


class MonomialBasis:
    """Graded-lex ordered monomials of degree <= ``max_degree``."""

    def __init__(self, nvars: int, max_degree: int):
        if nvars < 1 or max_degree < 0:
            raise ValueError("need nvars >= 1 and degree >= 0")
        self.nvars = nvars
        self.max_degree = max_degree
        monos = []
        for deg in range(max_degree + 1):
            monos.extend(sorted(_monomials_of_degree(nvars, deg)))
        self.monomials: list[Monomial] = monos
        self.index = {m: i for i, m in enumerate(monos)}

    def __len__(self):
        return len(self.monomials)

    def __iter__(self):
        return iter(self.monomials)

    def __getitem__(self, i):
        return self.monomials[i]

    def size_upto(self, degree: int) -> int:
        """Number of basis elements of degree <= ``degree``."""
        return comb(self.nvars + degree, self.nvars) if degree >= 0 else 0

    def evaluate(self, point) -> np.ndarray:
        pt = np.asarray(point, dtype=float)
        return np.array([np.prod(pt ** np.array(m)) for m in self.monomials])


def _monomials_of_degree(nvars: int, deg: int):
    for combo in combinations_with_replacement(range(nvars), deg):
        alpha = [0] * nvars
        for i in combo:
            alpha[i] += 1
        yield tuple(alpha)


def monomial_basis(nvars: int, degree: int) -> MonomialBasis:
    return MonomialBasis(nvars, degree)


def half_degree(f: Polynomial) -> int:
    return ceil(max(f.degree, 0) / 2)


def localizing_coefficients(psi: Polynomial, N: int):
    """Exact coefficient map ``alpha -> {(i, j): value}`` of ``L_psi^(N)``.

    Returns ``(d, basis, coeffs)``; ``coeffs`` is ``None`` when
    ``d = N - ceil(deg psi / 2)`` is negative (the block is empty).
    """
    d = N - half_degree(psi)
    if d < 0:
        return d, None, None
    basis = MonomialBasis(psi.nvars, d)
    coeffs: dict[Monomial, dict[tuple[int, int], object]] = {}
    mons = basis.monomials
    for i, b in enumerate(mons):
        for j in range(i, len(mons)):
            g = mons[j]
            bg = tuple(x + y for x, y in zip(b, g))
            for k, c in psi.items():
                alpha = tuple(x + y for x, y in zip(k, bg))
                entry = coeffs.setdefault(alpha, {})
                entry[(i, j)] = entry.get((i, j), 0) + c
                if i != j:
                    entry[(j, i)] = entry.get((j, i), 0) + c
    return d, basis, coeffs


@dataclass
class Block:
    """PSD block ``sum_alpha y_alpha A_alpha`` stored as a sparse map.

    ``coeffs`` has shape ``(len(moments), side*side)``: row ``k`` is
    ``vec(A_{alpha_k})``.
    """

    label: str
    psi: Polynomial
    d: int
    basis: MonomialBasis
    coeffs: sp.csr_matrix

    @property
    def side(self) -> int:
        return len(self.basis)

    def matrix(self, y: np.ndarray) -> np.ndarray:
        v = self.coeffs.T @ y
        return np.asarray(v).reshape(self.side, self.side)


@dataclass
class MomentRelaxation:
    nvars: int
    order: int
    moments: list[Monomial]
    index: dict[Monomial, int]
    objective_poly: Polynomial
    objective: np.ndarray
    equality_rows: sp.csr_matrix
    row_labels: list[tuple[int, Monomial]]
    equality_polys: list[Polynomial]
    blocks: list[Block]
    program: JacobianAugmentedProgram | None = None
    meta: dict = field(default_factory=dict)

    @property
    def num_moments(self) -> int:
        return len(self.moments)

    def moment_vector(self, atoms, weights=None) -> np.ndarray:
        """Moments of a finitely supported measure, in this layout."""
        atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
        if weights is None:
            weights = np.full(len(atoms), 1.0 / len(atoms))
        expo = np.array(self.moments, dtype=float)
        vals = np.prod(atoms[:, None, :] ** expo[None, :, :], axis=2)
        return np.asarray(weights) @ vals

    def moment_matrix_block(self) -> Block:
        return self.blocks[0]


def minimal_order(jap: JacobianAugmentedProgram) -> int:
    polys = [jap.objective, *jap.all_equalities, *jap.inequalities]
    return max([half_degree(p) for p in polys] + [1])


def _row_entries(e: Polynomial, delta: Monomial):
    for k, c in e.items():
        yield tuple(x + y for x, y in zip(k, delta)), c


def assemble_relaxation(jap: JacobianAugmentedProgram, N: int,
                        min_order: int | None = None) -> MomentRelaxation:
    N0 = minimal_order(jap) if min_order is None else min_order
    if N < N0:
        raise OrderTooLowError(f"relaxation order {N} is below the minimal order {N0}")
    nv = jap.nvars

    # blocks for every nu-product that fits (nu = 0 is the moment matrix)
    raw_blocks = []
    for nu, gnu in jap.nu_products:
        d, basis, coeffs = localizing_coefficients(gnu, N)
        if coeffs is None:
            continue
        label = "moment" if not any(nu) else "nu=" + "".join(map(str, nu))
        raw_blocks.append((label, gnu, d, basis, coeffs))

    # equality rows, deduplicated
    rows: list[dict[Monomial, object]] = []
    labels: list[tuple[int, Monomial]] = []
    seen = set()
    eq_polys = jap.all_equalities
    for k, e in enumerate(eq_polys):
        de = N - half_degree(e)
        if de < 0:
            continue
        for delta in MonomialBasis(nv, 2 * de).monomials:
            row: dict = {}
            for alpha, c in _row_entries(e, delta):
                row[alpha] = row.get(alpha, 0) + c
            key = frozenset(row.items())
            if key in seen:
                continue
            seen.add(key)
            rows.append(row)
            labels.append((k, delta))

    # compact moment layout: keep keys that are used anywhere
    used = {(0,) * nv}
    used.update(jap.objective.terms)
    for _, _, _, _, coeffs in raw_blocks:
        used.update(coeffs)
    for row in rows:
        used.update(row)
    moments = sorted(used, key=lambda a: (sum(a), a))
    index = {m: i for i, m in enumerate(moments)}
    M = len(moments)

    blocks = []
    for label, gnu, d, basis, coeffs in raw_blocks:
        side = len(basis)
        ri, ci, vals = [], [], []
        for alpha, entries in coeffs.items():
            a = index[alpha]
            for (i, j), c in entries.items():
                if c != 0:
                    ri.append(a)
                    ci.append(i * side + j)
                    vals.append(float(c))
        mat = sp.csr_matrix((vals, (ri, ci)), shape=(M, side * side))
        blocks.append(Block(label, gnu, d, basis, mat))

    ri, ci, vals = [], [], []
    for r, row in enumerate(rows):
        for alpha, c in row.items():
            if c != 0:
                ri.append(r)
                ci.append(index[alpha])
                vals.append(float(c))
    R = sp.csr_matrix((vals, (ri, ci)), shape=(len(rows), M))

    obj = np.zeros(M)
    for alpha, c in jap.objective.items():
        obj[index[alpha]] += float(c)

    return MomentRelaxation(nv, N, moments, index, jap.objective, obj, R, labels,
                            list(eq_polys), blocks, program=jap)


def relaxation_from_parts(objective: Polynomial, equalities, localizers, N: int,
                          labels=None) -> MomentRelaxation:
    """Relaxation of an arbitrary program given explicit block polynomials.

    ``localizers`` must start with the constant 1 for the moment matrix to be
    present; used by tests and small hand-built problems.
    """
    nv = objective.nvars
    nus = [((i,), g) for i, g in enumerate(localizers)]
    jap = JacobianAugmentedProgram(nv, objective, tuple(equalities), (), [], nus)
    rel = assemble_relaxation(jap, N, min_order=0)
    if labels:
        for b, lab in zip(rel.blocks, labels):
            b.label = lab
    return rel
