import random
from fractions import Fraction
from math import comb

import numpy as np
import pytest

from ratmin.homogenize import build_homogenized
from ratmin.jacobian import build_augmented
from ratmin.moment import (OrderTooLowError, assemble_relaxation, localizing_coefficients,
                           minimal_order, monomial_basis)
from ratmin.parser import parse_polynomial
from ratmin.poly import Polynomial, poly_eval

from conftest import random_point, random_poly


def test_basis_sizes_and_order():
    assert len(monomial_basis(3, 2)) == 10
    b = monomial_basis(3, 7)
    assert len(b) == 120
    assert b[0] == (0, 0, 0)
    assert b[len(b) - 1] == (7, 0, 0)
    assert sorted(b.index.values()) == list(range(120))
    assert len(set(b.monomials)) == 120
    degs = [sum(m) for m in b]
    assert degs == sorted(degs)


def _block(psi, N):
    d, basis, coeffs = localizing_coefficients(psi, N)
    return d, basis, coeffs


def test_moment_matrix_indicators():
    d, basis, coeffs = _block(Polynomial.constant(2, 1), 1)
    assert d == 1 and len(basis) == 3
    for i, b in enumerate(basis):
        for j, g in enumerate(basis):
            a = tuple(x + y for x, y in zip(b, g))
            assert coeffs[a][(i, j)] == 1


def test_linear_localizer():
    d, basis, coeffs = _block(Polynomial.variable(1, 0), 1)
    assert d == 0 and len(basis) == 1
    assert coeffs == {(1,): {(0, 0): 1}}
    assert _block(parse_polynomial("x^3", ["x"]), 1)[2] is None


@pytest.mark.property
def test_localizer_reconstruction():
    rng = random.Random(5)
    for _ in range(8):
        psi = random_poly(rng, 3, max_deg=3)
        if psi.is_zero():
            continue
        d, basis, coeffs = _block(psi, 3)
        u = random_point(rng, 3)
        k = len(basis)
        total = [[Fraction(0)] * k for _ in range(k)]
        for alpha, entries in coeffs.items():
            ua = poly_eval(Polynomial.monomial(alpha), u)
            for (i, j), c in entries.items():
                total[i][j] += c * ua
        bu = [poly_eval(Polynomial.monomial(b), u) for b in basis]
        pu = poly_eval(psi, u)
        assert total == [[pu * bi * bj for bj in bu] for bi in bu]


def test_dehomogenizing_block_vanishes_at_atom(problem):
    hp = build_homogenized(problem("motzkin"))
    d, basis, coeffs = _block(hp.dehomogenizing_constraint, 5)
    M = np.zeros((len(basis), len(basis)))
    for alpha, entries in coeffs.items():
        for (i, j), c in entries.items():
            M[i, j] += float(c)  # u = (1,1,1) makes every monomial 1
    assert np.all(M == 0)


def test_relaxation_sizes(problem):
    jap = build_augmented(build_homogenized(problem("motzkin")))
    assert minimal_order(jap) == 5
    rel = assemble_relaxation(jap, 5)
    assert rel.num_moments == comb(13, 3) == 286
    assert [b.side for b in rel.blocks] == [56]

    jap = build_augmented(build_homogenized(problem("constrained_univariate")))
    rel = assemble_relaxation(jap, 7)
    sides = {b.psi.degree: b.side for b in rel.blocks}
    assert sides == {0: 36, 6: 15, 1: 28, 7: 10}
    assert len(rel.blocks) <= 2 ** (1 + 1)
    with pytest.raises(OrderTooLowError):
        assemble_relaxation(jap, minimal_order(jap) - 1)


def test_atomic_moments_feasible(problem):
    jap = build_augmented(build_homogenized(problem("motzkin")))
    rel = assemble_relaxation(jap, 5)
    y = rel.moment_vector([[1.0, 1.0, 1.0]])
    assert np.all(rel.equality_rows @ y == 0)
    assert y[rel.index[(0, 0, 0)]] == 1.0
    for b in rel.blocks:
        M = b.matrix(y)
        w = np.linalg.eigvalsh(M)
        assert w.min() >= -1e-9 and np.sum(w > 1e-9 * w.max()) == 1
    # a mixture of the eight minimizers is feasible too
    pts = [[s0, s1, s2] for s0 in (1, -1) for s1 in (1, -1) for s2 in (1, -1)]
    y = rel.moment_vector(pts)
    assert np.abs(rel.equality_rows @ y).max() < 1e-9
    assert abs(rel.objective @ y - 3.0) < 1e-12


def test_equality_rows_match_zero_localizer(problem):
    jap = build_augmented(build_homogenized(problem("not_attained")))
    N = minimal_order(jap) + 1
    rel = assemble_relaxation(jap, N)
    R = rel.equality_rows.toarray()
    rng = np.random.default_rng(0)
    for k, e in enumerate(rel.equality_polys):
        d, basis, coeffs = localizing_coefficients(e, N)
        if coeffs is None:
            continue
        # functionals y -> L_e(y)[i, j]
        side = len(basis)
        F = np.zeros((side * side, rel.num_moments))
        for alpha, entries in coeffs.items():
            for (i, j), c in entries.items():
                F[i * side + j, rel.index[alpha]] += float(c)
        rows = R[[r for r, (kk, _) in enumerate(rel.row_labels) if kk == k]]
        rank = np.linalg.matrix_rank
        both = np.vstack([F, rows]) if rows.size else F
        assert rank(both) == rank(F)
        if rows.size:
            assert rank(both) == rank(rows)
        # random y in the kernel of the rows kills the localizing matrix
        if rows.size:
            _, s, Vt = np.linalg.svd(rows)
            kernel = Vt[np.sum(s > 1e-10):]
            y = kernel.T @ rng.standard_normal(kernel.shape[0])
            assert np.abs(F @ y).max() < 1e-9
