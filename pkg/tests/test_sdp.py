import random

import numpy as np
import pytest

from ratmin.extract import verify_certificate
from ratmin.homogenize import build_homogenized
from ratmin.jacobian import build_augmented
from ratmin.moment import assemble_relaxation, relaxation_from_parts
from ratmin.parser import parse_polynomial
from ratmin.poly import Polynomial, poly_eval, to_float
from ratmin.sdp import (CertificateUnavailable, LMIProblem, Status, dual_certificate, solve,
                        solve_lmi)

from conftest import random_poly

ONE1 = Polynomial.constant(1, 1)


def toy_relaxation():
    # min x s.t. x^2 = 1  ->  min y1 s.t. [[1, y1], [y1, 1]] >= 0
    x = Polynomial.variable(1, 0)
    return relaxation_from_parts(x, [x * x - 1], [ONE1], 1)


def test_toy_lmi():
    P = LMIProblem(np.array([1.0]), [np.array([[[0.0, 1.0], [1.0, 0.0]]])], [-np.eye(2)])
    res = solve_lmi(P)
    assert res.status == Status.OPTIMAL
    assert abs(res.primal + 1) < 1e-7 and abs(res.dual + 1) < 1e-7


def test_toy_relaxation_and_certificate():
    rel = toy_relaxation()
    sol = solve(rel)
    assert sol.status == Status.OPTIMAL and abs(sol.primal_value + 1) < 1e-7
    cert = dual_certificate(sol, rel)
    assert abs(cert.gamma + 1) < 1e-7
    (psi, basis, G), = cert.grams
    assert np.asarray(G).shape == (2, 2)
    ideal = [(to_float(m), to_float(g)) for m, g in cert.multipliers]
    f = to_float(rel.objective_poly)
    res = verify_certificate(f, cert.gamma, ideal, [((basis, G), to_float(psi))])
    assert all(abs(c) < 1e-6 for _, c in res.items())
    # shifting gamma down leaves a visible residual at the minimizer
    shifted = verify_certificate(f, cert.gamma - 0.1, ideal, [((basis, G), to_float(psi))])
    assert abs(float(poly_eval(shifted, [-1.0])) - 0.1) < 1e-6


def test_infeasible_block():
    x = Polynomial.variable(1, 0)
    rel = relaxation_from_parts(x, [], [ONE1, Polynomial.constant(1, -1)], 1)
    assert solve(rel).status == Status.INFEASIBLE


def test_inconsistent_equalities():
    x = Polynomial.variable(1, 0)
    rel = relaxation_from_parts(x, [x - 1, x - 2], [ONE1], 1)
    assert solve(rel).status == Status.INFEASIBLE


def test_motzkin_relaxation_value(problem):
    jap = build_augmented(build_homogenized(problem("motzkin")))
    sol = solve(assemble_relaxation(jap, 5))
    assert abs(sol.primal_value - 3) < 1e-4
    assert sol.dual_value <= sol.primal_value + 1e-6
    # lower-bound property at the known minimizers
    for u in ([1, 1, 1], [1, -1, 1], [-1, 1, -1]):
        assert sol.primal_value <= float(poly_eval(jap.objective, u)) + 1e-6


def test_penalized_solve_has_no_certificate(problem):
    rel = toy_relaxation()
    sol = solve(rel, trace_penalty=1e-6)
    assert abs(sol.primal_value + 1) < 1e-4
    with pytest.raises(CertificateUnavailable):
        dual_certificate(sol, rel)


def test_determinism():
    rel = toy_relaxation()
    a, b = solve(rel), solve(rel)
    assert a.iterations == b.iterations and np.array_equal(a.y, b.y)


def _corpus():
    rng = random.Random(7)
    disk = Polynomial(2, {(0, 0): 1, (2, 0): -1, (0, 2): -1})
    return [(random_poly(rng, 2, max_deg=4, nterms=8), disk) for _ in range(20)]


@pytest.mark.property
def test_random_corpus_duality_monotonicity_lower_bound():
    rng = np.random.default_rng(11)
    one = Polynomial.constant(2, 1)
    for f, g in _corpus():
        primal = []
        for N in (2, 3, 4):
            sol = solve(relaxation_from_parts(f, [], [one, g], N))
            assert sol.status in (Status.OPTIMAL, Status.NUMERICAL, Status.MAX_ITER)
            scale = max(1.0, abs(sol.primal_value))
            assert sol.dual_value <= sol.primal_value + 1e-6 * scale
            primal.append(sol.primal_value)
        for a, b in zip(primal, primal[1:]):
            assert b >= a - 1e-6
        r = np.sqrt(rng.uniform(0, 1, 50))
        th = rng.uniform(0, 2 * np.pi, 50)
        for x in zip(r * np.cos(th), r * np.sin(th)):
            assert primal[-1] <= float(poly_eval(f, list(x))) + 1e-6
