import numpy as np
import pytest

from ratmin.homogenize import build_homogenized
from ratmin.jacobian import build_augmented
from ratmin.moment import assemble_relaxation
from ratmin.sdp import LMIProblem
from ratmin.sdpa import (SDPAFormatError, export_sdpa, read_sdpa, relaxation_lmi, save_sdpa,
                         write_sdpa)


def toy():
    return LMIProblem(np.array([1.0]), [np.array([[[0.0, 1.0], [1.0, 0.0]]])], [-np.eye(2)])


def body_lines(text):
    return [l for l in text.splitlines() if l and l[0] not in "*\""]


def test_toy_layout():
    lines = body_lines(write_sdpa(toy()))
    assert lines[:4] == ["1", "1", "2", "1.0"]
    assert lines[4:] == ["0 1 1 1 -1.0", "0 1 2 2 -1.0", "1 1 1 2 1.0"]


def assert_same(P, Q):
    assert np.array_equal(P.c, Q.c) and P.offset == Q.offset
    assert P.block_sizes == Q.block_sizes
    assert list(P.diagonal or [False] * len(P.C)) == list(Q.diagonal or [False] * len(Q.C))
    for a, b in zip(P.A, Q.A):
        assert np.array_equal(a, b)
    for a, b in zip(P.C, Q.C):
        assert np.array_equal(a, b)


def test_roundtrip(problem, tmp_path):
    assert_same(toy(), read_sdpa(write_sdpa(toy(), "toy")))
    jap = build_augmented(build_homogenized(problem("constrained_univariate")))
    rel = assemble_relaxation(jap, 7)
    P = relaxation_lmi(rel)
    text = export_sdpa(rel)
    assert text == export_sdpa(rel)
    assert_same(P, read_sdpa(text))
    path = save_sdpa(rel, tmp_path / "univariate.dat-s")
    assert path.read_text() == text
    assert P.diagonal[-1] and P.block_sizes[-1] == 2 * rel.equality_rows.shape[0]


@pytest.mark.parametrize("text", ["1\n1\n", "1\n1\n2\n1.0\n0 1 1\n", "1\n1\n-2\n1.0\n0 1 1 2 1.0\n",
                                  "1\n1\n2\n1.0\n3 1 1 1 1.0\n", "x\n1\n2\n1.0\n"])
def test_malformed(text):
    with pytest.raises(SDPAFormatError):
        read_sdpa(text)


def test_external_solver_on_motzkin(problem):
    pytest.importorskip("cvxpy")
    from ratmin.sdpa import solve_external
    jap = build_augmented(build_homogenized(problem("motzkin")))
    P = read_sdpa(export_sdpa(assemble_relaxation(jap, 5)))
    status, value, _ = solve_external(P)
    assert status.startswith("optimal")
    assert abs(value - 3) < 1e-4


@pytest.mark.property
def test_random_lmi_roundtrip():
    rng = np.random.default_rng(8)
    for _ in range(10):
        m = int(rng.integers(1, 5))
        sizes = rng.integers(1, 5, size=int(rng.integers(1, 4)))
        diag = [bool(rng.random() < 0.3) for _ in sizes]
        A, C = [], []
        for n, d in zip(sizes, diag):
            Ab = np.round(rng.standard_normal((m, n, n)), 3) * (rng.random((m, n, n)) < 0.6)
            Cb = np.round(rng.standard_normal((n, n)), 3)
            Ab, Cb = Ab + Ab.transpose(0, 2, 1), Cb + Cb.T
            if d:
                Ab = Ab * np.eye(n)
                Cb = Cb * np.eye(n)
            A.append(Ab)
            C.append(Cb)
        P = LMIProblem(rng.standard_normal(m), A, C, float(rng.standard_normal()), diagonal=diag)
        assert_same(P, read_sdpa(write_sdpa(P)))
