"""Flat truncation, atom extraction and verification.

Extraction follows the usual multiplication-matrix route: factor the
truncated moment matrix, bring the factor to column echelon form to pick a
monomial basis of the quotient, read off one multiplication matrix per
variable and diagonalize a random combination of them with an ordered real
Schur decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .jacobian import JacobianAugmentedProgram
from .moment import MomentRelaxation, MonomialBasis, half_degree
from .poly import Polynomial, poly_eval

RANK_TOL = 1e-3
# relative pivot threshold for the echelon basis; finer values let noise pick
# monomials that are dependent on the support (e.g. x1 = c*x0 on every atom)
PIVOT_TOL = 1e-4


def moment_matrix(y: np.ndarray, rel: MomentRelaxation, t: int) -> np.ndarray:
    """``M_t(y)`` in the graded basis of degree <= t."""
    basis = MonomialBasis(rel.nvars, t)
    mons = basis.monomials
    out = np.empty((len(mons), len(mons)))
    for i, a in enumerate(mons):
        for j in range(i, len(mons)):
            b = mons[j]
            v = y[rel.index[tuple(p + q for p, q in zip(a, b))]]
            out[i, j] = out[j, i] = v
    return out


def numeric_rank(M: np.ndarray, rank_tol: float = RANK_TOL) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] <= 0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


@dataclass
class FlatnessReport:
    d_hat: int
    d_f: int
    ranks: dict[int, int]
    flat_t: int | None = None
    heuristic_t: int | None = None

    @property
    def candidate_t(self) -> int | None:
        return self.flat_t if self.flat_t is not None else self.heuristic_t


def constraint_half_degree(jap: JacobianAugmentedProgram) -> int:
    polys = list(jap.all_equalities) + list(jap.inequalities)
    return max([1] + [half_degree(p) for p in polys])


def flat_truncation(y: np.ndarray, rel: MomentRelaxation, rank_tol: float = RANK_TOL,
                    d_hat: int | None = None) -> FlatnessReport:
    jap = rel.program
    if d_hat is None:
        d_hat = constraint_half_degree(jap) if jap is not None else 1
    d_f = half_degree(rel.objective_poly)
    N = rel.order
    ranks = {t: numeric_rank(moment_matrix(y, rel, t), rank_tol) for t in range(0, N + 1)}
    rep = FlatnessReport(d_hat, d_f, ranks)
    for t in range(max(d_f, d_hat), N + 1):
        if ranks[t - d_hat] == ranks[t]:
            rep.flat_t = t
            break
    for t in range(1, N + 1):
        if ranks[t - 1] == ranks[t]:
            rep.heuristic_t = t
            break
    return rep


@dataclass
class AtomSet:
    atoms: np.ndarray
    weights: np.ndarray
    rank: int

    def __len__(self):
        return len(self.atoms)


class ExtractionError(RuntimeError):
    pass


def _column_echelon(V: np.ndarray, tol: float):
    """Reduced column echelon form of ``V`` (rows = monomials).

    Returns ``(U, pivots)`` with ``U[pivots] = I``.
    """
    A = V.T.copy()  # r x s, row reduce
    r, s = A.shape
    pivots = []
    row = 0
    for col in range(s):
        if row == r:
            break
        k = row + int(np.argmax(np.abs(A[row:, col])))
        if abs(A[k, col]) <= tol:
            A[row:, col] = 0.0
            continue
        A[[row, k]] = A[[k, row]]
        A[row] /= A[row, col]
        others = [i for i in range(r) if i != row]
        A[others] -= np.outer(A[others, col], A[row])
        pivots.append(col)
        row += 1
    if row < r:
        raise ExtractionError("factor rank smaller than requested rank")
    return A.T, pivots


def extract_atoms(y: np.ndarray, rel: MomentRelaxation, t: int,
                  rank_tol: float = RANK_TOL, seed: int = 0,
                  pivot_tol: float = PIVOT_TOL) -> AtomSet:
    """Atoms of a flat moment matrix ``M_t(y)``."""
    nv = rel.nvars
    Mt = moment_matrix(y, rel, t)
    basis = MonomialBasis(nv, t)
    U, s, _ = np.linalg.svd(Mt)
    r = int(np.sum(s > rank_tol * s[0]))
    if r == 0:
        raise ExtractionError("zero moment matrix")
    V = U[:, :r] * np.sqrt(s[:r])
    E, pivots = _column_echelon(V, tol=pivot_tol * np.abs(V).max())
    wmons = [basis[p] for p in pivots]
    if max(sum(w) for w in wmons) > t - 1:
        raise ExtractionError("quotient basis reaches the truncation degree; not flat")
    mults = []
    for i in range(nv):
        Ni = np.empty((r, r))
        for k, w in enumerate(wmons):
            xw = list(w)
            xw[i] += 1
            Ni[k] = E[basis.index[tuple(xw)]]
        mults.append(Ni)
    rng = np.random.default_rng(seed)
    lam = rng.random(nv)
    lam /= lam.sum()
    Nmix = sum(l * Ni for l, Ni in zip(lam, mults))
    T, Q = la.schur(Nmix, output="real")
    sub = np.abs(np.diag(T, -1)) if r > 1 else np.zeros(0)
    if sub.size and sub.max() > 1e-6 * max(1.0, np.abs(T).max()):
        raise ExtractionError("complex eigenvalues in multiplication matrix")
    atoms = np.empty((r, nv))
    for j in range(r):
        q = Q[:, j]
        atoms[j] = [q @ Ni @ q for Ni in mults]
    # fixed output order
    atoms = atoms[np.lexsort(atoms.T[::-1])]
    weights = atom_weights(atoms, y, rel, t)
    return AtomSet(atoms, weights, r)


def atom_weights(atoms: np.ndarray, y: np.ndarray, rel: MomentRelaxation, t: int) -> np.ndarray:
    basis = MonomialBasis(rel.nvars, t)
    expo = np.array(basis.monomials, dtype=float)
    Vand = np.prod(atoms[None, :, :] ** expo[:, None, :], axis=2)
    rhs = np.array([y[rel.index[m]] for m in basis.monomials])
    return np.linalg.lstsq(Vand, rhs, rcond=None)[0]


@dataclass
class AtomCheck:
    point: np.ndarray
    max_equality: float
    min_inequality: float
    objective: float
    passed: bool
    residuals: list = field(default_factory=list)


def verify_atom(point, jap: JacobianAugmentedProgram, tol: float = 1e-6) -> AtomCheck:
    pt = [float(v) for v in point]
    if len(pt) != jap.nvars:
        raise ValueError(f"point has {len(pt)} coordinates, expected {jap.nvars}")
    eqs = [float(poly_eval(e, pt)) for e in jap.all_equalities]
    ineqs = [float(poly_eval(g, pt)) for g in jap.inequalities]
    max_eq = max((abs(v) for v in eqs), default=0.0)
    min_in = min(ineqs, default=0.0)
    obj = float(poly_eval(jap.objective, pt))
    ok = max_eq <= tol and min_in >= -tol
    return AtomCheck(np.asarray(pt), max_eq, min_in, obj, ok, eqs)


def refine_atom(point, jap: JacobianAugmentedProgram, iters: int = 30) -> np.ndarray:
    """Gauss-Newton projection onto the equality variety.

    Minimal-norm steps keep the point close to the extracted one; used only
    to polish extraction noise before verification.
    """
    from .poly import gradient
    eqs = jap.all_equalities
    if not eqs:
        return np.asarray(point, dtype=float)
    grads = [[g for g in gradient(e)] for e in eqs]
    x = np.asarray(point, dtype=float).copy()

    def resid(z):
        zl = list(z)
        return np.array([float(poly_eval(e, zl)) for e in eqs])

    f = resid(x)
    for _ in range(iters):
        nrm = np.linalg.norm(f)
        if nrm < 1e-15:
            break
        zl = list(x)
        Jm = np.array([[float(poly_eval(g, zl)) for g in row] for row in grads])
        step = np.linalg.lstsq(Jm, -f, rcond=1e-12)[0]
        xn = x + step
        fn = resid(xn)
        if np.linalg.norm(fn) >= nrm:
            break
        x, f = xn, fn
    return x


def verify_certificate(f: Polynomial, gamma, ideal_terms: Sequence, sos_terms: Sequence) -> Polynomial:
    """Residual ``f - gamma - sum psi*h - sum sigma*g``.

    ``ideal_terms`` holds ``(multiplier, generator)`` pairs.  ``sos_terms``
    holds ``(sigma, generator)`` where ``sigma`` is a polynomial or a
    ``(basis_monomials, gram)`` pair meaning ``b^T G b``.  The residual is
    exact when every input is exact.
    """
    n = f.nvars
    res = f - gamma
    for mult, gen in ideal_terms:
        if mult.nvars != n or gen.nvars != n:
            raise ValueError("variable-count mismatch in certificate")
        res = res - mult * gen
    for sigma, gen in sos_terms:
        if gen.nvars != n:
            raise ValueError("variable-count mismatch in certificate")
        if not isinstance(sigma, Polynomial):
            sigma = gram_to_poly(*sigma, nvars=n)
        if sigma.nvars != n:
            raise ValueError("variable-count mismatch in certificate")
        res = res - sigma * gen
    return res


def gram_to_poly(basis: Sequence, G, nvars: int) -> Polynomial:
    terms: dict = {}
    G = np.asarray(G) if not isinstance(G, list) else G
    k = len(basis)
    for i in range(k):
        for j in range(k):
            c = G[i][j]
            if c == 0:
                continue
            a = tuple(p + q for p, q in zip(basis[i], basis[j]))
            terms[a] = terms.get(a, 0) + (float(c) if isinstance(c, np.floating) else c)
    return Polynomial(nvars, terms)


def sampled_max_abs(poly: Polynomial, npoints: int = 100, box: float = 2.0, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-box, box, size=(npoints, poly.nvars))
    return max((abs(float(poly_eval(poly, list(p)))) for p in pts), default=0.0)
