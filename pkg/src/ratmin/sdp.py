"""Dense primal-dual interior-point solver for the moment relaxations.

Problem form (all matrices symmetric, block diagonal)::

    primal  min  c.x + offset     s.t.  S = sum_i x_i A_i - C  >= 0
    dual    max  <C, Y> + offset  s.t.  <A_i, Y> = c_i,  Y >= 0

The moment relaxation is brought into this form by eliminating the linear
equality rows: ``y = y_p + Z x`` with ``Z`` an orthonormal null-space basis
of the row matrix (plus the normalization ``y_0 = 1``).  The search
direction is HKM with a Mehrotra predictor-corrector and an infeasible start.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import scipy.linalg as la

from .moment import MomentRelaxation
from .poly import Polynomial

log = logging.getLogger(__name__)


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITER = "max_iter"
    NUMERICAL = "numerical"


@dataclass
class SolverParams:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-9
    max_iter: int = 200
    step_fraction: float = 0.98
    # near-optimal acceptance for stalled runs on problems without interior
    accept_gap: float = 1e-6
    accept_feas: float = 1e-6
    infeas_tol: float = 1e-8
    rank_tol: float = 1e-10
    # iterations without improvement before giving up
    patience: int = 10
    # search direction: "nt" (Nesterov-Todd) or "hkm"
    direction: str = "nt"
    adaptive_step: bool = True


@dataclass
class LMIProblem:
    """``A[b]`` has shape ``(m, n_b, n_b)``; ``C[b]`` has shape ``(n_b, n_b)``."""

    c: np.ndarray
    A: list[np.ndarray]
    C: list[np.ndarray]
    offset: float = 0.0
    # blocks known to be diagonal (LP blocks in SDPA terms)
    diagonal: list[bool] | None = None

    @property
    def m(self) -> int:
        return len(self.c)

    @property
    def block_sizes(self) -> list[int]:
        return [Cb.shape[0] for Cb in self.C]

    def slack(self, x) -> list[np.ndarray]:
        return [np.tensordot(x, Ab, axes=1) - Cb for Ab, Cb in zip(self.A, self.C)]

    def adjoint(self, Y) -> np.ndarray:
        out = np.zeros(self.m)
        for Ab, Yb in zip(self.A, Y):
            out += Ab.reshape(self.m, -1) @ Yb.ravel()
        return out


@dataclass
class LMIResult:
    x: np.ndarray
    S: list[np.ndarray]
    Y: list[np.ndarray]
    primal: float
    dual: float
    status: Status
    iterations: int
    residuals: dict
    history: list = field(default_factory=list)


def _inner(U, V) -> float:
    return float(sum(np.vdot(u, v) for u, v in zip(U, V)))


def _fro(U) -> float:
    return float(np.sqrt(sum(np.vdot(u, u) for u in U)))


def _sym(X):
    return 0.5 * (X + X.T)


def _max_step(X, dX) -> float:
    """Largest alpha with X + alpha dX PSD (inf if unbounded)."""
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    Li = la.solve_triangular(L, np.eye(len(X)), lower=True)
    ev = np.linalg.eigvalsh(_sym(Li @ dX @ Li.T))
    lo = ev[0]
    return np.inf if lo >= 0 else -1.0 / lo


def _nt_scaling_inverse(S, Y):
    """``W^{-1}`` for the Nesterov-Todd point ``W Y W = S``."""
    L = np.linalg.cholesky(S)
    w, V = np.linalg.eigh(_sym(L.T @ Y @ L))
    w = np.maximum(w, 0.0)
    Li = la.solve_triangular(L, np.eye(len(S)), lower=True)
    G = (V * np.sqrt(np.sqrt(w))) .T @ Li
    return G.T @ G


def _residuals(P: LMIProblem, x, S, Y):
    rp = [Sx - Sb for Sx, Sb in zip(P.slack(x), S)]
    rd = P.c - P.adjoint(Y)
    pobj = float(P.c @ x) + P.offset
    dobj = _inner(P.C, Y) + P.offset
    nC = _fro(P.C)
    return {
        "rp": rp, "rd": rd, "pobj": pobj, "dobj": dobj,
        "pinf": _fro(rp) / (1.0 + nC),
        "dinf": float(np.linalg.norm(rd)) / (1.0 + float(np.linalg.norm(P.c))),
        "gap": abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj)),
    }


def solve_lmi(P: LMIProblem, params: SolverParams | None = None) -> LMIResult:
    params = params or SolverParams()
    m = P.m
    sizes = P.block_sizes
    ntot = sum(sizes)

    if m == 0:
        S = [-Cb for Cb in P.C]
        ok = all(np.linalg.eigvalsh(_sym(Sb))[0] >= -params.feas_tol for Sb in S if Sb.size)
        status = Status.OPTIMAL if ok else Status.INFEASIBLE
        Y = [np.zeros_like(Cb) for Cb in P.C]
        return LMIResult(np.zeros(0), S, Y, P.offset, P.offset, status, 0,
                         {"pinf": 0.0, "dinf": 0.0, "gap": 0.0, "min_eig": 0.0})

    Aflat = [Ab.reshape(m, -1) for Ab in P.A]
    normA = np.sqrt(sum((Af ** 2).sum(axis=1) for Af in Aflat))
    xi = max(10.0, np.sqrt(max(sizes)), max(sizes) * float(np.max((1 + np.abs(P.c)) / (1 + normA))))
    eta = max(10.0, np.sqrt(max(sizes)), float(normA.max()), _fro(P.C)) / np.sqrt(max(sizes))
    gram = sum(Af @ Af.T for Af in Aflat)
    gram_cho = la.cho_factor(gram + 1e-14 * np.trace(gram) / m * np.eye(m))
    x = np.zeros(m)
    S = [eta * np.eye(n) for n in sizes]
    Y = [xi * np.eye(n) for n in sizes]

    history = []
    status = Status.MAX_ITER
    best = None
    stall = 0
    it = 0
    for it in range(1, params.max_iter + 1):
        r = _residuals(P, x, S, Y)
        mu = _inner(S, Y) / ntot
        history.append((r["pobj"], r["dobj"], r["pinf"], r["dinf"], r["gap"], mu))
        merit = max(r["gap"], r["pinf"], r["dinf"])
        if best is None or merit < best[0]:
            best = (merit, x.copy(), [s.copy() for s in S], [y.copy() for y in Y])
            best_it = it
        elif it - best_it >= params.patience:
            status = Status.NUMERICAL
            break
        if r["gap"] <= params.gap_tol and r["pinf"] <= params.feas_tol and r["dinf"] <= params.feas_tol:
            status = Status.OPTIMAL
            break
        # divergence tests for infeasibility certificates
        cy = _inner(P.C, Y)
        if cy > 0 and np.linalg.norm(P.adjoint(Y)) <= params.infeas_tol * cy:
            status = Status.INFEASIBLE
            break
        cx = float(P.c @ x)
        if cx < 0 and _fro(P.C) + 1.0 <= params.infeas_tol * (-cx) and r["pinf"] <= 1e-6:
            status = Status.UNBOUNDED
            break

        try:
            Sinv = [np.linalg.inv(Sb) for Sb in S]
            if params.direction == "nt":
                # dY = ... - Winv dS Winv with W Y W = S
                Winv = [_nt_scaling_inverse(Sb, Yb) for Sb, Yb in zip(S, Y)]
                left, right = Winv, Winv
            else:
                left, right = Sinv, Y
            M = np.zeros((m, m))
            for Ab, Af, Lb, Rb in zip(P.A, Aflat, left, right):
                T = np.matmul(np.matmul(Lb, Ab), Rb).reshape(m, -1)
                M += Af @ T.T
            M = _sym(M)
            try:
                cho = la.cho_factor(M)
                solve = lambda rhs: la.cho_solve(cho, rhs)
            except la.LinAlgError:
                w, V = np.linalg.eigh(M)
                w = np.maximum(w, 1e-14 * max(w.max(), 1e-300))
                solve = lambda rhs: V @ ((V.T @ rhs) / w)
        except np.linalg.LinAlgError:
            status = Status.NUMERICAL
            break

        def direction(mu_t, corr):
            base = []
            for k, (Si, Yb) in enumerate(zip(Sinv, Y)):
                Bb = mu_t * Si - Yb
                if corr is not None:
                    Bb = Bb - _sym(Si @ corr[0][k] @ corr[1][k])
                base.append(Bb)
            W = [Bb - Lb @ rpb @ Rb for Bb, Lb, Rb, rpb in zip(base, left, right, r["rp"])]
            rhs = -r["rd"] + sum(Af @ Wb.ravel() for Af, Wb in zip(Aflat, W))
            dx = solve(rhs)
            dS = [np.tensordot(dx, Ab, axes=1) + rpb for Ab, rpb in zip(P.A, r["rp"])]
            dY = [_sym(Bb - Lb @ dSb @ Rb) for Bb, Lb, Rb, dSb in zip(base, left, right, dS)]
            # restore <A_i, dY> = rd_i lost to an ill-conditioned Schur solve
            err = r["rd"] - sum(Af @ d.ravel() for Af, d in zip(Aflat, dY))
            u = la.cho_solve(gram_cho, err)
            dY = [d + np.tensordot(u, Ab, axes=1) for d, Ab in zip(dY, P.A)]
            return dx, dS, dY

        def steps(dS, dY, frac):
            ap = min([_max_step(Sb, d) for Sb, d in zip(S, dS)] + [np.inf])
            ad = min([_max_step(Yb, d) for Yb, d in zip(Y, dY)] + [np.inf])
            return min(1.0, frac * ap), min(1.0, frac * ad)

        dx_a, dS_a, dY_a = direction(0.0, None)
        ap, ad = steps(dS_a, dY_a, 1.0)
        mu_aff = _inner([Sb + ap * d for Sb, d in zip(S, dS_a)],
                        [Yb + ad * d for Yb, d in zip(Y, dY_a)]) / ntot
        # centering and step fraction adapt to how far the predictor got
        expon = max(1.0, 3.0 * min(ap, ad) ** 2)
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** expon)) if mu > 0 else 0.0
        dx, dS, dY = direction(sigma * mu, (dS_a, dY_a))
        frac = params.step_fraction
        if params.adaptive_step:
            frac = min(frac, 0.9 + 0.09 * min(ap, ad))
        ap, ad = steps(dS, dY, frac)
        if not np.isfinite(ap) or not np.isfinite(ad):
            status = Status.NUMERICAL
            break
        x = x + ap * dx
        S = [_sym(Sb + ap * d) for Sb, d in zip(S, dS)]
        Y = [_sym(Yb + ad * d) for Yb, d in zip(Y, dY)]
        stall = stall + 1 if max(ap, ad) < 1e-6 else 0
        if stall >= 5:
            status = Status.NUMERICAL
            break
        log.debug("it %d pobj %.10g dobj %.10g gap %.2e pinf %.2e dinf %.2e ap %.2f ad %.2f",
                  it, r["pobj"], r["dobj"], r["gap"], r["pinf"], r["dinf"], ap, ad)

    if status in (Status.MAX_ITER, Status.NUMERICAL) and best is not None:
        _, x, S, Y = best
    r = _residuals(P, x, S, Y)
    min_eig = min((float(np.linalg.eigvalsh(Sb)[0]) for Sb in S if Sb.size), default=0.0)
    res = {"pinf": r["pinf"], "dinf": r["dinf"], "gap": r["gap"], "min_eig": min_eig}
    return LMIResult(x, S, Y, r["pobj"], r["dobj"], status, it, res, history)


# moment relaxation adapter ---------------------------------------------------

@dataclass
class Reduction:
    """Affine parametrization ``y = y_p + Z x`` of the equality-feasible moments."""

    y_p: np.ndarray
    Z: np.ndarray
    consistent: bool
    row_residual: float
    # (block index, basis of the face) for blocks kept in the LMI
    faces: list = field(default_factory=list)


def reduce_equalities(rel: MomentRelaxation, tol: float = 1e-10) -> Reduction:
    M = rel.num_moments
    R = rel.equality_rows.toarray() if rel.equality_rows.shape[0] else np.zeros((0, M))
    e0 = np.zeros((1, M))
    e0[0, rel.index[(0,) * rel.nvars]] = 1.0
    E = np.vstack([R, e0])
    b = np.zeros(len(E))
    b[-1] = 1.0
    scale = np.linalg.norm(E, axis=1)
    scale[scale == 0] = 1.0
    E = E / scale[:, None]
    b = b / scale
    Q, Rr, piv = la.qr(E.T, pivoting=True)
    diag = np.abs(np.diag(Rr))
    rank = int(np.sum(diag > tol * diag[0])) if diag.size else 0
    Z = Q[:, rank:]
    y_p = np.linalg.lstsq(E, b, rcond=None)[0]
    y_p = y_p - Z @ (Z.T @ y_p)
    resid = float(np.linalg.norm(E @ y_p - b))
    return Reduction(y_p, Z, resid <= 1e-8, resid)


def _face(Ab: np.ndarray, Cb: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of the complement of the common kernel of a pencil.

    Vectors killed by every ``A_i`` and by ``C`` lie in the kernel of the
    block for every feasible ``x`` (ideal elements of low degree do this to
    moment matrices), so the block is restricted to their complement.
    """
    n = Cb.shape[0]
    K = np.vstack([Ab.reshape(-1, n), Cb])
    _, s, Vt = np.linalg.svd(K, full_matrices=False)
    if not s.size or s[0] == 0:
        return np.zeros((n, 0))
    k = int(np.sum(s > tol * s[0]))
    return np.eye(n) if k == n else Vt[:k].T


def relaxation_to_lmi(rel: MomentRelaxation, red: Reduction | None = None,
                      facial: bool = True) -> tuple[LMIProblem, Reduction]:
    red = red or reduce_equalities(rel)
    m = red.Z.shape[1]
    A, C, faces = [], [], []
    for k, blk in enumerate(rel.blocks):
        n = blk.side
        coeffs = blk.coeffs
        Ab = np.asarray((coeffs.T @ red.Z).T).reshape(m, n, n)
        Ab = 0.5 * (Ab + Ab.transpose(0, 2, 1))
        Cb = _sym(-np.asarray(coeffs.T @ red.y_p).reshape(n, n))
        U = _face(Ab, Cb) if facial else np.eye(n)
        if U.shape[1] == 0:
            continue
        if U.shape[1] < n:
            Ab = np.matmul(np.matmul(U.T, Ab), U)
            Cb = _sym(U.T @ Cb @ U)
        A.append(Ab)
        C.append(Cb)
        faces.append((k, U))
    red.faces = faces
    c = red.Z.T @ rel.objective
    return LMIProblem(c, A, C, float(rel.objective @ red.y_p)), red


@dataclass
class SDPSolution:
    y: np.ndarray
    primal_value: float
    dual_value: float
    status: Status
    iterations: int
    residuals: dict
    lmi: LMIProblem | None = None
    reduction: Reduction | None = None
    result: LMIResult | None = None
    params: SolverParams = field(default_factory=lambda: SolverParams())
    # > 0 when the objective carried a trace penalty; dual_value is then not
    # a bound for the unpenalized relaxation
    trace_penalty: float = 0.0

    @property
    def usable(self) -> bool:
        """Optimal, or stalled close enough to optimal to read off values."""
        if self.status == Status.OPTIMAL:
            return True
        if self.status in (Status.NUMERICAL, Status.MAX_ITER):
            r = self.residuals
            tol = self.params
            return (r["gap"] <= tol.accept_gap and r["pinf"] <= tol.accept_feas
                    and r["dinf"] <= tol.accept_feas)
        return False


def solve(rel: MomentRelaxation, params: SolverParams | None = None,
          trace_penalty: float = 0.0) -> SDPSolution:
    """Solve the relaxation; ``primal_value`` is always ``L(f)`` at the returned y.

    A positive ``trace_penalty`` adds ``delta * sum_blocks trace`` to the
    objective.  Any dual-feasible Gram set shifted by ``delta * I`` stays
    feasible for the penalized problem, so its dual gains an interior; this
    rescues runs that stall when the SOS side has none, at the cost of an
    O(delta) bias toward low-trace moment vectors.
    """
    params = params or SolverParams()
    red = reduce_equalities(rel, params.rank_tol)
    if not red.consistent:
        nan = float("nan")
        return SDPSolution(red.y_p, nan, nan, Status.INFEASIBLE, 0,
                           {"pinf": red.row_residual, "dinf": nan, "gap": nan, "min_eig": nan},
                           reduction=red, params=params)
    lmi, red = relaxation_to_lmi(rel, red)
    if trace_penalty > 0:
        tr = sum(np.einsum("kii->k", Ab) for Ab in lmi.A)
        lmi = replace(lmi, c=lmi.c + trace_penalty * tr)
    res = solve_lmi(lmi, params)
    y = red.y_p + red.Z @ res.x
    primal = res.primal if trace_penalty <= 0 else float(rel.objective @ y)
    return SDPSolution(y, primal, res.dual, res.status, res.iterations, res.residuals,
                       lmi, red, res, params, trace_penalty)


# dual certificate -------------------------------------------------------------

@dataclass
class CertificateBundle:
    gamma: float
    grams: list[tuple[Polynomial, list, np.ndarray]]
    multipliers: list[tuple[Polynomial, Polynomial]]
    degree_bound: int

    def sos_terms(self):
        return [(gnu, basis, G) for gnu, basis, G in self.grams]


class CertificateUnavailable(ValueError):
    pass


def dual_certificate(sol: SDPSolution, rel: MomentRelaxation) -> CertificateBundle:
    """Read an SOS certificate ``p - gamma = sum sigma_nu g_nu + sum psi_e e``.

    Stalled runs still give a certificate; ``gamma`` is then the last dual
    objective, which may sit below the relaxation value.

    The Gram matrices are the dual block variables after a minimal-norm
    correction that restores the linear identity exactly, followed by an
    eigenvalue floor at zero.  Equality multipliers come from a least-squares
    fit of the remaining coefficient vector against the equality rows.
    """
    if sol.result is None or sol.status in (Status.INFEASIBLE, Status.UNBOUNDED):
        raise CertificateUnavailable(f"no dual variables for status {sol.status.value}")
    if sol.trace_penalty > 0:
        raise CertificateUnavailable("dual variables of a trace-penalized solve")
    P, red = sol.lmi, sol.reduction
    Y = [y.copy() for y in sol.result.Y]
    m = P.m
    if m:
        rd = P.c - P.adjoint(Y)
        Aflat = [Ab.reshape(m, -1) for Ab in P.A]
        G = sum(Af @ Af.T for Af in Aflat)
        u = np.linalg.lstsq(G, rd, rcond=None)[0]
        Y = [Yb + np.tensordot(u, Ab, axes=1) for Yb, Ab in zip(Y, P.A)]
    grams = []
    for (k, U), Yb in zip(red.faces, Y):
        blk = rel.blocks[k]
        w, V = np.linalg.eigh(_sym(Yb))
        Yb = (V * np.maximum(w, 0.0)) @ V.T
        grams.append((blk.psi, list(blk.basis.monomials), _sym(U @ Yb @ U.T)))

    gamma = sol.dual_value
    # coefficient vector of p - gamma - sum <A_alpha, Y>
    resid = rel.objective.copy()
    zero = rel.index[(0,) * rel.nvars]
    resid[zero] -= gamma
    for (k, _), (_, _, Yb) in zip(red.faces, grams):
        resid -= rel.blocks[k].coeffs @ Yb.ravel()
    multipliers = []
    R = rel.equality_rows
    if R.shape[0]:
        lam = np.linalg.lstsq(R.toarray().T, resid, rcond=None)[0]
        by_eq: dict[int, dict] = {}
        for (k, delta), v in zip(rel.row_labels, lam):
            if v != 0.0:
                by_eq.setdefault(k, {})[delta] = by_eq.get(k, {}).get(delta, 0.0) + float(v)
        for k, terms in sorted(by_eq.items()):
            multipliers.append((Polynomial(rel.nvars, terms), rel.equality_polys[k]))
    return CertificateBundle(gamma, grams, multipliers, 2 * rel.order)
