"""SDPA sparse format (``.dat-s``) export and import.

Layout written by :func:`write_sdpa`::

    * comment lines (offset recorded as "* offset <value>")
    m
    nblocks
    s_1 s_2 ...        (negative size marks a diagonal block)
    c_1 ... c_m
    k b i j v          (matrix k = 0..m, block b, 1-based i <= j)

Matrix 0 is ``F0 = C``; the problem read back is
``min c.x  s.t.  sum_i x_i F_i - F0 >= 0``, the same convention as
:class:`ratmin.sdp.LMIProblem`.  Entries are written in (k, b, i, j)
order with ``repr`` floats so the output is deterministic and round-trips
exactly.

:func:`export_sdpa` writes the relaxation itself rather than the reduced
LMI: the variables are the moments other than ``y_0``, every equality row
becomes a pair of entries ``+r, -r`` in one diagonal block, and the
constant part of the objective goes into the offset comment.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .moment import MomentRelaxation
from .sdp import LMIProblem


class SDPAFormatError(ValueError):
    pass


def relaxation_lmi(rel: MomentRelaxation) -> LMIProblem:
    """The relaxation as an LMI over the moments ``y_alpha``, ``alpha != 0``."""
    zero = rel.index[(0,) * rel.nvars]
    keep = [k for k in range(rel.num_moments) if k != zero]
    m = len(keep)
    A, C, diag = [], [], []
    for blk in rel.blocks:
        n = blk.side
        coeffs = blk.coeffs.toarray()
        A.append(coeffs[keep].reshape(m, n, n))
        C.append(-coeffs[zero].reshape(n, n))
        diag.append(False)
    R = rel.equality_rows.toarray()
    if R.shape[0]:
        r = R.shape[0]
        Ad = np.zeros((m, 2 * r, 2 * r))
        Cd = np.zeros((2 * r, 2 * r))
        idx = np.arange(r)
        Ad[:, idx, idx] = R[:, keep].T
        Ad[:, r + idx, r + idx] = -R[:, keep].T
        Cd[idx, idx] = -R[:, zero]
        Cd[r + idx, r + idx] = R[:, zero]
        A.append(Ad)
        C.append(Cd)
        diag.append(True)
    c = rel.objective[keep].copy()
    return LMIProblem(c, A, C, float(rel.objective[zero]), diagonal=diag)


def write_sdpa(P: LMIProblem, comment: str = "") -> str:
    out = io.StringIO()
    for line in comment.splitlines():
        out.write(f"* {line}\n")
    out.write(f"* offset {P.offset!r}\n")
    diag = P.diagonal or [False] * len(P.C)
    out.write(f"{P.m}\n{len(P.C)}\n")
    out.write(" ".join(str(-n if d else n) for n, d in zip(P.block_sizes, diag)) + "\n")
    out.write(" ".join(repr(float(v)) for v in P.c) + "\n")
    mats = [P.C] + [[Ab[i] for Ab in P.A] for i in range(P.m)]
    for k, blocks in enumerate(mats):
        for b, (F, d) in enumerate(zip(blocks, diag), start=1):
            if d:
                nz = [(i, i) for i in np.flatnonzero(np.diag(F))]
            else:
                ii, jj = np.nonzero(np.triu(F))
                nz = list(zip(ii, jj))
            for i, j in nz:
                out.write(f"{k} {b} {i + 1} {j + 1} {float(F[i, j])!r}\n")
    return out.getvalue()


def read_sdpa(text: str) -> LMIProblem:
    offset = 0.0
    body = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line[0] in "*\"":
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "offset":
                offset = float(parts[1])
            continue
        body.append(line.replace(",", " ").replace("{", " ").replace("}", " ")
                    .replace("(", " ").replace(")", " "))
    if len(body) < 4:
        raise SDPAFormatError("truncated SDPA header")
    try:
        m = int(body[0].split()[0])
        nb = int(body[1].split()[0])
        struct = [int(v) for v in body[2].split()[:nb]]
        c = np.array([float(v) for v in body[3].split()[:m]])
    except ValueError as exc:
        raise SDPAFormatError(f"bad SDPA header: {exc}") from None
    if len(struct) != nb or len(c) != m:
        raise SDPAFormatError("header sizes do not match")
    sizes = [abs(s) for s in struct]
    A = [np.zeros((m, n, n)) for n in sizes]
    C = [np.zeros((n, n)) for n in sizes]
    for lineno, line in enumerate(body[4:], start=5):
        parts = line.split()
        if len(parts) != 5:
            raise SDPAFormatError(f"entry line {lineno}: expected 5 fields")
        k, b, i, j = (int(v) for v in parts[:4])
        v = float(parts[4])
        if not (0 <= k <= m and 1 <= b <= nb and 1 <= i <= sizes[b - 1] and 1 <= j <= sizes[b - 1]):
            raise SDPAFormatError(f"entry line {lineno}: index out of range")
        if struct[b - 1] < 0 and i != j:
            raise SDPAFormatError(f"entry line {lineno}: off-diagonal entry in a diagonal block")
        F = C[b - 1] if k == 0 else A[b - 1][k - 1]
        F[i - 1, j - 1] = F[j - 1, i - 1] = v
    return LMIProblem(c, A, C, offset, diagonal=[s < 0 for s in struct])


def export_sdpa(rel: MomentRelaxation) -> str:
    P = relaxation_lmi(rel)
    head = (f"moment relaxation of order {rel.order} in {rel.nvars} variables; "
            f"{rel.num_moments - 1} free moments, {rel.equality_rows.shape[0]} equality rows")
    return write_sdpa(P, head)


def save_sdpa(rel: MomentRelaxation, path) -> Path:
    path = Path(path)
    path.write_text(export_sdpa(rel))
    return path


def solve_external(P: LMIProblem, solver: str = "CLARABEL") -> tuple[str, float, np.ndarray | None]:
    """Solve an LMI with cvxpy; used to cross-check the internal solver."""
    import cvxpy as cp

    x = cp.Variable(P.m)
    cons = []
    for Ab, Cb, d in zip(P.A, P.C, P.diagonal or [False] * len(P.C)):
        if d:
            cons.append(np.diagonal(Ab, axis1=1, axis2=2).T @ x - np.diag(Cb) >= 0)
        else:
            expr = sum(x[i] * Ab[i] for i in range(P.m) if np.any(Ab[i])) - Cb
            cons.append(0.5 * (expr + expr.T) >> 0)
    prob = cp.Problem(cp.Minimize(P.c @ x + P.offset), cons)
    prob.solve(solver=solver)
    return prob.status, float(prob.value), (None if x.value is None else np.asarray(x.value))
