"""Homogenized polynomial program, equivalence bookkeeping and back-mapping.

Variable 0 of every homogenized polynomial is the new coordinate ``x0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .parser import ProblemError, RationalProgram
from .poly import Polynomial, homogenize

NOT_CLOSED_CAVEAT = (
    "equivalence of the rational and homogenized minima is not certified; "
    "when the feasible set is not closed at infinity the homogenized minimum "
    "can be strictly smaller than the rational one")


@dataclass(frozen=True)
class HomogenizedProgram:
    """min p~ s.t. h_i^hom = 0, q~ = 1, g_j^hom >= 0 (and x0 >= 0 when kept).

    ``equalities`` ends with ``q~ - 1``; ``inequalities`` ends with ``x0``
    when ``x0_included`` is set.
    """

    nvars: int
    objective: Polynomial
    qtilde: Polynomial
    equalities: tuple[Polynomial, ...]
    inequalities: tuple[Polynomial, ...]
    x0_included: bool
    d: int
    m1: int
    m2: int

    @property
    def n(self) -> int:
        return self.nvars - 1

    @property
    def dehomogenizing_constraint(self) -> Polynomial:
        return self.equalities[-1]

    @property
    def hom_equalities(self) -> tuple[Polynomial, ...]:
        return self.equalities[:self.m1]

    @property
    def hom_inequalities(self) -> tuple[Polynomial, ...]:
        return self.inequalities[:self.m2]


def build_homogenized(rp: RationalProgram) -> HomogenizedProgram:
    if rp.q.is_zero():
        raise ProblemError("denominator is the zero polynomial")
    d = int(max(rp.p.degree if not rp.p.is_zero() else 0, rp.q.degree))
    pt = homogenize(rp.p, d)
    qt = homogenize(rp.q, d)
    one = Polynomial.constant(rp.n + 1, 1)
    eqs = [homogenize(h, max(int(h.degree), 0)) for h in rp.h] + [qt - one]
    ineqs = [homogenize(g, max(int(g.degree), 0)) for g in rp.g]
    # without constraints the sign of x0 is irrelevant
    keep_x0 = rp.m1 + rp.m2 > 0
    if keep_x0:
        ineqs.append(Polynomial.variable(rp.n + 1, 0))
    return HomogenizedProgram(rp.n + 1, pt, qt, tuple(eqs), tuple(ineqs), keep_x0,
                              d, rp.m1, rp.m2)


class EquivalenceReason(str, Enum):
    DEGREE = "degree"
    POSITIVE_X0 = "positive-x0-minimizer"
    UNCONSTRAINED = "unconstrained"
    POLYNOMIAL = "polynomial"
    UNCERTIFIED = "uncertified"


@dataclass(frozen=True)
class EquivalenceStatus:
    certified: bool
    reason: EquivalenceReason
    notes: str = ""

    def to_json(self) -> dict:
        return {"certified": self.certified, "reason": self.reason.value,
                "notes": self.notes}


def _finite_x0(atom, hp: HomogenizedProgram, threshold: float) -> bool:
    atom = np.asarray(atom, dtype=float)
    scale = max(np.linalg.norm(atom), 1e-300)
    x0 = atom[0]
    if hp.x0_included:
        return x0 > threshold * scale
    return abs(x0) > threshold * scale


def certify_equivalence(rp: RationalProgram, hp: HomogenizedProgram,
                        best_atoms: Sequence | None = None,
                        x0_threshold: float = 1e-4) -> EquivalenceStatus:
    """Decide which sufficient condition (if any) gives r* = s*.

    Closedness at infinity is not decided except in the unconstrained case,
    where it holds trivially.
    """
    dp = rp.p.degree
    if not rp.p.is_zero() and dp > rp.q.degree:
        return EquivalenceStatus(True, EquivalenceReason.DEGREE,
                                 f"deg p = {dp} > deg q = {rp.q.degree}")
    for atom in best_atoms or ():
        if _finite_x0(atom, hp, x0_threshold):
            return EquivalenceStatus(
                True, EquivalenceReason.POSITIVE_X0,
                f"verified minimizer with x0 = {float(atom[0]):.6g} != 0")
    if rp.m1 == 0 and rp.m2 == 0:
        return EquivalenceStatus(True, EquivalenceReason.UNCONSTRAINED,
                                 "no constraints: the feasible set R^n is closed at infinity")
    return EquivalenceStatus(False, EquivalenceReason.UNCERTIFIED,
                             NOT_CLOSED_CAVEAT + "; closedness at infinity not checked")


class Attainment(str, Enum):
    ATTAINED = "attained"
    NOT_ATTAINED = "not-attained"
    UNKNOWN = "unknown"


@dataclass
class BackMapResult:
    finite_minimizers: list[np.ndarray] = field(default_factory=list)
    asymptotic_atoms: list[np.ndarray] = field(default_factory=list)
    attained: Attainment = Attainment.UNKNOWN


def back_map(atoms: Sequence, hp: HomogenizedProgram,
             x0_threshold: float = 1e-4) -> BackMapResult:
    """Map homogenized atoms back to original coordinates x / x0.

    Atoms whose ``|x0|`` is at most ``x0_threshold`` times their norm are
    reported as asymptotic.
    """
    res = BackMapResult()
    if not len(atoms):
        return res
    for atom in atoms:
        atom = np.asarray(atom, dtype=float)
        if _finite_x0(atom, hp, x0_threshold):
            res.finite_minimizers.append(atom[1:] / atom[0])
        else:
            res.asymptotic_atoms.append(atom)
    res.finite_minimizers = _dedupe(res.finite_minimizers)
    res.finite_minimizers.sort(key=_sort_key)
    res.asymptotic_atoms.sort(key=_sort_key)
    res.attained = Attainment.ATTAINED if res.finite_minimizers else Attainment.NOT_ATTAINED
    return res


def _sort_key(p):
    return tuple(np.round(p, 6))


def _dedupe(points, tol=1e-6):
    out = []
    for p in points:
        if all(np.linalg.norm(p - q) > tol * max(1.0, np.linalg.norm(q)) for q in out):
            out.append(p)
    return out


def lift_point(rp: RationalProgram, hp: HomogenizedProgram, x) -> np.ndarray:
    """Feasible homogenized point (1/t, x/t) with t = q(x)^(1/d)."""
    x = np.asarray(x, dtype=float)
    qx = float(rp.q(list(x)))
    if qx <= 0:
        raise ValueError("q(x) must be positive to lift a point")
    t = qx ** (1.0 / hp.d)
    return np.concatenate([[1.0 / t], x / t])
