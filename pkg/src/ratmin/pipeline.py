"""Order sweep: parse -> homogenize -> augment -> relax -> solve -> extract."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import extract
from .homogenize import (Attainment, BackMapResult, EquivalenceReason, EquivalenceStatus,
                         HomogenizedProgram, back_map, build_homogenized, certify_equivalence)
from .jacobian import JacobianAugmentedProgram, build_augmented, build_augmented_general
from .moment import assemble_relaxation, minimal_order
from .parser import RationalProgram
from .sdp import SDPSolution, SolverParams, Status, solve

log = logging.getLogger(__name__)


@dataclass
class SolveConfig:
    max_order: int = 8
    min_order: int | None = None
    # atom verification tolerance; consecutive orders agree within 10*tol
    tol: float = 1e-6
    rank_tol: float = extract.RANK_TOL
    # coarser rank tolerances tried when the default finds no verified atoms
    rank_tol_fallback: tuple[float, ...] = (3e-3, 1e-2)
    x0_threshold: float = 1e-4
    # relative mismatch allowed between atom objective and relaxation value
    objective_tol: float = 1e-4
    # largest primal-dual gap (relative) at which atoms are accepted
    gap_accept: float = 1e-2
    # re-solve a stalled order with this trace penalty (0 disables)
    trace_penalty: float = 1e-6
    square_denominator: bool = False
    seed: int = 0
    solver: str = "internal"
    export_dir: str | None = None
    solver_params: SolverParams = field(default_factory=SolverParams)


@dataclass
class OrderRecord:
    N: int
    primal: float
    dual: float
    status: str
    gap: float
    iterations: int
    ranks: dict | None = None
    flat_t: int | None = None
    heuristic_t: int | None = None
    extracted: int = 0
    note: str = ""


@dataclass
class AtomRecord:
    point: list[float]
    weight: float
    objective: float
    max_equality: float
    min_inequality: float


@dataclass
class SolveReport:
    optimum: float | None
    lower_bound: float | None
    per_order: list[OrderRecord]
    equivalence: EquivalenceStatus
    minimizers: BackMapResult
    atoms: list[AtomRecord]
    warnings: list[str]
    timings_ms: dict[str, float]
    extraction: dict | None = None
    exports: list[str] = field(default_factory=list)
    homogenized: bool = True
    solved: bool = False

    @property
    def exit_code(self) -> int:
        if self.solved or self.exports:
            return 0
        return 1 if self.optimum is None else 2

    def to_json(self) -> dict:
        return {
            "optimum": self.optimum,
            "lower_bound": self.lower_bound,
            "per_order": [
                {"N": r.N, "primal": _num(r.primal), "dual": _num(r.dual), "status": r.status,
                 "gap": _num(r.gap), "iterations": r.iterations,
                 "ranks": {str(k): v for k, v in (r.ranks or {}).items()},
                 "flat_t": r.flat_t, "heuristic_t": r.heuristic_t,
                 "extracted": r.extracted, "note": r.note}
                for r in self.per_order],
            "equivalence": self.equivalence.to_json(),
            "minimizers": [list(map(float, p)) for p in self.minimizers.finite_minimizers],
            "asymptotic": [list(map(float, p)) for p in self.minimizers.asymptotic_atoms],
            "attained": self.minimizers.attained.value,
            "atoms": [asdict(a) for a in self.atoms],
            "extraction": self.extraction,
            "homogenized": self.homogenized,
            "warnings": list(self.warnings),
            "timings_ms": {k: round(v, 3) for k, v in self.timings_ms.items()},
            "exports": list(self.exports),
        }


def _num(v):
    return None if v is None or not np.isfinite(v) else float(v)


@dataclass
class PreparedProgram:
    """Polynomial program handed to the relaxation, with its provenance."""

    rp: RationalProgram
    jap: JacobianAugmentedProgram
    hp: HomogenizedProgram | None

    @property
    def homogenized(self) -> bool:
        return self.hp is not None


def prepare(rp: RationalProgram, square_denominator: bool = False) -> PreparedProgram:
    if square_denominator:
        rp = rp.squared_denominator()
    if rp.q.is_constant():
        # polynomial objective: skip homogenization
        q0 = Fraction(next(iter(rp.q.terms.values())))
        f = rp.p * (1 / q0) if rp.p.is_exact() else rp.p * (1.0 / float(q0))
        return PreparedProgram(rp, build_augmented_general(f, rp.h, rp.g), None)
    hp = build_homogenized(rp)
    return PreparedProgram(rp, build_augmented(hp), hp)


def try_extract(sol: SDPSolution, rel, jap, cfg: SolveConfig, rec: OrderRecord,
                dual: float | None = None):
    """Extract and verify atoms; returns (atoms, weights, checks, info) or None.

    ``dual`` is the lower bound used for the gap test (defaults to the
    solution's own dual value).
    """
    dual = sol.dual_value if dual is None else dual
    notes = []
    for k, rank_tol in enumerate((cfg.rank_tol, *cfg.rank_tol_fallback)):
        rep = extract.flat_truncation(sol.y, rel, rank_tol)
        if k == 0:
            rec.ranks, rec.flat_t, rec.heuristic_t = rep.ranks, rep.flat_t, rep.heuristic_t
        found = _extract_at(sol, rel, jap, cfg, rep, rank_tol, dual, notes)
        if found is not None:
            found[3]["rank_tol"] = rank_tol
            rec.note = ""
            return found
    rec.note = notes[0] if notes else ""
    return None


def _extract_at(sol, rel, jap, cfg, rep, rank_tol, dual, notes):
    candidates = []
    if rep.flat_t is not None:
        candidates.append(("flat", rep.flat_t))
    if rep.heuristic_t is not None and rep.heuristic_t != rep.flat_t:
        candidates.append(("heuristic", rep.heuristic_t))
    for kind, t in candidates:
        try:
            aset = extract.extract_atoms(sol.y, rel, t, rank_tol, seed=cfg.seed)
        except extract.ExtractionError as exc:
            notes.append(f"extraction at t={t} failed: {exc}")
            continue
        checks, points = [], []
        for a in aset.atoms:
            refined = extract.refine_atom(a, jap)
            chk = extract.verify_atom(refined, jap, cfg.tol)
            checks.append(chk)
            points.append(refined)
        bad = [c for c in checks if not c.passed]
        if bad:
            notes.append(f"{len(bad)} of {len(checks)} atoms at t={t} failed verification")
            continue
        # the moment vector of any verified atom is feasible for the relaxation,
        # so atoms may undercut the solver's primal value but not exceed it
        objs = np.array([c.objective for c in checks])
        scale = max(1.0, abs(sol.primal_value))
        if objs.max() - objs.min() > cfg.objective_tol * scale:
            notes.append(f"atom objectives spread over [{objs.min():.8g}, {objs.max():.8g}]")
            continue
        if objs.max() > sol.primal_value + cfg.objective_tol * scale:
            notes.append(f"atom objective {objs.max():.8g} exceeds the relaxation value")
            continue
        gap = sol.primal_value - dual
        if not gap <= cfg.gap_accept * scale:
            notes.append(f"relaxation gap {gap:.1e} too large to trust the atoms")
            continue
        info = {"N": rel.order, "t": t, "kind": kind, "rank": aset.rank}
        return np.array(points), aset.weights, checks, info
    return None


def solve_program(rp: RationalProgram, cfg: SolveConfig | None = None,
                  capture: dict | None = None) -> SolveReport:
    """Sweep relaxation orders until verified atoms appear.

    ``capture``, when given, receives the augmented program and every
    ``(order, solution, relaxation)`` triple for callers that want dual
    certificates.
    """
    cfg = cfg or SolveConfig()
    timings: dict[str, float] = {}
    warnings: list[str] = []
    t0 = time.perf_counter()
    prep = prepare(rp, cfg.square_denominator)
    jap = prep.jap
    if capture is not None:
        capture.update(jap=jap, homogenized=prep.homogenized, variables=list(rp.variables),
                       solutions=[])
    timings["augment"] = 1e3 * (time.perf_counter() - t0)
    n0 = minimal_order(jap)
    N0 = max(n0, cfg.min_order or 0)
    if cfg.max_order < N0:
        warnings.append(f"max order {cfg.max_order} is below the minimal order {N0}")

    per_order: list[OrderRecord] = []
    exports: list[str] = []
    found = None
    last_usable: tuple[OrderRecord, SDPSolution] | None = None
    failure = None
    for N in range(N0, cfg.max_order + 1):
        t1 = time.perf_counter()
        rel = assemble_relaxation(jap, N, min_order=n0)
        timings[f"assemble_N{N}"] = 1e3 * (time.perf_counter() - t1)
        if cfg.solver == "export":
            from .sdpa import save_sdpa
            out = Path(cfg.export_dir or ".")
            out.mkdir(parents=True, exist_ok=True)
            stem = (rp.name or "problem").replace(" ", "_")
            exports.append(str(save_sdpa(rel, out / f"{stem}_N{N}.dat-s")))
            continue
        t2 = time.perf_counter()
        sol = solve(rel, cfg.solver_params)
        timings[f"solve_N{N}"] = 1e3 * (time.perf_counter() - t2)
        rec = OrderRecord(N, sol.primal_value, sol.dual_value, sol.status.value,
                          sol.residuals.get("gap", float("nan")), sol.iterations)
        per_order.append(rec)
        if capture is not None:
            capture["solutions"].append((N, sol, rel))
        log.info("N=%d primal=%.10g dual=%.10g status=%s", N, sol.primal_value,
                 sol.dual_value, sol.status.value)
        if sol.status in (Status.INFEASIBLE, Status.UNBOUNDED):
            failure = f"relaxation of order {N} reported {sol.status.value}"
            break
        if sol.residuals.get("pinf", 1.0) > 1e-6:
            rec.note = "primal residual too large for extraction"
            continue
        last_usable = (rec, sol)
        t3 = time.perf_counter()
        found = try_extract(sol, rel, jap, cfg, rec)
        timings[f"extract_N{N}"] = 1e3 * (time.perf_counter() - t3)
        if found is None and not sol.usable and cfg.trace_penalty > 0:
            t4 = time.perf_counter()
            reg = solve(rel, cfg.solver_params, trace_penalty=cfg.trace_penalty)
            timings[f"resolve_N{N}"] = 1e3 * (time.perf_counter() - t4)
            if reg.residuals.get("pinf", 1.0) <= 1e-6 and np.isfinite(reg.primal_value):
                log.info("N=%d trace-penalized primal=%.10g", N, reg.primal_value)
                first_note = rec.note
                found = try_extract(reg, rel, jap, cfg, rec, dual=sol.dual_value)
                notes = [first_note, "trace-penalized re-solve"]
                if found is None and rec.note:
                    notes[-1] += f": {rec.note}"
                rec.note = "; ".join(x for x in notes if x)
                # both moment vectors are feasible, keep the smaller objective
                if reg.primal_value < rec.primal:
                    rec.primal = reg.primal_value
        if found is not None:
            rec.extracted = len(found[0])
            best_atom = min(c.objective for c in found[2])
            if best_atom < rec.primal:
                rec.primal = best_atom
                rec.note = (rec.note + "; " if rec.note else "") + "primal value from verified atoms"
            break

    timings["total"] = 1e3 * (time.perf_counter() - t0)
    atoms_out: list[AtomRecord] = []
    bm = BackMapResult()
    optimum = lower = None
    extraction = None
    solved = False
    if last_usable is not None:
        rec, sol = last_usable
        optimum = float(rec.primal)
        lower = _num(sol.dual_value)
        if not sol.usable:
            warnings.append(f"order {rec.N}: solver stopped with status {rec.status} "
                            f"(relative gap {rec.gap:.1e}); the dual bound is loose")
    if found is not None:
        points, weights, checks, extraction = found
        atoms_out = [AtomRecord([float(v) for v in p], float(w), c.objective, c.max_equality,
                                c.min_inequality) for p, w, c in zip(points, weights, checks)]
        if prep.homogenized:
            bm = back_map(points, prep.hp, cfg.x0_threshold)
        else:
            bm = BackMapResult(sorted([np.asarray(p) for p in points], key=lambda p: tuple(np.round(p, 6))),
                               [], Attainment.ATTAINED)
        solved = True
    elif failure is None and cfg.solver != "export":
        if len(per_order) >= 2 and all(np.isfinite([per_order[-1].primal, per_order[-2].primal])):
            a, b = per_order[-1].primal, per_order[-2].primal
            if abs(a - b) <= 10 * cfg.tol * max(1.0, abs(a)):
                warnings.append("no verified atoms; the last two orders agree, reporting a bound")
            else:
                warnings.append("no verified atoms and the bound has not stabilized")
        else:
            warnings.append("no verified atoms; reporting a bound only")
    if failure is not None:
        warnings.append(failure)

    if prep.homogenized:
        best = [np.asarray(a.point) for a in atoms_out]
        equiv = certify_equivalence(prep.rp, prep.hp, best, cfg.x0_threshold)
        if not equiv.certified:
            warnings.append("the homogenized minimum may be strictly below the rational "
                            "minimum (feasible set not known to be closed at infinity)")
    else:
        equiv = EquivalenceStatus(True, EquivalenceReason.POLYNOMIAL,
                                  "constant denominator: solved without homogenization")
    return SolveReport(optimum, lower, per_order, equiv, bm, atoms_out, warnings, timings,
                       extraction, exports, prep.homogenized, solved)


def best_dual_certificate(capture: dict):
    """Dual certificate from the order with the smallest relative gap.

    ``capture`` is the dict filled by :func:`solve_program`.  Returns
    ``(bundle, names, program_kind)`` or ``None`` when no order has dual
    variables.
    """
    from .certificate import homogenized_names
    from .sdp import CertificateUnavailable, dual_certificate
    ok = [(sol.residuals.get("gap", float("inf")), N, sol, rel)
          for N, sol, rel in capture.get("solutions", []) if sol.result is not None]
    for _, _, sol, rel in sorted(ok, key=lambda t: (t[0], t[1])):
        try:
            bundle = dual_certificate(sol, rel)
        except CertificateUnavailable:
            continue
        variables = capture["variables"]
        if capture["homogenized"]:
            return bundle, homogenized_names(variables), "homogenized"
        return bundle, list(variables), "polynomial"
    return None
