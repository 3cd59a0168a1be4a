"""Certificate files: ``f - gamma = sum psi_i e_i + sum sigma_nu g_nu``.

A certificate is a JSON object::

    {
      "program": "polynomial" | "homogenized",
      "variables": ["x1", "x2"],
      "gamma": "-1",
      "ideal": [{"multiplier": <poly>, "generator": <poly> | {"ref": k}}],
      "sos":   [{"squares": [<poly>, ...], "weights": [...], "generator": ...},
                {"sigma": <poly>, "generator": ...},
                {"basis": [[e1, e2], ...], "gram": [[...]], "generator": ...}],
      "numeric": false, "tol": 1e-5, "box": 2.0, "samples": 100
    }

``<poly>`` is an expression string or ``{"terms": [[coeff, [exponents]]]}``.
Generators must be (up to sign, for ideal terms) equalities of the
augmented program, or products of its inequality generators; ``{"ref": k}``
picks the k-th equality (0-based) or, for SOS terms, the product with
indicator vector ``k``.  ``program`` selects which augmented program the
problem file is checked against: the plain polynomial one (constant
denominator only) or the homogenized one in variables ``x0, x1, ...``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import extract
from .homogenize import build_homogenized
from .jacobian import JacobianAugmentedProgram, build_augmented, build_augmented_general
from .parser import ParseError, RationalProgram, parse_polynomial
from .poly import Polynomial, render, to_float


class CertificateError(ValueError):
    pass


def homogenized_names(variables) -> list[str]:
    x0 = "x0"
    while x0 in variables:
        x0 += "_"
    return [x0, *variables]


def program_for(rp: RationalProgram, kind: str) -> tuple[JacobianAugmentedProgram, list[str]]:
    if kind == "polynomial":
        if not rp.q.is_constant():
            raise CertificateError("a 'polynomial' certificate needs a constant denominator")
        q0 = next(iter(rp.q.terms.values()))
        f = rp.p * (Fraction(1) / Fraction(q0)) if rp.p.is_exact() else rp.p * (1.0 / float(q0))
        return build_augmented_general(f, rp.h, rp.g), list(rp.variables)
    if kind == "homogenized":
        return build_augmented(build_homogenized(rp)), homogenized_names(rp.variables)
    raise CertificateError(f"unknown program kind {kind!r}")


def _poly(spec, names, where):
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        spec = repr(spec)
    try:
        if isinstance(spec, str):
            return parse_polynomial(spec, names)
        if isinstance(spec, dict) and "terms" in spec:
            out = Polynomial.zero(len(names))
            for c, expo in spec["terms"]:
                if len(expo) != len(names):
                    raise CertificateError(f"{where}: exponent length mismatch")
                out = out + Polynomial.monomial(tuple(int(e) for e in expo), _coeff(c))
            return out
    except ParseError as e:
        raise CertificateError(f"{where}: {e}") from e
    except (TypeError, ValueError) as e:
        raise CertificateError(f"{where}: {e}") from e
    raise CertificateError(f"{where}: expected an expression or a terms object")


def _coeff(c):
    if isinstance(c, bool):
        raise CertificateError("boolean coefficient")
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, float):
        return c
    if isinstance(c, str):
        return Fraction(c)
    raise CertificateError(f"bad coefficient {c!r}")


@dataclass
class CertificateCheck:
    exact: bool
    passed: bool
    residual: Polynomial
    sampled_max: float | None = None
    tol: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_json(self, names) -> dict:
        nz = sorted(self.residual.items(), key=lambda t: -abs(float(t[1])))
        return {
            "exact": self.exact,
            "passed": self.passed,
            "residual_terms": len(self.residual),
            "largest_residual_terms": [[str(c) if isinstance(c, Fraction) else float(c),
                                        list(a)] for a, c in nz[:10]],
            "residual": render(self.residual, names) if self.exact and len(self.residual) <= 50 else None,
            "sampled_max": self.sampled_max,
            "tol": self.tol,
            "notes": self.notes,
        }


def _match_ideal(gen, jap, names, where):
    eqs = jap.all_equalities
    if isinstance(gen, dict) and "ref" in gen:
        k = gen["ref"]
        if not isinstance(k, int) or not 0 <= k < len(eqs):
            raise CertificateError(f"{where}: equality ref {k!r} out of range")
        return eqs[k]
    g = _poly(gen, names, where)
    for e in eqs:
        if _same(g, e) or _same(g, -e):
            return g
    raise CertificateError(f"{where}: generator is not an equality of the program")


def _match_sos(gen, jap, names, where):
    nus = dict(jap.nu_products)
    if gen is None:
        return Polynomial.constant(jap.nvars, 1)
    if isinstance(gen, dict) and "ref" in gen:
        nu = tuple(gen["ref"])
        if nu not in nus:
            raise CertificateError(f"{where}: product ref {list(nu)} unknown")
        return nus[nu]
    g = _poly(gen, names, where)
    for p in nus.values():
        if _same(g, p):
            return g
    raise CertificateError(f"{where}: generator is not a product of inequality constraints")


def _same(a: Polynomial, b: Polynomial) -> bool:
    if a.is_exact() and b.is_exact():
        return a == b
    d = to_float(a) - to_float(b)
    scale = max([1.0] + [abs(float(c)) for _, c in b.items()])
    return all(abs(float(c)) <= 1e-12 * scale for _, c in d.items())


def check_certificate(doc: dict | str, rp: RationalProgram) -> tuple[CertificateCheck, list[str]]:
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as e:
            raise CertificateError(f"invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise CertificateError("certificate must be a JSON object")
    jap, names = program_for(rp, doc.get("program", "homogenized"))
    if "variables" in doc and list(doc["variables"]) != names:
        raise CertificateError(f"certificate variables {doc['variables']} differ from {names}")
    if "gamma" not in doc:
        raise CertificateError("missing 'gamma'")
    gamma = _coeff(doc["gamma"])
    numeric = bool(doc.get("numeric", False)) or isinstance(gamma, float)

    ideal = []
    for k, item in enumerate(doc.get("ideal", [])):
        where = f"ideal[{k}]"
        if not isinstance(item, dict) or "multiplier" not in item or "generator" not in item:
            raise CertificateError(f"{where}: needs 'multiplier' and 'generator'")
        ideal.append((_poly(item["multiplier"], names, where),
                      _match_ideal(item["generator"], jap, names, where)))

    sos = []
    for k, item in enumerate(doc.get("sos", [])):
        where = f"sos[{k}]"
        if not isinstance(item, dict):
            raise CertificateError(f"{where}: expected an object")
        gen = _match_sos(item.get("generator"), jap, names, where)
        if "squares" in item:
            sq = [_poly(s, names, f"{where}.squares") for s in item["squares"]]
            w = [_coeff(c) for c in item.get("weights", [1] * len(sq))]
            if len(w) != len(sq):
                raise CertificateError(f"{where}: weights and squares differ in length")
            if any(c < 0 for c in w):
                raise CertificateError(f"{where}: negative weight")
            sigma = Polynomial.zero(len(names))
            for c, s in zip(w, sq):
                sigma = sigma + s * s * c
            sos.append((sigma, gen))
        elif "sigma" in item:
            sos.append((_poly(item["sigma"], names, where), gen))
        elif "basis" in item and "gram" in item:
            basis = [tuple(int(e) for e in b) for b in item["basis"]]
            G = np.asarray(item["gram"], dtype=float)
            if G.shape != (len(basis), len(basis)):
                raise CertificateError(f"{where}: Gram shape {G.shape} does not match basis")
            if np.linalg.eigvalsh((G + G.T) / 2).min() < -1e-9 * max(1.0, np.abs(G).max()):
                raise CertificateError(f"{where}: Gram matrix is not positive semidefinite")
            numeric = True
            sos.append(((basis, G), gen))
        else:
            raise CertificateError(f"{where}: needs 'squares', 'sigma' or 'basis'+'gram'")

    f = jap.objective
    if numeric:
        f = to_float(f)
        ideal = [(to_float(a), to_float(b)) for a, b in ideal]
        sos = [(s if not isinstance(s, Polynomial) else to_float(s), to_float(g)) for s, g in sos]
        gamma = float(gamma)
    res = extract.verify_certificate(f, gamma, ideal, sos)
    if not numeric:
        return CertificateCheck(True, res.is_zero(), res), names
    tol = float(doc.get("tol", 1e-5))
    smax = extract.sampled_max_abs(res, int(doc.get("samples", 100)), float(doc.get("box", 2.0)),
                                   seed=int(doc.get("seed", 0)))
    return CertificateCheck(False, smax <= tol, res, smax, tol), names


def _terms_json(p: Polynomial) -> dict:
    return {"terms": [[float(c), list(a)] for a, c in sorted(p.items())]}


def bundle_to_json(bundle, jap: JacobianAugmentedProgram, names, program: str,
                   tol: float = 1e-5, box: float = 2.0) -> dict:
    """Serialize a dual certificate so :func:`check_certificate` can read it."""
    eqs = jap.all_equalities
    nus = {id(p): nu for nu, p in jap.nu_products}
    ideal = []
    for mult, gen in bundle.multipliers:
        k = next(i for i, e in enumerate(eqs) if e is gen or e == gen)
        ideal.append({"multiplier": _terms_json(mult), "generator": {"ref": k}})
    sos = []
    for psi, basis, G in bundle.grams:
        nu = nus.get(id(psi))
        if nu is None:
            nu = next(n for n, p in jap.nu_products if p == psi)
        sos.append({"basis": [list(b) for b in basis], "gram": np.asarray(G).tolist(),
                    "generator": {"ref": list(nu)}})
    return {"program": program, "variables": list(names), "gamma": float(bundle.gamma),
            "ideal": ideal, "sos": sos, "numeric": True, "tol": tol, "box": box,
            "samples": 100, "degree_bound": bundle.degree_bound}
