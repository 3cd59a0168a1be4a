"""Expression and JSON problem-file parsing.

Grammar (whitespace ignored)::

    expr    := ['+'|'-'] term (('+'|'-') term)*
    term    := power (('*'|'/') power)*
    power   := atom ['^' INT]
    atom    := NUMBER | NAME | '(' expr ')' | ('+'|'-') power

Implicit multiplication is rejected.  Every node evaluates to a pair
``(numerator, denominator)`` so a quotient of polynomials can be read without
any simplification; ``parse_polynomial`` insists the denominator is constant.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .poly import Polynomial


class ParseError(ValueError):
    def __init__(self, message: str, text: str = "", pos: int | None = None):
        self.pos = pos
        if pos is not None:
            message = f"{message} at position {pos}\n  {text}\n  {' ' * pos}^"
        super().__init__(message)


class ProblemError(ValueError):
    """Problem document violates the schema."""


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))")


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.n = len(variables)
        self.index = {v: k for k, v in enumerate(variables)}
        self.one = Polynomial.constant(self.n, 1)

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, self.text, tok[2])

    def parse(self):
        if self.peek()[0] == "end":
            self.error("empty expression")
        val = self.expr()
        if self.peek()[0] != "end":
            tok = self.peek()
            if tok[0] in ("num", "name") or tok[1] == "(":
                self.error("implicit multiplication is not allowed; use '*'")
            self.error(f"unexpected token {tok[1]!r}")
        return val

    def expr(self):
        num, den = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            n2, d2 = self.term()
            if den == d2:
                num = num + n2 if op == "+" else num - n2
            else:
                num = num * d2 + n2 * den if op == "+" else num * d2 - n2 * den
                den = den * d2
        return num, den

    def term(self):
        num, den = self.power()
        while self.peek()[0] == "op" and self.peek()[1] in ("*", "/"):
            op_tok = self.take()
            n2, d2 = self.power()
            if op_tok[1] == "*":
                num, den = num * n2, den * d2
            else:
                if n2.is_zero():
                    self.error("division by zero", op_tok)
                num, den = num * d2, den * n2
            if den.is_constant():
                c = den.coeff((0,) * self.n)
                num, den = num * (Fraction(1) / Fraction(c)), self.one
        return num, den

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            tok = self.peek()
            if tok[0] == "op" and tok[1] == "-":
                self.error("negative exponents are not allowed")
            if tok[0] != "num" or not tok[1].isdigit():
                self.error("exponent must be a nonnegative integer literal")
            self.take()
            k = int(tok[1])
            return base[0] ** k, base[1] ** k
        return base

    def atom(self):
        tok = self.take()
        kind, val, _ = tok
        if kind == "num":
            return Polynomial.constant(self.n, Fraction(val)), self.one
        if kind == "name":
            if val not in self.index:
                self.error(f"unknown identifier {val!r}", tok)
            return Polynomial.variable(self.n, self.index[val]), self.one
        if kind == "op" and val == "(":
            inner = self.expr()
            if self.peek()[1] != ")":
                self.error("expected ')'")
            self.take()
            return inner
        if kind == "op" and val in "+-":
            num, den = self.power()
            return (num if val == "+" else -num), den
        self.error(f"unexpected token {val!r}" if val else "unexpected end of input", tok)


def parse_rational(text: str, variables: Sequence[str]) -> tuple[Polynomial, Polynomial]:
    """Parse ``text`` into an unsimplified numerator/denominator pair."""
    if not variables:
        raise ProblemError("at least one variable is required")
    return _Parser(text, variables).parse()


def parse_polynomial(text: str, variables: Sequence[str]) -> Polynomial:
    num, den = parse_rational(text, variables)
    if not den.is_constant():
        raise ParseError("expression is not a polynomial (non-constant divisor)")
    return num


@dataclass(frozen=True)
class RationalProgram:
    """min p/q subject to h_i = 0, g_j >= 0."""

    variables: tuple[str, ...]
    p: Polynomial
    q: Polynomial
    h: tuple[Polynomial, ...] = ()
    g: tuple[Polynomial, ...] = ()
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = len(self.variables)
        if self.q.is_zero():
            raise ProblemError("denominator is the zero polynomial")
        for f in (self.p, self.q, *self.h, *self.g):
            if f.nvars != n:
                raise ProblemError("all polynomials must use the program's variables")

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def m1(self) -> int:
        return len(self.h)

    @property
    def m2(self) -> int:
        return len(self.g)

    def objective(self, x):
        return self.p(x) / self.q(x)

    def squared_denominator(self) -> "RationalProgram":
        """The equivalent program with objective p*q / q^2."""
        return RationalProgram(self.variables, self.p * self.q, self.q * self.q,
                               self.h, self.g, self.name, dict(self.meta))


def _terms_form(spec, n: int, where: str) -> Polynomial:
    terms = spec.get("terms")
    if not isinstance(terms, list):
        raise ProblemError(f"{where}: 'terms' must be a list")
    out = Polynomial.zero(n)
    for item in terms:
        if (not isinstance(item, list) or len(item) != 2
                or not isinstance(item[1], list) or len(item[1]) != n):
            raise ProblemError(f"{where}: each term must be [coeff, [e_1..e_{n}]]")
        c, expo = item
        c = Fraction(str(c)) if isinstance(c, (int, float, str)) else None
        if c is None:
            raise ProblemError(f"{where}: bad coefficient")
        if any(not isinstance(e, int) or e < 0 for e in expo):
            raise ProblemError(f"{where}: exponents must be nonnegative integers")
        out = out + Polynomial.monomial(tuple(expo), c)
    return out


def _read_poly(spec, variables, where: str) -> Polynomial:
    if isinstance(spec, (int, float)):
        spec = str(spec)
    if isinstance(spec, str):
        try:
            return parse_polynomial(spec, variables)
        except ParseError as e:
            raise ProblemError(f"{where}: {e}") from e
    if isinstance(spec, dict):
        return _terms_form(spec, len(variables), where)
    raise ProblemError(f"{where}: expected an expression string or a terms object")


def parse_problem(document: str | dict) -> RationalProgram:
    """Build a :class:`RationalProgram` from the JSON problem schema."""
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as e:
            raise ProblemError(f"invalid JSON: {e}") from e
    else:
        doc = document
    if not isinstance(doc, dict):
        raise ProblemError("problem document must be a JSON object")
    variables = doc.get("variables")
    if (not isinstance(variables, list) or not variables
            or not all(isinstance(v, str) for v in variables)):
        raise ProblemError("'variables' must be a nonempty list of names")
    if len(set(variables)) != len(variables):
        raise ProblemError("duplicate variable names")
    for v in variables:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", v):
            raise ProblemError(f"invalid variable name {v!r}")
    if "numerator" not in doc:
        raise ProblemError("missing required key 'numerator'")
    known = {"variables", "numerator", "denominator", "equalities", "inequalities",
             "name", "meta"}
    extra = set(doc) - known
    if extra:
        raise ProblemError(f"unknown keys: {sorted(extra)}")

    num_spec = doc["numerator"]
    if "denominator" not in doc and isinstance(num_spec, str):
        try:
            p, q = parse_rational(num_spec, variables)
        except ParseError as e:
            raise ProblemError(f"numerator: {e}") from e
    else:
        p = _read_poly(num_spec, variables, "numerator")
        q = _read_poly(doc.get("denominator", "1"), variables, "denominator")
    if q.is_zero():
        raise ProblemError("denominator is the zero polynomial")

    def many(key):
        items = doc.get(key, [])
        if not isinstance(items, list):
            raise ProblemError(f"'{key}' must be a list")
        return tuple(_read_poly(s, variables, f"{key}[{k}]") for k, s in enumerate(items))

    return RationalProgram(tuple(variables), p, q, many("equalities"), many("inequalities"),
                           name=str(doc.get("name", "")), meta=dict(doc.get("meta", {})))


def load_problem(path) -> RationalProgram:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read())
