import random
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from ratmin.parser import load_problem
from ratmin.poly import Polynomial

settings.register_profile(
    "repo", derandomize=True, max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

ROOT = Path(__file__).resolve().parents[1]
PROBLEMS = ROOT / "problems"
CERTIFICATES = ROOT / "certificates"


@pytest.fixture
def problem():
    def _load(name):
        return load_problem(PROBLEMS / f"{name}.json")
    return _load


def random_poly(rng: random.Random, nvars: int, max_deg: int = 4, nterms: int = 6,
                coeff_range: int = 5) -> Polynomial:
    terms = {}
    for _ in range(nterms):
        d = rng.randint(0, max_deg)
        alpha = [0] * nvars
        for _ in range(d):
            alpha[rng.randrange(nvars)] += 1
        terms[tuple(alpha)] = Fraction(rng.randint(-coeff_range, coeff_range), rng.randint(1, 3))
    return Polynomial(nvars, terms)


def random_point(rng: random.Random, nvars: int):
    return [Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for _ in range(nvars)]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
