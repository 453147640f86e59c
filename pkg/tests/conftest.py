import re

import pytest
import sympy as sp

from wdvvkit.algebra import Expr

_VAR = re.compile(r"([A-Za-z_][A-Za-z_0-9]*)\[(-?\d+),(\d+)\]")


def sym(family, index, order=0):
    return sp.Symbol(f"{family}_{index}_{order}".replace("-", "m"))


def to_sympy(e: Expr):
    """Independent reading of an Expr through its printed form."""
    text = _VAR.sub(lambda m: f"{m.group(1)}_{m.group(2)}_{m.group(3)}".replace("-", "m"), e.to_infix())
    text = re.sub(r"\blambda\b", "lam", text).replace("^", "**")
    return sp.sympify(text)


def sympy_zero(x) -> bool:
    return sp.cancel(sp.together(x)) == 0


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance_log(request):
    return request.config._acceptance_lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
