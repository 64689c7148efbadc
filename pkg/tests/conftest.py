import math

import pytest

from subfluct.substitution import parse_substitution

MAIN = "a=aab;b=bba"
THETA2 = "a=aab;b=bab"
THETA3 = "a=aba;b=bab"
RATIONAL = "a=abb;b=baa"
COBOUNDARY = "a=ab;b=ca;c=cd;d=ac"
FIBONACCI = "a=ab;b=a"
SALEM1 = "a=ad;b=adbbd;c=adbcbcbd;d=adbcbd"
BLOWUP = "a=aaab;b=abbb"

ALPHA = (math.sqrt(5) - 1) / 2

# (rules, f, lambda_f, is_coboundary, exact variance)
WORKED_EIGENFUNCTIONS = [
    (MAIN, [1, -1], 1, False, "2/3"),
    (THETA2, [1, -1], 1, False, "2/9"),
    (THETA3, [1, -1], 1, True, "0"),
    (RATIONAL, [1, -1], -1, False, "2/3"),
    (COBOUNDARY, [-1, 0, 1, 0], 1, True, "0"),
    (COBOUNDARY, [-1, 2, -1, 2], -1, False, "1/4"),
]


@pytest.fixture
def main_sub():
    return parse_substitution(MAIN)


@pytest.fixture
def fib_sub():
    return parse_substitution(FIBONACCI)


@pytest.fixture
def cob_sub():
    return parse_substitution(COBOUNDARY)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line ``criterion k: PASS/FAIL detail`` and assert it."""

    def record(k: int, ok: bool, detail: str):
        line = f"criterion {k}: {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        request.config.stash.setdefault(_ACCEPTANCE, {})[k] = line
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
