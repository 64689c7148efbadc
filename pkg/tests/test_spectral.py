import cmath
import json
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import COBOUNDARY, FIBONACCI, MAIN, RATIONAL, SALEM1
from subfluct.spectral import (
    EigenClass,
    NotPrimitiveError,
    characteristic_polynomial,
    classify_eigenvalue,
    eigen_decompose,
    pf_data,
    spectral_report,
)
from subfluct.substitution import is_primitive, parse_substitution, theta_matrix


def _M(text):
    return theta_matrix(parse_substitution(text))


def _proportional(u, v):
    u = [complex(x) for x in u]
    v = [complex(x) for x in v]
    i = max(range(len(v)), key=lambda j: abs(v[j]))
    if abs(v[i]) == 0:
        return False
    c = u[i] / v[i]
    return all(abs(a - c * b) <= 1e-9 for a, b in zip(u, v))


@pytest.mark.parametrize(
    "text, coeffs, rendered",
    [(MAIN, (1, -4, 3), "t^2 - 4t + 3"), (FIBONACCI, (1, -1, -1), "t^2 - t - 1")],
)
def test_charpoly_goldens(text, coeffs, rendered):
    p = characteristic_polynomial(_M(text))
    assert p.coefficients == coeffs
    assert str(p) == rendered


def test_charpoly_one_by_one():
    assert characteristic_polynomial(np.array([[5]])).coefficients == (1, -5)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.integers(0, 4), min_size=4, max_size=4), min_size=4, max_size=4))
def test_charpoly_matches_sympy(rows):
    t = sympy.symbols("t")
    expected = sympy.Matrix(rows).charpoly(t).all_coeffs()
    assert list(characteristic_polynomial(np.array(rows)).coefficients) == [int(c) for c in expected]


def test_main_eigenpairs():
    pairs = eigen_decompose(_M(MAIN))
    assert [p.value for p in pairs] == [3, 1]
    assert _proportional(pairs[0].left[0], [1, 1])
    assert _proportional(pairs[1].left[0], [1, -1])
    assert all(p.exactness == "rational-exact" for p in pairs)


def test_coboundary_eigenpairs_match_stated_vectors():
    pairs = {p.value: p for p in eigen_decompose(_M(COBOUNDARY))}
    assert set(pairs) == {2, 1, -1, 0}
    assert _proportional(pairs[2].left[0], [1, 1, 1, 1])
    assert _proportional(pairs[1].left[0], [-1, 0, 1, 0])
    assert _proportional(pairs[-1].left[0], [-1, 2, -1, 2])


def test_rational_example():
    pairs = eigen_decompose(_M(RATIONAL))
    assert [p.value for p in pairs] == [3, -1]
    assert _proportional(pairs[1].left[0], [1, -1])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.integers(0, 3), min_size=3, max_size=3), min_size=3, max_size=3))
def test_eigenvalues_match_sympy(rows):
    M = np.array(rows)
    expected = sympy.Matrix(rows).eigenvals()
    pairs = eigen_decompose(M)
    assert sum(p.alg_mult for p in pairs) == 3
    for value, mult in expected.items():
        z = complex(sympy.N(value, 30))
        hits = [p for p in pairs if abs(complex(p.value) - z) <= 1e-8]
        assert len(hits) == 1 and hits[0].alg_mult == mult
    for p in pairs:
        assert 1 <= p.geo_mult <= p.alg_mult
        for v in p.left:
            v = np.array([complex(x) for x in v])
            assert np.linalg.norm(v @ M - complex(p.value) * v) <= 1e-9 * np.linalg.norm(v) * max(1, np.abs(M).max())
        for v in p.right:
            v = np.array([complex(x) for x in v])
            assert np.linalg.norm(M @ v - complex(p.value) * v) <= 1e-9 * np.linalg.norm(v) * max(1, np.abs(M).max())


def test_jordan_block_multiplicities():
    pairs = eigen_decompose(np.array([[2, 1, 0], [0, 2, 0], [0, 0, 1]]))
    two = next(p for p in pairs if p.value == 2)
    assert (two.alg_mult, two.geo_mult) == (2, 1)


@pytest.mark.parametrize(
    "text, lam, sigma, rho",
    [
        (COBOUNDARY, 2, [1, 1, 1, 1], [Fraction(2, 6), Fraction(1, 6), Fraction(2, 6), Fraction(1, 6)]),
        (MAIN, 3, [1, 1], [Fraction(1, 2), Fraction(1, 2)]),
    ],
)
def test_pf_exact(text, lam, sigma, rho):
    pf = pf_data(_M(text))
    assert pf.exact
    assert (pf.lam, list(pf.sigma), list(pf.rho)) == (lam, sigma, rho)


@pytest.mark.parametrize("text", [FIBONACCI, SALEM1])
def test_pf_float(text):
    M = _M(text)
    pf = pf_data(M)
    sigma, rho = np.array(pf.sigma, dtype=float), np.array(pf.rho, dtype=float)
    assert abs(sigma @ rho - 1) <= 1e-12
    assert np.all(sigma > 0) and np.all(rho > 0)
    assert np.allclose(sigma @ M, pf.lam * sigma) and np.allclose(M @ rho, pf.lam * rho)


def test_fibonacci_lambda():
    assert abs(pf_data(_M(FIBONACCI)).lam - (1 + 5**0.5) / 2) <= 1e-12


def test_pf_requires_primitive():
    with pytest.raises(NotPrimitiveError):
        pf_data(np.array([[1, 0], [1, 1]]))


@pytest.mark.parametrize(
    "value, lam, cls",
    [
        (3, 3, EigenClass.PF),
        (1, 3, EigenClass.EQ1_REAL1),
        (-1, 3, EigenClass.EQ1_OTHER),
        (-(5**0.5 - 1) / 2, (1 + 5**0.5) / 2, EigenClass.LT1),
        (2, 4, EigenClass.GT1),
        (cmath.exp(0.7j), 5.1, EigenClass.EQ1_OTHER),
        (1 + 1e-12, 5.1, EigenClass.EQ1_REAL1),
    ],
)
def test_classify(value, lam, cls):
    assert classify_eigenvalue(value, lam) == cls


def test_salem_has_unit_circle_pair():
    rep = spectral_report(parse_substitution(SALEM1))
    classes = [c for c in rep.classes]
    assert classes.count(EigenClass.EQ1_OTHER) == 2
    values = [complex(p.value) for p, c in zip(rep.eigenpairs, classes) if c == EigenClass.EQ1_OTHER]
    assert abs(values[0] - values[1].conjugate()) <= 1e-9
    lam = rep.pf.lam
    lt1 = [complex(p.value) for p, c in zip(rep.eigenpairs, classes) if c == EigenClass.LT1]
    assert abs(lt1[0].real - 1 / lam) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.integers(0, 3), min_size=3, max_size=3), min_size=3, max_size=3))
def test_pf_dominates(rows):
    M = np.array(rows)
    assume(is_primitive(M)[0])
    pf = pf_data(M)
    for p in eigen_decompose(M):
        if p.value != pf.lam and abs(complex(p.value) - complex(pf.lam)) > 1e-9:
            assert abs(complex(p.value)) < float(pf.lam) - 1e-9


def test_report_json_is_deterministic():
    s = parse_substitution(COBOUNDARY)
    a, b = spectral_report(s).to_json(), spectral_report(s).to_json()
    assert a == b
    data = json.loads(a)
    assert data["pf"]["rho"] == ["1/3", "1/6", "1/3", "1/6"]
