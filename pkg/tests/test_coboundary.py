from fractions import Fraction

import numpy as np
import pytest

from conftest import COBOUNDARY, FIBONACCI, MAIN, RATIONAL, SALEM1, THETA2, THETA3, WORKED_EIGENFUNCTIONS
from subfluct.coboundary import (
    NotEigenfunctionError,
    check_condition_iv,
    classify_discrepancy,
    clt_variance,
    solve_coboundary,
)
from subfluct.measures import drift, markov_model, mpm
from subfluct.path_space import prefix_sums_table
from subfluct.spectral import EigenClass, spectral_report
from subfluct.substitution import find_seed, fixed_point_prefix, birkhoff_partial_sums, parse_substitution


@pytest.mark.parametrize("text, f, lam, expected, _var", WORKED_EIGENFUNCTIONS)
def test_coboundary_decisions(text, f, lam, expected, _var):
    cert = solve_coboundary(parse_substitution(text), f, lam)
    assert cert.is_coboundary is expected
    assert cert.exact


def test_coboundary_example_h():
    cert = solve_coboundary(parse_substitution(COBOUNDARY), [-1, 0, 1, 0], 1)
    assert cert.h == (0, 1, 1, 0)
    assert cert.drift_forced_zero
    assert cert.condition_iv["holds"]


def test_theta3_h_difference():
    cert = solve_coboundary(parse_substitution(THETA3), [1, -1], 1)
    assert cert.h[0] - cert.h[1] == 1


def test_condition_iv_fails_for_wrong_h(cob_sub):
    res = check_condition_iv(cob_sub, [-1, 0, 1, 0], 1, 0, [0, 0, 0, 0])
    assert not res["holds"]


def test_requires_eigenvector(main_sub):
    with pytest.raises(NotEigenfunctionError):
        solve_coboundary(main_sub, [1, 0], 1)
    with pytest.raises(NotEigenfunctionError):
        solve_coboundary(main_sub, [1, 1], 3)


@pytest.mark.parametrize("text, f, lam, is_cob, var", WORKED_EIGENFUNCTIONS)
def test_zero_variance_iff_coboundary(text, f, lam, is_cob, var):
    rep = clt_variance(parse_substitution(text), f, lam)
    assert rep.exact
    assert rep.E_abs_Z2 == Fraction(var)
    assert (rep.E_abs_Z2 <= 1e-10) is is_cob
    assert abs(rep.series_value - float(rep.E_abs_Z2)) <= 1e-9


def _enumerated_variance_increment(s, f, lam, p):
    """E|Y_{p+1}|^2 - E|Y_p|^2 under the stationary path measure, by enumeration."""
    model = markov_model(s)
    fc = prefix_sums_table(s, f)
    d = drift(s, f, model.lifted)

    def second_moment(depth):
        total = Fraction(0)
        for path, w in mpm(model, depth).items():
            y = sum((fc[x] - d) * lam**i for i, x in enumerate(path))
            total += w * y * y
        return total

    return second_moment(p + 1) - second_moment(p)


@pytest.mark.parametrize(
    "text, f, lam, p, tol",
    [(MAIN, [1, -1], 1, 7, 1e-3), (THETA2, [1, -1], 1, 7, 1e-3), (RATIONAL, [1, -1], -1, 7, 1e-3), (COBOUNDARY, [-1, 2, -1, 2], -1, 9, 5e-3)],
)
def test_variance_matches_enumeration_oracle(text, f, lam, p, tol):
    s = parse_substitution(text)
    inc = _enumerated_variance_increment(s, f, lam, p)
    assert abs(float(inc) - float(clt_variance(s, f, lam).E_abs_Z2)) <= tol


def test_complex_series_uses_conjugate_powers():
    s = parse_substitution(SALEM1)
    rep = spectral_report(s)
    pair = next(p for p, c in zip(rep.eigenpairs, rep.classes) if c == EigenClass.EQ1_OTHER)
    var = clt_variance(s, list(pair.left[0]), pair.value)
    assert not var.exact
    assert abs(var.series_value - var.E_abs_Z2) <= 1e-9
    assert abs(var.series_literal_value - var.E_abs_Z2) > 0.1
    assert var.E_Z2 == 0
    assert abs(var.gamma[0][0] - var.E_abs_Z2 / 2) <= 1e-12


def test_birkhoff_bound_for_coboundary(cob_sub):
    cert = solve_coboundary(cob_sub, [-1, 0, 1, 0], 1)
    a, k = find_seed(cob_sub)
    S = birkhoff_partial_sums([-1, 0, 1, 0], fixed_point_prefix(cob_sub, a, k, 10**6))
    assert np.max(np.abs(S)) <= cert.birkhoff_bound()
    assert np.max(np.abs(S)) == np.max(np.abs(S[:1000]))


@pytest.mark.parametrize(
    "text, bounded, literal",
    [(FIBONACCI, True, True), (MAIN, False, False), (COBOUNDARY, False, True), (THETA3, True, True), (RATIONAL, False, True)],
)
def test_classifier(text, bounded, literal):
    verdict = classify_discrepancy(parse_substitution(text))
    assert verdict.bounded is bounded
    assert verdict.bounded_literal is literal


def test_classifier_reasons_report_both_readings(cob_sub):
    data = classify_discrepancy(cob_sub).to_dict()
    assert data["conditions"]["3_unit_modulus_coboundaries"] is False
    assert data["conditions"]["3_literal_eigenvalue_one_coboundaries"] is True
    minus_one = next(r for r in data["reasons"] if r["eigenvalue"] == -1)
    assert minus_one["condition_3"] is False


def test_classifier_condition_one():
    verdict = classify_discrepancy(parse_substitution("a=aaab;b=abbb"))
    assert verdict.conditions["1_moduli_le_1"] is False
    assert not verdict.bounded


def test_classifier_multi_dimensional_eigenspace():
    # λ = 1 with a two-dimensional eigenspace: both basis vectors and a random mix are tested
    s = parse_substitution("a=abc;b=bca;c=cab")
    verdict = classify_discrepancy(s)
    reason = next(r for r in verdict.reasons if r["eigenvalue"] == 0)
    assert reason["class"] == "modulus_lt_1"
    assert verdict.bounded
