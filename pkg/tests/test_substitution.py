from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import COBOUNDARY, FIBONACCI, MAIN
from subfluct.substitution import (
    SubstitutionError,
    SubstitutionSyntaxError,
    abelianization,
    birkhoff_partial_sums,
    birkhoff_sum,
    expand_prefix,
    find_seed,
    fixed_point_prefix,
    is_primitive,
    iter_fixed_point,
    parse_substitution,
    parse_substitution_file,
    theta_matrix,
)


@pytest.mark.parametrize(
    "text, letters, images",
    [
        ("a=aab;b=bba", "ab", ["aab", "bba"]),
        ("a=a", "a", ["a"]),
        ("a=ab;b=a", "ab", ["ab", "a"]),
        (" b = ba ; a = ab ", "ba", ["ba", "ab"]),
        ("a=ab\nb=a", "ab", ["ab", "a"]),
    ],
)
def test_parse(text, letters, images):
    s = parse_substitution(text)
    assert "".join(s.letters) == letters
    assert [s.show(w) for w in s.rules] == images


@pytest.mark.parametrize(
    "text",
    ["a=ab;a=b;b=a", "a=;b=a", "a=ac;b=a", "a=ab;b", "a=a=b", "ab=a", "a=a-b;b=a", ""],
)
def test_parse_errors_carry_position(text):
    with pytest.raises(SubstitutionSyntaxError) as info:
        parse_substitution(text)
    assert info.value.position >= 0


def test_blank_rules_are_skipped():
    assert parse_substitution("a=ab;;b=a;") == parse_substitution(FIBONACCI)


def test_parse_file(tmp_path):
    path = tmp_path / "fib.txt"
    path.write_text("# Fibonacci\na=ab\nb=a\n")
    assert parse_substitution_file(path) == parse_substitution(FIBONACCI)


def test_roundtrip_text():
    s = parse_substitution(COBOUNDARY)
    assert parse_substitution(s.to_text()) == s


@pytest.mark.parametrize(
    "word, expected",
    [("", (0, 0)), ("aab", (2, 1)), ("bba", (1, 2))],
)
def test_abelianization(main_sub, word, expected):
    assert abelianization(main_sub.word(word), 2) == expected


@pytest.mark.parametrize(
    "text, matrix",
    [
        (MAIN, [[2, 1], [1, 2]]),
        (FIBONACCI, [[1, 1], [1, 0]]),
        (COBOUNDARY, [[1, 1, 0, 1], [1, 0, 0, 0], [0, 1, 1, 1], [0, 0, 1, 0]]),
    ],
)
def test_theta_matrix(text, matrix):
    assert theta_matrix(parse_substitution(text)).tolist() == matrix


@pytest.mark.parametrize(
    "text, expected",
    [(MAIN, (True, 1)), ("a=ab;b=b", (False, None)), (FIBONACCI, (True, 2))],
)
def test_is_primitive(text, expected):
    assert is_primitive(theta_matrix(parse_substitution(text))) == expected


def _boolean_fixpoint_primitive(M):
    """Oracle: iterate the positivity pattern until it repeats."""
    B = (M > 0).astype(int)
    seen = []
    P = B.copy()
    for k in range(1, 200):
        if P.all():
            return True, k
        key = P.tobytes()
        if key in seen:
            return False, None
        seen.append(key)
        P = ((P @ B) > 0).astype(int)
    return False, None


@settings(max_examples=80, deadline=None)
@given(st.lists(st.lists(st.integers(0, 2), min_size=3, max_size=3), min_size=3, max_size=3))
def test_primitivity_matches_boolean_oracle(rows):
    M = np.array(rows)
    assert is_primitive(M) == _boolean_fixpoint_primitive(M)


@pytest.mark.parametrize(
    "text, seed",
    [(MAIN, (0, 1)), ("a=ba;b=ab", (0, 2)), (FIBONACCI, (0, 1))],
)
def test_find_seed(text, seed):
    assert find_seed(parse_substitution(text)) == seed


def test_find_seed_rejects_non_growing():
    with pytest.raises(SubstitutionError):
        find_seed(parse_substitution("a=a"))


@pytest.mark.parametrize(
    "text, N, expected",
    [(MAIN, 9, "aabaabbba"), (FIBONACCI, 8, "abaababa"), (MAIN, 1, "a")],
)
def test_fixed_point_prefix(text, N, expected):
    s = parse_substitution(text)
    a, k = find_seed(s)
    assert s.show(fixed_point_prefix(s, a, k, N)) == expected


def test_seed_with_period_two():
    s = parse_substitution("a=ba;b=ab")
    w = fixed_point_prefix(s, 0, 2, 16)
    assert tuple(w) == s.power((0,), 4)[:16]


@pytest.mark.parametrize("text", [MAIN, FIBONACCI, COBOUNDARY, "a=ba;b=ab"])
def test_prefix_stability_and_lazy_stream(text):
    s = parse_substitution(text)
    a, k = find_seed(s)
    long = fixed_point_prefix(s, a, k, 500)
    assert np.array_equal(fixed_point_prefix(s, a, k, 123), long[:123])
    stream = iter_fixed_point(s, a, k)
    assert [next(stream) for _ in range(500)] == long.tolist()


def test_expand_prefix_matches_power(main_sub):
    w = main_sub.word("ba")
    assert tuple(expand_prefix(main_sub, w, 3, 40)) == main_sub.power(w, 3)[:40]


@pytest.mark.parametrize(
    "f, word, expected",
    [
        ([1, -1], "aab", [1, 2, 1]),
        ([0, 0], "aab", [0, 0, 0]),
        ([1, -1], "aabaabbba", [1, 2, 1, 2, 3, 2, 1, 0, 1]),
    ],
)
def test_birkhoff_partial_sums(main_sub, f, word, expected):
    assert birkhoff_partial_sums(f, main_sub.word(word)).tolist() == expected


def test_birkhoff_exact_fractions(main_sub):
    out = birkhoff_partial_sums([Fraction(1, 2), Fraction(-1, 3)], main_sub.word("ab"))
    assert list(out) == [Fraction(1, 2), Fraction(1, 6)]


def test_column_sums_are_rule_lengths(cob_sub):
    M = theta_matrix(cob_sub)
    assert M.sum(axis=0).tolist() == [len(w) for w in cob_sub.rules]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 3), max_size=12))
def test_incidence_is_linear(word):
    s = parse_substitution(COBOUNDARY)
    M = theta_matrix(s)
    lhs = abelianization(s.apply(word), 4)
    rhs = tuple(M @ np.array(abelianization(word, 4)))
    assert lhs == rhs


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=6), st.integers(1, 3))
def test_renormalization_identity_exact(word, k):
    s = parse_substitution(COBOUNDARY)
    for f, lam in (([-1, 0, 1, 0], 1), ([-1, 2, -1, 2], -1), ([1, -1, -1, 1], 0)):
        assert birkhoff_sum(f, s.power(word, k)) == lam**k * birkhoff_sum(f, word)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=6), st.integers(1, 8))
def test_renormalization_identity_float(word, k):
    alpha = (5**0.5 - 1) / 2
    s = parse_substitution(FIBONACCI)
    f = [alpha - 1, alpha]
    lhs = birkhoff_sum(f, s.power(word, k))
    rhs = (-alpha) ** k * birkhoff_sum(f, word)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))
