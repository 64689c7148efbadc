"""Small exact-arithmetic kernels over the rationals.

Matrices here are at most a few dozen rows, so plain Gauss-Jordan on
``Fraction`` entries is fast enough and keeps every result exact.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd, isqrt
from numbers import Rational
from typing import Sequence

Vector = tuple
Rows = list


def is_rational(x) -> bool:
    return isinstance(x, (int, Rational)) and not isinstance(x, bool)


def all_rational(values) -> bool:
    return all(is_rational(v) for v in values)


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if is_rational(x):
        return Fraction(x)
    raise TypeError(f"not a rational value: {x!r}")


def fraction_str(x) -> str:
    """Serialize a rational as ``"num/den"`` (or ``"num"`` when integral)."""
    x = to_fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def parse_scalar(text: str):
    """Parse ``"3"``, ``"-1/2"``, ``"0.25"`` or ``"1+2j"``.

    Integers and ``p/q`` forms stay exact; anything else becomes a float or
    complex.
    """
    text = text.strip()
    try:
        return Fraction(text) if "." not in text and "e" not in text.lower() else float(text)
    except ValueError:
        return complex(text.replace(" ", ""))


def rref(rows: Sequence[Sequence]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form and pivot columns."""
    A = [[to_fraction(x) for x in row] for row in rows]
    if not A:
        return A, []
    n_rows, n_cols = len(A), len(A[0])
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        piv = next((i for i in range(r, n_rows) if A[i][c] != 0), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        inv = 1 / A[r][c]
        A[r] = [x * inv for x in A[r]]
        for i in range(n_rows):
            if i != r and A[i][c] != 0:
                factor = A[i][c]
                A[i] = [a - factor * b for a, b in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
    return A, pivots


def rank(rows: Sequence[Sequence]) -> int:
    return len(rref(rows)[1])


def nullspace(rows: Sequence[Sequence], n_cols: int | None = None) -> list[tuple[Fraction, ...]]:
    """Basis of ``{x : A x = 0}``, one vector per free column."""
    if n_cols is None:
        n_cols = len(rows[0])
    R, pivots = rref(rows) if rows else ([], [])
    free = [c for c in range(n_cols) if c not in pivots]
    basis = []
    for fc in free:
        x = [Fraction(0)] * n_cols
        x[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            x[pc] = -R[i][fc]
        basis.append(tuple(x))
    return basis


def solve(rows: Sequence[Sequence], rhs: Sequence) -> tuple[Fraction, ...] | None:
    """One solution of ``A x = b`` (free variables set to zero), or ``None``.

    ``A`` may be rectangular; ``None`` signals an inconsistent system.
    """
    n_cols = len(rows[0])
    aug = [list(row) + [b] for row, b in zip(rows, rhs)]
    R, pivots = rref(aug)
    if n_cols in pivots:
        return None
    x = [Fraction(0)] * n_cols
    for i, pc in enumerate(pivots):
        x[pc] = R[i][n_cols]
    return tuple(x)


def matmul(A: Sequence[Sequence], B: Sequence[Sequence]) -> list[list]:
    Bt = list(zip(*B))
    return [[sum(a * b for a, b in zip(row, col)) for col in Bt] for row in A]


def vecmat(v: Sequence, A: Sequence[Sequence]) -> list:
    return [sum(v[i] * A[i][j] for i in range(len(v))) for j in range(len(A[0]))]


def matvec(A: Sequence[Sequence], v: Sequence) -> list:
    return [sum(a * x for a, x in zip(row, v)) for row in A]


# --- polynomials, highest degree first -------------------------------------

def poly_eval(coeffs: Sequence, x):
    acc = 0 * x
    for c in coeffs:
        acc = acc * x + c
    return acc


def poly_trim(p: Sequence) -> list:
    p = list(p)
    while len(p) > 1 and p[0] == 0:
        p.pop(0)
    return p


def poly_divmod(num: Sequence, den: Sequence) -> tuple[list[Fraction], list[Fraction]]:
    num = [to_fraction(c) for c in poly_trim(num)]
    den = [to_fraction(c) for c in poly_trim(den)]
    if den == [0]:
        raise ZeroDivisionError("polynomial division by zero")
    if len(num) < len(den):
        return [Fraction(0)], num
    q = []
    rem = list(num)
    while len(rem) >= len(den):
        c = rem[0] / den[0]
        q.append(c)
        for i in range(len(den)):
            rem[i] -= c * den[i]
        rem.pop(0)
    return q, poly_trim(rem) if rem else [Fraction(0)]


def poly_deriv(p: Sequence) -> list:
    n = len(p) - 1
    if n == 0:
        return [0]
    return [c * (n - i) for i, c in enumerate(p[:-1])]


def poly_monic(p: Sequence) -> list[Fraction]:
    p = [to_fraction(c) for c in poly_trim(p)]
    return [c / p[0] for c in p]


def poly_gcd(a: Sequence, b: Sequence) -> list[Fraction]:
    a, b = poly_trim(a), poly_trim(b)
    while b != [0] and any(c != 0 for c in b):
        _, r = poly_divmod(a, b)
        a, b = b, r
    return poly_monic(a)


def poly_sub(a: Sequence, b: Sequence) -> list:
    n = max(len(a), len(b))
    a, b = _pad(a, n), _pad(b, n)
    return poly_trim([x - y for x, y in zip(a, b)])


def _pad(p: Sequence, n: int) -> list:
    p = list(p)
    return [0] * (n - len(p)) + p


def _is_zero(p: Sequence) -> bool:
    return all(c == 0 for c in p)


def squarefree_decomposition(p: Sequence) -> list[tuple[list[Fraction], int]]:
    """Yun's algorithm: ``p = lc * prod f_i**i`` with ``f_i`` squarefree and coprime."""
    p = poly_monic(p)
    if len(p) == 1:
        return []
    dp = poly_deriv(p)
    a = poly_gcd(p, dp)
    b, _ = poly_divmod(p, a)
    c, _ = poly_divmod(dp, a)
    d = poly_sub(c, poly_deriv(b))
    out = []
    i = 1
    while len(b) > 1:
        a = poly_gcd(b, d) if not _is_zero(d) else poly_monic(b)
        if len(a) > 1:
            out.append((a, i))
        b, _ = poly_divmod(b, a)
        c, _ = poly_divmod(d, a) if not _is_zero(d) else ([Fraction(0)], None)
        d = poly_sub(c, poly_deriv(b))
        i += 1
    return out


def _divisors(n: int) -> list[int]:
    n = abs(n)
    small, large = [], []
    for d in range(1, isqrt(n) + 1):
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
    return small + large[::-1]


def rational_roots(int_coeffs: Sequence[int]) -> tuple[list[tuple[Fraction, int]], list[Fraction]]:
    """Rational roots with multiplicity, by the rational-root test.

    Returns the roots and the exactly deflated cofactor (highest degree
    first). Zero roots are split off before the divisor search.
    """
    p = [to_fraction(c) for c in poly_trim(int_coeffs)]
    roots: list[tuple[Fraction, int]] = []
    zero_mult = 0
    while len(p) > 1 and p[-1] == 0:
        p.pop()
        zero_mult += 1
    if zero_mult:
        roots.append((Fraction(0), zero_mult))
    if len(p) == 1:
        return roots, p
    # clear denominators so the test applies to integer coefficients
    lcm = 1
    for c in p:
        lcm = lcm * c.denominator // gcd(lcm, c.denominator)
    ints = [int(c * lcm) for c in p]
    candidates = set()
    for num in _divisors(ints[-1]):
        for den in _divisors(ints[0]):
            candidates.add(Fraction(num, den))
            candidates.add(Fraction(-num, den))
    for r in sorted(candidates, reverse=True):
        mult = 0
        while len(p) > 1 and poly_eval(p, r) == 0:
            p, _ = poly_divmod(p, [1, -r])
            mult += 1
        if mult:
            roots.append((r, mult))
    return roots, p
