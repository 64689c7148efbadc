"""Eigenstructure of a θ-matrix.

Rational eigenvalues are found exactly (rational-root test and exact
deflation of the integer characteristic polynomial); the remaining roots
come from ``numpy.roots`` on each squarefree factor followed by a few
Newton steps. Eigenvectors of rational eigenvalues are exact ``Fraction``
nullspace bases, otherwise they come from an SVD with a relative rank
tolerance.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _exact as ex
from .substitution import Substitution, is_primitive, theta_matrix

__all__ = [
    "CharPoly",
    "EigenPair",
    "EigenClass",
    "PFData",
    "SpectralReport",
    "RootFindingError",
    "NotPrimitiveError",
    "characteristic_polynomial",
    "eigen_decompose",
    "pf_data",
    "classify_eigenvalue",
    "spectral_report",
]

DEFAULT_TOL = 1e-9


class RootFindingError(RuntimeError):
    """A polynomial root could not be polished to the required residual."""


class NotPrimitiveError(ValueError):
    pass


@dataclass(frozen=True)
class CharPoly:
    """Monic integer characteristic polynomial, highest degree first."""

    coefficients: tuple[int, ...]

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, t):
        return ex.poly_eval(self.coefficients, t)

    def __str__(self) -> str:
        terms = []
        d = self.degree
        for i, c in enumerate(self.coefficients):
            if c == 0:
                continue
            p = d - i
            mag = abs(c)
            body = ("" if mag == 1 and p > 0 else str(mag)) + ("t" if p >= 1 else "") + (f"^{p}" if p > 1 else "")
            sign = "-" if c < 0 else "+"
            terms.append((sign, body))
        if not terms:
            return "0"
        out = ("-" if terms[0][0] == "-" else "") + terms[0][1]
        for sign, body in terms[1:]:
            out += f" {sign} {body}"
        return out


def characteristic_polynomial(M) -> CharPoly:
    """``det(tI - M)`` by the Faddeev-LeVerrier recurrence in exact integers.

    Examples
    --------
    >>> str(characteristic_polynomial([[2, 1], [1, 2]]))
    't^2 - 4t + 3'
    """
    A = [[int(x) for x in row] for row in np.asarray(M).tolist()]
    n = len(A)
    coeffs = [1]
    Mk = [[0] * n for _ in range(n)]  # M_0 = 0
    c = 1
    for k in range(1, n + 1):
        # M_k = A M_{k-1} + c_{n-k+1} I
        prod = ex.matmul(A, Mk) if k > 1 else [[0] * n for _ in range(n)]
        Mk = [[prod[i][j] + (c if i == j else 0) for j in range(n)] for i in range(n)]
        AM = ex.matmul(A, Mk)
        trace = sum(AM[i][i] for i in range(n))
        # c_{n-k} = -tr(A M_k) / k, always an exact integer
        num = -trace
        if num % k:
            raise ArithmeticError("non-integral Faddeev-LeVerrier step")
        c = num // k
        coeffs.append(c)
    return CharPoly(tuple(coeffs))


@dataclass
class EigenPair:
    """One eigenvalue with bases of its left and right eigenspaces.

    ``exact`` is true when the value and both bases are ``Fraction``
    objects. Vector normalization: first nonzero coordinate equal to one.
    """

    value: object
    left: list[tuple]
    right: list[tuple]
    alg_mult: int
    geo_mult: int
    exact: bool

    @property
    def exactness(self) -> str:
        return "rational-exact" if self.exact else "float"

    @property
    def modulus(self) -> float:
        return abs(complex(self.value))

    def to_dict(self) -> dict:
        v = complex(self.value)
        return {
            "value": self.value,
            "re": v.real,
            "im": v.imag,
            "alg_mult": self.alg_mult,
            "geo_mult": self.geo_mult,
            "exactness": self.exactness,
            "left": self.left,
            "right": self.right,
        }


def _normalize_first(v: Sequence) -> tuple:
    if isinstance(v, np.ndarray):
        v = [complex(x) for x in v]
        pivot = next((x for x in v if abs(x) > 1e-12), 1.0)
        return tuple(x / pivot for x in v)
    for x in v:
        if x != 0:
            return tuple(y / x for y in v)
    return tuple(v)


def _float_nullspace(A: np.ndarray, tol: float) -> list[np.ndarray]:
    _, s, vh = np.linalg.svd(A)
    rank = int(np.sum(s > tol))
    return [vh[i].conj() for i in range(rank, A.shape[1])]


def _clean(x: complex, scale: float = 1.0):
    """Drop a numerically zero imaginary part."""
    x = complex(x)
    if abs(x.imag) <= 1e-14 * max(1.0, scale):
        return float(x.real)
    return x


def _newton(coeffs: Sequence[float], z: complex, steps: int = 8) -> complex:
    p = np.asarray(coeffs, dtype=complex)
    dp = np.polyder(p)
    for _ in range(steps):
        fz = np.polyval(p, z)
        d = np.polyval(dp, z)
        if d == 0 or fz == 0:
            break
        step = fz / d
        z = z - step
        if abs(step) <= 1e-16 * max(1.0, abs(z)):
            break
    return z


def eigen_decompose(M, tol: float = DEFAULT_TOL) -> list[EigenPair]:
    """All eigenvalues with multiplicities and eigenvector bases.

    Eigenpairs are ordered by decreasing modulus, then by decreasing real
    part and imaginary part.

    Raises
    ------
    RootFindingError
        If a float root cannot be polished to the residual
        ``|p(z)| <= 1e-10 (1 + |z|)**deg``.
    """
    A = np.asarray(M)
    n = A.shape[0]
    rows = [[int(x) for x in row] for row in A.tolist()]
    cp = characteristic_polynomial(A)
    rational, cofactor = ex.rational_roots(cp.coefficients)
    pairs: list[EigenPair] = []

    for r, mult in rational:
        shifted = [[rows[i][j] - (r if i == j else 0) for j in range(n)] for i in range(n)]
        right = [_normalize_first(v) for v in ex.nullspace(shifted)]
        left = [_normalize_first(v) for v in ex.nullspace([list(c) for c in zip(*shifted)])]
        pairs.append(EigenPair(r, left, right, mult, len(right), True))

    if len(cofactor) > 1:
        norm = max(1.0, float(np.linalg.norm(A.astype(float), 2)))
        for factor, mult in ex.squarefree_decomposition(cofactor):
            fl = [float(c) for c in factor]
            for z in np.roots(fl):
                z = _newton(fl, complex(z))
                resid = abs(complex(cp(complex(z))))
                if resid > 1e-10 * (1 + abs(z)) ** cp.degree:
                    raise RootFindingError(f"root {z} has residual {resid:.3e}")
                z = _clean(z, abs(z))
                shifted = A.astype(complex) - z * np.eye(n)
                right = [_normalize_first(v) for v in _float_nullspace(shifted, tol * norm)]
                left = [_normalize_first(v) for v in _float_nullspace(shifted.T, tol * norm)]
                if isinstance(z, float):
                    right = [tuple(float(x.real) for x in v) for v in right]
                    left = [tuple(float(x.real) for x in v) for v in left]
                pairs.append(EigenPair(z, left, right, mult, len(right), False))

    pairs.sort(key=lambda e: (-round(e.modulus, 12), -round(complex(e.value).real, 12), -round(complex(e.value).imag, 12)))
    return pairs


@dataclass
class PFData:
    """Perron-Frobenius data ``(λ, σ, ρ)`` with ``Σ σ(a) ρ(a) = 1``."""

    lam: object
    sigma: tuple
    rho: tuple
    exact: bool

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "sigma": self.sigma, "rho": self.rho, "exact": self.exact}


def pf_data(M, tol: float = DEFAULT_TOL, pairs: list[EigenPair] | None = None) -> PFData:
    """Perron-Frobenius eigenvalue and positive eigenvectors of a primitive ``M``.

    In the exact regime σ keeps the first-coordinate-one convention; with
    an irrational λ it is scaled to unit l1 norm. ρ is then scaled so that
    ``Σ σ ρ = 1``.
    """
    ok, _ = is_primitive(M)
    if not ok:
        raise NotPrimitiveError("matrix is not primitive")
    if pairs is None:
        pairs = eigen_decompose(M, tol)
    pf = max(pairs, key=lambda e: complex(e.value).real if complex(e.value).imag == 0 else -np.inf)
    if pf.alg_mult != 1:
        raise NotPrimitiveError("Perron-Frobenius eigenvalue is not simple")
    sigma, rho = pf.left[0], pf.right[0]
    if pf.exact:
        # first-coordinate normalization already makes σ positive for primitive M
        pairing = sum(s * r for s, r in zip(sigma, rho))
        rho = tuple(r / pairing for r in rho)
    else:
        sigma = np.abs(np.asarray(sigma, dtype=float))
        rho = np.abs(np.asarray(rho, dtype=float))
        sigma = sigma / sigma.sum()
        rho = rho / float(sigma @ rho)
        sigma, rho = tuple(float(x) for x in sigma), tuple(float(x) for x in rho)
    if any(x <= 0 for x in sigma) or any(x <= 0 for x in rho):
        raise NotPrimitiveError("Perron-Frobenius vectors are not strictly positive")
    return PFData(pf.value, tuple(sigma), tuple(rho), pf.exact)


class EigenClass(str, enum.Enum):
    PF = "pf"
    LT1 = "modulus_lt_1"
    EQ1_REAL1 = "modulus_eq_1_real_1"
    EQ1_OTHER = "modulus_eq_1_other"
    GT1 = "modulus_gt_1"


def classify_eigenvalue(value, lam, tol: float = DEFAULT_TOL) -> EigenClass:
    """Place an eigenvalue relative to the unit circle and the PF value.

    Exact comparisons are used when both arguments are rational.
    """
    if ex.is_rational(value) and ex.is_rational(lam):
        v, L = Fraction(value), Fraction(lam)
        if v == L:
            return EigenClass.PF
        if v == 1:
            return EigenClass.EQ1_REAL1
        if v == -1:
            return EigenClass.EQ1_OTHER
        return EigenClass.LT1 if abs(v) < 1 else EigenClass.GT1
    z = complex(value)
    near_one = abs(abs(z) - 1) <= tol
    near_pf = abs(z - complex(lam)) <= tol
    if near_one and near_pf:
        raise ValueError(f"eigenvalue {z} is within tolerance of both 1 and the PF value")
    if near_pf:
        return EigenClass.PF
    if near_one:
        return EigenClass.EQ1_REAL1 if abs(z - 1) <= tol else EigenClass.EQ1_OTHER
    return EigenClass.LT1 if abs(z) < 1 else EigenClass.GT1


@dataclass
class SpectralReport:
    substitution: str
    matrix: list[list[int]]
    primitive: bool
    primitivity_exponent: int | None
    charpoly: CharPoly
    eigenpairs: list[EigenPair]
    classes: list[EigenClass]
    pf: PFData | None
    tol: float = DEFAULT_TOL
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "substitution": self.substitution,
            "matrix": self.matrix,
            "primitive": self.primitive,
            "primitivity_exponent": self.primitivity_exponent,
            "charpoly": list(self.charpoly.coefficients),
            "charpoly_text": str(self.charpoly),
            "eigenvalues": [dict(e.to_dict(), **{"class": c.value}) for e, c in zip(self.eigenpairs, self.classes)],
            "pf": self.pf.to_dict() if self.pf else None,
            "tol": self.tol,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        from ._json import dumps

        return dumps(self.to_dict())


def spectral_report(s: Substitution, tol: float = DEFAULT_TOL) -> SpectralReport:
    M = theta_matrix(s)
    primitive, k = is_primitive(M)
    pairs = eigen_decompose(M, tol)
    pf = pf_data(M, tol, pairs) if primitive else None
    lam = pf.lam if pf else max(e.modulus for e in pairs)
    classes = [classify_eigenvalue(e.value, lam, tol) for e in pairs]
    return SpectralReport(s.to_text(), M.tolist(), primitive, k, characteristic_polynomial(M), pairs, classes, pf, tol)
