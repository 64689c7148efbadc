"""Coboundary decisions, CLT variances and the bounded-discrepancy verdict.

For a left eigenvector ``f`` of the θ-matrix with ``|λ_f| = 1`` the
Birkhoff sums along the fixed point stay bounded exactly when a function
``h`` on the alphabet solves

    S_f(θ(a)_{<j}) = drift + h(a) - λ_f^{-1} h(θ(a)_j)    for all (a, j).

Otherwise the sums satisfy a CLT whose variance comes from the Poisson
equation ``(I - λ_f P) h = g`` of the path chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _exact as ex
from .measures import MarkovModel, drift, markov_model
from .path_space import build_state_space, prefix_sums_table
from .spectral import DEFAULT_TOL, EigenClass, spectral_report
from .substitution import Substitution, theta_matrix

__all__ = [
    "CoboundaryCertificate",
    "VarianceReport",
    "DiscrepancyVerdict",
    "NotEigenfunctionError",
    "solve_coboundary",
    "check_condition_iv",
    "clt_variance",
    "variance_series",
    "classify_discrepancy",
]

RESIDUAL_TOL = 1e-10


class NotEigenfunctionError(ValueError):
    pass


def _is_exact(values) -> bool:
    return ex.all_rational(values)


def _check_eigen(s: Substitution, f: Sequence, lambda_f, require_unit: bool = True):
    M = theta_matrix(s)
    n = s.size
    fM = [sum(f[a] * int(M[a, b]) for a in range(n)) for b in range(n)]
    scale = max(1.0, max(abs(complex(x)) for x in f))
    resid = max(abs(complex(fM[b] - lambda_f * f[b])) for b in range(n)) / scale
    if _is_exact(list(f) + [lambda_f]):
        if resid != 0:
            raise NotEigenfunctionError(f"f is not a left eigenvector for λ_f={lambda_f}")
        if require_unit and abs(Fraction(lambda_f)) != 1:
            raise NotEigenfunctionError("|λ_f| must equal 1")
        return
    if resid > 1e-9:
        raise NotEigenfunctionError(f"f is not a left eigenvector (residual {resid:.3e})")
    if require_unit and abs(abs(complex(lambda_f)) - 1) > DEFAULT_TOL:
        raise NotEigenfunctionError("|λ_f| must equal 1")


def _inverse(x):
    return 1 / Fraction(x) if ex.is_rational(x) else 1 / x


def _is_one(x) -> bool:
    if ex.is_rational(x):
        return x == 1
    return abs(complex(x) - 1) <= DEFAULT_TOL


@dataclass
class CoboundaryCertificate:
    """Outcome of the linear coboundary test.

    ``h`` is normalized by ``h(first letter) = 0`` when ``λ_f = 1`` (the
    solution is then unique up to constants); for other unimodular ``λ_f``
    the solution is unique when it exists.
    """

    is_coboundary: bool
    h: tuple | None
    residual: float
    drift_used: object
    lambda_f: object
    exact: bool
    drift_forced_zero: bool | None = None
    condition_iv: dict | None = None
    normalization: str = ""

    def birkhoff_bound(self) -> float:
        """Bound on ``|S_f(u_{<N})|`` from the telescoping form of the certificate."""
        if not self.is_coboundary:
            return float("inf")
        hmax = max(abs(complex(x)) for x in self.h)
        bound = 2 * hmax
        if not _is_one(self.lambda_f):
            bound += 2 * abs(complex(self.drift_used)) / abs(1 - complex(self.lambda_f))
        return bound

    def to_dict(self) -> dict:
        return {
            "is_coboundary": self.is_coboundary,
            "h": self.h,
            "residual": self.residual,
            "drift": self.drift_used,
            "lambda_f": self.lambda_f,
            "exact": self.exact,
            "drift_forced_zero": self.drift_forced_zero,
            "condition_iv": self.condition_iv,
            "normalization": self.normalization,
        }


def _coboundary_system(s: Substitution, f: Sequence, lambda_f, drift_value):
    n = s.size
    fcheck = prefix_sums_table(s, f)
    inv = _inverse(lambda_f)
    rows, rhs = [], []
    for (a, j) in build_state_space(s):
        row = [0] * n
        row[a] += 1
        row[s.rules[a][j - 1]] -= inv
        rows.append(row)
        rhs.append(fcheck[(a, j)] - drift_value)
    return rows, rhs


def solve_coboundary(s: Substitution, f: Sequence, lambda_f, drift_value=None, model: MarkovModel | None = None) -> CoboundaryCertificate:
    """Decide whether ``f`` is an eigenfunction coboundary.

    Parameters
    ----------
    drift_value
        Defaults to the drift functional evaluated at ``f``.

    Raises
    ------
    NotEigenfunctionError
        If ``f`` is not a left eigenvector for ``λ_f`` or ``|λ_f| != 1``.
    """
    _check_eigen(s, f, lambda_f)
    if drift_value is None:
        model = model or markov_model(s)
        drift_value = drift(s, f, model.lifted)
    exact = _is_exact(list(f) + [lambda_f, drift_value])
    rows, rhs = _coboundary_system(s, f, lambda_f, drift_value)
    if exact:
        sol = ex.solve(rows, rhs)
        if sol is None:
            return CoboundaryCertificate(False, None, float("inf"), drift_value, lambda_f, True)
        h = list(sol)
        residual = 0.0
    else:
        A = np.array([[complex(x) for x in r] for r in rows])
        b = np.array([complex(x) for x in rhs])
        sol, *_ = np.linalg.lstsq(A, b, rcond=None)
        residual = float(np.max(np.abs(A @ sol - b)))
        if residual > RESIDUAL_TOL:
            return CoboundaryCertificate(False, None, residual, drift_value, lambda_f, False)
        h = [complex(x) for x in sol]
    normalization = "unique solution"
    if _is_one(lambda_f):
        h = [x - h[0] for x in h]
        normalization = "h(first letter) = 0"
    if not exact:
        h = [float(x.real) if abs(x.imag) <= 1e-13 else x for x in h]
    cert = CoboundaryCertificate(True, tuple(h), residual, drift_value, lambda_f, exact, normalization=normalization)
    if _is_one(lambda_f):
        cert.drift_forced_zero = (drift_value == 0) if exact else abs(complex(drift_value)) <= 1e-10
    cert.condition_iv = check_condition_iv(s, f, lambda_f, drift_value, h)
    return cert


def check_condition_iv(s: Substitution, f: Sequence, lambda_f, drift_value, h: Sequence) -> dict:
    """Residuals of the letterwise form of the certificate.

    (a) ``f(θ(a)_j) = λ_f^{-1}(h(θ(a)_j) - h(θ(a)_{j+1}))`` for ``j < |θ(a)|``;
    (b) ``drift + h(a) - λ_f^{-1} h(θ(a)_1) = 0``.
    """
    inv = _inverse(lambda_f)
    res_a = 0.0
    res_b = 0.0
    for a, word in enumerate(s.rules):
        for j in range(len(word) - 1):
            lhs = f[word[j]]
            rhs = inv * (h[word[j]] - h[word[j + 1]])
            res_a = max(res_a, abs(complex(lhs - rhs)))
        res_b = max(res_b, abs(complex(drift_value + h[a] - inv * h[word[0]])))
    return {"a_residual": res_a, "b_residual": res_b, "holds": max(res_a, res_b) <= RESIDUAL_TOL}


# --- variance --------------------------------------------------------------

@dataclass
class VarianceReport:
    """Limit variance data of ``Z_f``.

    ``gamma`` is the covariance matrix of ``(Re Z, Im Z)``.
    """

    E_abs_Z2: object
    E_Z2: object
    h_on_X: dict
    gamma: list
    drift: object
    exact: bool
    series_value: float | None = None
    series_terms: int | None = None
    series_literal_value: float | None = None
    increment_variance: object = None

    def to_dict(self) -> dict:
        return {
            "E_abs_Z2": self.E_abs_Z2,
            "E_Z2": self.E_Z2,
            "h_on_X": [[list(k), v] for k, v in self.h_on_X.items()],
            "gamma": self.gamma,
            "drift": self.drift,
            "exact": self.exact,
            "series_value": self.series_value,
            "series_terms": self.series_terms,
            "series_literal_value": self.series_literal_value,
        }


def _poisson_solve(P: list[list], m: Sequence, g: Sequence, lam, exact: bool):
    """Solve ``(I - λP) h = g``; for ``λ = 1`` impose ``Σ m h = 0``."""
    n = len(g)
    A = [[(1 if i == j else 0) - lam * P[i][j] for j in range(n)] for i in range(n)]
    rhs = list(g)
    if _is_one(lam):
        A.append(list(m))
        rhs.append(0)
    if exact:
        sol = ex.solve(A, rhs)
        if sol is None:
            raise ArithmeticError("Poisson equation is singular (is g centered?)")
        return list(sol)
    Af = np.array([[complex(x) for x in r] for r in A])
    bf = np.array([complex(x) for x in rhs])
    sol, *_ = np.linalg.lstsq(Af, bf, rcond=None)
    if np.max(np.abs(Af @ sol - bf)) > 1e-9 * max(1.0, float(np.max(np.abs(bf)))):
        raise ArithmeticError("Poisson equation is singular (is g centered?)")
    return [complex(x) for x in sol]


def variance_series(P: np.ndarray, m: np.ndarray, g: np.ndarray, lam: complex, cutoff: float = 1e-13, max_terms: int = 100_000, literal: bool = False) -> tuple[float, int]:
    """``E|g(X_1)|^2 + Σ_{k>=1} 2 Re(conj(λ)^k E[g(X_1) conj g(X_{k+1})])``.

    ``literal=True`` uses ``λ^k`` in place of ``conj(λ)^k``; the two agree
    for real ``λ``. Summation stops once three consecutive summands fall
    below ``cutoff``.
    """
    total = float(np.sum(m * np.abs(g) ** 2))
    Pkg = g.astype(complex)
    small = 0
    k = 0
    w = lam if literal else np.conj(lam)
    for k in range(1, max_terms + 1):
        Pkg = P @ Pkg
        term = 2 * (w ** k * np.sum(m * g * np.conj(Pkg))).real
        total += term
        small = small + 1 if abs(term) < cutoff else 0
        if small >= 3:
            break
    return total, k


def clt_variance(s: Substitution, f: Sequence, lambda_f, model: MarkovModel | None = None, series: bool = True) -> VarianceReport:
    """Limit variance of the normalized Birkhoff sums of ``f``.

    With ``g = f̌ - ∫ f̌ d𝔪`` on the state space and the stationary path
    chain ``(𝔭, 𝔪)``, solves ``(I - λ_f P) h = g`` and returns
    ``E|Z|^2 = (h,h)_𝔪 - (Ph,Ph)_𝔪`` and
    ``E Z^2 = Σ 𝔪 h^2 - Σ 𝔪 (Ph)^2`` if ``λ_f^2 = 1`` (else 0).
    Exact when every input is rational.
    """
    _check_eigen(s, f, lambda_f)
    model = model or markov_model(s)
    X = model.states
    fcheck = prefix_sums_table(s, f)
    m = list(model.m)
    d = drift(s, f, model.lifted)
    g = [fcheck[x] - d for x in X]
    exact = model.exact and _is_exact(list(f) + [lambda_f])
    P = [list(r) for r in model.p.rows]
    if not exact:
        P = [[float(x) for x in r] for r in P]
        m = [float(x) for x in m]
        g = [complex(x) for x in g]
    h = _poisson_solve(P, m, g, lambda_f, exact)
    Ph = [sum(P[i][j] * h[j] for j in range(len(h))) for i in range(len(h))]

    def absq(z):
        return z * z if ex.is_rational(z) else abs(complex(z)) ** 2

    e_abs = sum(mi * absq(hi) for mi, hi in zip(m, h)) - sum(mi * absq(pi) for mi, pi in zip(m, Ph))
    lam2 = lambda_f * lambda_f
    if _is_one(lam2):
        e_sq = sum(mi * hi * hi for mi, hi in zip(m, h)) - sum(mi * pi * pi for mi, pi in zip(m, Ph))
    else:
        e_sq = 0
    if not exact:
        e_abs = float(e_abs)
        e_sq = complex(e_sq)
        if abs(e_sq.imag) <= 1e-15 and ex.is_rational(lambda_f) is False and abs(complex(lam2) - 1) <= DEFAULT_TOL:
            e_sq = e_sq.real
    re_sq = complex(e_sq).real
    im_sq = complex(e_sq).imag
    ea = float(e_abs)
    gamma = [[(ea + re_sq) / 2, im_sq / 2], [im_sq / 2, (ea - re_sq) / 2]]
    report = VarianceReport(e_abs, e_sq, dict(zip(X, h)), gamma, d, exact, increment_variance=e_abs)
    if series:
        Pa = np.array([[float(x) for x in r] for r in model.p.rows])
        ma = np.array([float(x) for x in model.m])
        ga = np.array([complex(x) for x in g])
        report.series_value, report.series_terms = variance_series(Pa, ma, ga, complex(lambda_f))
        report.series_literal_value, _ = variance_series(Pa, ma, ga, complex(lambda_f), literal=True)
    return report


# --- bounded discrepancy ---------------------------------------------------

@dataclass
class DiscrepancyVerdict:
    """Bounded-discrepancy verdict with its reasons.

    ``bounded`` checks the coboundary condition on every modulus-one
    eigenvalue; ``bounded_literal`` only on the eigenvalue 1.
    """

    bounded: bool
    bounded_literal: bool
    reasons: list[dict] = field(default_factory=list)
    conditions: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "bounded": self.bounded,
            "bounded_literal_reading": self.bounded_literal,
            "conditions": self.conditions,
            "reasons": self.reasons,
        }


def classify_discrepancy(s: Substitution, tol: float = DEFAULT_TOL, seed: int = 0) -> DiscrepancyVerdict:
    """Check the three spectral conditions for bounded discrepancy.

    1. every non-PF eigenvalue has modulus at most 1;
    2. geometric and algebraic multiplicities agree on the unit circle;
    3. every unit-modulus eigenfunction is a coboundary.

    Condition 3 is tested on each basis vector of each eigenspace and, for
    eigenspaces of dimension above one, on a random combination (seeded)
    as a basis-independence check.
    """
    rep = spectral_report(s, tol)
    if not rep.primitive:
        raise ValueError("substitution is not primitive")
    model = markov_model(s, rep.pf)
    rng = np.random.default_rng(seed)
    reasons = []
    c1 = c2 = True
    c3 = c3_literal = True
    for pair, cls in zip(rep.eigenpairs, rep.classes):
        entry = {"eigenvalue": pair.value, "class": cls.value, "alg_mult": pair.alg_mult, "geo_mult": pair.geo_mult}
        if cls == EigenClass.GT1:
            c1 = False
            entry["condition_1"] = False
        if cls in (EigenClass.EQ1_REAL1, EigenClass.EQ1_OTHER):
            ok2 = pair.geo_mult == pair.alg_mult
            entry["condition_2"] = ok2
            c2 &= ok2
            vectors = [list(v) for v in pair.left]
            if len(vectors) > 1:
                coeffs = rng.standard_normal(len(vectors))
                vectors.append([sum(c * v[i] for c, v in zip(coeffs, vectors)) for i in range(len(vectors[0]))])
            certs = []
            for v in vectors:
                cert = solve_coboundary(s, v, pair.value, model=model)
                certs.append(cert)
            all_cob = all(c.is_coboundary for c in certs)
            entry["coboundary"] = [c.to_dict() for c in certs]
            entry["condition_3"] = all_cob
            if len({c.is_coboundary for c in certs}) > 1:
                entry["basis_dependence_warning"] = True
            c3 &= all_cob
            if cls == EigenClass.EQ1_REAL1:
                c3_literal &= all_cob
        reasons.append(entry)
    conditions = {"1_moduli_le_1": c1, "2_semisimple_on_unit_circle": c2, "3_unit_modulus_coboundaries": c3, "3_literal_eigenvalue_one_coboundaries": c3_literal}
    return DiscrepancyVerdict(c1 and c2 and c3, c1 and c2 and c3_literal, reasons, conditions)
