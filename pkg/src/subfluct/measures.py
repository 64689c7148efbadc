"""Markov measures and kernels on the state space of a substitution.

Everything is exact (``Fraction``) when the Perron-Frobenius data is
rational and plain floats otherwise. Measures on finite path sets are
dictionaries ``path tuple -> weight``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .path_space import (
    State,
    build_state_space,
    depth_for,
    encode,
    iter_paths,
    prefix_sums_table,
    ssim_one,
    ssim_power,
)
from .spectral import PFData, pf_data
from .substitution import Substitution, theta_matrix

__all__ = [
    "LiftedPF",
    "Kernel",
    "MarkovModel",
    "EntranceLaw",
    "DegenerateEntranceLaw",
    "lift_pf",
    "limit_kernels",
    "markov_model",
    "h_kernel",
    "q_kernel",
    "finite_kernels",
    "nu_N",
    "nu_N_decomposition",
    "path_measure",
    "champm",
    "mpm",
    "upm",
    "all_paths",
    "push_forward",
    "drift",
    "drift_terms",
    "tv_distance",
    "sample_path",
    "sample_chains",
    "entrance_law_a",
]


@dataclass(frozen=True)
class LiftedPF:
    """``σ̂((b,k)) = σ(θ(b)_k)/λ`` and ``ρ̂((b,k)) = ρ(b)`` on the state space."""

    states: tuple[State, ...]
    sigma_hat: tuple
    rho_hat: tuple
    lam: object
    exact: bool

    def pairing(self):
        return sum(a * b for a, b in zip(self.sigma_hat, self.rho_hat))

    def rescaled(self, rho_total=1) -> "LiftedPF":
        """Rescale so ``Σ ρ̂ = rho_total`` while keeping ``Σ σ̂ ρ̂`` fixed."""
        c = rho_total / sum(self.rho_hat)
        return LiftedPF(
            self.states,
            tuple(x / c for x in self.sigma_hat),
            tuple(x * c for x in self.rho_hat),
            self.lam,
            self.exact,
        )

    def to_dict(self) -> dict:
        return {"states": self.states, "sigma_hat": self.sigma_hat, "rho_hat": self.rho_hat, "exact": self.exact}


def lift_pf(pf: PFData, s: Substitution) -> LiftedPF:
    """Lift PF vectors of ``M`` to the state space.

    Raises
    ------
    ValueError
        If the lifted pairing ``Σ σ̂ ρ̂`` is not 1 (exactly, or within 1e-12).
    """
    X = tuple(build_state_space(s))
    sig = tuple(pf.sigma[s.rules[b][k - 1]] / pf.lam for b, k in X)
    rho = tuple(pf.rho[b] for b, _k in X)
    lifted = LiftedPF(X, sig, rho, pf.lam, pf.exact)
    total = lifted.pairing()
    if (pf.exact and total != 1) or abs(total - 1) > 1e-12:
        raise ValueError(f"lifted pairing is {total}, expected 1")
    return lifted


@dataclass(frozen=True)
class Kernel:
    """Square transition matrix indexed by ``states``.

    ``dead`` lists rows that were left at zero because their normalizer
    vanished (a state unreachable at a given finite depth).
    """

    states: tuple[State, ...]
    rows: tuple[tuple, ...]
    exact: bool
    dead: tuple[int, ...] = ()

    def __getitem__(self, xz):
        x, z = xz
        idx = {s: i for i, s in enumerate(self.states)}
        return self.rows[idx[x]][idx[z]]

    def row_sums(self) -> list:
        return [sum(r) for r in self.rows]

    def as_array(self) -> np.ndarray:
        return np.array([[float(x) for x in r] for r in self.rows])

    def is_stochastic(self, tol: float = 1e-12) -> bool:
        for i, total in enumerate(self.row_sums()):
            if i in self.dead:
                continue
            if self.exact and total != 1:
                return False
            if abs(total - 1) > tol:
                return False
        return True

    def sup_gap(self, other: "Kernel") -> float:
        return float(np.max(np.abs(self.as_array() - other.as_array())))

    def to_dict(self) -> dict:
        return {"states": self.states, "rows": self.rows, "exact": self.exact, "dead_rows": self.dead}


def _vecmat(v: Sequence, rows: Sequence[Sequence]) -> list:
    n = len(rows[0])
    return [sum(v[i] * rows[i][j] for i in range(len(v))) for j in range(n)]


@dataclass(frozen=True)
class MarkovModel:
    """Limit chain data: forward kernel 𝔭, reversed kernel 𝔭*, invariant 𝔪, entrance law 𝔴."""

    substitution: Substitution
    pf: PFData
    lifted: LiftedPF
    p: Kernel
    p_star: Kernel
    m: tuple
    w: tuple
    checks: dict = field(default_factory=dict)

    @property
    def states(self) -> tuple[State, ...]:
        return self.lifted.states

    @property
    def exact(self) -> bool:
        return self.lifted.exact

    def to_dict(self) -> dict:
        return {
            "states": self.states,
            "lambda": self.pf.lam,
            "sigma_hat": self.lifted.sigma_hat,
            "rho_hat": self.lifted.rho_hat,
            "p": self.p.rows,
            "p_star": self.p_star.rows,
            "m": self.m,
            "w": self.w,
            "exact": self.exact,
            "checks": self.checks,
        }


def limit_kernels(s: Substitution, pf: PFData | None = None) -> tuple[Kernel, Kernel, tuple, tuple]:
    """``(𝔭, 𝔭*, 𝔪, 𝔴)``; see :func:`markov_model` for the verified bundle."""
    model = markov_model(s, pf)
    return model.p, model.p_star, model.m, model.w


def markov_model(s: Substitution, pf: PFData | None = None) -> MarkovModel:
    """Build and verify the limit kernels.

    Checks recorded in ``checks``: row sums, ``𝔪 𝔭 = 𝔪``, ``𝔪 𝔭* = 𝔪``
    and the adjoint relation ``𝔪(y) 𝔭(y,z) = 𝔪(z) 𝔭*(z,y)``. Each is
    exact in the rational regime and within 1e-12 otherwise; a failure
    raises ``ArithmeticError``.
    """
    if pf is None:
        pf = pf_data(theta_matrix(s))
    L = lift_pf(pf, s)
    X = L.states
    n = len(X)
    m1 = ssim_one(s)
    lam = pf.lam
    sh, rh = L.sigma_hat, L.rho_hat
    P = tuple(tuple(m1[y][z] * rh[z] / (lam * rh[y]) for z in range(n)) for y in range(n))
    Ps = tuple(tuple(sh[z] * m1[z][y] / (lam * sh[y]) for z in range(n)) for y in range(n))
    m = tuple(a * b for a, b in zip(sh, rh))
    total_rho = sum(rh)
    w = tuple(r / total_rho for r in rh)
    kp, kps = Kernel(X, P, pf.exact), Kernel(X, Ps, pf.exact)

    def gap(u, v):
        return max(abs(a - b) for a, b in zip(u, v))

    checks = {
        "p_stochastic": kp.is_stochastic(),
        "p_star_stochastic": kps.is_stochastic(),
        "m_invariant_gap": gap(_vecmat(m, P), m),
        "m_invariant_star_gap": gap(_vecmat(m, Ps), m),
        "adjoint_gap": max(abs(m[y] * P[y][z] - m[z] * Ps[z][y]) for y in range(n) for z in range(n)),
    }
    tol = 0 if pf.exact else 1e-12
    if not (checks["p_stochastic"] and checks["p_star_stochastic"]):
        raise ArithmeticError("limit kernels are not stochastic")
    for key in ("m_invariant_gap", "m_invariant_star_gap", "adjoint_gap"):
        if checks[key] > tol:
            raise ArithmeticError(f"{key} = {checks[key]}")
    return MarkovModel(s, pf, L, kp, kps, m, w, checks)


def h_kernel(s: Substitution, y: State, p: int) -> Kernel:
    """``h^y_p(x,z) = m1[x,z] m^{(p-2)}[z,y] / m^{(p-1)}[x,y]`` (exact)."""
    if p < 2:
        raise ValueError("h^y_p needs p >= 2")
    X = tuple(build_state_space(s))
    iy = X.index(tuple(y))
    m1 = ssim_one(s)
    mp2 = ssim_power(s, p - 2).entries
    mp1 = ssim_power(s, p - 1).entries
    rows, dead = [], []
    for ix in range(len(X)):
        den = mp1[ix][iy]
        if den == 0:
            rows.append(tuple(Fraction(0) for _ in X))
            dead.append(ix)
        else:
            rows.append(tuple(Fraction(m1[ix][iz] * mp2[iz][iy], den) for iz in range(len(X))))
    return Kernel(X, tuple(rows), True, tuple(dead))


def q_kernel(s: Substitution, p: int) -> Kernel:
    """``q_p(y,z) = m^{(p-2)}[*,z] m1[z,y] / m^{(p-1)}[*,y]`` (exact)."""
    if p < 2:
        raise ValueError("q_p needs p >= 2")
    X = tuple(build_state_space(s))
    m1 = ssim_one(s)
    star2 = ssim_power(s, p - 2).star_row
    star1 = ssim_power(s, p - 1).star_row
    rows, dead = [], []
    for iy in range(len(X)):
        den = star1[iy]
        if den == 0:
            rows.append(tuple(Fraction(0) for _ in X))
            dead.append(iy)
        else:
            rows.append(tuple(Fraction(star2[iz] * m1[iz][iy], den) for iz in range(len(X))))
    return Kernel(X, tuple(rows), True, tuple(dead))


def finite_kernels(s: Substitution, y: State, p: int) -> tuple[list[Kernel], list[Kernel]]:
    """``([h^y_p, ..., h^y_3], [q_p, ..., q_3])``, each verified row-stochastic."""
    if p < 3:
        raise ValueError("finite kernels need p >= 3")
    hs = [h_kernel(s, y, k) for k in range(p, 2, -1)]
    qs = [q_kernel(s, k) for k in range(p, 2, -1)]
    for K in hs + qs:
        if not K.is_stochastic():
            raise ArithmeticError("finite-depth kernel is not row-stochastic")
    return hs, qs


# --- measures on finite path sets -------------------------------------------

PathMeasure = dict


def all_paths(s: Substitution, p: int) -> list[tuple[State, ...]]:
    """Every consistent depth-``p`` path, grouped by top letter."""
    out = []
    for b in range(s.size):
        out.extend(iter_paths(s, b, p))
    return out


def nu_N(s: Substitution, a: int, N: int, p: int | None = None) -> PathMeasure:
    """Uniform law of the coding of ``n`` for ``n = 1..N``.

    The depth defaults to the least ``p >= 1`` with ``N <= |θ^p(a)|``.
    """
    if p is None:
        p = max(1, depth_for(s, a, N))
    w = Fraction(1, N)
    out: PathMeasure = {}
    for n, path in enumerate(iter_paths(s, a, p), start=1):
        if n > N:
            break
        out[path] = w
    if len(out) < N:
        raise ValueError(f"N={N} exceeds |θ^{p}(a)|")
    return out


def upm(s: Substitution, y: State, ell: int) -> PathMeasure:
    """Uniform law on depth-``ell`` paths whose top state is ``y``."""
    b, k = y
    c = s.rules[b][k - 1]
    lower = list(iter_paths(s, c, ell - 1))
    w = Fraction(1, len(lower))
    return {path + (tuple(y),): w for path in lower}


def nu_N_decomposition(s: Substitution, a: int, N: int, weights: str = "corrected") -> tuple[PathMeasure, Fraction]:
    """Rebuild ``ν_N`` from uniform measures on subtrees.

    Positions ``n < N`` are grouped by the most significant level ``l`` at
    which their digit ``(v_l, j)`` falls below the digit ``k_l`` of ``N``;
    each group is uniform over the ``m^{(l-1)}[*, (v_l, j)]`` completions
    below and shares the digits of ``N`` above. The atom at ``N`` itself
    closes the sum.

    ``weights="literal"`` uses ``m^{(l)}`` counts and drops the atom, for
    comparison; the returned total mass then differs from 1.

    Returns
    -------
    measure, total_mass
    """
    p = max(1, depth_for(s, a, N))
    top = encode(s, a, p, N).digits
    out: PathMeasure = {}
    total = Fraction(0)
    for l in range(1, p + 1):
        v, k = top[l - 1]
        upper = top[l:]
        for j in range(1, k):
            y = (v, j)
            comp = upm(s, y, l)
            if weights == "corrected":
                weight = Fraction(len(comp), N)
            else:
                weight = Fraction(ssim_power(s, l).star_row[build_state_space(s).index(y)], N)
            total += weight
            for path, pr in comp.items():
                full = path + upper
                out[full] = out.get(full, 0) + weight * pr
    if weights == "corrected":
        out[top] = out.get(top, 0) + Fraction(1, N)
        total += Fraction(1, N)
    return out, total


def path_measure(start: Sequence, kernel: Kernel, p: int, s: Substitution) -> PathMeasure:
    """``start(x_1) Π kernel(x_i, x_{i+1})`` on all depth-``p`` paths (zero atoms dropped)."""
    X = kernel.states
    idx = {x: i for i, x in enumerate(X)}
    out: PathMeasure = {}
    for path in all_paths(s, p):
        w = start[idx[path[0]]]
        for u, v in zip(path, path[1:]):
            if w == 0:
                break
            w = w * kernel.rows[idx[u]][idx[v]]
        if w != 0:
            out[path] = w
    return out


def champm(model: MarkovModel, p: int) -> PathMeasure:
    """Entrance-law chain: ``𝔴(x_1) Π 𝔭(x_i, x_{i+1})``."""
    return path_measure(model.w, model.p, p, model.substitution)


def mpm(model: MarkovModel, p: int) -> PathMeasure:
    """Stationary chain: ``𝔪(x_1) Π 𝔭(x_i, x_{i+1})``."""
    return path_measure(model.m, model.p, p, model.substitution)


def push_forward(mu: Mapping, keep: slice) -> PathMeasure:
    """Image of a path measure under ``path -> path[keep]``."""
    out: PathMeasure = {}
    for path, w in mu.items():
        key = tuple(path[keep])
        out[key] = out.get(key, 0) + w
    return out


def tv_distance(mu: Mapping, nu: Mapping):
    """``½ Σ |μ(x) - ν(x)|`` over the union of supports (exact for rationals)."""
    keys = set(mu) | set(nu)
    total = sum(abs(mu.get(k, 0) - nu.get(k, 0)) for k in keys)
    return total / 2


# --- drift -----------------------------------------------------------------

def drift_terms(s: Substitution, f: Sequence, lifted: LiftedPF) -> list[tuple[State, object, object]]:
    """Per-state ``(x, 𝔪(x), S_f(θ(a)_{<j}))`` entries of the drift functional."""
    fcheck = prefix_sums_table(s, f)
    return [(x, sh * rh, fcheck[x]) for x, sh, rh in zip(lifted.states, lifted.sigma_hat, lifted.rho_hat)]


def drift(s: Substitution, f: Sequence, lifted: LiftedPF):
    """``Σ_{(a,j)} 𝔪(a,j) S_f(θ(a)_{<j})`` (exact when inputs are rational).

    ``f`` need not be an eigenvector.
    """
    return sum(m * v for _x, m, v in drift_terms(s, f, lifted))


# --- sampling --------------------------------------------------------------

def _cdf_rows(kernel: Kernel) -> np.ndarray:
    A = kernel.as_array()
    C = np.cumsum(A, axis=1)
    C[:, -1] = np.where(A.sum(axis=1) > 0, 1.0, 0.0)
    return C


def sample_path(kernel: Kernel, start: Sequence, length: int, seed: int) -> list[State]:
    """One chain trajectory by inverse-CDF sampling in fixed state order."""
    idx = sample_chains(kernel, start, length, 1, seed)[0]
    return [kernel.states[i] for i in idx]


def sample_chains(kernel: Kernel, start: Sequence, length: int, n: int, seed: int) -> np.ndarray:
    """``n`` independent trajectories as an ``(n, length)`` array of state indices.

    Every trajectory consumes uniforms from one generator seeded with
    ``seed``, step by step across the batch, so the output depends only on
    ``(seed, n, length)``.
    """
    rng = np.random.default_rng(seed)
    start_cdf = np.cumsum(np.array([float(x) for x in start]))
    start_cdf[-1] = 1.0
    C = _cdf_rows(kernel)
    out = np.empty((n, length), dtype=np.int64)
    if length == 0:
        return out
    out[:, 0] = np.searchsorted(start_cdf, rng.random(n), side="right")
    for t in range(1, length):
        u = rng.random(n)
        rows = C[out[:, t - 1]]
        out[:, t] = (u[:, None] >= rows).sum(axis=1)
    return out


# --- entrance law for the reversed chain -----------------------------------

class DegenerateEntranceLaw(ValueError):
    pass


@dataclass(frozen=True)
class EntranceLaw:
    """Law of the first differing reversed digit.

    ``weights[(q, state)]`` is the probability that the reversed coding of
    a uniform position agrees with ``z`` on its first ``q - 1`` digits and
    has ``state = (ρ_q, j)`` with ``j < κ_q`` at digit ``q``. ``a`` is its
    state marginal. ``R = Σ_q Σ_{j<κ_q} σ̂(ρ_q, j) λ^{-q}`` with ``ρ̂``
    normalized to unit mass; ``R_literal`` uses the weights ``λ^{1-q}``.
    """

    a: tuple
    weights: dict
    R: float
    R_literal: float
    depth: int
    z_prefix: tuple[State, ...]

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "R": self.R,
            "R_literal": self.R_literal,
            "truncation_depth": self.depth,
            "first_digit_weights": [[q, x, w] for (q, x), w in sorted(self.weights.items())],
        }


def entrance_law_a(z: Iterable[State], lifted: LiftedPF, lam=None, tail: float = 1e-15, max_depth: int = 10_000) -> EntranceLaw:
    """Entrance law ``𝔞`` of the reversed chain along the reversed coding ``z``.

    The sum over ``q`` stops once ``λ^{-q}`` drops below ``tail`` times the
    first term.

    Raises
    ------
    DegenerateEntranceLaw
        If every ``κ_q`` equals 1 up to the truncation depth.
    """
    if lam is None:
        lam = lifted.lam
    L = lifted.rescaled(1)
    lamf = float(lam)
    idx = {x: i for i, x in enumerate(L.states)}
    weights: dict = {}
    a = [0.0] * len(L.states)
    prefix = []
    q = 0
    for q, (rho_q, kappa_q) in enumerate(z, start=1):
        prefix.append((rho_q, kappa_q))
        scale = lamf ** (-q)
        for j in range(1, kappa_q):
            w = float(L.sigma_hat[idx[(rho_q, j)]]) * scale
            weights[(q, (rho_q, j))] = w
            a[idx[(rho_q, j)]] += w
        if scale < tail or q >= max_depth:
            break
    R = sum(weights.values())
    if R == 0:
        raise DegenerateEntranceLaw("every reversed digit is minimal; the entrance law vanishes")
    weights = {k: v / R for k, v in weights.items()}
    return EntranceLaw(tuple(x / R for x in a), weights, R, R * lamf, q, tuple(prefix))


