"""Executable versions of the limit theorems for Birkhoff sums.

Every experiment compares an exhaustive law (the position ``K_N`` is
uniform on ``1..N``, so enumerating all positions gives the law exactly)
with either a normal reference or a Monte Carlo law built from the path
chains. Monte Carlo work is split into fixed-size chunks; chunk ``c`` draws
from ``SeedSequence([seed, c])`` so results do not depend on how many
workers process the chunks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import _exact as ex
from .coboundary import clt_variance, solve_coboundary, _check_eigen
from .measures import (
    MarkovModel,
    champm,
    entrance_law_a,
    markov_model,
    mpm,
    nu_N,
    push_forward,
    tv_distance,
)
from .path_space import depth_for, encode_reversed, prefix_sums_table
from .spectral import DEFAULT_TOL
from .stats import (
    EmpiricalDistribution,
    bounded_lipschitz_gap,
    ks_midpoint,
    ks_normal,
    moment_gaps,
)
from .substitution import (
    Substitution,
    birkhoff_partial_sums,
    expand_prefix,
    find_seed,
    fixed_point_prefix,
)

__all__ = [
    "ExperimentError",
    "RefusedError",
    "ExperimentResult",
    "TRUNCATION_TAIL",
    "CHUNK_SIZE",
    "birkhoff_law",
    "clt_experiment",
    "cantor_limit_experiment",
    "blowup_experiment",
    "typical_orbit_experiment",
    "markov_clt_harness",
    "coupling_decay_experiment",
]

TRUNCATION_TAIL = 1e-12
CHUNK_SIZE = 2500
ENUMERATION_BUDGET = 100_000


class ExperimentError(ValueError):
    """Invalid experiment parameters."""


class RefusedError(ExperimentError):
    """The requested analysis does not apply (for example a CLT for a coboundary)."""


@dataclass
class ExperimentResult:
    """Report dictionary plus the sample law written to CSV."""

    report: dict
    samples: EmpiricalDistribution | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return self.report


# --- helpers ---------------------------------------------------------------

def _as_numeric(values: np.ndarray) -> np.ndarray:
    if values.dtype == object:
        return values.astype(float)
    return values


def _f_array(values) -> np.ndarray:
    vals = [complex(v) for v in values]
    if all(v.imag == 0 for v in vals):
        return np.array([v.real for v in vals])
    return np.array(vals)


def _lam_float(s: Substitution, model: MarkovModel) -> float:
    return float(model.pf.lam)


def birkhoff_law(s: Substitution, f: Sequence, N: int) -> np.ndarray:
    """``S_f(u_{<=n})`` for ``n = 1..N`` along the fixed point."""
    a, k = find_seed(s)
    word = fixed_point_prefix(s, a, k, N)
    return _as_numeric(birkhoff_partial_sums(f, word))


def _chunk_seeds(seed: int, n: int, chunk: int) -> list[tuple[int, int, np.random.Generator]]:
    out = []
    for c, start in enumerate(range(0, n, chunk)):
        rng = np.random.default_rng(np.random.SeedSequence([seed, c]))
        out.append((start, min(chunk, n - start), rng))
    return out


def _run_chunks(fn: Callable, seed: int, n: int, chunk: int, threads: int) -> list:
    jobs = _chunk_seeds(seed, n, chunk)
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda job: fn(*job), jobs))
    return [fn(*job) for job in jobs]


def _cdf(P: np.ndarray) -> np.ndarray:
    C = np.cumsum(P, axis=1)
    C[:, -1] = np.where(P.sum(axis=1) > 0, 1.0, 0.0)
    return C


def _step(C: np.ndarray, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(states.size)
    return (u[:, None] >= C[states]).sum(axis=1)


def _draw(p: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    c = np.cumsum(p)
    c[-1] = 1.0
    return np.searchsorted(c, rng.random(n), side="right")


def _truncation_depth(rate: float, tail: float = TRUNCATION_TAIL) -> int:
    """Least ``D`` with ``rate^D < tail`` for ``0 < rate < 1``."""
    if rate <= 0:
        return 1
    return max(1, int(math.floor(math.log(tail) / math.log(rate))) + 1)


def _fcheck_array(s: Substitution, f: Sequence, states) -> np.ndarray:
    table = prefix_sums_table(s, f)
    return _f_array([table[x] for x in states])


def _log_base(N: int, lam: float) -> float:
    return math.log(N) / math.log(lam)


def _base_report(kind: str, s: Substitution, f, lambda_f, **kw) -> dict:
    rep = {"experiment": kind, "substitution": s.to_text(), "f": list(f), "lambda_f": lambda_f}
    rep.update(kw)
    return rep


# --- CLT -------------------------------------------------------------------

def _refuse_coboundary(s, f, lambda_f, model):
    cert = solve_coboundary(s, f, lambda_f, model=model)
    if cert.is_coboundary:
        raise RefusedError("f is a coboundary: Birkhoff sums stay bounded and there is no CLT")
    return cert


def clt_experiment(s: Substitution, f: Sequence, lambda_f, N: int, model: MarkovModel | None = None) -> ExperimentResult:
    """Exhaustive law of ``S_f(u_{<=K})``, ``K`` uniform on ``1..N``, against the CLT.

    The law is normalized by ``(x - drift log_λ N) / sqrt(E|Z|^2 log_λ N)``;
    the drift term is used only when ``λ_f = 1``. Reported metrics:
    ``mean_ratio = |mean - drift log_λ N| / sqrt(log_λ N)``,
    ``variance_ratio = Var / (E|Z|^2 log_λ N)`` and the KS statistic.

    Raises
    ------
    RefusedError
        If ``f`` is a coboundary.
    """
    _check_eigen(s, f, lambda_f)
    model = model or markov_model(s)
    cert = _refuse_coboundary(s, f, lambda_f, model)
    var = clt_variance(s, f, lambda_f, model)
    lam = _lam_float(s, model)
    L = _log_base(N, lam)
    S = birkhoff_law(s, f, N)
    is_one = (lambda_f == 1) if ex.is_rational(lambda_f) else abs(complex(lambda_f) - 1) <= DEFAULT_TOL
    d = complex(var.drift)
    center = d * L if is_one else 0.0
    if d.imag == 0:
        center = complex(center).real
    sigma2 = float(var.E_abs_Z2)
    raw = EmpiricalDistribution(S)
    scale = math.sqrt(sigma2 * L)
    norm = raw.affine(center, scale)
    gamma = [[g / sigma2 for g in row] for row in var.gamma]
    ks = ks_normal(norm, gamma)
    summ = raw.summary()
    mean_ratio = abs(complex(summ["mean"]) - center) / math.sqrt(L)
    variance_ratio = summ["variance"] / (sigma2 * L)
    rep = _base_report(
        "clt", s, f, lambda_f,
        N=N,
        log_lambda_N=L,
        drift=var.drift,
        drift_in_centering=is_one,
        E_abs_Z2=var.E_abs_Z2,
        E_Z2=var.E_Z2,
        gamma=var.gamma,
        certificate=cert.to_dict(),
        raw_summary=summ,
        normalized_summary=norm.summary(),
        mean_ratio=mean_ratio,
        variance_ratio=variance_ratio,
        ks=ks.to_dict(),
        ks_midpoint_diagnostic=ks_midpoint(norm.real) if norm.is_real else None,
    )
    return ExperimentResult(rep, norm, {"raw": raw})


def drift_slope_oracle(s: Substitution, f: Sequence, N: int) -> dict:
    """Empirical drift: growth per level of the mean Birkhoff sum.

    With ``N_p = |θ^p(a)|``, the mean of ``S_f(u_{<=K})`` over ``K <= N_p``
    grows by the drift per level up to a geometrically small error; the
    slope is taken between the last two levels not exceeding ``N``.
    """
    a, k = find_seed(s)
    p = depth_for(s, a, N)
    table = s.power_lengths(p)
    Ns = [table[q][a] for q in range(0, p + 1) if table[q][a] <= N]
    if len(Ns) < 2:
        raise ExperimentError("N too small for a slope estimate")
    S = birkhoff_law(s, f, Ns[-1])
    means = [float(np.mean(np.real(S[:n]))) for n in Ns[-2:]]
    return {"levels": Ns[-2:], "means": means, "slope": means[1] - means[0]}


# --- |λ_f| < 1 -------------------------------------------------------------

def _sample_forward_series(model: MarkovModel, fc: np.ndarray, lambda_f: complex, depth: int, start: np.ndarray):
    P = np.array(model.p.as_array(), dtype=float)
    C = _cdf(P)
    coeff = np.array([lambda_f**i for i in range(depth)])
    if np.all(np.imag(coeff) == 0) and not np.iscomplexobj(fc):
        coeff = coeff.real

    def job(start_idx, count, rng):
        st = _draw(start, count, rng)
        acc = coeff[0] * fc[st]
        for i in range(1, depth):
            st = _step(C, st, rng)
            acc = acc + coeff[i] * fc[st]
        return acc

    return job


def cantor_limit_experiment(s: Substitution, f: Sequence, lambda_f, N: int, n_mc: int, seed: int, threads: int = 1, sup_window: int = 10_000, model: MarkovModel | None = None) -> ExperimentResult:
    """Exhaustive law of ``S_f(u_{<=K})`` versus Monte Carlo samples of ``W_f``.

    ``W_f = Σ_i λ_f^{i-1} f̌(x_i)`` with ``x`` the entrance-law chain
    (initial law 𝔴, kernel 𝔭), truncated once ``|λ_f|^depth < 1e-12``.
    Also reports ``max_{n<=N}|S_f|`` against ``max_{n<=sup_window}|S_f|``
    and the moment change from ``N`` to ``3N``.
    """
    _check_eigen(s, f, lambda_f, require_unit=False)
    rate = abs(complex(lambda_f))
    if rate >= 1:
        raise ExperimentError("the Cantor-limit experiment needs |λ_f| < 1")
    model = model or markov_model(s)
    S3 = birkhoff_law(s, f, 3 * N)
    S = S3[:N]
    exhaustive = EmpiricalDistribution(S)
    depth = _truncation_depth(rate)
    fc = _fcheck_array(s, f, model.states)
    w = np.array([float(x) for x in model.w])
    lf = complex(lambda_f)
    job = _sample_forward_series(model, fc, lf if lf.imag else lf.real, depth, w)
    mc = EmpiricalDistribution(np.concatenate(_run_chunks(job, seed, n_mc, CHUNK_SIZE, threads)))
    gaps = moment_gaps(S, mc.samples)
    bl = bounded_lipschitz_gap(np.real(S), np.real(mc.samples)) if exhaustive.is_real else None
    sup_all = float(np.max(np.abs(S)))
    sup_window_val = float(np.max(np.abs(S[: min(sup_window, N)])))
    stability = moment_gaps(S, S3)
    rep = _base_report(
        "cantor", s, f, lambda_f,
        N=N,
        n_mc=n_mc,
        seed=seed,
        truncation_depth=depth,
        truncation_tail=TRUNCATION_TAIL,
        chunk_size=CHUNK_SIZE,
        exhaustive_summary=exhaustive.summary(),
        mc_summary=mc.summary(),
        moment_gaps=gaps,
        bounded_lipschitz=bl,
        sup_abs_S_N=sup_all,
        sup_abs_S_window=sup_window_val,
        sup_window=sup_window,
        stability_N_to_3N=stability,
    )
    return ExperimentResult(rep, exhaustive, {"mc": mc})


# --- 1 < |λ_f| < λ ---------------------------------------------------------

def _limit_ratio(s: Substitution, a: int, lam, depth: int = 200) -> float:
    """``|θ^ℓ(a)| / λ^ℓ`` at a large ``ℓ`` (exact integers, then one division)."""
    counts = [0] * s.size
    counts[a] = 1
    for _ in range(depth):
        new = [0] * s.size
        for b, c in enumerate(counts):
            if c:
                for x in s.rules[b]:
                    new[x] += c
        counts = new
    length = sum(counts)
    if ex.is_rational(lam):
        return float(Fraction(length) / Fraction(lam) ** depth)
    return math.exp(math.log(length) - depth * math.log(float(lam)))


def blowup_experiment(s: Substitution, f: Sequence, lambda_f, ell_range: Sequence[int], n_mc: int, seed: int, threads: int = 1, model: MarkovModel | None = None) -> ExperimentResult:
    """Exhaustive law of ``S_f(u_{<=K}) / λ_f^ℓ`` for ``K <= |θ^ℓ(a)|`` versus ``U_f``.

    ``U_f`` is sampled from the reversed chain: the first digit ``q`` where
    the reversed coding of a uniform position leaves the coding ``z`` of
    ``N_ℓ`` is drawn from the entrance-law weights, the digits above it
    follow ``z`` and the digits below follow 𝔭*. A second sampler that
    starts 𝔭* from the state marginal 𝔞 alone is reported as a diagnostic.
    """
    _check_eigen(s, f, lambda_f, require_unit=False)
    model = model or markov_model(s)
    lam = _lam_float(s, model)
    rate = abs(complex(lambda_f))
    if not (1 < rate < lam):
        raise ExperimentError("the blow-up experiment needs 1 < |λ_f| < λ")
    a, k = find_seed(s)
    lf = complex(lambda_f)
    lf_val = lf.real if lf.imag == 0 else lf
    X = model.states
    idx = {x: i for i, x in enumerate(X)}
    fc = _fcheck_array(s, f, X)
    Pstar = np.array(model.p_star.as_array(), dtype=float)
    C = _cdf(Pstar)
    depth = _truncation_depth(1 / rate)
    rows = []
    samples = None
    mc_all = {}
    for ell in ell_range:
        if ell % k:
            raise ExperimentError(f"ℓ must be a multiple of the seed period {k}")
        N = s.power_lengths(ell)[ell][a]
        S = birkhoff_law(s, f, N) / lf_val**ell
        exh = EmpiricalDistribution(S)
        z = encode_reversed(s, a, N)
        law = entrance_law_a(z, model.lifted)
        keys = sorted(law.weights)
        probs = np.array([law.weights[key] for key in keys])
        qs = np.array([q for q, _x in keys])
        sts = np.array([idx[x] for _q, x in keys])
        qmax = int(qs.max())
        zdig = [z[t] for t in range(qmax)]
        pref = np.zeros(qmax + 1, dtype=complex if np.iscomplexobj(fc) or lf.imag else float)
        for t in range(1, qmax + 1):
            pref[t] = pref[t - 1] + fc[idx[zdig[t - 1]]] / lf_val**t
        a_marg = np.array(law.a, dtype=float)

        def job(start, count, rng, probs=probs, qs=qs, sts=sts, pref=pref):
            pick = _draw(probs, count, rng)
            q = qs[pick]
            st = sts[pick]
            scale = 1.0 / lf_val**q
            acc = pref[q - 1] + scale * fc[st]
            for i in range(1, depth + 1):
                st = _step(C, st, rng)
                acc = acc + scale * fc[st] / lf_val**i
            return acc

        def job_literal(start, count, rng, a_marg=a_marg):
            st = _draw(a_marg, count, rng)
            acc = fc[st] / lf_val
            for i in range(2, depth + 2):
                st = _step(C, st, rng)
                acc = acc + fc[st] / lf_val**i
            return acc

        U = EmpiricalDistribution(np.concatenate(_run_chunks(job, seed + ell, n_mc, CHUNK_SIZE, threads)))
        U_lit = EmpiricalDistribution(np.concatenate(_run_chunks(job_literal, seed + ell, n_mc, CHUNK_SIZE, threads)))
        rows.append({
            "ell": ell,
            "N": N,
            "exhaustive_summary": exh.summary(),
            "mc_summary": U.summary(),
            "moment_gaps": moment_gaps(exh.samples, U.samples),
            "literal_start_mc_summary": U_lit.summary(),
            "literal_start_moment_gaps": moment_gaps(exh.samples, U_lit.samples),
            "entrance_law": law.to_dict(),
        })
        samples = exh
        mc_all[ell] = U
    # R belongs to the limit of the reversed codings; a deep level stands in for it
    deep = k * (int(math.ceil(-math.log(TRUNCATION_TAIL) / math.log(lam) / k)) + max(ell_range, default=0) // k + 1)
    z_deep = encode_reversed(s, a, s.power_lengths(deep)[deep][a])
    R = entrance_law_a(z_deep, model.lifted).R
    R_direct = _limit_ratio(s, a, model.pf.lam)
    rep = _base_report(
        "blowup", s, f, lambda_f,
        ell_range=list(ell_range),
        n_mc=n_mc,
        seed=seed,
        truncation_depth=depth,
        truncation_tail=TRUNCATION_TAIL,
        chunk_size=CHUNK_SIZE,
        levels=rows,
        R=R,
        R_depth=deep,
        R_direct_limit_ratio=R_direct,
        R_gap=abs(R - R_direct) if R is not None else None,
    )
    return ExperimentResult(rep, samples, {"mc": mc_all})


# --- typical orbit ---------------------------------------------------------

@dataclass
class TypicalPoint:
    """Right half ``v = c_0 s_0 θ(s_1) θ^2(s_2) ...`` built from path digits.

    ``digits[i] = (b, k)`` says the letter of level ``i`` sits at place
    ``k`` of ``θ(b)``; the suffix ``s_i`` is ``θ(b)_{>k}``.
    """

    digits: tuple
    word: np.ndarray
    boundaries: np.ndarray  # N_0, N_1, ..., cumulative lengths

    def a_vN(self, S: np.ndarray, N: int):
        ell = int(np.searchsorted(self.boundaries, N, side="right")) - 1
        if ell < 0:
            raise ExperimentError("N is shorter than c_0 s_0")
        return S[self.boundaries[ell] - 1], ell


def build_typical_point(s: Substitution, digits: Sequence, N: int) -> TypicalPoint:
    b1, k1 = digits[0]
    head = [s.rules[b1][k1 - 1]] + list(s.rules[b1][k1:])
    pieces = [np.array(head, dtype=np.int64)]
    bounds = [len(head)]
    total = len(head)
    for i, (b, k) in enumerate(digits[1:], start=1):
        if total > N:
            break
        suffix = s.rules[b][k:]
        piece = expand_prefix(s, suffix, i, N + 1 - total) if suffix else np.zeros(0, dtype=np.int64)
        pieces.append(piece)
        total += len(piece)
        bounds.append(total)
    word = np.concatenate(pieces)
    return TypicalPoint(tuple(digits), word, np.array(bounds))


def typical_orbit_experiment(s: Substitution, f: Sequence, lambda_f, N: int, seed: int, digits: Sequence | None = None, max_resample: int = 100, model: MarkovModel | None = None) -> ExperimentResult:
    """Law of ``S_f(v_{[1,K]}) - a_{v,N}``, ``K`` uniform on ``1..N``, along a sampled ``v``.

    Digits are drawn from the stationary chain (𝔪 then 𝔭 upward) unless
    ``digits`` is given. A draw whose expansion stays shorter than ``N``
    (a point with finite right half) is redrawn and counted.

    Raises
    ------
    RefusedError
        If ``f`` is a coboundary.
    """
    _check_eigen(s, f, lambda_f)
    model = model or markov_model(s)
    cert = _refuse_coboundary(s, f, lambda_f, model)
    var = clt_variance(s, f, lambda_f, model, series=False)
    lam = _lam_float(s, model)
    L = _log_base(N, lam)
    depth = int(math.ceil(L)) + 40
    X = model.states
    P = np.array(model.p.as_array(), dtype=float)
    C = _cdf(P)
    m = np.array([float(x) for x in model.m])
    resampled = 0
    if digits is not None:
        point = build_typical_point(s, list(digits), N)
        if len(point.word) < N:
            raise ExperimentError("the given digits describe a right half shorter than N")
    else:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
        while True:
            st = _draw(m, 1, rng)
            seq = [int(st[0])]
            for _ in range(depth - 1):
                st = _step(C, st, rng)
                seq.append(int(st[0]))
            point = build_typical_point(s, [X[i] for i in seq], N)
            if len(point.word) >= N:
                break
            resampled += 1
            if resampled > max_resample:
                raise ExperimentError("too many draws with a finite right half")
    S = _as_numeric(birkhoff_partial_sums(f, point.word[:N]))
    a_vN, ell = point.a_vN(S, N)
    sigma2 = float(var.E_abs_Z2)
    scale = math.sqrt(sigma2 * L)
    centered = EmpiricalDistribution(S).affine(a_vN, scale)
    uncentered = EmpiricalDistribution(S).affine(0, scale)
    gamma = [[g / sigma2 for g in row] for row in var.gamma]
    ks_c = ks_normal(centered, gamma)
    ks_u = ks_normal(uncentered, gamma)
    d = complex(var.drift)
    lll = math.log(math.log(math.log(N))) if N > 16 else float("nan")
    lil_ratio = abs(complex(a_vN) - d * L) / math.sqrt(math.log(N) * lll) if lll > 0 else float("nan")
    rep = _base_report(
        "typical", s, f, lambda_f,
        N=N,
        seed=seed,
        digit_depth=depth,
        resampled_finite_right_half=resampled,
        digits_head=[list(x) for x in point.digits[: ell + 2]],
        level_ell=ell,
        N_ell=int(point.boundaries[ell]),
        a_vN=complex(a_vN) if np.iscomplexobj(S) else float(a_vN),
        drift=var.drift,
        E_abs_Z2=var.E_abs_Z2,
        certificate=cert.to_dict(),
        centered_summary=centered.summary(),
        ks_centered=ks_c.to_dict(),
        ks_uncentered=ks_u.to_dict(),
        lil_diagnostic_ratio=lil_ratio,
    )
    return ExperimentResult(rep, centered)


# --- Markov chain CLT harness ----------------------------------------------

def markov_clt_harness(P, pi, g, lam, N: int, n_trials: int, seed: int, h=None, threads: int = 1) -> ExperimentResult:
    """Simulate ``Y_N = Σ_{i<=N} λ^i g(X_i)`` for a stationary chain.

    Solves ``(I - λP) h = g`` (with ``Σ π h = 0`` when ``λ = 1``) unless ``h``
    is given, and checks along every path that
    ``Y_n = Z_n + λ h(X_1) - λ^{n+1} (Ph)(X_n)`` for all ``n <= N`` with
    ``Z_n = Σ_{i<n} λ^{i+1} (h(X_{i+1}) - Ph(X_i))``.

    Raises
    ------
    ExperimentError
        If ``|λ| != 1`` or the resolvent is singular.
    """
    P = np.asarray(P, dtype=float)
    pi = np.asarray(pi, dtype=float)
    g = np.asarray(g)
    lamc = complex(lam)
    if abs(abs(lamc) - 1) > DEFAULT_TOL:
        raise ExperimentError("|λ| must equal 1")
    n = P.shape[0]
    real = np.isrealobj(g) and lamc.imag == 0 and (h is None or np.isrealobj(h))
    lamv = lamc.real if real else lamc
    dtype = float if real else complex
    if h is None:
        A = np.eye(n) - lamv * P
        b = g.astype(dtype)
        if abs(lamc - 1) <= DEFAULT_TOL:
            A = np.vstack([A, pi])
            b = np.append(b, 0)
        h, *_ = np.linalg.lstsq(A.astype(dtype), b, rcond=None)
        if np.max(np.abs(A @ h - b)) > 1e-9 * max(1.0, float(np.max(np.abs(b)))):
            raise ExperimentError("singular resolvent: g must be centered when λ = 1")
    h = np.asarray(h, dtype=dtype)
    Ph = P @ h
    g_check = float(np.max(np.abs(h - lamv * Ph - g)))
    incr = float(np.sum(pi[:, None] * P * np.abs(h[None, :] - Ph[:, None]) ** 2))
    incr_sq = complex(np.sum(pi[:, None] * P * (h[None, :] - Ph[:, None]) ** 2))
    Pstar = (P.T * pi[None, :]) / np.where(pi[:, None] > 0, pi[:, None], 1)
    cob_gap = float(np.max(np.abs(Pstar @ Ph - h)))
    coboundary_type = cob_gap <= 1e-10
    hinf = float(np.max(np.abs(h)))
    C = _cdf(P)

    def job(start, count, rng):
        x = _draw(pi, count, rng)
        x1 = x
        lp = lamv  # λ^i at step i
        Y = lp * g[x].astype(dtype)
        Z = np.zeros(count, dtype=dtype)
        max_res = np.abs(Y - (Z + lamv * h[x1] - lp * lamv * Ph[x]))
        supY = np.abs(Y)
        for _i in range(2, N + 1):
            xn = _step(C, x, rng)
            lnext = lp * lamv
            Z = Z + lnext * (h[xn] - Ph[x])
            Y = Y + lnext * g[xn]
            x, lp = xn, lnext
            res = np.abs(Y - (Z + lamv * h[x1] - lp * lamv * Ph[x]))
            np.maximum(max_res, res, out=max_res)
            np.maximum(supY, np.abs(Y), out=supY)
        return Y, Z, max_res, supY

    parts = _run_chunks(job, seed, n_trials, CHUNK_SIZE, threads)
    Y = np.concatenate([p[0] for p in parts])
    Z = np.concatenate([p[1] for p in parts])
    res = np.concatenate([p[2] for p in parts])
    supY = np.concatenate([p[3] for p in parts])
    predicted = (N - 1) / N * incr
    emp = float(np.mean(np.abs(Z) ** 2)) / N
    var_ratio = emp / predicted if predicted > 0 else (0.0 if emp == 0 else float("inf"))
    ks = None
    if incr > 1e-14:
        law = EmpiricalDistribution(Y / math.sqrt(N * incr))
        if real:
            ks = ks_normal(law).to_dict()
        else:
            esq = incr_sq if abs(lamc * lamc - 1) <= DEFAULT_TOL else 0j
            gamma = [[(incr + esq.real) / (2 * incr), esq.imag / (2 * incr)], [esq.imag / (2 * incr), (incr - esq.real) / (2 * incr)]]
            ks = ks_normal(law, gamma).to_dict()
    rep = {
        "experiment": "mclt",
        "N": N,
        "n_trials": n_trials,
        "seed": seed,
        "chunk_size": CHUNK_SIZE,
        "lambda": lamc if not real else lamc.real,
        "h": h,
        "g_residual": g_check,
        "increment_variance": incr,
        "predicted_var_Z_over_N": predicted,
        "empirical_var_Z_over_N": emp,
        "variance_ratio": var_ratio,
        "identity_max_residual": float(np.max(res)),
        "coboundary_type": coboundary_type,
        "coboundary_gap": cob_gap,
        "sup_Y": float(np.max(supY)),
        "two_h_inf": 2 * hinf,
        "sup_bound_holds": bool(np.all(supY <= 2 * hinf + 1e-9)) if coboundary_type else None,
        "ks": ks,
    }
    return ExperimentResult(rep, EmpiricalDistribution(Y / math.sqrt(N)))


# --- coupling --------------------------------------------------------------

def coupling_decay_experiment(s: Substitution, a: int, N: int, r_range: Sequence[int], model: MarkovModel | None = None) -> ExperimentResult:
    """Exact ``d_TV(ν_N∘S^r, champm∘S^r)`` and ``d_TV(champm∘L^r, mpm∘L^r)``.

    ``S^r`` drops the top ``r`` digits of a depth-``p`` path and ``L^r``
    the bottom ``r``.

    Raises
    ------
    ExperimentError
        If the depth-``p`` path space exceeds the enumeration budget.
    """
    model = model or markov_model(s)
    p = max(1, depth_for(s, a, N))
    count = sum(s.power_lengths(p)[p])
    if count > ENUMERATION_BUDGET:
        raise ExperimentError(f"{count} paths exceed the enumeration budget {ENUMERATION_BUDGET}")
    nu = nu_N(s, a, N, p)
    ch = champm(model, p)
    mp = mpm(model, p)
    rows = []
    for r in r_range:
        if not 0 <= r < p:
            raise ExperimentError(f"r must lie in [0, {p - 1}]")
        keep_low = slice(0, p - r)
        keep_high = slice(r, None)
        rows.append({
            "r": r,
            "tv_nuN_champm_S": tv_distance(push_forward(nu, keep_low), push_forward(ch, keep_low)),
            "tv_champm_mpm_L": tv_distance(push_forward(ch, keep_high), push_forward(mp, keep_high)),
        })
    tv = [row["tv_nuN_champm_S"] for row in rows]
    rep = {
        "experiment": "coupling",
        "substitution": s.to_text(),
        "a": s.letters[a],
        "N": N,
        "depth": p,
        "paths": count,
        "table": rows,
        "strictly_decreasing": all(x > y for x, y in zip(tv, tv[1:])),
        "nonincreasing": all(x >= y for x, y in zip(tv, tv[1:])),
    }
    return ExperimentResult(rep)
