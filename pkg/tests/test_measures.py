from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import COBOUNDARY, FIBONACCI, MAIN, THETA2
from subfluct.measures import (
    DegenerateEntranceLaw,
    Kernel,
    champm,
    drift,
    entrance_law_a,
    finite_kernels,
    markov_model,
    mpm,
    nu_N,
    nu_N_decomposition,
    push_forward,
    sample_chains,
    sample_path,
    tv_distance,
)
from subfluct.path_space import ReversedPath, build_state_space, encode, encode_reversed, ssim_one
from subfluct.substitution import parse_substitution

F = Fraction


def test_main_lift_and_kernels(main_sub):
    model = markov_model(main_sub)
    L = model.lifted
    assert model.exact
    assert set(L.sigma_hat) == {F(1, 3)} and set(L.rho_hat) == {F(1, 2)}
    assert model.m == (F(1, 6),) * 6
    assert L.pairing() == 1
    m1 = ssim_one(main_sub)
    assert model.p.rows == tuple(tuple(F(x, 3) for x in row) for row in m1)


def test_coboundary_invariant_measure(cob_sub):
    model = markov_model(cob_sub)
    expected = [F(1, 6), F(1, 6), F(1, 12), F(1, 12), F(1, 6), F(1, 6), F(1, 12), F(1, 12)]
    assert list(model.m) == expected


def test_one_letter_lift():
    model = markov_model(parse_substitution("a=aa"))
    assert model.lifted.sigma_hat[0] == model.lifted.sigma_hat[1]
    assert model.m == (F(1, 2), F(1, 2))


@pytest.mark.parametrize("text", [MAIN, COBOUNDARY, THETA2, FIBONACCI])
def test_kernel_identities(text):
    model = markov_model(parse_substitution(text))
    tol = 0 if model.exact else 1e-12
    assert model.p.is_stochastic() and model.p_star.is_stochastic()
    for key in ("m_invariant_gap", "m_invariant_star_gap", "adjoint_gap"):
        assert model.checks[key] <= tol
    if model.exact:
        assert all(sum(r) == 1 for r in model.p.rows)
        assert all(sum(r) == 1 for r in model.p_star.rows)


@pytest.mark.parametrize("text", [MAIN, COBOUNDARY])
def test_finite_kernels_converge(text):
    s = parse_substitution(text)
    model = markov_model(s)
    y = build_state_space(s)[0]
    hs, qs = finite_kernels(s, y, 12)
    for k in hs + qs:
        assert all(sum(r) in (0, 1) for r in k.rows)
    h_gaps = [k.sup_gap(model.p) for k in reversed(hs)]  # depths 3..12
    assert all(b <= a for a, b in zip(h_gaps, h_gaps[1:]))
    assert h_gaps[-1] <= 0.005 * h_gaps[0]  # geometric decay
    assert all(b <= a * 0.6 for a, b in zip(h_gaps[-5:], h_gaps[-4:]))
    q_gaps = [k.sup_gap(model.p_star) for k in reversed(qs)]
    assert max(q_gaps) < 1e-12


def test_nu_N_small(main_sub):
    nu = nu_N(main_sub, 0, 5)
    assert len(nu) == 5 and set(nu.values()) == {F(1, 5)}
    assert set(nu) == {encode(main_sub, 0, 2, n).digits for n in range(1, 6)}
    full = nu_N(main_sub, 0, 27)
    assert len(full) == 27 and set(full.values()) == {F(1, 27)}


def test_decomposition_identity_exact(main_sub):
    for N in range(1, 82):
        measure, total = nu_N_decomposition(main_sub, 0, N, "corrected")
        assert total == 1
        assert measure == nu_N(main_sub, 0, N)


@pytest.mark.parametrize("N, total", [(5, F(12, 5)), (17, F(48, 17)), (81, F(80, 27)), (40, F(117, 40))])
def test_decomposition_literal_weights_total(main_sub, N, total):
    assert nu_N_decomposition(main_sub, 0, N, "literal")[1] == total


@pytest.mark.parametrize(
    "text, f, value",
    [
        (MAIN, [1, -1], 0),
        (COBOUNDARY, [-1, 2, -1, 2], F(-1, 2)),
        (COBOUNDARY, [-1, 0, 1, 0], 0),
        (THETA2, [1, -1], F(1, 3)),
    ],
)
def test_drift_goldens(text, f, value):
    s = parse_substitution(text)
    assert drift(s, f, markov_model(s).lifted) == value


def test_drift_functional_mass_fibonacci(fib_sub):
    lam = (1 + 5**0.5) / 2
    mass = drift(fib_sub, [1, 1], markov_model(fib_sub).lifted)
    assert abs(mass - 1 / (lam**2 + 1)) <= 1e-12


def test_tv_distance_basics():
    mu = {("x",): F(1, 2), ("y",): F(1, 2)}
    assert tv_distance(mu, mu) == 0
    assert tv_distance({("x",): 1}, {("y",): 1}) == 1


def test_coupling_tv_decreases(main_sub):
    model = markov_model(main_sub)
    p = 8
    nu = nu_N(main_sub, 0, 3**8, p)
    ch = champm(model, p)
    values = [tv_distance(push_forward(nu, slice(0, p - r)), push_forward(ch, slice(0, p - r))) for r in range(1, 7)]
    assert values == [F(1, 2 * 3**r) for r in range(1, 7)]
    assert push_forward(ch, slice(0, p - 2)) == champm(model, p - 2)
    assert tv_distance(push_forward(ch, slice(3, None)), push_forward(mpm(model, p), slice(3, None))) == 0


def test_sampler_is_seeded(main_sub):
    model = markov_model(main_sub)
    a = sample_chains(model.p, model.m, 20, 50, seed=3)
    b = sample_chains(model.p, model.m, 20, 50, seed=3)
    assert np.array_equal(a, b)
    assert sample_path(model.p, model.m, 5, 9) == sample_path(model.p, model.m, 5, 9)


def test_sampler_start_frequencies(cob_sub):
    model = markov_model(cob_sub)
    n = 100_000
    first = sample_chains(model.p, model.m, 1, n, seed=1)[:, 0]
    freq = np.bincount(first, minlength=8) / n
    m = np.array([float(x) for x in model.m])
    assert np.all(np.abs(freq - m) <= 3 * np.sqrt(m * (1 - m) / n) + 1e-12)


def test_identity_kernel_gives_constant_path():
    X = ((0, 1), (0, 2))
    K = Kernel(X, ((1, 0), (0, 1)), True)
    path = sample_path(K, [0, 1], 10, 4)
    assert path == [(0, 2)] * 10


def test_ergodic_occupation(main_sub):
    model = markov_model(main_sub)
    chain = sample_chains(model.p, model.m, 100_000, 1, seed=2)[0]
    occ = np.bincount(chain, minlength=6) / chain.size
    assert np.max(np.abs(occ - 1 / 6)) <= 0.01


def test_entrance_law(main_sub):
    model = markov_model(main_sub)
    law = entrance_law_a(encode_reversed(main_sub, 0, 3**20), model.lifted)
    assert abs(sum(law.a) - 1) <= 1e-12
    assert abs(law.R - 1) <= 1e-9  # N_l / 3^l = 1 for every l
    assert abs(law.R_literal - 3 * law.R) <= 1e-12


def test_entrance_law_degenerate(main_sub):
    model = markov_model(main_sub)
    with pytest.raises(DegenerateEntranceLaw):
        entrance_law_a(ReversedPath((), 0).prefix(60), model.lifted)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3**6))
def test_nu_N_is_probability(N):
    s = parse_substitution(MAIN)
    assert sum(nu_N(s, 0, N).values()) == 1
