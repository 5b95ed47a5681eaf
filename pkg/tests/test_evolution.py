from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisy_qwalk.errors import SupportOverflow
from noisy_qwalk.evolution import (
    NoiseSpec,
    apply_branch_unitary,
    cptp_step,
    diagonal_step,
    dual_step_observable,
    evolve,
    iterate_diagonal,
    position_operator,
    reshuffling_matrix,
    traced_coin_step,
)
from noisy_qwalk.linalg import is_unitary
from noisy_qwalk.moments import closed_form_first
from noisy_qwalk.state import (
    CoinWalkerDensity,
    CoinWalkerVector,
    InitialCondition,
    LatticeWindow,
    init_density,
    init_diagonal,
    position_distribution,
)
from oracles import binomial_walk, kraus_evolve, kraus_operators, product_state, rational_recurrence

GRID_EPS = [0.1, 0.5, 1.0]
GRID_GAMMA = [0.0, np.pi / 4, np.pi / 3]


def random_density(window, rng, margin=1):
    n = window.n_sites
    idx = [c * n + i for c in range(2) for i in range(margin, n - margin)]
    g = rng.normal(size=(len(idx), len(idx))) + 1j * rng.normal(size=(len(idx), len(idx)))
    sub = g @ g.conj().T
    rho = np.zeros((2 * n, 2 * n), complex)
    rho[np.ix_(idx, idx)] = sub / np.trace(sub).real
    return CoinWalkerDensity(window, rho)


def basis_vector(window, coin, site):
    psi = np.zeros((2, window.n_sites), complex)
    psi[coin, window.index(site)] = 1
    return CoinWalkerVector(window, psi)


def test_noise_spec_normalizer():
    for eps in (1e-8, 0.3, 1.0, 7.0):
        spec = NoiseSpec(eps)
        assert spec.normalizer ** 2 * (1 + eps ** 2) == pytest.approx(1, abs=1e-14)
        keep, flip = spec.transition_weights
        assert keep + flip == 1.0
        assert flip == pytest.approx(eps ** 2 / (1 + eps ** 2), rel=1e-15)
    with pytest.raises(ValueError):
        NoiseSpec(-0.1)
    with pytest.raises(ValueError):
        NoiseSpec(0.1, 1.5)


def test_reshuffling_matrix():
    np.testing.assert_allclose(reshuffling_matrix(NoiseSpec(1e-8), 1), np.eye(2), atol=1e-7)
    np.testing.assert_allclose(
        reshuffling_matrix(NoiseSpec(1.0), 1), np.array([[1, 1], [-1, 1]]) / np.sqrt(2), atol=1e-15
    )
    for s in (1, -1):
        assert is_unitary(reshuffling_matrix(NoiseSpec(0.6), s))
    with pytest.raises(ValueError):
        reshuffling_matrix(NoiseSpec(0.6), 0)


def test_branch_unitary_pure_shift_limit():
    w = LatticeWindow(0, 2)
    spec = NoiseSpec(1e-300)
    up = apply_branch_unitary(basis_vector(w, 0, 0), spec, 1)
    np.testing.assert_allclose(up.psi, basis_vector(w, 0, 1).psi, atol=1e-15)
    down = apply_branch_unitary(basis_vector(w, 1, 0), spec, -1)
    np.testing.assert_allclose(down.psi, basis_vector(w, 1, -1).psi, atol=1e-15)


def test_branch_unitary_classical_point():
    w = LatticeWindow(0, 2)
    out = apply_branch_unitary(basis_vector(w, 0, 0), NoiseSpec(1.0), 1)
    expected = (basis_vector(w, 0, 1).psi - basis_vector(w, 1, -1).psi) / np.sqrt(2)
    np.testing.assert_allclose(out.psi, expected, atol=1e-15)


def test_branch_unitary_density_matches_vector():
    w = LatticeWindow(0, 3)
    rng = np.random.default_rng(1)
    psi = np.zeros((2, w.n_sites), complex)
    psi[:, 1:-1] = rng.normal(size=(2, 5)) + 1j * rng.normal(size=(2, 5))
    vec = CoinWalkerVector(w, psi / np.linalg.norm(psi))
    for s in (1, -1):
        out_v = apply_branch_unitary(vec, NoiseSpec(0.3), s)
        out_d = apply_branch_unitary(vec.density(), NoiseSpec(0.3), s)
        np.testing.assert_allclose(out_d.rho, out_v.density().rho, atol=1e-14)
        assert out_v.norm() == pytest.approx(1, abs=1e-12)


def test_branch_unitary_overflow():
    w = LatticeWindow(0, 1)
    with pytest.raises(SupportOverflow):
        apply_branch_unitary(basis_vector(w, 0, 1), NoiseSpec(0.2), 1)
    d = init_density(InitialCondition(0.4), 1)
    d = cptp_step(d, NoiseSpec(0.2))
    with pytest.raises(SupportOverflow):
        cptp_step(d, NoiseSpec(0.2))


def test_cptp_single_branch_keeps_purity():
    w = LatticeWindow(0, 4)
    vec = basis_vector(w, 0, 0)
    vec.psi[1, w.index(1)] = 1j
    vec.psi /= vec.norm()
    rho = vec.density()
    out = cptp_step(rho, NoiseSpec(0.7, q_plus=1.0))
    assert out.purity() == pytest.approx(rho.purity(), abs=1e-12)


@pytest.mark.parametrize("q_plus", [0.5, 0.2, 1.0])
def test_cptp_matches_explicit_kraus_sum(q_plus):
    rng = np.random.default_rng(7)
    w = LatticeWindow(0, 5)
    rho = random_density(w, rng)
    spec = NoiseSpec(0.45, q_plus)
    got = cptp_step(rho, spec)
    ops = kraus_operators(0.45, q_plus, 5)
    np.testing.assert_allclose(got.rho, kraus_evolve(rho.rho, ops, 1), atol=1e-14)
    branch = sum(q * apply_branch_unitary(rho, spec, s).rho for s, q in spec.branches())
    np.testing.assert_allclose(got.rho, branch, atol=1e-14)
    assert got.trace() == pytest.approx(1, abs=1e-12)
    assert got.hermiticity_error() < 1e-14
    assert got.min_eigenvalue() > -1e-12


def test_oracle_kraus_completeness_away_from_edges():
    total = sum(k.conj().T @ k for k in kraus_operators(0.3, 0.4, 3))
    inner = [1, 2, 3, 4, 5, 8, 9, 10, 11, 12]
    np.testing.assert_allclose(total[np.ix_(inner, inner)], np.eye(len(inner)), atol=1e-14)


@pytest.mark.parametrize("eps", GRID_EPS)
@pytest.mark.parametrize("gamma", GRID_GAMMA)
def test_dense_vs_diagonal_and_closure(eps, gamma):
    ic, spec = InitialCondition(gamma), NoiseSpec(eps)
    dense = init_density(ic, 12)
    diag = init_diagonal(ic, 12)
    for _ in range(12):
        dense = cptp_step(dense, spec)
        diag = diagonal_step(diag, spec)
        off = dense.rho - np.diag(np.diag(dense.rho))
        assert np.max(np.abs(off)) < 1e-14
        ds = dense.diagonal_state()
        assert np.max(np.abs(ds.alpha - diag.alpha)) < 1e-10
        assert np.max(np.abs(ds.beta - diag.beta)) < 1e-10
        assert abs(dense.trace() - 1) < 1e-12


def test_biased_noise_breaks_diagonal_closure():
    # coherences created with q_plus != 1/2 feed back into the populations,
    # which is why the fast path refuses biased noise
    ic, spec = InitialCondition(np.pi / 5), NoiseSpec(0.6, 0.3)
    dense = evolve(ic, spec, 4, mode="dense")
    assert np.max(np.abs(dense.rho - np.diag(np.diag(dense.rho)))) > 1e-3
    with pytest.raises(ValueError):
        evolve(ic, spec, 4)
    with pytest.raises(ValueError):
        diagonal_step(init_diagonal(ic, 4), spec)


def test_diagonal_step_single_substitution():
    st = diagonal_step(init_diagonal(InitialCondition(0.0), 1), NoiseSpec(1.0))
    np.testing.assert_allclose(st.alpha, [0, 0, 0.5])
    np.testing.assert_allclose(st.beta, [0.5, 0, 0])


def test_diagonal_pure_shift_limit():
    st = evolve(InitialCondition(np.pi / 3), NoiseSpec(0.0), 4)
    assert st.alpha[-1] == pytest.approx(0.25) and st.beta[0] == pytest.approx(0.75)
    assert st.alpha.sum() + st.beta.sum() == pytest.approx(1)


def test_diagonal_matches_rational_oracle():
    st = evolve(InitialCondition(np.pi / 3), NoiseSpec(0.5), 10)
    alpha, beta = rational_recurrence(Fraction(1, 4), Fraction(1, 4), 10)
    for i, k in enumerate(st.window.sites):
        assert st.alpha[i] == pytest.approx(float(alpha.get(int(k), 0)), abs=1e-15)
        assert st.beta[i] == pytest.approx(float(beta.get(int(k), 0)), abs=1e-15)
    # frozen from the rational recurrence
    p = position_distribution(st)
    assert p[st.window.index(0)] == pytest.approx(232209 / 1953125, abs=1e-15)
    assert p[st.window.index(-10)] == pytest.approx(851968 / 9765625, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 3.0), st.integers(1, 40))
def test_symmetric_coin_gives_symmetric_distribution(eps, n):
    p = position_distribution(evolve(InitialCondition(np.pi / 4), NoiseSpec(eps), n))
    np.testing.assert_allclose(p, p[::-1], atol=1e-14)


@pytest.mark.parametrize("n", [0, 1, 7, 20, 30])
def test_classical_point_binomial(n):
    p = position_distribution(evolve(InitialCondition(0.9), NoiseSpec(1.0), n))
    ref = binomial_walk(n)
    sites = np.arange(-n, n + 1)
    expected = np.array([ref.get(int(k), 0.0) for k in sites])
    assert np.max(np.abs(p - expected)) < 1e-12


def test_evolve_zero_steps_and_snapshots():
    ic = InitialCondition(0.2)
    st = evolve(ic, NoiseSpec(0.3), 0)
    np.testing.assert_array_equal(st.alpha, init_diagonal(ic, 0).alpha)
    hist = evolve(ic, NoiseSpec(0.3), 5, snapshots=True)
    assert [h.step for h in hist] == list(range(6))
    assert not np.shares_memory(hist[-1].alpha, hist[-2].alpha)
    dense_hist = evolve(ic, NoiseSpec(0.3), 3, mode="dense", snapshots=True)
    assert len(dense_hist) == 4
    with pytest.raises(ValueError):
        evolve(ic, NoiseSpec(0.3), 2, mode="bogus")


def test_diagonal_overflow():
    st = init_diagonal(InitialCondition(0.3), 2)
    it = iterate_diagonal(st, NoiseSpec(0.3), 3)
    next(it), next(it)
    with pytest.raises(SupportOverflow):
        next(it)


def test_dense_vs_diagonal_n10():
    ic, spec = InitialCondition(np.pi / 3), NoiseSpec(0.5)
    a = evolve(ic, spec, 10)
    b = evolve(ic, spec, 10, mode="dense").diagonal_state()
    assert max(np.abs(a.alpha - b.alpha).max(), np.abs(a.beta - b.beta).max()) < 1e-10


def test_dual_map_unital_and_dual():
    w = LatticeWindow(0, 4)
    spec = NoiseSpec(0.35, 0.3)
    eye = np.eye(2 * w.n_sites)
    np.testing.assert_allclose(dual_step_observable(eye, w, spec), eye, atol=1e-12)
    rng = np.random.default_rng(11)
    for _ in range(10):
        rho = random_density(w, rng)
        a = rng.normal(size=eye.shape) + 1j * rng.normal(size=eye.shape)
        a = a + a.conj().T
        lhs = np.trace(cptp_step(rho, spec).rho @ a)
        rhs = np.trace(rho.rho @ dual_step_observable(a, w, spec))
        assert abs(lhs - rhs) < 1e-12


@pytest.mark.parametrize("gamma", GRID_GAMMA)
def test_dual_of_position_gives_first_moment(gamma):
    w = LatticeWindow(0, 3)
    spec = NoiseSpec(0.4)
    rho0 = init_density(InitialCondition(gamma), 3)
    heis = dual_step_observable(position_operator(w), w, spec)
    s1 = np.trace(rho0.rho @ heis).real
    assert s1 == pytest.approx(closed_form_first(1, spec, gamma)[1], abs=1e-12)
    # two Heisenberg steps against two Schrodinger steps
    heis2 = dual_step_observable(heis, w, spec)
    rho2 = cptp_step(cptp_step(rho0, spec), spec)
    assert np.trace(rho0.rho @ heis2).real == pytest.approx(
        np.trace(rho2.rho @ position_operator(w)).real, abs=1e-12
    )


def test_dense_matches_independent_kraus_oracle():
    gamma, eps = 0.8, 0.45
    ref = kraus_evolve(product_state(gamma, 6), kraus_operators(eps, 0.5, 6), 6)
    got = evolve(InitialCondition(gamma), NoiseSpec(eps), 6, mode="dense")
    np.testing.assert_allclose(got.rho, ref, atol=1e-14)


def test_traced_coin_variant_is_a_channel():
    n = 5
    rho_w = np.zeros((n, n), complex)
    rho_w[2, 2] = 1
    out = traced_coin_step(rho_w, NoiseSpec(0.3))
    assert np.trace(out).real == pytest.approx(1)
    np.testing.assert_allclose(np.diag(out).real, [0, 0.5, 0, 0.5, 0], atol=1e-15)
