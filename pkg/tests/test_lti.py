import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hankel_sysid import (
    BlockMatrix, DomainError, StateSpaceModel, UnstableModelError, balanced_realization,
    balanced_truncate, build_hankel, build_toeplitz, delta_plus, fixture_example1,
    fixture_lowerbound, gramians, hankel_singular_values, hinf_norm, markov_parameters,
    noise_to_signal, padded_diff_norm, random_stable_model, solve_discrete_lyapunov,
    tail_horizon, transfer_function,
)
from hankel_sysid.lti import frequency_response

from conftest import brute_lyapunov


# --- model type -------------------------------------------------------------

def test_model_validation():
    with pytest.raises(DomainError):
        StateSpaceModel([[1.0, 2.0]], [[0.5]], [[1.0]])
    with pytest.raises(DomainError):
        StateSpaceModel([[1.0]], [[0.5, 0.1]], [[1.0]])
    with pytest.raises(DomainError):
        StateSpaceModel([[np.nan]], [[0.5]], [[1.0]])


def test_model_is_immutable(scalar):
    with pytest.raises(ValueError):
        scalar.A[0, 0] = 3.0


def test_model_json_roundtrip():
    M = random_stable_model(4, p=2, m=3, seed=1)
    back = StateSpaceModel.from_dict(json.loads(json.dumps(M.to_dict())))
    for a, b in ((M.C, back.C), (M.A, back.A), (M.B, back.B)):
        np.testing.assert_array_equal(a, b)


def test_model_json_rejects_missing_keys():
    with pytest.raises(DomainError):
        StateSpaceModel.from_dict({"A": [[0.5]], "B": [[1.0]]})


# --- Hankel / Toeplitz ------------------------------------------------------

def test_markov_parameters_match_powers():
    M = random_stable_model(3, p=2, m=2, seed=3)
    mk = markov_parameters(M, 6)
    for k in range(6):
        np.testing.assert_allclose(mk[k], M.C @ np.linalg.matrix_power(M.A, k) @ M.B, atol=1e-14)


def test_hankel_scalar(scalar):
    H = build_hankel(scalar, 0, 2, 3).data
    np.testing.assert_allclose(H, [[1, 0.5, 0.25], [0.5, 0.25, 0.125]])
    H1 = build_hankel(scalar, 1, 2, 2).data
    np.testing.assert_allclose(H1, [[0.5, 0.25], [0.25, 0.125]])


def test_hankel_blocks_and_rank():
    M = random_stable_model(3, p=2, m=2, seed=4)
    H = build_hankel(M, 2, 4, 5)
    assert H.data.shape == (8, 10)
    np.testing.assert_allclose(H.block(1, 2), M.C @ np.linalg.matrix_power(M.A, 5) @ M.B, atol=1e-14)
    assert np.linalg.matrix_rank(H.data, tol=1e-10) <= 3


def test_hankel_factorization():
    M = random_stable_model(4, p=1, m=2, seed=5)
    O = np.vstack([M.C @ np.linalg.matrix_power(M.A, i) for i in range(5)])
    R = np.hstack([np.linalg.matrix_power(M.A, j) @ M.B for j in range(6)])
    np.testing.assert_allclose(build_hankel(M, 0, 5, 6).data, O @ R, atol=1e-13)


def test_toeplitz_scalar(scalar):
    T = build_toeplitz(scalar, 0, 3).data
    np.testing.assert_allclose(T, [[0, 0, 0], [1, 0, 0], [0.5, 1, 0]])


def test_toeplitz_d1_is_zero():
    M = random_stable_model(3, p=2, m=2, seed=6)
    assert not build_toeplitz(M, 0, 1).data.any()


def test_noise_toeplitz_identity_blocks():
    M = StateSpaceModel(np.eye(2), np.zeros((2, 2)), np.ones((2, 1)))
    T = build_toeplitz(M, 0, 3, kernel="noise").data
    expect = np.zeros((6, 6))
    expect[2:4, 0:2] = np.eye(2)
    expect[4:6, 2:4] = np.eye(2)
    np.testing.assert_array_equal(T, expect)


# --- transfer function / H-infinity ------------------------------------------

def test_transfer_function_scalar(scalar):
    assert transfer_function(scalar, 2.0)[0, 0] == pytest.approx(2 / 3)


def test_transfer_function_large_z():
    M = random_stable_model(4, p=2, m=2, seed=7)
    z = 1e6
    err = np.linalg.norm(transfer_function(M, z) - M.C @ M.B / z)
    # next series term is CAB / z^2
    assert err <= 2 * np.linalg.norm(M.C @ M.A @ M.B) / z**2 + 1e-20


def test_transfer_function_pole(scalar):
    with pytest.raises(DomainError, match="pole"):
        transfer_function(scalar, 0.5)


def test_example1_transfer_gap():
    n, a = 21, 1e-3
    M1, M2 = fixture_example1(n, a)
    om = np.linspace(0, 2 * np.pi, 97)
    g1, g2 = frequency_response(M1, om), frequency_response(M2, om)
    assert np.max(np.abs(g1 - g2)) <= 2 * n * a


def test_frequency_response_matches_direct():
    M = random_stable_model(5, p=2, m=3, seed=8)
    om = np.array([0.0, 0.3, 2.0, 5.5])
    G = frequency_response(M, om)
    for k, w in enumerate(om):
        np.testing.assert_allclose(G[k], transfer_function(M, np.exp(1j * w)), atol=1e-12)


def test_hinf_scalar(scalar):
    assert hinf_norm(scalar) == pytest.approx(2.0, rel=1e-12)


def test_hinf_matches_dense_grid():
    for seed in range(3):
        M = random_stable_model(5, p=2, m=2, rho_max=0.95, seed=seed)
        om = np.linspace(0, 2 * np.pi, 1 << 14, endpoint=False)
        dense = np.max([np.linalg.norm(G, 2) for G in frequency_response(M, om)])
        h = hinf_norm(M)
        assert h >= dense * (1 - 1e-12)
        assert h <= dense * (1 + 1e-3)


def test_hinf_example1():
    M1, M2 = fixture_example1(21, 1e-3)
    assert hinf_norm(M1 - M2) <= 0.042


def test_hinf_requires_stability_and_grid():
    with pytest.raises(UnstableModelError):
        hinf_norm(StateSpaceModel([[1.0]], [[1.2]], [[1.0]]))
    with pytest.raises(DomainError):
        hinf_norm(random_stable_model(2), grid_points=32)


def test_hinf_sandwich(random_models):
    for M in random_models:
        s = hankel_singular_values(M)
        h = hinf_norm(M)
        assert s[0] <= h * (1 + 1e-9)
        assert h <= 2 * s.sum() * (1 + 1e-9)


# --- Lyapunov / gramians ----------------------------------------------------

def test_lyapunov_examples():
    Q = np.array([[2.0, 1.0], [1.0, 3.0]])
    np.testing.assert_allclose(solve_discrete_lyapunov(np.zeros((2, 2)), Q), Q)
    np.testing.assert_allclose(solve_discrete_lyapunov(np.array([[0.5]]), np.eye(1)), [[4 / 3]])
    np.testing.assert_allclose(solve_discrete_lyapunov(np.diag([0.5, 0.0]), np.eye(2)),
                               np.diag([4 / 3, 1.0]), atol=1e-15)


def test_lyapunov_unstable():
    with pytest.raises(DomainError):
        solve_discrete_lyapunov(np.array([[1.0]]), np.eye(1))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 7), seed=st.integers(0, 10_000), rho=st.floats(0.05, 0.99))
def test_lyapunov_residual_and_oracle(n, seed, rho):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    A *= rho / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-12)
    G = rng.standard_normal((n, n))
    Q = G @ G.T
    X = solve_discrete_lyapunov(A, Q)
    np.testing.assert_allclose(X, X.T)
    resid = np.linalg.norm(X - A @ X @ A.T - Q) / np.linalg.norm(X)
    assert resid <= 1e-10
    np.testing.assert_allclose(X, brute_lyapunov(A, Q), rtol=1e-7, atol=1e-9 * np.linalg.norm(X))


def test_hsv_scalar(scalar):
    np.testing.assert_allclose(hankel_singular_values(scalar), [4 / 3])


def test_hsv_lowerbound():
    M0, M1 = fixture_lowerbound(0.5)
    s0 = hankel_singular_values(M0)
    assert np.sum(s0 > 1e-10 * s0[0]) == 1
    s1 = hankel_singular_values(M1)
    # Markov parameters of M1 are 1, 0, zeta, 0, ...
    H = np.array([[1, 0, 0.5], [0, 0.5, 0], [0.5, 0, 0]])
    ratio = s1[0] / s1[1]
    assert 2 <= ratio <= 3
    sv = np.linalg.svd(H, compute_uv=False)
    assert ratio == pytest.approx(sv[0] / sv[1], rel=1e-9)
    assert ratio == pytest.approx(1 + math.sqrt(2), rel=1e-3)


def test_hsv_vs_large_hankel(random_models):
    for M in random_models:
        s = hankel_singular_values(M)
        H = build_hankel(M, 0, 200, 200).data
        sv = np.linalg.svd(H, compute_uv=False)[:M.n]
        np.testing.assert_allclose(s, sv, rtol=1e-6)


def test_similarity_invariance():
    rng = np.random.default_rng(11)
    M = random_stable_model(4, p=2, m=2, seed=11)
    S = np.eye(4) + 0.3 * rng.standard_normal((4, 4))
    Ms = M.transform(S)
    np.testing.assert_allclose(hankel_singular_values(Ms), hankel_singular_values(M), rtol=1e-9)
    z = np.exp(0.7j)
    np.testing.assert_allclose(transfer_function(Ms, z), transfer_function(M, z), rtol=1e-9)


# --- balanced realization / truncation --------------------------------------

def test_balanced_scalar(scalar):
    Mb = balanced_realization(scalar)
    assert Mb.A[0, 0] == pytest.approx(0.5)
    assert Mb.C[0, 0] * Mb.B[0, 0] == pytest.approx(1.0)
    assert abs(Mb.C[0, 0]) == pytest.approx(1.0)


def test_balanced_equations():
    M = StateSpaceModel([[1.0, 1.0]], np.diag([0.5, 0.3]), [[1.0], [1.0]])
    Mb = balanced_realization(M)
    g = gramians(Mb)
    s = hankel_singular_values(M)
    np.testing.assert_allclose(g.P, np.diag(s), atol=1e-8 * s[0])
    np.testing.assert_allclose(g.Q, np.diag(s), atol=1e-8 * s[0])
    for w in (0.0, 1.0, 3.0):
        z = np.exp(1j * w)
        np.testing.assert_allclose(transfer_function(Mb, z), transfer_function(M, z), rtol=1e-8)


def test_balanced_rejects_nonminimal():
    M0, _ = fixture_lowerbound(0.5)
    with pytest.raises(DomainError, match="rank 1"):
        balanced_realization(M0)


def test_truncate_rank1_embedded():
    M0, _ = fixture_lowerbound(0.5)
    M0r = balanced_truncate(M0, 1)
    assert M0r.n == 1
    assert hinf_norm(M0 - M0r) <= 1e-8


def test_truncate_full_order():
    M = random_stable_model(5, seed=12)
    assert hinf_norm(M - balanced_truncate(M, 5)) <= 1e-8
    assert balanced_truncate(M, 9).n == 5


def test_truncation_bound():
    M = random_stable_model(5, seed=13)
    s = hankel_singular_values(M)
    assert hinf_norm(M - balanced_truncate(M, 2)) <= 2 * s[2:].sum()


# --- padded difference / gap -------------------------------------------------

def test_padded_diff_zero():
    M = random_stable_model(3, p=2, m=2, seed=14)
    H = build_hankel(M, 0, 4, 4)
    assert padded_diff_norm(H, H) == 0.0
    small = build_hankel(M, 0, 2, 2)
    padded = np.zeros((8, 8))
    padded[:4, :4] = small.data
    assert padded_diff_norm(small, BlockMatrix(padded, 2, 2)) == 0.0


def test_padded_diff_scalar_sandwich(scalar):
    a = 0.5
    g = padded_diff_norm(build_hankel(scalar, 0, 2, 2), build_hankel(scalar, 0, 60, 60))
    lo = a**2 * 4 / 3
    assert lo - 1e-12 <= g <= math.sqrt(2) * lo + 1e-12


def test_padded_diff_truncation_sandwich():
    M = random_stable_model(3, rho_max=0.7, seed=15)
    d, D = 3, 120
    tail = np.linalg.norm(build_hankel(M, d, D, D).data, 2)
    g = padded_diff_norm(build_hankel(M, 0, d, d), build_hankel(M, 0, D, D))
    assert tail * (1 - 1e-8) <= g <= math.sqrt(2) * tail * (1 + 1e-8)


def test_padded_diff_incompatible():
    with pytest.raises(DomainError):
        padded_diff_norm(BlockMatrix(np.zeros((2, 2)), 1, 1), BlockMatrix(np.zeros((4, 4)), 2, 2))
    with pytest.raises(DomainError):
        padded_diff_norm(BlockMatrix(np.zeros((4, 4)), 1, 1), BlockMatrix(np.zeros((2, 2)), 1, 1))


def test_delta_plus_examples():
    assert delta_plus([1, 1, 0.5, 0]) == pytest.approx(0.5)
    assert delta_plus([1]) == 1.0
    assert delta_plus([1, 0.9, 0.09]) == pytest.approx(0.1)
    with pytest.raises(DomainError):
        delta_plus([])
    with pytest.raises(DomainError):
        delta_plus([0.5, 1.0])


@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=10))
def test_delta_plus_in_unit_interval(values):
    s = sorted(values, reverse=True)
    assert 0.0 <= delta_plus(s) <= 1.0


# --- noise to signal ---------------------------------------------------------

def test_noise_to_signal_scalar(scalar):
    beta, R = noise_to_signal(scalar)
    assert R == pytest.approx(1.0, rel=1e-12)
    assert beta == pytest.approx(2.0, rel=1e-4)
    _, R2 = noise_to_signal(StateSpaceModel([[1.0]], [[0.5]], [[2.0]]))
    assert R2 == pytest.approx(0.5, rel=1e-12)


def test_noise_to_signal_matches_hinf(random_models):
    for M in random_models:
        beta, _ = noise_to_signal(M)
        assert beta == pytest.approx(hinf_norm(M), rel=1e-4)


def test_tail_horizon():
    from hankel_sysid import fixture_fir
    assert tail_horizon(fixture_fir(7, seed=0)) == 7
    M = random_stable_model(3, rho_max=0.8, seed=16)
    D = tail_horizon(M)
    mk = markov_parameters(M, D + 200)
    assert np.abs(mk[D:]).sum() <= 1e-8
