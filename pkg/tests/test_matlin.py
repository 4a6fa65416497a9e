import numpy as np
import pytest
from hypothesis import given, strategies as st

from ebindex.exceptions import InvalidArgumentError
from ebindex.matlin import (
    herm_eig,
    herm_eigvals,
    is_hermitian,
    jacobi_eigh,
    kron,
    maxabs,
    min_eigenvalue,
    orthonormal_completion,
    partial_trace,
    partial_transpose,
    random_unitary_matrix,
    schatten_norm,
    singular_values,
)
from ebindex.channels import PAULI_Z, max_ent_state

from strategies import density, hermitian, seeds

# frozen oracles
BELL_PT_EIGS = np.array([0.5, 0.5, 0.5, -0.5])  # descending


def test_herm_eig_identity():
    assert np.allclose(herm_eig(np.eye(4)).eigenvalues, 1.0)


def test_herm_eig_pauli_z():
    assert np.allclose(herm_eig(PAULI_Z).eigenvalues, [1.0, -1.0])


def test_herm_eig_known_spectrum(rng):
    v = random_unitary_matrix(3, rng)
    a = v @ np.diag([3.0, 1.0, -2.0]) @ v.conj().T
    assert np.allclose(herm_eig(a).eigenvalues, [3.0, 1.0, -2.0], atol=1e-10)


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(InvalidArgumentError):
        herm_eig(np.array([[0, 1], [0, 0]], dtype=complex))


@given(d=st.integers(1, 64), seed=seeds)
def test_herm_eig_reconstruction(d, seed):
    a = hermitian(d, seed)
    s = herm_eig(a)
    v = s.eigenvectors
    scale = 1.0 + maxabs(a)
    assert maxabs(v @ np.diag(s.eigenvalues) @ v.conj().T - a) <= 1e-10 * scale
    assert maxabs(v.conj().T @ v - np.eye(d)) <= 1e-10
    assert np.all(np.diff(s.eigenvalues) <= 0)


@given(d=st.integers(1, 12), seed=seeds)
def test_jacobi_matches_lapack(d, seed):
    a = hermitian(d, seed)
    j = jacobi_eigh(a)
    assert np.allclose(j.eigenvalues, herm_eigvals(a), atol=1e-10 * (1 + maxabs(a)))
    v = j.eigenvectors
    assert maxabs(v @ np.diag(j.eigenvalues) @ v.conj().T - a) <= 1e-10 * (1 + maxabs(a))


def test_min_eigenvalue_bell_partial_transpose():
    pt = partial_transpose(max_ent_state(2), (2, 2))
    assert np.allclose(herm_eigvals(pt), BELL_PT_EIGS, atol=1e-12)
    assert min_eigenvalue(pt) == pytest.approx(-0.5, abs=1e-12)


@pytest.mark.parametrize("a, p, expected", [
    (np.diag([0.9, 0.8, 0.7]), 1, 2.4),
    (0.4 * np.eye(3), 1, 1.2),
    (PAULI_Z, np.inf, 1.0),
    (PAULI_Z, "inf", 1.0),
    (np.diag([3.0, 4.0]), 2, 5.0),
])
def test_schatten_norm_values(a, p, expected):
    assert schatten_norm(a, p) == pytest.approx(expected, abs=1e-12)


def test_schatten_norm_rejects_p_below_one():
    with pytest.raises(InvalidArgumentError):
        schatten_norm(np.eye(2), 0.5)


@given(seed=seeds, rs=st.sampled_from([(2.0, 2.0), (3.0, 1.5)]), p=st.sampled_from([1.0, 2.0, 3.0]))
def test_holder_inequality(seed, rs, p):
    r_, s_ = rs
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    lhs = schatten_norm(a @ b, p)
    rhs = schatten_norm(a, r_ * p) * schatten_norm(b, s_ * p)
    assert lhs <= rhs * (1 + 1e-9)


@given(seed=seeds, n=st.integers(1, 6), p=st.sampled_from([1.0, 2.0, 2.5]))
def test_diagonal_power_norm(seed, n, p):
    rng = np.random.default_rng(seed)
    L = np.diag(rng.uniform(-1, 1, 3))
    lhs = schatten_norm(L, n * p)
    rhs = schatten_norm(np.linalg.matrix_power(L, n), p) ** (1.0 / n)
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_singular_values_sorted(rng):
    s = singular_values(rng.standard_normal((4, 3)))
    assert np.all(np.diff(s) <= 0)


def test_partial_transpose_product_state(rng):
    a, b = density(2, 1), density(3, 2)
    pt = partial_transpose(np.kron(a, b), (2, 3), "second")
    assert maxabs(pt - np.kron(a, b.T)) <= 1e-14
    pt1 = partial_transpose(np.kron(a, b), (2, 3), "first")
    assert maxabs(pt1 - np.kron(a.T, b)) <= 1e-14


@given(seed=seeds, which=st.sampled_from(["first", "second"]))
def test_partial_transpose_involution(seed, which):
    r = hermitian(6, seed)
    assert np.array_equal(partial_transpose(partial_transpose(r, (2, 3), which), (2, 3), which), r)


def test_partial_trace_of_bell_state():
    eps = max_ent_state(2)
    assert maxabs(partial_trace(eps, (2, 2), "first") - np.eye(2) / 2) <= 1e-15
    assert maxabs(partial_trace(eps, (2, 2), "second") - np.eye(2) / 2) <= 1e-15


@given(seed=seeds)
def test_partial_trace_of_product(seed):
    a, b = density(2, seed), density(3, seed + 1)
    assert maxabs(partial_trace(np.kron(a, b), (2, 3), "second") - a) <= 1e-14
    assert maxabs(partial_trace(np.kron(a, b), (2, 3), "first") - b) <= 1e-14


def test_partial_trace_bad_dims():
    with pytest.raises(InvalidArgumentError):
        partial_trace(np.eye(6), (2, 2))


def test_kron_variadic():
    x = np.array([[0, 1], [1, 0]])
    assert kron(x, x, x).shape == (8, 8)
    assert np.array_equal(kron(x), x)


def test_is_hermitian():
    assert is_hermitian(PAULI_Z)
    assert not is_hermitian(np.array([[0, 1], [0, 0]]))


@given(seed=seeds, d=st.integers(1, 6))
def test_random_unitary_is_unitary(seed, d):
    u = random_unitary_matrix(d, np.random.default_rng(seed))
    assert maxabs(u.conj().T @ u - np.eye(d)) <= 1e-12


@given(seed=seeds)
def test_orthonormal_completion_extends(seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2)))
    u = orthonormal_completion(q)
    assert u.shape == (5, 5)
    assert maxabs(u.conj().T @ u - np.eye(5)) <= 1e-12
    assert maxabs(u[:, :2] - q) <= 1e-12
