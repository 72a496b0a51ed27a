import numpy as np
import pytest

from bosefock.numkit import (
    NotHermitianError,
    SpectralDomainError,
    hermitian_eig,
    matrix_function,
    operator_norm,
    random_hermitian,
    solve_shifted,
)

METHODS = ["lapack", "jacobi"]


@pytest.mark.parametrize("method", METHODS)
def test_identity_and_diagonal(method):
    e = hermitian_eig(np.eye(3), method)
    np.testing.assert_allclose(e.eigenvalues, [1, 1, 1])
    np.testing.assert_allclose(e.vectors.conj().T @ e.vectors, np.eye(3), atol=1e-12)
    e = hermitian_eig(np.diag([2.0, -1.0]), method)
    np.testing.assert_allclose(e.eigenvalues, [-1, 2])


@pytest.mark.parametrize("method", METHODS)
def test_pauli_x(method):
    e = hermitian_eig(np.array([[0, 1], [1, 0]], dtype=complex), method)
    np.testing.assert_allclose(e.eigenvalues, [-1, 1], atol=1e-14)
    s = 1 / np.sqrt(2)
    assert abs(abs(np.vdot(e.vectors[:, 0], [s, -s])) - 1) < 1e-12
    assert abs(abs(np.vdot(e.vectors[:, 1], [s, s])) - 1) < 1e-12


@pytest.mark.parametrize("method", METHODS)
def test_reconstruction_and_unitarity(method, rng):
    count = 100 if method == "lapack" else 20
    for _ in range(count):
        dim = int(rng.integers(2, 65 if method == "lapack" else 17))
        M = random_hermitian(dim, rng)
        e = hermitian_eig(M, method)
        scale = max(1.0, np.max(np.abs(e.eigenvalues)))
        assert np.max(np.abs(M - e.reconstruct())) <= 1e-9 * scale
        assert np.max(np.abs(e.vectors.conj().T @ e.vectors - np.eye(dim))) <= 1e-10
        assert np.all(np.diff(e.eigenvalues) >= 0)


def test_jacobi_matches_lapack(rng):
    M = random_hermitian(12, rng)
    np.testing.assert_allclose(hermitian_eig(M, "jacobi").eigenvalues,
                               hermitian_eig(M).eigenvalues, atol=1e-11)


def test_deterministic(rng):
    M = random_hermitian(9, rng)
    a, b = hermitian_eig(M), hermitian_eig(M.copy())
    assert np.array_equal(a.vectors, b.vectors)


def test_rejects_non_hermitian():
    with pytest.raises(NotHermitianError) as err:
        hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))
    assert err.value.asymmetry == pytest.approx(1.0)


def test_matrix_function_examples(rng):
    M = random_hermitian(5, rng)
    np.testing.assert_allclose(matrix_function(M, lambda x: x), M, atol=1e-10)
    np.testing.assert_allclose(matrix_function(M, lambda x: np.exp(0j * x)), np.eye(5), atol=1e-12)
    out = matrix_function(np.diag([1.0, 2.0]), lambda x: 1 / (1j + x))
    np.testing.assert_allclose(out, np.diag([1 / (1j + 1), 1 / (1j + 2)]), atol=1e-14)


def test_matrix_function_composition(rng):
    M = random_hermitian(6, rng)
    inner = matrix_function(M, lambda x: x**2)
    np.testing.assert_allclose(matrix_function(inner, np.exp),
                               matrix_function(M, lambda x: np.exp(x**2)), atol=1e-9, rtol=1e-9)


def test_matrix_function_real_is_hermitian(rng):
    out = matrix_function(random_hermitian(7, rng), np.cos)
    assert np.max(np.abs(out - out.conj().T)) <= 1e-10


def test_matrix_function_singular():
    with pytest.raises(SpectralDomainError) as err:
        with np.errstate(divide="ignore"):
            matrix_function(np.diag([0.0, 1.0]), lambda x: 1 / x)
    assert err.value.eigenvalue == 0.0


def test_solve_shifted(rng):
    np.testing.assert_allclose(solve_shifted(np.zeros((1, 1)), 1.0, np.eye(1)), [[-1j]])
    np.testing.assert_allclose(solve_shifted(np.diag([3.0]), 2.0, np.eye(1)), [[1 / (2j + 3)]])
    M = random_hermitian(4, rng)
    B = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    X = solve_shifted(M, 0.7, B)
    assert np.max(np.abs((1j * 0.7 * np.eye(4) + M) @ X - B)) <= 1e-10 * np.max(np.abs(B))
    np.testing.assert_allclose(X, matrix_function(M, lambda x: 1 / (0.7j + x)) @ B, atol=1e-9)
    with pytest.raises(ValueError):
        solve_shifted(M, 0.0, B)


def test_operator_norm(rng):
    assert operator_norm(np.eye(4)) == pytest.approx(1.0)
    assert operator_norm(np.diag([3.0, -5.0])) == pytest.approx(5.0)
    M = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    top = np.sqrt(np.max(np.linalg.eigvalsh(M.conj().T @ M)))
    assert operator_norm(M) == pytest.approx(top, rel=1e-8)
    assert operator_norm(M[:, :2]) == pytest.approx(np.linalg.svd(M[:, :2])[1][0], rel=1e-8)


def test_operator_norm_submultiplicative(rng):
    for _ in range(50):
        A = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        B = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        assert operator_norm(A @ B) <= operator_norm(A) * operator_norm(B) + 1e-8
