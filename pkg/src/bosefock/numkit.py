"""Dense complex linear-algebra kernels.

Everything downstream (propagators, resolvents, Gibbs densities, seminorms)
goes through the few functions here, so tolerances live in one place.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-12
    unitarity: float = 1e-10
    reconstruction: float = 1e-9
    jacobi_offdiag: float = 1e-14
    jacobi_max_sweeps: int = 100
    overflow: float = 1e300


TOL = Tolerances()


class NotHermitianError(ValueError):
    def __init__(self, asymmetry: float, bound: float):
        super().__init__(
            f"matrix is not Hermitian: max |M - M^H| = {asymmetry:.3e} > {bound:.3e}"
        )
        self.asymmetry = asymmetry


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, residual: float):
        super().__init__(f"{msg} (residual {residual:.3e})")
        self.residual = residual


class SpectralDomainError(ValueError):
    def __init__(self, eigenvalue: float):
        super().__init__(f"function is singular at eigenvalue {eigenvalue!r}")
        self.eigenvalue = eigenvalue


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending real eigenvalues and a unitary matrix of column eigenvectors."""

    eigenvalues: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.eigenvalues) @ self.vectors.conj().T


def hermitian_asymmetry(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    return float(np.max(np.abs(m - m.conj().T)))


def check_hermitian(m: np.ndarray, tol: Tolerances = TOL) -> None:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    asym = hermitian_asymmetry(m)
    if asym > tol.hermitian * scale:
        raise NotHermitianError(asym, tol.hermitian * scale)


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    # largest component of every column made real positive; ties -> lowest index
    idx = np.argmax(np.abs(vectors), axis=0)
    piv = vectors[idx, np.arange(vectors.shape[1])]
    phase = np.where(np.abs(piv) > 0, piv / np.abs(piv), 1.0)
    return vectors / phase


def jacobi_eig(m: np.ndarray, tol: Tolerances = TOL) -> EigenDecomposition:
    """Cyclic Jacobi diagonalization of a complex Hermitian matrix.

    Each rotation first removes the phase of the pivot element and then
    applies a real plane rotation, so the accumulated transform stays unitary.
    Sweeps stop once the off-diagonal Frobenius mass falls below
    ``tol.jacobi_offdiag * ||M||_F``.
    """
    check_hermitian(m, tol)
    a = np.array(m, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    fro = np.linalg.norm(a)
    target = tol.jacobi_offdiag * fro

    def off(x):
        return np.linalg.norm(x - np.diag(np.diag(x)))

    for _ in range(tol.jacobi_max_sweeps):
        if off(a) <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = a[p, q]
                r = abs(b)
                if r <= target / n:
                    continue
                phase = b / r
                theta = 0.5 * np.arctan2(2.0 * r, (a[q, q] - a[p, p]).real)
                c, s = np.cos(theta), np.sin(theta)
                # R = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                r00, r01 = c, s
                r10, r11 = -s * np.conj(phase), c * np.conj(phase)
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = cp * r00 + cq * r10
                a[:, q] = cp * r01 + cq * r11
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = np.conj(r00) * rp + np.conj(r10) * rq
                a[q, :] = np.conj(r01) * rp + np.conj(r11) * rq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = vp * r00 + vq * r10
                v[:, q] = vp * r01 + vq * r11
    else:
        res = off(a)
        if res > target:
            raise ConvergenceError(
                f"Jacobi did not converge in {tol.jacobi_max_sweeps} sweeps", res
            )
    w = np.diag(a).real
    order = np.argsort(w, kind="stable")
    return EigenDecomposition(w[order], _fix_phases(v[:, order]))


def hermitian_eig(
    m: np.ndarray, method: str = "lapack", tol: Tolerances = TOL
) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    ``method="jacobi"`` runs the cyclic Jacobi solver above; the default uses
    LAPACK's ``zheevd`` which is what the sector propagators need at
    dimensions in the thousands.
    """
    if method == "jacobi":
        return jacobi_eig(m, tol)
    if method != "lapack":
        raise ValueError(f"unknown eigensolver {method!r}")
    check_hermitian(m, tol)
    m = np.asarray(m, dtype=complex)
    if m.shape[0] == 0:
        return EigenDecomposition(np.zeros(0), np.zeros((0, 0), dtype=complex))
    w, v = scipy.linalg.eigh(0.5 * (m + m.conj().T), driver="evd")
    order = np.argsort(w, kind="stable")
    return EigenDecomposition(w[order], _fix_phases(v[:, order]))


def matrix_function(
    m: np.ndarray | EigenDecomposition,
    g: Callable[[np.ndarray], np.ndarray],
    tol: Tolerances = TOL,
) -> np.ndarray:
    """Return ``U g(Lambda) U^H``; ``g`` is applied to the eigenvalue array."""
    eig = m if isinstance(m, EigenDecomposition) else hermitian_eig(m, tol=tol)
    vals = np.asarray(g(eig.eigenvalues), dtype=complex)
    if vals.shape != eig.eigenvalues.shape:
        vals = np.broadcast_to(vals, eig.eigenvalues.shape)
    bad = ~np.isfinite(vals) | (np.abs(vals) > tol.overflow)
    if np.any(bad):
        raise SpectralDomainError(float(eig.eigenvalues[np.argmax(bad)]))
    out = (eig.vectors * vals) @ eig.vectors.conj().T
    if np.all(vals.imag == 0):
        out = 0.5 * (out + out.conj().T)
    return out


def solve_shifted(m: np.ndarray, lam: float, b: np.ndarray) -> np.ndarray:
    """Solve ``(i lam + M) X = B`` for Hermitian ``M``; ``lam`` must be nonzero."""
    if lam == 0:
        raise ValueError("resolvent parameter lambda must be nonzero")
    m = np.asarray(m, dtype=complex)
    shifted = m + 1j * lam * np.eye(m.shape[0])
    return scipy.linalg.solve(shifted, np.asarray(b, dtype=complex))


def operator_norm(m: np.ndarray) -> float:
    """Largest singular value, from the top eigenvalue of ``M^H M``."""
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    if m.shape[0] == m.shape[1] and hermitian_asymmetry(m) == 0.0:
        return float(np.max(np.abs(scipy.linalg.eigvalsh(m))))
    gram = m.conj().T @ m if m.shape[0] >= m.shape[1] else m @ m.conj().T
    top = scipy.linalg.eigvalsh(0.5 * (gram + gram.conj().T))[-1]
    return float(np.sqrt(max(top, 0.0)))


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (x + x.conj().T)
