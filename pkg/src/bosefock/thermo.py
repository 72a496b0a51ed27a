"""Renormalized Hamiltonians, Gibbs states, KMS and trial-state energies."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fock
from .dynamics import HamiltonianSpec, Trap, _hopping, sector_hamiltonian
from .fock import FockBasis
from .lattice import Grid, WaveFn, laplacian
from .numkit import hermitian_eig
from .reports import CheckReport


def ground_energy(spec: HamiltonianSpec, n: int) -> float:
    """E(n) = -min spec(H_n) (shifts in ``spec`` are ignored)."""
    bare = HamiltonianSpec(spec.grid, spec.V, spec.trap)
    if n == 0:
        return 0.0
    H = sector_hamiltonian(bare, n).block
    return -float(hermitian_eig(H).eigenvalues[0])


def renormalize(spec: HamiltonianSpec, nmax: int) -> HamiltonianSpec:
    """H_r = H + E(N) on sectors 0..nmax."""
    shifts = {n: ground_energy(spec, n) for n in range(nmax + 1)}
    return HamiltonianSpec(spec.grid, spec.V, spec.trap, 0.0, shifts)


@dataclass
class PositiveTypeResult:
    accepted: bool
    transform: np.ndarray
    min_energy: float | None = None


def positive_type_check(grid: Grid, table: np.ndarray, nmax: int = 0,
                        trap: Trap | None = None) -> PositiveTypeResult:
    """Accept V iff the DFT of the row V(x_j - x_0) is nonnegative (periodic grid).

    With ``nmax > 0`` also returns min spec(H + V(0) N) over sectors 1..nmax.
    """
    if not grid.periodic:
        raise ValueError("positive-type test needs a periodic grid")
    row = np.asarray(table, dtype=float)[:, 0]
    transform = np.fft.fft(row)
    accepted = bool(np.min(transform.real) >= -1e-12 * max(1.0, np.max(np.abs(row))))
    min_e = None
    if accepted and nmax > 0:
        spec = HamiltonianSpec(grid, table, trap or Trap(), chemical_shift=float(table[0, 0]))
        min_e = min(
            float(hermitian_eig(sector_hamiltonian(spec, n).block).eigenvalues[0])
            for n in range(1, nmax + 1)
        )
    return PositiveTypeResult(accepted, transform, min_e)


@dataclass
class GibbsState:
    beta: float
    mu: float
    rho: np.ndarray
    Z: float  # shifted partition value sum exp(-beta (k - k_min))
    k_min: float  # shift used
    energies: np.ndarray  # spectrum of K = H - mu N on the truncated space
    vectors: np.ndarray
    basis: FockBasis
    flagged: bool = False

    @property
    def log_Z(self) -> float:
        return math.log(self.Z) - self.beta * self.k_min

    def expect(self, A: np.ndarray) -> complex:
        return complex(np.trace(self.rho @ A))


class ChemicalPotentialError(ValueError):
    pass


def _spectrum(spec: HamiltonianSpec, basis: FockBasis, mu: float):
    energies, blocks = [], []
    for n in range(basis.nmax + 1):
        H = sector_hamiltonian(spec, n, basis).block - mu * n * np.eye(basis.sector_dims[n])
        e = hermitian_eig(H)
        energies.append(e.eigenvalues)
        blocks.append(e.vectors)
    vec = np.zeros((basis.dim, basis.dim), dtype=complex)
    for n, U in enumerate(blocks):
        sl = basis.sector_slice(n)
        vec[sl, sl] = U
    return np.concatenate(energies), vec


def gibbs_state(spec: HamiltonianSpec, basis: FockBasis, beta: float, mu: float,
                allow_any_mu: bool = False) -> GibbsState:
    """rho = exp(-beta (H_L - mu N)) / Z, built after a spectral shift."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    if not spec.trap.finite:
        raise ValueError("Gibbs states are built for a finite trap L")
    v0 = float(spec.V[0, 0]) if spec.V is not None else 0.0
    flagged = False
    if mu > -v0:
        if not allow_any_mu:
            raise ChemicalPotentialError(f"mu = {mu} exceeds -V(0) = {-v0}")
        warnings.warn("chemical potential above -V(0); state flagged", stacklevel=2)
        flagged = True
    k, U = _spectrum(spec, basis, mu)
    k_min = float(np.min(k))
    w = np.exp(-beta * (k - k_min))
    Z = float(np.sum(w))
    rho = (U * (w / Z)) @ U.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return GibbsState(beta, mu, rho, Z, k_min, k, U, basis, flagged)


def kms_residual(gs: GibbsState, A: np.ndarray, B: np.ndarray, t: float,
                 rho: np.ndarray | None = None) -> float:
    """|omega(A alpha_{t+i beta}(B)) - omega(alpha_t(B) A)| for the dynamics of K = H - mu N.

    ``rho`` overrides the density (detector tests); the analytic continuation
    is always taken with the Gibbs generator.
    """
    U, k, beta = gs.vectors, gs.energies, gs.beta
    Ae = U.conj().T @ A @ U
    Be = U.conj().T @ B @ U
    diff = k[:, None] - k[None, :]
    if rho is None:
        # both sides diagonal in the eigenbasis; weights combine to exp(-beta k_b)
        wb = np.exp(-beta * (k - gs.k_min)) / gs.Z
        phase = np.exp(1j * t * diff)  # (a, b) -> e^{it(k_a - k_b)}
        lhs = np.sum((wb[None, :] * phase.T) * Ae * Be.T)
        rhs = np.sum((wb[:, None] * phase) * Be * Ae.T)
        return float(abs(lhs - rhs))
    R = U.conj().T @ rho @ U
    Bt = np.exp(1j * t * diff) * Be
    # Tr(rho A e^{-bK} B_t e^{bK}) = Tr(e^{bK} rho A e^{-bK} B_t); with K shifted to
    # start at 0 every factor stays bounded when rho is close to Gibbs
    ks = k - gs.k_min
    lhs = np.trace((np.exp(beta * ks)[:, None] * R) @ Ae @ (np.exp(-beta * ks)[:, None] * Bt))
    rhs = np.trace(R @ Bt @ Ae)
    return float(abs(lhs - rhs))


def perturbed_density(gs: GibbsState, eps: float, rng: np.random.Generator) -> np.ndarray:
    """(rho + eps X)/trace with X a random positive matrix (not commuting with K)."""
    d = gs.rho.shape[0]
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    X = X @ X.conj().T
    X /= np.trace(X).real
    out = gs.rho + eps * X
    return out / np.trace(out).real


def golden_thompson_check(spec: HamiltonianSpec, basis: FockBasis, beta: float) -> CheckReport:
    """Tr exp(-beta H_Lr) <= Tr exp(-beta H_0L) with H_Lr = H_L + V(0) N."""
    if spec.V is not None and not positive_type_check(spec.grid, spec.V).accepted:
        return CheckReport("golden_thompson", math.nan, 0.0, passed=True,
                           note="skipped: potential not of positive type", params={"beta": beta})
    v0 = float(spec.V[0, 0]) if spec.V is not None else 0.0
    inter = HamiltonianSpec(spec.grid, spec.V, spec.trap, chemical_shift=v0)
    free = HamiltonianSpec(spec.grid, None, spec.trap)
    ki, _ = _spectrum(inter, basis, 0.0)
    kf, _ = _spectrum(free, basis, 0.0)
    zi = float(np.sum(np.exp(-beta * ki)))
    zf = float(np.sum(np.exp(-beta * kf)))
    return CheckReport(
        "golden_thompson", value=zi - zf, bound=0.0, tolerance=1e-10,
        params={"beta": beta, "Z_interacting": zi, "Z_free": zf},
    )


# condensate trial states

def scaled_profile(grid: Grid, f: Callable, L_scale: float, edge_tol: float = 1e-8) -> WaveFn:
    """Discretized L^{-1/2} f(x/L), renormalized; rejects profiles reaching the edge."""
    x = grid.positions
    amps = L_scale**-0.5 * np.asarray(f(x / L_scale), dtype=complex)
    peak = np.max(np.abs(amps))
    if peak == 0 or max(abs(amps[0]), abs(amps[-1])) > edge_tol * peak:
        raise ValueError(f"profile at scale {L_scale} does not fit on the grid")
    return WaveFn(grid, amps).normalize()


@dataclass
class CondensateResult:
    n: int
    energy: float
    one_body: float
    state: np.ndarray

    @property
    def identity_gap(self) -> float:
        return abs(self.energy - self.n * self.one_body)


def condensate_energy(grid: Grid, f: Callable, L_scale: float, n: int) -> CondensateResult:
    """<Psi, H0 Psi> for the normalized condensate (n!)^{-1/2} a*(f_L)^n Omega."""
    fL = scaled_profile(grid, f, L_scale)
    basis = fock.enumerate_basis(grid.d, n, budget=2**62)
    psi = fock.product_state(basis, [fL] * n)
    psi = psi / np.linalg.norm(psi)
    K = laplacian(grid)
    H0 = _hopping(basis, K, n)
    energy = float(np.vdot(psi, H0 @ psi).real)
    one = float(fL.inner(WaveFn(grid, K @ fL.amplitudes)).real)
    return CondensateResult(n, energy, one, psi)
