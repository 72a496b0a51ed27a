"""Hamiltonians, exact evolution, the Dyson expansion, and trap/free-limit checks."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import fock
from .fock import FockBasis, FullOperator, LocalOperator, SectorOperator
from .lattice import Grid, WaveFn, laplacian, momentum
from .numkit import EigenDecomposition, hermitian_eig, matrix_function, operator_norm
from .reports import CheckReport, strictly_decreasing


@dataclass(frozen=True)
class Trap:
    """Harmonic confinement x^2/L^4; ``L=None`` is the untrapped case."""

    L: Optional[float] = None

    def __post_init__(self):
        if self.L is not None and not self.L > 0:
            raise ValueError(f"trap length must be positive, got {self.L}")

    @classmethod
    def infinite(cls) -> "Trap":
        return cls(None)

    @property
    def finite(self) -> bool:
        return self.L is not None

    @property
    def coefficient(self) -> float:
        return 0.0 if self.L is None else self.L**-4.0

    def c(self, s):
        return np.ones_like(np.asarray(s, float)) if self.L is None else np.cos(2 * np.asarray(s) / self.L**2)

    def s(self, s):
        s = np.asarray(s, float)
        return 2 * s if self.L is None else self.L**2 * np.sin(2 * s / self.L**2)

    def __str__(self):
        return "inf" if self.L is None else f"{self.L:g}"


@dataclass
class HamiltonianSpec:
    grid: Grid
    V: Optional[np.ndarray] = None  # pair table V(x_j - x_k)
    trap: Trap = field(default_factory=Trap)
    chemical_shift: float = 0.0  # coefficient of N
    sector_shift: dict = field(default_factory=dict)  # n -> E(n)

    def __post_init__(self):
        if self.V is not None:
            self.V = np.asarray(self.V, dtype=float)
            if self.V.shape != (self.grid.d, self.grid.d):
                raise ValueError("pair table does not match the grid")
            if np.max(np.abs(self.V - self.V.T)) > 0:
                raise ValueError("pair table must be symmetric")

    @property
    def interacting(self) -> bool:
        return self.V is not None and bool(np.any(self.V != 0))

    def free(self) -> "HamiltonianSpec":
        return HamiltonianSpec(self.grid, None, self.trap)

    def with_trap(self, trap: Trap) -> "HamiltonianSpec":
        return HamiltonianSpec(self.grid, self.V, trap, self.chemical_shift, dict(self.sector_shift))

    @property
    def tag(self) -> str:
        h = hashlib.sha1()
        h.update(repr((self.grid, str(self.trap), self.chemical_shift,
                       sorted(self.sector_shift.items()))).encode())
        if self.V is not None:
            h.update(np.ascontiguousarray(self.V).tobytes())
        return h.hexdigest()

    def one_body(self) -> np.ndarray:
        return laplacian(self.grid) + np.diag(self.trap.coefficient * self.grid.positions**2)

    def max_V(self) -> float:
        return 0.0 if self.V is None else float(np.max(np.abs(self.V)))


def _hopping(basis: FockBasis, K: np.ndarray, n: int) -> sp.csr_matrix:
    dim = basis.sector_dims[n]
    out = sp.csr_matrix((dim, dim), dtype=complex)
    if n == 0:
        return out
    for a, b in zip(*np.nonzero(K)):
        out = out + K[a, b] * (basis.sector_raise(a, n - 1) @ basis.sector_raise(b, n - 1).T)
    return out


def interaction_diagonal(spec: HamiltonianSpec, occ: np.ndarray) -> np.ndarray:
    """sum_ab V_ab a*_a a*_b a_b a_a on occupation rows: n.V.n - sum_a V_aa n_a."""
    if spec.V is None:
        return np.zeros(occ.shape[0])
    o = occ.astype(float)
    return np.einsum("ia,ab,ib->i", o, spec.V, o) - o @ np.diag(spec.V)


def sector_hamiltonian(spec: HamiltonianSpec, n: int, basis: FockBasis | None = None,
                       interaction: bool = True) -> SectorOperator:
    """H_n in the occupation basis of F_n (second-quantized route)."""
    basis = basis or fock.enumerate_basis(spec.grid.d, n, budget=2**62)
    occ = basis.occupations[n]
    H = _hopping(basis, spec.one_body(), n).toarray()
    diag = spec.chemical_shift * n + spec.sector_shift.get(n, 0.0)
    if interaction:
        diag = diag + interaction_diagonal(spec, occ)
    H[np.diag_indices_from(H)] += diag
    return SectorOperator(n, 0.5 * (H + H.conj().T))


def tensor_hamiltonian(spec: HamiltonianSpec, n: int, budget: int = fock.DEFAULT_BUDGET) -> sp.csr_matrix:
    """First-quantized H_n on (C^d)^{(x)n}: sum_i K_i + sum_{j != k} V(x_j - x_k)."""
    d = spec.grid.d
    fock._check_budget(f"tensor Hamiltonian d^{n}", d**n * (3 * n + 1), budget)
    K = sp.csr_matrix(spec.one_body())
    I = sp.identity(d, format="csr")
    H = sp.csr_matrix((d**n, d**n), dtype=complex)
    for i in range(n):
        term = sp.identity(1, format="csr")
        for j in range(n):
            term = sp.kron(term, K if j == i else I, format="csr")
        H = H + term
    if spec.V is not None and n >= 2:
        tuples = fock._tuple_table(d, n)
        pot = np.zeros(d**n)
        for j in range(n):
            for k in range(n):
                if j != k:
                    pot += spec.V[tuples[:, j], tuples[:, k]]
        H = H + sp.diags(pot)
    shift = spec.chemical_shift * n + spec.sector_shift.get(n, 0.0)
    if shift:
        H = H + shift * sp.identity(d**n)
    return H.tocsr()


def sector_hamiltonian_tensor(spec: HamiltonianSpec, n: int) -> SectorOperator:
    if n == 0:
        return SectorOperator(0, [[spec.sector_shift.get(0, 0.0)]])
    S = fock.symmetrizer(spec.grid.d, n)
    return SectorOperator(n, (S.conj().T @ tensor_hamiltonian(spec, n) @ S).toarray())


def full_hamiltonian(spec: HamiltonianSpec, basis: FockBasis) -> FullOperator:
    mat = np.zeros((basis.dim, basis.dim), dtype=complex)
    for n in range(basis.nmax + 1):
        sl = basis.sector_slice(n)
        mat[sl, sl] = sector_hamiltonian(spec, n, basis).block
    return FullOperator(basis, mat, True)


class StaleCacheError(RuntimeError):
    pass


class PropagatorCache:
    """Per-sector eigendecompositions of H_n, built on demand."""

    def __init__(self, spec: HamiltonianSpec, basis: FockBasis | None = None,
                 interaction: bool = True):
        self.spec = spec
        self.tag = spec.tag
        self.interaction = interaction
        self.basis = basis
        self._eig: dict[int, EigenDecomposition] = {}

    def _basis(self, n: int) -> FockBasis:
        if self.basis is not None and n <= self.basis.nmax:
            return self.basis
        return fock.enumerate_basis(self.spec.grid.d, n, budget=2**62)

    def check(self, spec: HamiltonianSpec | None = None) -> None:
        if self.spec.tag != self.tag or (spec is not None and spec.tag != self.tag):
            raise StaleCacheError("propagator cache does not match the Hamiltonian spec")

    def eig(self, n: int) -> EigenDecomposition:
        self.check()
        if n not in self._eig:
            H = sector_hamiltonian(self.spec, n, self._basis(n), self.interaction)
            self._eig[n] = hermitian_eig(H.block)
        return self._eig[n]

    def unitary(self, n: int, t: float) -> np.ndarray:
        """e^{-itH_n}."""
        e = self.eig(n)
        return (e.vectors * np.exp(-1j * t * e.eigenvalues)) @ e.vectors.conj().T

    def evolve_vector(self, v: np.ndarray, n: int, t: float) -> np.ndarray:
        e = self.eig(n)
        return e.vectors @ (np.exp(-1j * t * e.eigenvalues) * (e.vectors.conj().T @ v))

    def heisenberg_block(self, A: np.ndarray, n: int, t: float, m: int | None = None) -> np.ndarray:
        """e^{itH_n} A e^{-itH_m} for a block F_m -> F_n."""
        m = n if m is None else m
        en, em = self.eig(n), self.eig(m)
        inner = en.vectors.conj().T @ A @ em.vectors
        inner = np.exp(1j * t * en.eigenvalues)[:, None] * inner * np.exp(-1j * t * em.eigenvalues)[None, :]
        return en.vectors @ inner @ em.vectors.conj().T


def heisenberg_evolve(cache: PropagatorCache, A, t: float, spec: HamiltonianSpec | None = None):
    """alpha(t)(A) = e^{itH} A e^{-itH} for FullOperator or SectorOperator."""
    cache.check(spec)
    if isinstance(A, SectorOperator):
        return SectorOperator(A.n, cache.heisenberg_block(A.block, A.n, t))
    basis = A.basis
    out = np.zeros_like(A.matrix)
    for n in range(basis.nmax + 1):
        for m in range(basis.nmax + 1):
            blk = A.block(n, m)
            if np.any(blk != 0):
                out[basis.sector_slice(n), basis.sector_slice(m)] = cache.heisenberg_block(blk, n, t, m)
    return FullOperator(basis, out, A.conserves_N)


def potential_block(spec: HamiltonianSpec, n: int) -> np.ndarray:
    """Diagonal of V_n = sum_{j != k} V(Q_j - Q_k) on F_n."""
    basis = fock.enumerate_basis(spec.grid.d, n, budget=2**62)
    return interaction_diagonal(spec, basis.occupations[n])


# Dyson expansion of gamma(t) = Ad(e^{itH0} e^{-itH})

@dataclass
class DysonTerm:
    order: int
    value: SectorOperator
    steps: int
    bound: float
    cauchy_gap: float


@dataclass
class DysonResult:
    value: SectorOperator
    terms: list
    tail_bound: float
    V_norm: float
    steps: int
    quad_tol: float


class QuadratureError(RuntimeError):
    def __init__(self, gap: float, steps: int):
        super().__init__(f"Dyson quadrature not converged at {steps} steps (Cauchy gap {gap:.3e})")
        self.gap = gap


class _InteractionPicture:
    def __init__(self, spec: HamiltonianSpec, n: int):
        basis = fock.enumerate_basis(spec.grid.d, n, budget=2**62)
        H0 = sector_hamiltonian(spec, n, basis, interaction=False).block
        self.eig0 = hermitian_eig(H0)
        self.vdiag = interaction_diagonal(spec, basis.occupations[n])
        U = self.eig0.vectors
        self.Vt = U.conj().T @ (self.vdiag[:, None] * U)  # V in the H0 eigenbasis
        self.gaps = self.eig0.eigenvalues[:, None] - self.eig0.eigenvalues[None, :]
        self.V_norm = float(np.max(np.abs(self.vdiag))) if self.vdiag.size else 0.0

    def to_eig(self, B):
        U = self.eig0.vectors
        return U.conj().T @ B @ U

    def from_eig(self, B):
        U = self.eig0.vectors
        return U @ B @ U.conj().T

    def V_at(self, s: float) -> np.ndarray:
        return np.exp(1j * s * self.gaps) * self.Vt


def _cumulative_simpson(vals: np.ndarray, dt: float) -> np.ndarray:
    """Running integral from node 0 on an equispaced grid (4th-order at even nodes)."""
    out = np.zeros_like(vals)
    if vals.shape[0] < 3:
        raise ValueError("need at least 3 nodes")
    out[1] = dt * (5 * vals[0] + 8 * vals[1] - vals[2]) / 12
    for k in range(2, vals.shape[0]):
        out[k] = out[k - 2] + dt * (vals[k - 2] + 4 * vals[k - 1] + vals[k]) / 3
    return out


def _dyson_levels(ip: _InteractionPicture, C_eig: np.ndarray, t: float, order: int, steps: int):
    """D_1(t)..D_order(t) (H0 eigenbasis) with ``steps`` Simpson intervals."""
    s = np.linspace(0.0, t, steps + 1)
    dt = t / steps
    Vs = np.stack([ip.V_at(x) for x in s])
    prev = np.broadcast_to(C_eig, Vs.shape)
    out = []
    for _ in range(order):
        integrand = 1j * (prev @ Vs - Vs @ prev)
        prev = _cumulative_simpson(integrand, dt)
        out.append(prev[-1].copy())
    return out


def dyson_expansion(spec: HamiltonianSpec, n: int, C: SectorOperator, t: float, order: int,
                    steps: int = 16, quad_tol: float = 1e-8, max_steps: int = 2**12) -> DysonResult:
    if order < 0:
        raise ValueError("order must be nonnegative")
    if steps < 4 or steps % 2:
        raise ValueError("steps must be an even number >= 4")
    ip = _InteractionPicture(spec, n)
    C_eig = ip.to_eig(C.block)
    c_norm = operator_norm(C.block)
    terms, levels, gap = [], [], 0.0
    if order and t != 0:
        levels = _dyson_levels(ip, C_eig, t, order, steps)
        while True:
            finer = _dyson_levels(ip, C_eig, t, order, 2 * steps)
            gap = max(operator_norm(a - b) for a, b in zip(levels, finer))
            levels, steps = finer, 2 * steps
            if gap <= quad_tol * max(c_norm, 1e-300):
                break
            if 2 * steps > max_steps:
                raise QuadratureError(gap, steps)
    elif order:
        levels = [np.zeros_like(C_eig) for _ in range(order)]
    x = 2 * abs(t) * ip.V_norm
    value = C.block.copy()
    for l, D in enumerate(levels, start=1):
        Dx = ip.from_eig(D)
        value = value + Dx
        terms.append(DysonTerm(l, SectorOperator(n, Dx), steps, x**l / math.factorial(l) * c_norm, gap))
    return DysonResult(SectorOperator(n, value), terms, dyson_tail(x, order) * c_norm,
                       ip.V_norm, steps, quad_tol)


def dyson_tail(x: float, order: int) -> float:
    """sum_{l > order} x^l / l!, computed without cancellation."""
    if x == 0:
        return 0.0
    term = x ** (order + 1) / math.factorial(order + 1)
    total, l = 0.0, order + 1
    while term > 1e-17 * max(total, 1e-300) or l < order + 3:
        total += term
        l += 1
        term *= x / l
    return total


def dyson_term(spec: HamiltonianSpec, n: int, C: SectorOperator, t: float, l: int,
               steps: int = 16, quad_tol: float = 1e-8) -> DysonTerm:
    if l < 1:
        raise ValueError("Dyson terms start at order 1")
    return dyson_expansion(spec, n, C, t, l, steps, quad_tol).terms[l - 1]


def dyson_cocycle(spec: HamiltonianSpec, n: int, C: SectorOperator, t: float, order: int,
                  steps: int = 16, quad_tol: float = 1e-8) -> DysonResult:
    return dyson_expansion(spec, n, C, t, order, steps, quad_tol)


def exact_cocycle(spec: HamiltonianSpec, n: int, C: SectorOperator, t: float) -> SectorOperator:
    """gamma(t)(C) = Gamma C Gamma^*, Gamma = e^{itH0} e^{-itH}."""
    full = PropagatorCache(spec)
    free = PropagatorCache(spec, interaction=False)
    gamma = free.unitary(n, -t) @ full.unitary(n, t)
    return SectorOperator(n, gamma @ C.block @ gamma.conj().T)


# two-slot interaction picture potentials

def _two_slot(spec: HamiltonianSpec) -> tuple[np.ndarray, np.ndarray]:
    """Relative position and momentum Q_1 - Q_2, P_1 - P_2 on C^d (x) C^d."""
    g = spec.grid
    I = np.eye(g.d)
    x = g.positions
    if g.periodic:
        Qrel = np.diag(g.separation(*np.divmod(np.arange(g.d**2), g.d)))
    else:
        Qrel = np.diag((x[:, None] - x[None, :]).ravel())
    P = momentum(g)
    return Qrel, np.kron(P, I) - np.kron(I, P)


def pair_potential_operator(spec: HamiltonianSpec) -> np.ndarray:
    return np.diag(spec.V.ravel().astype(complex))


def interaction_potential_t(spec: HamiltonianSpec, s: float, route: str = "propagator",
                            V: Callable | None = None) -> np.ndarray:
    """V_{jk}(s) = e^{isH0} V(Q_j - Q_k) e^{-isH0} on the two-slot space.

    ``route="propagator"`` conjugates with the grid one-body propagator;
    ``route="closed_form"`` evaluates V(c(s) Q_rel + s(s) P_rel) by functional
    calculus (needs the potential profile ``V``).
    """
    if route == "propagator":
        if spec.V is None:
            return np.zeros((spec.grid.d**2,) * 2, dtype=complex)
        e = hermitian_eig(spec.one_body())
        u1 = (e.vectors * np.exp(1j * s * e.eigenvalues)) @ e.vectors.conj().T
        u = np.kron(u1, u1)
        return u @ pair_potential_operator(spec) @ u.conj().T
    if route == "closed_form":
        if V is None:
            raise ValueError("closed form needs the potential profile")
        Qrel, Prel = _two_slot(spec)
        gen = float(spec.trap.c(s)) * Qrel + float(spec.trap.s(s)) * Prel
        return matrix_function(0.5 * (gen + gen.conj().T), lambda w: V(w))
    raise ValueError(f"unknown route {route!r}")


def relative_velocity_projector(grid: Grid, cutoff: float) -> np.ndarray:
    """Projector (two-slot) on plane-wave pairs with |sin(k1 h) - sin(k2 h)|/h >= cutoff.

    (sin k1h - sin k2h)/h is the lattice counterpart of the relative momentum
    k1 - k2 (half the relative group velocity).
    """
    d, h = grid.d, grid.h
    k = 2 * np.pi * np.fft.fftfreq(d, d=h)
    F = np.exp(1j * np.outer(np.arange(d), np.arange(d)) * 2 * np.pi / d) / np.sqrt(d)
    rel = (np.sin(k[:, None] * h) - np.sin(k[None, :] * h)) / h
    keep = (np.abs(rel) >= cutoff - 1e-12).ravel().astype(float)
    F2 = np.kron(F, F)
    return (F2 * keep) @ F2.conj().T


def averaged_potential_profile(spec: HamiltonianSpec, t: float, cutoffs: Sequence[float],
                               nodes: int = 64) -> dict:
    """||(int_0^t V(s) ds) P_c|| and ||V(0) P_c|| over momentum cutoffs p_c."""
    if nodes % 2:
        nodes += 1
    d = spec.grid.d
    if t == 0 or spec.V is None:
        avg = np.zeros((d * d, d * d), dtype=complex)
    else:
        e = hermitian_eig(spec.one_body())
        V0 = spec.V.ravel()
        s = np.linspace(0, t, nodes + 1)
        w = np.full(nodes + 1, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        w *= (t / nodes) / 3
        avg = np.zeros((d * d, d * d), dtype=complex)
        for si, wi in zip(s, w):
            u1 = (e.vectors * np.exp(1j * si * e.eigenvalues)) @ e.vectors.conj().T
            u = np.kron(u1, u1)
            avg += wi * (u * V0[None, :]) @ u.conj().T
    inst = pair_potential_operator(spec) if spec.V is not None else np.zeros_like(avg)
    rows = []
    for pc in cutoffs:
        P = relative_velocity_projector(spec.grid, pc)
        rows.append((pc, operator_norm(avg @ P), operator_norm(inst @ P)))
    return {"cutoff": [r[0] for r in rows], "averaged": [r[1] for r in rows],
            "instantaneous": [r[2] for r in rows]}


# Mehler kernel

class RegularityError(ValueError):
    def __init__(self, tau: float):
        super().__init__(f"tau = {tau!r} lies outside the region of regularity (2 tau in pi L^2 Z)")
        self.tau = tau


def mehler_prefactor(L: float | None, tau: float) -> complex:
    """N_L(tau) with the phase continued through the caustics (Maslov index)."""
    if tau == 0:
        raise RegularityError(tau)
    if L is None:
        val = (4j * np.pi * abs(tau)) ** -0.5
        return complex(val if tau > 0 else np.conj(val))
    theta = 2 * abs(tau) / L**2
    if abs(np.sin(theta)) < 1e-14 * max(1.0, theta):
        raise RegularityError(tau)
    maslov = math.floor(theta / np.pi)
    val = (2 * np.pi * L**2 * abs(np.sin(theta))) ** -0.5 * np.exp(-1j * np.pi / 4 - 1j * np.pi * maslov / 2)
    return complex(val if tau > 0 else np.conj(val))


def mehler_kernel(L: float | None, tau: float, x, y):
    """<x| e^{-i tau (P^2 + Q^2/L^4)} |y>; ``L=None`` is the free kernel."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    N = mehler_prefactor(L, tau)
    if L is None:
        return N * np.exp(1j * (x - y) ** 2 / (4 * tau))
    theta = 2 * tau / L**2
    phase = ((x**2 + y**2) * np.cos(theta) - 2 * x * y) / (2 * L**2 * np.sin(theta))
    return N * np.exp(1j * phase)


def mehler_comparison(grid: Grid, L: float | None, tau: float, V: Callable,
                      probes: Sequence[WaveFn]) -> float:
    """Max gap between the two routes to <u_i| V e^{-i tau H1} V |u_j>.

    One route integrates the closed-form kernel on the grid, the other uses the
    eigendecomposition of the grid Hamiltonian -Delta + x^2/L^4.
    """
    x = grid.positions
    h = grid.h
    coeff = 0.0 if L is None else L**-4.0
    U = matrix_function(laplacian(grid) + np.diag(coeff * x**2), lambda w: np.exp(-1j * tau * w))
    Vx = V(x)
    K = mehler_kernel(L, tau, x[:, None], x[None, :])
    A = np.stack([p.amplitudes for p in probes], axis=1)
    left = (Vx[:, None] * A)
    grid_route = h * left.conj().T @ (U @ left)
    kernel_route = h * h * left.conj().T @ (K @ left)
    return float(np.max(np.abs(grid_route - kernel_route)))


# convergence and locality checks

def _sector_block(A, n: int, basis: FockBasis) -> np.ndarray:
    if isinstance(A, LocalOperator):
        return A.sector_block(n, basis).block
    if isinstance(A, SectorOperator):
        return A.block
    return A.block(n)


def trap_removal(spec: HamiltonianSpec, A, t: float, n: int, Ls: Sequence[float],
                 basis: FockBasis | None = None) -> CheckReport:
    """||alpha_L(t)(A) - alpha(t)(A)||_n over increasing trap lengths."""
    basis = basis or fock.enumerate_basis(spec.grid.d, n, budget=2**62)
    blk = _sector_block(A, n, basis)
    ref = PropagatorCache(spec.with_trap(Trap.infinite()), basis).heisenberg_block(blk, n, t)
    gaps = []
    for L in Ls:
        ev = PropagatorCache(spec.with_trap(Trap(L)), basis).heisenberg_block(blk, n, t)
        gaps.append(operator_norm(ev - ref))
    trend = strictly_decreasing(gaps) if t != 0 else all(g <= 1e-12 for g in gaps)
    return CheckReport(
        name="trap_removal", value=gaps[-1], bound=gaps[0],
        params={"t": t, "n": n, "L": list(Ls)}, passed=bool(trend),
        series=[[L, g] for L, g in zip(Ls, gaps)], series_header=["L", "gap"],
    )


def translate_local(A: LocalOperator, cells: int) -> LocalOperator:
    return LocalOperator(A.op, (A.window + cells) % A.d, A.d)


def asymptotic_commutator(cache: PropagatorCache, A: LocalOperator, B, t: float, x: int, n: int,
                          basis: FockBasis) -> float:
    """||[alpha(t, x)(A), B]||_n with alpha(t, x) = alpha(t) o translation by x cells."""
    a = translate_local(A, x).sector_block(n, basis).block
    if t != 0:
        a = cache.heisenberg_block(a, n, t)
    b = _sector_block(B, n, basis)
    return operator_norm(a @ b - b @ a)


# free asymptotic particle observables

def plane_wave_momenta(grid: Grid) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(grid.d, d=grid.h)


def momentum_amplitudes(f: WaveFn) -> np.ndarray:
    """f~(p) = h sum_j e^{-ipx_j} f_j / sqrt(2 pi) at the grid momenta."""
    p = plane_wave_momenta(f.grid)
    x = f.grid.positions
    return f.grid.h * np.exp(-1j * np.outer(p, x)) @ f.amplitudes / np.sqrt(2 * np.pi)


def sensitivity(A0: np.ndarray, grid: Grid) -> np.ndarray:
    """<p|A0|p> for continuum-normalized lattice plane waves e^{ipx}/sqrt(2 pi)."""
    p = plane_wave_momenta(grid)
    waves = np.exp(1j * np.outer(grid.positions, p)) / np.sqrt(2 * np.pi)
    return np.real(grid.h * np.einsum("ak,ab,bk->k", waves.conj(), A0, waves))


def projector_observable(xi: WaveFn) -> np.ndarray:
    """Amplitude-space matrix of |xi><xi| under the h-weighted inner product."""
    return xi.grid.h * np.outer(xi.amplitudes, xi.amplitudes.conj())


@dataclass
class AsymptoticResult:
    t: float
    lhs: float
    rhs: float

    @property
    def gap(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def relative_gap(self) -> float:
        return self.gap / abs(self.rhs) if self.rhs else (0.0 if self.lhs == 0 else math.inf)


def free_asymptotic_observable(A0: np.ndarray, grid: Grid, profile: Callable, t: float,
                               psi: WaveFn, c_s: float) -> AsymptoticResult:
    """Scaled spatial average of the translated free evolution vs the sensitivity formula.

    lhs = h sum_x profile(x/t) <psi_t| tau_x(A0) |psi_t>
    rhs = c_s sum_p dp profile(2p) <p|A0|p> |psi~(p)|^2
    """
    if t == 0:
        raise ValueError("the scaling x/t is undefined at t = 0")
    K = laplacian(grid)
    psi_t = matrix_function(K, lambda w: np.exp(-1j * t * w)) @ psi.amplitudes
    # <psi_t| tau_x(A0) |psi_t> for every cyclic shift x
    d = grid.d
    vals = np.empty(d)
    for shift in range(d):
        rolled = np.roll(psi_t, -shift)
        vals[shift] = np.real(grid.h * np.vdot(rolled, A0 @ rolled))
    cells = (np.arange(d) + d // 2) % d - d // 2
    lhs = grid.h * float(np.sum(profile(cells * grid.h / t) * vals))
    p = plane_wave_momenta(grid)
    dp = 2 * np.pi / (d * grid.h)
    rhs = c_s * dp * float(np.sum(profile(2 * p) * sensitivity(A0, grid) * np.abs(momentum_amplitudes(psi)) ** 2))
    return AsymptoticResult(t, lhs, rhs)


def fit_sensitivity_constant(grid: Grid, A0: np.ndarray, profile: Callable, t: float, psi: WaveFn) -> float:
    """c_s such that rhs = lhs at the given (large) t."""
    r = free_asymptotic_observable(A0, grid, profile, t, psi, 1.0)
    return r.lhs / r.rhs
