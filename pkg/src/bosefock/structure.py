"""Sector restrictions, seminorms, the maps kappa_n, and cluster limits."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
import scipy.linalg

from . import fock
from .fock import FockBasis, LocalOperator, SectorOperator
from .lattice import translate
from .numkit import operator_norm
from .reports import CheckReport, strictly_decreasing


def restrict(A, n: int, basis: FockBasis | None = None) -> SectorOperator:
    """rho_n(A): the block of a number-conserving operator on F_n."""
    if isinstance(A, LocalOperator):
        if basis is None:
            raise ValueError("a lifted window operator needs the big basis")
        return A.sector_block(n, basis)
    if not A.conserves_N:
        raise ValueError("restriction to a sector needs a number-conserving operator")
    if n > A.basis.nmax:
        raise ValueError(f"sector {n} above the cutoff {A.basis.nmax}")
    return A.sector(n)


def seminorm(A, n: int, basis: FockBasis | None = None) -> float:
    return operator_norm(restrict(A, n, basis).block)


# graded representation sum_m C_{m,n}

@dataclass
class GradedTerm:
    m: int
    block: SectorOperator  # operator on F_m
    weight: complex = 1.0


@dataclass
class GradedOperator:
    n: int
    d: int
    terms: list = field(default_factory=list)

    def __post_init__(self):
        ms = [t.m for t in self.terms]
        if len(set(ms)) != len(ms):
            raise ValueError("body orders must be distinct within a graded operator")
        for t in self.terms:
            if t.m > self.n:
                raise ValueError(f"{t.m}-body term cannot live at level {self.n}")

    def term(self, m: int) -> GradedTerm | None:
        return next((t for t in self.terms if t.m == m), None)


def unit_term(d: int) -> GradedTerm:
    return GradedTerm(0, SectorOperator(0, np.ones((1, 1))))


def factor_term(factors: Sequence[np.ndarray], weight: complex = 1.0) -> GradedTerm:
    return GradedTerm(len(factors), fock.factor_block(list(factors)), weight)


def kappa(G: GradedOperator) -> GradedOperator:
    """kappa_n: drop the m = n term and reweight the rest by (n - m)/n."""
    if G.n == 0:
        return GradedOperator(0, G.d, [])
    terms = [
        GradedTerm(t.m, t.block, t.weight * (G.n - t.m) / G.n)
        for t in G.terms
        if t.m < G.n
    ]
    return GradedOperator(G.n - 1, G.d, terms)


def materialize(G: GradedOperator) -> SectorOperator:
    dim = fock.sector_dim(G.d, G.n)
    out = np.zeros((dim, dim), dtype=complex)
    for t in G.terms:
        if t.m == 0:
            out += t.weight * t.block.block[0, 0] * np.eye(dim)
        else:
            out += t.weight * fock.symmetric_embed(t.block, G.n, d=G.d).block
    return SectorOperator(G.n, out)


# cluster limits

@dataclass
class ClusterVectors:
    """f_1..f_n and g_1..g_n; the last pair is translated by ``translation`` cells."""

    fs: list
    gs: list
    translation: int = 0

    def __post_init__(self):
        if len(self.fs) != len(self.gs) or not self.fs:
            raise ValueError("need equally many nonzero f's and g's")
        for f in list(self.fs) + list(self.gs):
            if f.norm() == 0:
                raise ValueError("cluster vectors must be nonzero")

    @property
    def n(self) -> int:
        return len(self.fs)

    def shifted(self, cells: int) -> "ClusterVectors":
        return ClusterVectors(self.fs, self.gs, cells)

    def states(self, basis: FockBasis):
        """(Psi^n(x), Phi^n(x), Psi^{n-1}, Phi^{n-1}, <g_n, f_n>)."""
        fn = translate(self.fs[-1], self.translation)
        gn = translate(self.gs[-1], self.translation)
        phi_n = fock.product_state(basis, list(self.fs[:-1]) + [fn])
        psi_n = fock.product_state(basis, list(self.gs[:-1]) + [gn])
        phi_m = fock.product_state(basis, list(self.fs[:-1]))
        psi_m = fock.product_state(basis, list(self.gs[:-1]))
        return psi_n, phi_n, psi_m, phi_m, gn.inner(fn)


def _apply(A, v: np.ndarray, n: int, basis: FockBasis) -> np.ndarray:
    if isinstance(A, LocalOperator):
        return A.apply(v, n, basis)
    return A.block(n) @ v


def cluster_element(A, cv: ClusterVectors, basis: FockBasis) -> tuple[complex, complex]:
    """Both sides of the cluster identity at the current translation.

    lhs = <Psi^n(x), A Phi^n(x)>, rhs = n^{-1} <Psi^{n-1}, A Phi^{n-1}> <g_n, f_n>.
    """
    n = cv.n
    psi_n, phi_n, psi_m, phi_m, overlap = cv.states(basis)
    lhs = np.vdot(psi_n, _apply(A, phi_n, n, basis))
    rhs = np.vdot(psi_m, _apply(A, phi_m, n - 1, basis)) * overlap / n
    return complex(lhs), complex(rhs)


def cluster_limit_check(A, cv: ClusterVectors, basis: FockBasis, tol: float = 1e-10) -> CheckReport:
    lhs, rhs = cluster_element(A, cv, basis)
    return CheckReport(
        name="cluster_limit",
        value=abs(lhs - rhs),
        bound=0.0,
        tolerance=tol,
        params={"n": cv.n, "translation": cv.translation, "lhs": [lhs.real, lhs.imag],
                "rhs": [rhs.real, rhs.imag]},
    )


class Evolution(Protocol):
    def evolve_vector(self, v: np.ndarray, n: int, t: float) -> np.ndarray:
        """Return e^{-itH} v for v in F_n."""


def coherence_gap(A, dyn: Evolution, t: float, cv: ClusterVectors, basis: FockBasis) -> float:
    n = cv.n
    psi_n, phi_n, psi_m, phi_m, overlap = cv.states(basis)
    if t != 0:
        psi_n, phi_n = dyn.evolve_vector(psi_n, n, t), dyn.evolve_vector(phi_n, n, t)
        psi_m, phi_m = dyn.evolve_vector(psi_m, n - 1, t), dyn.evolve_vector(phi_m, n - 1, t)
    lhs = np.vdot(psi_n, _apply(A, phi_n, n, basis))
    rhs = np.vdot(psi_m, _apply(A, phi_m, n - 1, basis)) * overlap / n
    return float(abs(lhs - rhs))


def coherence_check(
    A,
    dyn: Evolution,
    t: float,
    cv: ClusterVectors,
    basis: FockBasis,
    translations: Sequence[int],
    bound: float = 1e-3,
) -> CheckReport:
    """Gap of the evolved cluster identity over a sweep of separations.

    Passes when the gap strictly decreases along ``translations`` and is below
    ``bound`` at the largest one.
    """
    gaps = [coherence_gap(A, dyn, t, cv.shifted(x), basis) for x in translations]
    trend = strictly_decreasing(gaps)
    return CheckReport(
        name="coherence",
        value=gaps[-1],
        bound=bound,
        params={"n": cv.n, "t": t, "translations": list(translations)},
        passed=bool(trend and gaps[-1] <= bound),
        note="" if trend else "gap not strictly decreasing",
        series=[[x, g] for x, g in zip(translations, gaps)],
        series_header=["translation", "gap"],
    )


# optional: expansion of a sector block in window-supported m-body terms

@dataclass
class Decomposition:
    graded: GradedOperator
    residual: float
    rank: int
    decomposable: bool


def graded_decompose(
    K: SectorOperator, window: Sequence[int], d: int, threshold: float = 1e-9
) -> Decomposition:
    """Least-squares expansion of K in {window-supported m-body blocks (x)_s 1}.

    Levels are fit from the top down, each against the part of its column
    space orthogonal to all lower levels, so whatever a lower body order can
    express is left to it.
    """
    n = K.n
    window = list(window)
    small = fock.enumerate_basis(len(window), n, budget=2**62)
    big = fock.enumerate_basis(d, n, budget=2**62)
    levels = []
    for m in range(n + 1):
        rows = np.zeros((small.sector_dims[m], d), dtype=np.int64)
        rows[:, window] = small.occupations[m]
        idx = big.sector_index(m, rows) if m else np.array([0])
        cols, labels = [], []
        for a in idx:
            for b in idx:
                blk = np.zeros((big.sector_dims[m],) * 2, dtype=complex)
                blk[a, b] = 1
                emb = np.eye(K.dim) if m == 0 else fock.symmetric_embed(SectorOperator(m, blk), n, d=d).block
                cols.append(emb.ravel())
                labels.append((a, b))
        levels.append((np.stack(cols, axis=1), labels))
    rank = 0
    lower_bases = []
    acc = None
    for X, _ in levels:
        acc = X if acc is None else np.hstack([acc, X])
        lower_bases.append(scipy.linalg.orth(acc))
    rest = K.block.ravel().astype(complex)
    blocks = {}
    for m in range(n, -1, -1):
        X, labels = levels[m]
        Y = X
        if m:
            Q = lower_bases[m - 1]
            Y = X - Q @ (Q.conj().T @ X)
        coef, _, r, _ = np.linalg.lstsq(Y, rest, rcond=1e-10)
        rank += int(r)
        rest = rest - X @ coef
        if np.max(np.abs(coef), initial=0) <= 1e-12:
            continue
        blk = np.zeros((big.sector_dims[m],) * 2, dtype=complex)
        for c, (a, b) in zip(coef, labels):
            blk[a, b] += c
        if np.max(np.abs(blk)) > 1e-10:
            blocks[m] = blk
    resid = float(np.max(np.abs(rest)))
    terms = [GradedTerm(m, SectorOperator(m, blk)) for m, blk in sorted(blocks.items())]
    return Decomposition(GradedOperator(n, d, terms), resid, rank, resid <= threshold)
