"""Field resolvents, gauge means, truncated annihilators and matrix units."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import fock
from .fock import FockBasis, FullOperator
from .numkit import matrix_function, operator_norm, solve_shifted


@dataclass(frozen=True)
class ResolventSpec:
    """Ordered list of (lambda_k, f_k) pairs for a monomial of resolvents."""

    factors: tuple

    def __post_init__(self):
        if not self.factors:
            raise ValueError("a monomial needs at least one factor")
        for lam, f in self.factors:
            if lam == 0:
                raise ValueError("resolvent parameter must be nonzero")
            if not np.any(_amplitudes(f) != 0):
                raise ValueError("resolvent smearing function must be nonzero")

    @property
    def norm_bound(self) -> float:
        return math.prod(1 / abs(lam) for lam, _ in self.factors)


def _amplitudes(f) -> np.ndarray:
    return f.amplitudes if hasattr(f, "amplitudes") else np.asarray(f, dtype=complex)


def resolvent(basis: FockBasis, lam: float, f) -> FullOperator:
    """R(lam, f) = (i lam + phi(f))^{-1} on the truncated space."""
    if lam == 0:
        raise ValueError("R(lambda, f) is undefined at lambda = 0")
    phi = fock.field_op(basis, f).matrix
    return FullOperator(basis, solve_shifted(phi, lam, np.eye(basis.dim)), basis.nmax == 0)


def monomial(basis: FockBasis, spec: ResolventSpec) -> FullOperator:
    out = None
    for lam, f in spec.factors:
        r = resolvent(basis, lam, f)
        out = r if out is None else out @ r
    return out


def gauge_average(op: FullOperator) -> FullOperator:
    """U(1) mean: keep the number-conserving blocks."""
    basis = op.basis
    labels = basis.number_diagonal
    mat = np.where(labels[:, None] == labels[None, :], op.matrix, 0)
    return FullOperator(basis, mat, True)


def gauge_average_quadrature(op: FullOperator, nodes: int | None = None) -> FullOperator:
    """Trapezoid mean over equispaced gauge angles (exact for nodes > 2 nmax)."""
    basis = op.basis
    nodes = nodes or 4 * basis.nmax + 1
    acc = np.zeros_like(op.matrix)
    phases = basis.number_diagonal
    for t in 2 * np.pi * np.arange(nodes) / nodes:
        u = np.exp(1j * t * phases)
        acc += u[:, None] * op.matrix * u.conj()[None, :]
    return FullOperator(basis, acc / nodes)


def truncated_annihilator(basis: FockBasis, f, n: int, prefactor: float = 1.0) -> FullOperator:
    """prefactor * E_[0,n](N(f)) a(f).

    Pass ``prefactor = n**-0.5`` for the normalization used by the matrix units.
    """
    if n > basis.nmax:
        raise ValueError(f"n={n} exceeds the cutoff {basis.nmax}")
    c = fock._modes(basis, f)
    if abs(np.vdot(c, c).real - 1) > 1e-12:
        raise ValueError("truncated annihilator needs a normalized f")
    proj = fock.spectral_projection(fock.number_mode(basis, f), 0, n)
    a = fock.annihilation(basis, f)
    return FullOperator(basis, prefactor * (proj.matrix @ a.matrix), basis.nmax == 0)


def _unit_mode(basis: FockBasis, j: int) -> np.ndarray:
    e = np.zeros(basis.d, dtype=complex)
    e[j] = 1
    return e


def matrix_unit(basis: FockBasis, i: int, k: int, n: int) -> FullOperator:
    """W_n(i,k) = X_n(e_i)^* X_n(e_k); mode indices are 0-based."""
    xi = truncated_annihilator(basis, _unit_mode(basis, i), n, n**-0.5)
    xk = xi if i == k else truncated_annihilator(basis, _unit_mode(basis, k), n, n**-0.5)
    return FullOperator(basis, xi.matrix.conj().T @ xk.matrix, True)


def elementary(d: int, i: int, k: int) -> np.ndarray:
    m = np.zeros((d, d), dtype=complex)
    m[i, k] = 1
    return m


class MatrixUnitRecursionError(ValueError):
    def __init__(self, rank: int, needed: int, residual: float):
        super().__init__(
            f"matrix-unit recursion unsolvable: rank {rank} of {needed} candidates, "
            f"residual {residual:.3e}"
        )
        self.rank = rank
        self.residual = residual


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for j in range(len(part)):
            yield part[:j] + [[first] + part[j]] + part[j + 1:]
        yield [[first]] + part


def matrix_unit_composite(
    basis: FockBasis, ii: Sequence[int], kk: Sequence[int], n: int, tol: float = 1e-9
) -> FullOperator:
    """Gauge-invariant operator whose F_n block is M_{i1k1} (x)_s ... (x)_s M_{imkm} (x)_s 1.

    The product W_n(i1,k1)...W_n(im,km) equals the target up to terms in which
    several slots coincide; those are composites of shorter index chains
    (obtained by merging blocks of a set partition). The coefficients are fit
    by least squares on F_n.
    """
    m = len(ii)
    if m != len(kk) or not 1 <= m <= n <= basis.nmax:
        raise ValueError("need 1 <= m <= n <= nmax and matching index lists")
    units = [matrix_unit(basis, i, k, n) for i, k in zip(ii, kk)]
    if m == 1:
        return units[0]
    prod = units[0].matrix
    for u in units[1:]:
        prod = prod @ u.matrix
    candidates = [prod]
    seen = set()
    for part in _set_partitions(list(range(m))):
        if len(part) == m:
            continue
        chains = []
        ok = True
        for block in part:
            block = sorted(block)
            for a, b in zip(block, block[1:]):
                if kk[a] != ii[b]:
                    ok = False
            chains.append((ii[block[0]], kk[block[-1]], block[0]))
        if not ok:
            continue
        chains.sort(key=lambda c: c[2])
        key = tuple((c[0], c[1]) for c in chains)
        if key in seen:
            continue
        seen.add(key)
        sub = matrix_unit_composite(basis, [c[0] for c in chains], [c[1] for c in chains], n, tol)
        candidates.append(sub.matrix)
    sl = basis.sector_slice(n)
    target = fock.symmetric_embed([elementary(basis.d, i, k) for i, k in zip(ii, kk)], n).block
    A = np.stack([c[sl, sl].ravel() for c in candidates], axis=1)
    coef, _, rank, _ = np.linalg.lstsq(A, target.ravel(), rcond=None)
    resid = float(np.max(np.abs(A @ coef - target.ravel())))
    if resid > tol:
        raise MatrixUnitRecursionError(int(rank), len(candidates), resid)
    out = sum(c * cand for c, cand in zip(coef, candidates))
    return FullOperator(basis, out, True)


def isometry_F(basis: FockBasis, f, kappa: float = 0.5) -> FullOperator:
    """F_{f,kappa} = a*(f) (1 + a*(f) a(f))^{-kappa}; kappa = 1/2 is the isometry."""
    ad = fock.creation(basis, f).matrix
    nf = ad @ ad.conj().T
    damp = matrix_function(0.5 * (nf + nf.conj().T), lambda w: (1 + np.clip(w, 0, None)) ** -kappa)
    return FullOperator(basis, ad @ damp, basis.nmax == 0)


def span_fock_isometry(basis: FockBasis, span: Sequence) -> np.ndarray:
    """Columns: orthonormal occupation states of F(L) inside the truncated space.

    ``span`` holds orthonormal mode vectors l_1..l_k of L; column beta is
    prod_i a*(l_i)^{beta_i} / sqrt(beta!) Omega for |beta| <= nmax.
    """
    vecs = [fock._modes(basis, l) for l in span]
    gram = np.array([[np.vdot(u, v) for v in vecs] for u in vecs])
    if np.max(np.abs(gram - np.eye(len(vecs)))) > 1e-12:
        raise ValueError("span vectors must be orthonormal")
    ads = [fock.creation(basis, v).matrix for v in vecs]
    small = fock.enumerate_basis(len(vecs), basis.nmax, budget=2**62)
    cols = []
    for n, occ in enumerate(small.occupations):
        for beta in occ:
            v = basis.vacuum()
            for ad, b in zip(ads, beta):
                for _ in range(b):
                    v = ad @ v
            cols.append(v / math.sqrt(math.prod(math.factorial(b) for b in beta)))
    return np.stack(cols, axis=1)


def span_sector_norms(op: FullOperator, span: Sequence) -> np.ndarray:
    """||op restricted to F_m(L)|| for m = 0..nmax (decay profile of a compact action)."""
    iso = span_fock_isometry(op.basis, span)
    k = len(span)
    out = []
    start = 0
    for m in range(op.basis.nmax + 1):
        cnt = fock.sector_dim(k, m)
        block = op.matrix @ iso[:, start:start + cnt]
        out.append(operator_norm(block))
        start += cnt
    return np.array(out)


def span_singular_values(op: FullOperator, span: Sequence) -> tuple[np.ndarray, int]:
    """Singular values of op P_F(L) and the rank bound dim F_{<=nmax}(L)."""
    iso = span_fock_isometry(op.basis, span)
    proj = iso @ iso.conj().T
    sv = np.linalg.svd(op.matrix @ proj, compute_uv=False)
    return sv, iso.shape[1]
