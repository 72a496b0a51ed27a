"""Truncated bosonic Fock space over d modes (the grid sites)."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .lattice import WaveFn
from .numkit import matrix_function

DEFAULT_BUDGET = 512 * 2**20  # bytes
_COMPLEX = 16


class BudgetError(MemoryError):
    def __init__(self, what: str, required: int, budget: int):
        super().__init__(
            f"{what} needs {required} bytes, above the memory budget of {budget} bytes"
        )
        self.required = required


def sector_dim(d: int, n: int) -> int:
    return math.comb(d + n - 1, n)


def _check_budget(what: str, entries: int, budget: int) -> None:
    if entries * _COMPLEX > budget:
        raise BudgetError(what, entries * _COMPLEX, budget)


@dataclass(frozen=True, eq=False)
class FockBasis:
    """Occupation basis of sectors 0..nmax, reverse-lexicographic per sector."""

    d: int
    nmax: int
    occupations: tuple  # per sector: int array (dim_n, d)
    budget: int = DEFAULT_BUDGET

    @property
    def sector_dims(self) -> list[int]:
        return [occ.shape[0] for occ in self.occupations]

    @cached_property
    def sector_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sector_dims)])

    @property
    def dim(self) -> int:
        return int(self.sector_offsets[-1])

    def sector_slice(self, n: int) -> slice:
        return slice(int(self.sector_offsets[n]), int(self.sector_offsets[n + 1]))

    @cached_property
    def _lookup(self) -> dict:
        table = {}
        for n, occ in enumerate(self.occupations):
            off = int(self.sector_offsets[n])
            for i, row in enumerate(occ):
                table[row.tobytes()] = off + i
        return table

    def index(self, occupation) -> int:
        key = np.asarray(occupation, dtype=np.int64).tobytes()
        try:
            return self._lookup[key]
        except KeyError:
            raise KeyError(f"occupation {tuple(occupation)} not in the basis") from None

    def occupation(self, index: int) -> np.ndarray:
        n = int(np.searchsorted(self.sector_offsets, index, side="right") - 1)
        return self.occupations[n][index - self.sector_offsets[n]]

    def sector_index(self, n: int, occ: np.ndarray) -> np.ndarray:
        """Local (within-sector) indices of a stack of occupation rows."""
        occ = np.ascontiguousarray(occ, dtype=np.int64)
        off = int(self.sector_offsets[n])
        return np.array([self._lookup[r.tobytes()] - off for r in occ], dtype=np.int64)

    @cached_property
    def number_diagonal(self) -> np.ndarray:
        return np.concatenate(
            [np.full(k, n, dtype=float) for n, k in enumerate(self.sector_dims)]
        )

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1
        return v

    def basis_vector(self, occupation) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(occupation)] = 1
        return v

    # sparse mode ladder operators, sector n -> n+1
    def sector_raise(self, j: int, n: int) -> sp.csr_matrix:
        return self._raise_cache(n)[j]

    def _raise_cache(self, n: int):
        cache = self.__dict__.setdefault("_raise", {})
        if n not in cache:
            src = self.occupations[n]
            mats = []
            for j in range(self.d):
                tgt = src.copy()
                tgt[:, j] += 1
                rows = self.sector_index(n + 1, tgt)
                vals = np.sqrt(src[:, j] + 1.0)
                mats.append(
                    sp.csr_matrix(
                        (vals, (rows, np.arange(src.shape[0]))),
                        shape=(self.sector_dims[n + 1], self.sector_dims[n]),
                    )
                )
            cache[n] = mats
        return cache[n]


def enumerate_basis(d: int, nmax: int, budget: int = DEFAULT_BUDGET) -> FockBasis:
    if d < 1 or nmax < 0:
        raise ValueError(f"need d >= 1 and nmax >= 0, got d={d}, nmax={nmax}")
    total = sum(sector_dim(d, n) for n in range(nmax + 1))
    _check_budget(f"Fock basis d={d}, nmax={nmax} (dense operator)", total * total, budget)
    sectors = []
    for n in range(nmax + 1):
        # sorted mode tuples in lex order are occupations in reverse-lex order
        rows = np.zeros((sector_dim(d, n), d), dtype=np.int64)
        for i, modes in enumerate(itertools.combinations_with_replacement(range(d), n)):
            for m in modes:
                rows[i, m] += 1
        sectors.append(rows)
    return FockBasis(d, nmax, tuple(sectors), budget)


@dataclass
class FullOperator:
    basis: FockBasis
    matrix: np.ndarray
    conserves_N: bool = field(default=None)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (self.basis.dim, self.basis.dim):
            raise ValueError("operator shape does not match the basis")
        if self.conserves_N is None:
            self.conserves_N = _is_block_diagonal(self.basis, self.matrix)

    # None re-detects the flag: X^* X conserves N although X does not
    def __matmul__(self, other: "FullOperator") -> "FullOperator":
        return FullOperator(self.basis, self.matrix @ other.matrix,
                            (self.conserves_N and other.conserves_N) or None)

    def __add__(self, other: "FullOperator") -> "FullOperator":
        return FullOperator(self.basis, self.matrix + other.matrix,
                            (self.conserves_N and other.conserves_N) or None)

    def __sub__(self, other: "FullOperator") -> "FullOperator":
        return FullOperator(self.basis, self.matrix - other.matrix,
                            (self.conserves_N and other.conserves_N) or None)

    def scale(self, c: complex) -> "FullOperator":
        return FullOperator(self.basis, c * self.matrix, self.conserves_N)

    @property
    def H(self) -> "FullOperator":
        return FullOperator(self.basis, self.matrix.conj().T, self.conserves_N)

    def block(self, n: int, m: int | None = None) -> np.ndarray:
        m = n if m is None else m
        return self.matrix[self.basis.sector_slice(n), self.basis.sector_slice(m)]

    def sector(self, n: int) -> "SectorOperator":
        return SectorOperator(n, self.block(n))


def _is_block_diagonal(basis: FockBasis, m: np.ndarray, tol: float = 1e-14) -> bool:
    labels = basis.number_diagonal
    off = labels[:, None] != labels[None, :]
    return bool(not np.any(np.abs(m[off]) > tol))


@dataclass
class SectorOperator:
    n: int
    block: np.ndarray

    def __post_init__(self):
        self.block = np.asarray(self.block, dtype=complex)

    @property
    def dim(self) -> int:
        return self.block.shape[0]


def identity(basis: FockBasis) -> FullOperator:
    return FullOperator(basis, np.eye(basis.dim), True)


def _modes(basis: FockBasis, f) -> np.ndarray:
    if isinstance(f, WaveFn):
        c = f.mode_coefficients()
    else:
        c = np.asarray(f, dtype=complex)
    if c.shape != (basis.d,):
        raise ValueError(f"smearing function has {c.shape[0]} modes, basis has {basis.d}")
    return c


def sector_creation(basis: FockBasis, f, n: int) -> sp.csr_matrix:
    """a*(f) as a sparse map F_n -> F_{n+1}."""
    c = _modes(basis, f)
    out = sp.csr_matrix((basis.sector_dims[n + 1], basis.sector_dims[n]), dtype=complex)
    for j in np.flatnonzero(c):
        out = out + c[j] * basis.sector_raise(j, n)
    return out


def creation(basis: FockBasis, f) -> FullOperator:
    """a*(f) = sum_j f_j h^(1/2) a*_j; the top sector is mapped to zero."""
    mat = np.zeros((basis.dim, basis.dim), dtype=complex)
    for n in range(basis.nmax):
        mat[basis.sector_slice(n + 1), basis.sector_slice(n)] = (
            sector_creation(basis, f, n).toarray()
        )
    return FullOperator(basis, mat, basis.nmax == 0)


def annihilation(basis: FockBasis, f) -> FullOperator:
    return creation(basis, f).H


def field_op(basis: FockBasis, f) -> FullOperator:
    ad = creation(basis, f).matrix
    return FullOperator(basis, ad + ad.conj().T, basis.nmax == 0)


def number_operator(basis: FockBasis) -> FullOperator:
    return FullOperator(basis, np.diag(basis.number_diagonal).astype(complex), True)


def number_mode(basis: FockBasis, f) -> FullOperator:
    """N(f) = ||f||^{-2} a*(f) a(f)."""
    c = _modes(basis, f)
    nrm2 = float(np.vdot(c, c).real)
    if nrm2 == 0:
        raise ValueError("N(f) undefined for f = 0")
    ad = creation(basis, f).matrix
    return FullOperator(basis, ad @ ad.conj().T / nrm2, True)


def spectral_projection(op: FullOperator, lo: float, hi: float) -> FullOperator:
    """E_[lo,hi](A) for Hermitian A via its eigendecomposition."""
    p = matrix_function(
        op.matrix, lambda w: ((w >= lo - 1e-9) & (w <= hi + 1e-9)).astype(float)
    )
    return FullOperator(op.basis, p, op.conserves_N)


def gauge_unitary(basis: FockBasis, s: float) -> FullOperator:
    return FullOperator(basis, np.diag(np.exp(1j * s * basis.number_diagonal)), True)


# tensor-space machinery

def _tuple_table(d: int, n: int) -> np.ndarray:
    return np.array(list(itertools.product(range(d), repeat=n)), dtype=np.int64).reshape(
        d**n, n
    )


def symmetrizer(d: int, n: int, budget: int = DEFAULT_BUDGET) -> sp.csr_matrix:
    """Isometry S: F_n -> (C^d)^{(x)n}; column alpha is the normalized symmetric state."""
    _check_budget(f"tensor space d^{n} with d={d}", d**n * 4, budget)
    basis = enumerate_basis(d, n, budget=2**62) if n else None
    if n == 0:
        return sp.csr_matrix(np.ones((1, 1), dtype=complex))
    tuples = _tuple_table(d, n)
    occ = np.zeros((tuples.shape[0], d), dtype=np.int64)
    np.add.at(occ, (np.repeat(np.arange(tuples.shape[0]), n), tuples.ravel()), 1)
    cols = basis.sector_index(n, occ)
    fact = np.array([math.prod(math.factorial(k) for k in row) for row in occ], dtype=float)
    vals = np.sqrt(fact / math.factorial(n))
    return sp.csr_matrix(
        (vals.astype(complex), (np.arange(tuples.shape[0]), cols)),
        shape=(d**n, sector_dim(d, n)),
    )


def permutation_unitary(d: int, n: int, perm: Sequence[int]) -> sp.csr_matrix:
    """U(pi) on (C^d)^{(x)n} moving tensor slot k to slot perm[k]."""
    tuples = _tuple_table(d, n)
    moved = np.empty_like(tuples)
    moved[:, list(perm)] = tuples
    target = np.ravel_multi_index(moved.T, (d,) * n) if n else np.zeros(1, int)
    return sp.csr_matrix(
        (np.ones(d**n, dtype=complex), (target, np.arange(d**n))), shape=(d**n, d**n)
    )


def _multi_factorial(rows: np.ndarray) -> np.ndarray:
    from scipy.special import gammaln

    return np.exp(np.sum(gammaln(rows + 1.0), axis=-1))


def symmetric_embed(C, n: int, d: int | None = None, budget: int = DEFAULT_BUDGET) -> SectorOperator:
    """Block of C (x)_s 1^{(x)(n-m)} on F_n.

    ``C`` is a SectorOperator on F_m or a list of m one-body d x d factors.
    Uses the occupation-number formula
        (C (x)_s 1)_{gamma delta} = m!(n-m)!/n! * sum_eps w(alpha,eps) C_{alpha beta} w(beta,eps)
    with gamma = alpha + eps, delta = beta + eps and w(alpha,eps) = sqrt(gamma!/(alpha! eps!)).
    """
    if not isinstance(C, SectorOperator):
        factors = list(C)
        d = np.asarray(factors[0]).shape[0]
        C = factor_block(factors, budget)
    m = C.n
    if d is None:
        d = _infer_modes(C.dim, m)
    if n < m:
        raise ValueError(f"cannot embed an {m}-body operator into sector {n}")
    big = enumerate_basis(d, n, budget=2**62)
    occ_m = big.occupations[m]
    occ_n = big.occupations[n]
    out = np.zeros((occ_n.shape[0], occ_n.shape[0]), dtype=complex)
    _check_budget(f"sector block F_{n}", out.size, budget)
    coef = math.factorial(m) * math.factorial(n - m) / math.factorial(n)
    fm = _multi_factorial(occ_m)
    for eps in big.occupations[n - m]:
        gamma = occ_m + eps
        idx = big.sector_index(n, gamma)
        w = np.sqrt(_multi_factorial(gamma) / (fm * _multi_factorial(eps)))
        out[np.ix_(idx, idx)] += coef * (w[:, None] * C.block * w[None, :])
    return SectorOperator(n, out)


def _infer_modes(dim: int, m: int) -> int:
    if m == 0:
        raise ValueError("mode count must be given for a 0-body operator")
    d = 1
    while sector_dim(d, m) < dim:
        d += 1
    if sector_dim(d, m) != dim:
        raise ValueError(f"block of size {dim} is not a sector F_{m}")
    return d


def factor_block(factors: list, budget: int = DEFAULT_BUDGET) -> SectorOperator:
    """F_m block of C_1 (x)_s ... (x)_s C_m for one-body d x d factors."""
    m = len(factors)
    d = np.asarray(factors[0]).shape[0]
    S = symmetrizer(d, m, budget).toarray()
    t = S.reshape((d,) * m + (S.shape[1],))
    for k, Ck in enumerate(factors):
        t = np.moveaxis(np.tensordot(np.asarray(Ck, dtype=complex), t, axes=([1], [k])), 0, k)
    return SectorOperator(m, S.conj().T @ t.reshape(d**m, -1))


def tensor_embed(C: SectorOperator, n: int, d: int, budget: int = DEFAULT_BUDGET,
                 average: bool = False) -> SectorOperator:
    """Independent route: compress (S_m C S_m^H) (x) 1 with the n-body symmetrizer.

    With ``average=True`` the tensor operator is explicitly averaged over all
    n! slot permutations before compression.
    """
    m = C.n
    Sm = symmetrizer(d, m, budget)
    Sn = symmetrizer(d, n, budget)
    _check_budget(f"tensor operator d^{n}", (d**n) ** 2, budget)
    big = Sm @ sp.csr_matrix(C.block) @ Sm.conj().T
    op = sp.kron(big, sp.identity(d ** (n - m), dtype=complex), format="csr")
    if average:
        acc = sp.csr_matrix(op.shape, dtype=complex)
        for perm in itertools.permutations(range(n)):
            U = permutation_unitary(d, n, perm)
            acc = acc + U @ op @ U.conj().T
        op = acc / math.factorial(n)
    return SectorOperator(n, (Sn.conj().T @ op @ Sn).toarray())


def product_state(basis: FockBasis, fs: Sequence, route: str = "creation") -> np.ndarray:
    """Sector vector of f_1 (x)_s ... (x)_s f_n = (1/n!)^{1/2} a*(f_1)...a*(f_n) Omega."""
    n = len(fs)
    if n > basis.nmax:
        raise ValueError(f"{n} particles exceed the cutoff nmax={basis.nmax}")
    if route == "creation":
        v = np.ones(1, dtype=complex)
        for k, f in enumerate(reversed(fs)):
            v = sector_creation(basis, f, k) @ v
        return v / math.sqrt(math.factorial(n))
    if route == "permutation":
        coeffs = [_modes(basis, f) for f in fs]
        t = np.zeros((basis.d,) * n, dtype=complex)
        for perm in itertools.permutations(range(n)):
            t += _outer([coeffs[p] for p in perm])
        t /= math.factorial(n)
        S = symmetrizer(basis.d, n, basis.budget)
        return S.conj().T @ t.reshape(-1)
    raise ValueError(f"unknown route {route!r}")


def _outer(vecs):
    out = np.ones((), dtype=complex)
    for v in vecs:
        out = np.multiply.outer(out, v)
    return out


def embed_sector_vector(basis: FockBasis, v: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(basis.dim, dtype=complex)
    out[basis.sector_slice(n)] = v
    return out


# window-local operators lifted as A_W (x) 1 onto a larger set of modes

class LocalOperator:
    """A number-conserving operator on the modes of a window, acting as A_W (x) 1.

    ``window`` lists the site indices of the big mode set that carry the
    window modes (in order). The complement carries the unit factor, so no
    truncation of the big space ever enters the definition.
    """

    def __init__(self, op: FullOperator, window: Sequence[int], d: int):
        if not op.conserves_N:
            raise ValueError("only number-conserving window operators can be lifted")
        self.op = op
        self.window = np.asarray(window, dtype=np.int64)
        if len(set(self.window.tolist())) != self.window.size or self.window.size != op.basis.d:
            raise ValueError("window must list distinct sites, one per window mode")
        self.d = d
        self.complement = np.setdiff1d(np.arange(d), self.window)
        self._split = {}

    def split(self, n: int, big: FockBasis):
        if n > self.op.basis.nmax:
            raise ValueError(f"window operator truncated at {self.op.basis.nmax} < {n}")
        key = (id(big), n)
        if key not in self._split:
            occ = big.occupations[n]
            w_occ = occ[:, self.window]
            c_occ = occ[:, self.complement]
            wi = np.array([self.op.basis.index(r) for r in w_occ], dtype=np.int64)
            comp = enumerate_basis(max(self.complement.size, 1), n, budget=2**62)
            if self.complement.size == 0:
                ci = np.zeros(occ.shape[0], dtype=np.int64)
            else:
                ci = np.array([comp.index(r) for r in c_occ], dtype=np.int64)
            self._split[key] = (wi, ci, comp.dim)
        return self._split[key]

    def apply(self, v: np.ndarray, n: int, big: FockBasis) -> np.ndarray:
        wi, ci, cdim = self.split(n, big)
        grid = np.zeros((self.op.basis.dim, cdim), dtype=complex)
        grid[wi, ci] = v
        return (self.op.matrix @ grid)[wi, ci]

    def sector_block(self, n: int, big: FockBasis) -> SectorOperator:
        wi, ci, _ = self.split(n, big)
        same = ci[:, None] == ci[None, :]
        return SectorOperator(n, self.op.matrix[np.ix_(wi, wi)] * same)

    def full(self, big: FockBasis) -> FullOperator:
        mat = np.zeros((big.dim, big.dim), dtype=complex)
        for n in range(min(big.nmax, self.op.basis.nmax) + 1):
            sl = big.sector_slice(n)
            mat[sl, sl] = self.sector_block(n, big).block
        return FullOperator(big, mat, True)
