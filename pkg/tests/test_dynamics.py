import itertools

import numpy as np
import pytest

from bosefock import dynamics as D
from bosefock import fock
from bosefock.lattice import (
    Grid,
    compact_bump,
    gaussian_potential,
    laplacian,
    pair_potential_table,
    wave_packet,
)
from bosefock.numkit import operator_norm, random_hermitian


def _spec(d=6, h=1.0, L=None, V=compact_bump(0.5, 2.0)):
    g = Grid(d, h)
    return D.HamiltonianSpec(g, pair_potential_table(g, V), D.Trap(L))


def test_small_sectors():
    spec = _spec(L=2.0)
    g = spec.grid
    H1 = D.sector_hamiltonian(spec, 1).block
    np.testing.assert_allclose(H1, laplacian(g) + np.diag(g.positions**2 / 16), atol=1e-14)
    assert D.sector_hamiltonian(spec, 0).block.shape == (1, 1)
    assert D.sector_hamiltonian(spec, 0).block[0, 0] == 0


@pytest.mark.parametrize("n", [2, 3])
def test_tensor_hamiltonian_permutation_symmetric(n):
    spec = _spec(d=5, L=3.0)
    H = D.tensor_hamiltonian(spec, n)
    for i, j in itertools.combinations(range(n), 2):
        perm = list(range(n))
        perm[i], perm[j] = j, i
        U = fock.permutation_unitary(5, n, perm)
        assert abs(H @ U - U @ H).max() <= 1e-12


@pytest.mark.parametrize("n", [2, 3])
def test_first_and_second_quantized_agree(n):
    spec = _spec(d=6, L=2.5)
    np.testing.assert_allclose(D.sector_hamiltonian(spec, n).block,
                               D.sector_hamiltonian_tensor(spec, n).block, atol=1e-10)


def test_full_hamiltonian_commutes_with_N():
    spec = _spec(d=4)
    b = fock.enumerate_basis(4, 3)
    H = D.full_hamiltonian(spec, b)
    N = fock.number_operator(b).matrix
    assert np.array_equal(H.matrix @ N, N @ H.matrix)
    np.testing.assert_allclose(H.block(2), D.sector_hamiltonian(spec, 2).block, atol=1e-12)


def test_heisenberg_evolution(rng):
    spec = _spec(d=5)
    b = fock.enumerate_basis(5, 2)
    cache = D.PropagatorCache(spec, b)
    A = fock.FullOperator(b, random_hermitian(b.dim, rng))
    np.testing.assert_allclose(D.heisenberg_evolve(cache, A, 0.0).matrix, A.matrix, atol=1e-12)
    two = D.heisenberg_evolve(cache, D.heisenberg_evolve(cache, A, 0.3), 0.4)
    np.testing.assert_allclose(two.matrix, D.heisenberg_evolve(cache, A, 0.7).matrix, atol=1e-9)
    C = fock.SectorOperator(2, random_hermitian(b.sector_dims[2], rng))
    out = D.heisenberg_evolve(cache, C, 1.3)
    assert operator_norm(out.block) == pytest.approx(operator_norm(C.block), rel=1e-9)


def test_stale_cache():
    spec = _spec(d=4)
    cache = D.PropagatorCache(spec)
    spec.chemical_shift = 1.0
    with pytest.raises(D.StaleCacheError):
        cache.eig(1)


def test_energy_conservation(rng):
    spec = _spec(d=6, L=2.0)
    cache = D.PropagatorCache(spec)
    H = D.sector_hamiltonian(spec, 2).block
    v = rng.normal(size=H.shape[0]) + 1j * rng.normal(size=H.shape[0])
    v /= np.linalg.norm(v)
    e0 = np.vdot(v, H @ v).real
    for t in (0.5, 3.0, 20.0):
        w = cache.evolve_vector(v, 2, t)
        assert np.vdot(w, H @ w).real == pytest.approx(e0, rel=1e-9)


def test_dyson_vanishes_without_potential(rng):
    spec = _spec(d=5, V=lambda r: np.zeros_like(r))
    C = fock.SectorOperator(2, random_hermitian(15, rng))
    res = D.dyson_expansion(spec, 2, C, 0.7, 4)
    for term in res.terms:
        assert np.max(np.abs(term.value.block)) == 0
    np.testing.assert_array_equal(res.value.block, C.block)


def test_dyson_zero_time(rng):
    spec = _spec(d=5)
    C = fock.SectorOperator(2, random_hermitian(15, rng))
    np.testing.assert_array_equal(D.dyson_cocycle(spec, 2, C, 0.0, 3).value.block, C.block)


def _unit_C(rng, dim):
    C = random_hermitian(dim, rng)
    return fock.SectorOperator(2, C / operator_norm(C))


def test_dyson_first_order_bound(rng):
    spec = _spec(d=6)
    C = _unit_C(rng, 21)
    term = D.dyson_term(spec, 2, C, 0.4, 1)
    Vn = D.dyson_expansion(spec, 2, C, 0.4, 0).V_norm
    assert operator_norm(term.value.block) <= 2 * 0.4 * Vn + 1e-8


def test_dyson_step_doubling(rng):
    spec = _spec(d=5)
    C = _unit_C(rng, 15)
    ip = D._InteractionPicture(spec, 2)
    Ce = ip.to_eig(C.block)
    vals = [D._dyson_levels(ip, Ce, 0.8, 2, s)[-1] for s in (8, 16, 32, 64)]
    gaps = [operator_norm(a - b) for a, b in zip(vals, vals[1:])]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[1] / gaps[2] > 8  # fourth order would give 16


def test_dyson_certificate_random(rng):
    spec = _spec(d=6)
    Vn = float(np.max(np.abs(D.potential_block(spec, 2))))
    for _ in range(20):
        C = _unit_C(rng, 21)
        t = float(rng.uniform(-1, 1)) / Vn
        exact = D.exact_cocycle(spec, 2, C, t).block
        for order in range(7):
            res = D.dyson_cocycle(spec, 2, C, t, order, quad_tol=1e-9)
            assert operator_norm(res.value.block - exact) <= res.tail_bound + 10 * res.quad_tol


def test_cocycle_composition(rng):
    spec = _spec(d=5)
    C = random_hermitian(15, rng)
    t = 0.6
    full, free = D.PropagatorCache(spec), D.PropagatorCache(spec, interaction=False)
    # alpha^0(t) o alpha(-t) applied to C
    direct = free.heisenberg_block(full.heisenberg_block(C, 2, -t), 2, t)
    gamma = D.exact_cocycle(spec, 2, fock.SectorOperator(2, C), t).block
    assert np.max(np.abs(gamma - direct)) <= 1e-9


def test_derivation_norm_bound(rng):
    spec = _spec(d=6)
    Vdiag = D.potential_block(spec, 3)
    Vn = np.max(np.abs(Vdiag))
    assert Vn <= 3 * 2 * spec.max_V()
    B = random_hermitian(Vdiag.size, rng)
    comm = B * Vdiag[None, :] - Vdiag[:, None] * B
    assert operator_norm(comm) <= 2 * Vn * operator_norm(B) + 1e-12


def test_interaction_potential_routes():
    spec = _spec(d=6)
    V0 = D.interaction_potential_t(spec, 0.0)
    np.testing.assert_allclose(V0, D.pair_potential_operator(spec), atol=1e-12)
    Vc = D.interaction_potential_t(spec, 0.0, route="closed_form", V=compact_bump(0.5, 2.0))
    np.testing.assert_allclose(np.diag(Vc).real, spec.V.ravel(), atol=1e-12)


def test_trap_periodicity():
    L = 2.0
    trap = D.Trap(L)
    s = np.linspace(-2, 2, 11)
    np.testing.assert_allclose(trap.c(s + np.pi * L**2), trap.c(s), atol=1e-9)
    np.testing.assert_allclose(trap.s(s + np.pi * L**2), trap.s(s), atol=1e-9)
    np.testing.assert_allclose(D.Trap().s(s), 2 * s)


def test_interaction_potential_trap_limit():
    g = Grid(8, 1.0)
    V = pair_potential_table(g, gaussian_potential(1.0, 1.0))
    ref = D.interaction_potential_t(D.HamiltonianSpec(g, V), 0.4)
    gaps = [operator_norm(D.interaction_potential_t(D.HamiltonianSpec(g, V, D.Trap(L)), 0.4) - ref)
            for L in (2, 4, 8)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_averaged_potential_profile():
    g = Grid(12, 0.5)
    spec = D.HamiltonianSpec(g, pair_potential_table(g, gaussian_potential(1.0, 0.7)))
    cut = [np.pi / (4 * g.h), np.pi / (2 * g.h)]
    zero = D.averaged_potential_profile(spec, 0.0, cut)
    assert zero["averaged"] == [0.0, 0.0]
    prof = D.averaged_potential_profile(spec, 2.0, cut)
    assert prof["averaged"][1] < prof["averaged"][0]
    assert prof["averaged"][1] < prof["instantaneous"][1]


def test_mehler_kernel():
    x, y = 0.3, -1.1
    assert D.mehler_kernel(2.0, 0.3, x, y) == pytest.approx(D.mehler_kernel(2.0, 0.3, y, x))
    with pytest.raises(D.RegularityError):
        D.mehler_kernel(2.0, np.pi * 4 / 2, x, y)
    with pytest.raises(D.RegularityError):
        D.mehler_prefactor(None, 0.0)
    target = abs((4j * np.pi * 0.3) ** -0.5)
    gaps = [abs(abs(D.mehler_prefactor(L, 0.3)) - target) for L in (2, 4, 8, 16)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-4


def test_mehler_comparison_refines():
    V = lambda x: np.exp(-x**2)
    gaps = []
    for d, h in ((64, 0.125), (128, 0.0625)):
        g = Grid(d, h)
        probes = [wave_packet(g, c, 0.5, p) for c, p in ((0.0, 0.0), (0.5, 1.0))]
        gaps.append(D.mehler_comparison(g, 2.0, 0.3, V, probes))
    assert gaps[0] <= 5e-2
    assert gaps[1] <= 0.5 * gaps[0]


def test_trap_removal(rng):
    spec = _spec(d=10)
    b = fock.enumerate_basis(10, 2)
    A = fock.SectorOperator(2, random_hermitian(b.sector_dims[2], rng))
    still = D.trap_removal(spec, A, 0.0, 2, [2, 4])
    assert still.passed and max(g for _, g in still.series) <= 1e-12
    rep = D.trap_removal(spec, A, 0.5, 2, [2, 4, 8, 16], b)
    assert rep.passed, rep.line()
    free = D.trap_removal(spec.free(), A, 0.5, 2, [2, 4, 8, 16], b)
    assert free.passed


def test_asymptotic_commutator(rng):
    from bosefock import resolvent as R

    d, w = 24, 3
    spec = _spec(d=d)
    big = fock.enumerate_basis(d, 2)
    small = fock.enumerate_basis(w, 2)
    def local():
        f = rng.normal(size=w) + 1j * rng.normal(size=w)
        return fock.LocalOperator(R.gauge_average(R.resolvent(small, 1.0, f)), range(w), d)
    A, B = local(), local()
    cache = D.PropagatorCache(spec, big)
    assert D.asymptotic_commutator(cache, A, B, 0.0, 6, 2, big) <= 1e-12
    assert D.asymptotic_commutator(cache, A, B, 0.0, 0, 2, big) > 1e-6
    vals = [D.asymptotic_commutator(cache, A, B, 0.5, x, 2, big) for x in (3, 6, 12)]
    assert vals[0] > vals[1] > vals[2]


def test_free_asymptotics():
    g = Grid(128, 1.0)
    xi = wave_packet(g, 0.0, 1.0)
    A0 = D.projector_observable(xi)
    np.testing.assert_allclose(D.sensitivity(A0, g), np.abs(D.momentum_amplitudes(xi)) ** 2, atol=1e-12)
    psi = wave_packet(g, 0.0, 3.0, 0.2)
    zero = D.free_asymptotic_observable(A0, g, lambda u: 0 * u, 8.0, psi, 2 * np.pi)
    assert zero.lhs == 0 and zero.rhs == 0
    with pytest.raises(ValueError):
        D.free_asymptotic_observable(A0, g, np.cos, 0.0, psi, 2 * np.pi)
    prof = lambda u: np.exp(-((u - 0.4) / 0.4) ** 2)
    rel = [D.free_asymptotic_observable(A0, g, prof, t, psi, 2 * np.pi).relative_gap for t in (8, 16, 32)]
    assert rel[0] > rel[1] > rel[2] and rel[2] <= 0.05
    assert D.fit_sensitivity_constant(g, A0, prof, 64.0, psi) == pytest.approx(2 * np.pi, rel=0.05)
