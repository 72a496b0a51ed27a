import numpy as np
import pytest

from bosefock import dynamics as D
from bosefock import fock
from bosefock import thermo as T
from bosefock.lattice import Grid, gaussian_potential, laplacian, pair_potential_table, square_well, wave_packet
from bosefock.numkit import random_hermitian


def _spec(d=5, L=2.0, V=gaussian_potential(0.5, 1.0)):
    g = Grid(d, 1.0)
    table = None if V is None else pair_potential_table(g, V)
    return D.HamiltonianSpec(g, table, D.Trap(L))


def test_ground_energy_free():
    spec = _spec(d=6, L=None, V=None)
    assert [T.ground_energy(spec, n) for n in range(3)] == pytest.approx([0, 0, 0], abs=1e-12)


def test_square_well_binds():
    g = Grid(16, 1.0)
    spec = D.HamiltonianSpec(g, pair_potential_table(g, square_well(1.0, 1.0)))
    assert T.ground_energy(spec, 2) > 0


def test_renormalized_hamiltonian():
    spec = _spec(d=5)
    b = fock.enumerate_basis(5, 3)
    Hr = D.full_hamiltonian(T.renormalize(spec, 3), b).matrix
    assert np.linalg.eigvalsh(Hr)[0] >= -1e-10
    np.testing.assert_allclose(Hr @ b.vacuum(), 0, atol=1e-12)


def test_positive_type():
    g = Grid(12, 1.0)
    res = T.positive_type_check(g, pair_potential_table(g, gaussian_potential(1.0, 1.0)), nmax=2)
    assert res.accepted and res.min_energy >= -1e-10
    delta = np.diag(np.full(12, 0.7))
    res = T.positive_type_check(g, delta)
    assert res.accepted
    np.testing.assert_allclose(res.transform, 0.7)
    cos = pair_potential_table(g, lambda r: np.cos(2 * np.pi * np.asarray(r) / 12) - 0.2)
    assert not T.positive_type_check(g, cos).accepted
    with pytest.raises(ValueError):
        T.positive_type_check(Grid(12, 1.0, periodic=False), delta)


@pytest.fixture(scope="module")
def setup():
    # width 0.6 keeps the 4-site periodic profile of positive type
    spec = _spec(d=4, V=gaussian_potential(0.5, 0.6))
    b = fock.enumerate_basis(4, 3)
    return spec, b


def test_gibbs_basics(setup):
    spec, b = setup
    gs = T.gibbs_state(spec, b, 1.0, -0.6)
    assert np.trace(gs.rho).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(gs.rho)[0] >= -1e-14
    N = fock.number_operator(b).matrix
    np.testing.assert_allclose(gs.rho @ N, N @ gs.rho, atol=1e-15)


def test_gibbs_guards(setup):
    spec, b = setup
    with pytest.raises(T.ChemicalPotentialError):
        T.gibbs_state(spec, b, 1.0, 0.0)
    with pytest.warns(UserWarning):
        assert T.gibbs_state(spec, b, 1.0, 0.0, allow_any_mu=True).flagged
    with pytest.raises(ValueError):
        T.gibbs_state(spec.with_trap(D.Trap()), b, 1.0, -0.6)
    with pytest.raises(ValueError):
        T.gibbs_state(spec, b, 0.0, -0.6)


def test_low_temperature_ground_weight(setup):
    spec, b = setup
    gs = T.gibbs_state(spec, b, 64.0, -0.6)
    ground = gs.vectors[:, np.argmin(gs.energies)]
    assert np.vdot(ground, gs.rho @ ground).real >= 0.999
    assert np.isfinite(gs.log_Z)


def test_partition_and_energy_monotone(setup):
    spec, b = setup
    states = [T.gibbs_state(spec, b, beta, -0.6) for beta in (0.25, 0.5, 1, 2, 4)]
    logs = [s.log_Z for s in states]
    energies = [float(np.sum(np.diag(s.vectors.conj().T @ s.rho @ s.vectors).real * s.energies)) for s in states]
    assert all(a > c for a, c in zip(logs, logs[1:]))
    assert all(a > c for a, c in zip(energies, energies[1:]))


def test_gibbs_invariance(setup, rng):
    spec, b = setup
    gs = T.gibbs_state(spec, b, 1.0, -0.6)
    A = fock.FullOperator(b, random_hermitian(b.dim, rng))
    cache = D.PropagatorCache(spec, b)
    evolved = D.heisenberg_evolve(cache, A, 0.7)
    assert gs.expect(evolved.matrix) == pytest.approx(gs.expect(A.matrix), abs=1e-10)


def test_kms(setup, rng):
    spec, b = setup
    for beta in (0.25, 1.0, 4.0):
        gs = T.gibbs_state(spec, b, beta, -0.6)
        A, B = random_hermitian(b.dim, rng), random_hermitian(b.dim, rng)
        for t in (0.0, 0.5):
            assert T.kms_residual(gs, A, B, t) <= 1e-10


def test_kms_general_route_on_gibbs(setup, rng):
    # the density route amplifies rounding in rho by exp(beta * spread of K),
    # so it is only exercised at high temperature
    spec, b = setup
    gs = T.gibbs_state(spec, b, 0.25, -0.6)
    assert np.exp(gs.beta * np.ptp(gs.energies)) * 1e-16 < 1e-9
    A, B = random_hermitian(b.dim, rng), random_hermitian(b.dim, rng)
    assert T.kms_residual(gs, A, B, 0.5, rho=gs.rho) <= 1e-9


def test_kms_detector_linear(setup, rng):
    spec, b = setup
    gs = T.gibbs_state(spec, b, 0.25, -0.6)
    A, B = random_hermitian(b.dim, rng), random_hermitian(b.dim, rng)
    seed = 7
    res = []
    for eps in (1e-2, 5e-3, 2.5e-3):
        rho = T.perturbed_density(gs, eps, np.random.default_rng(seed))
        res.append(T.kms_residual(gs, A, B, 0.5, rho=rho))
    assert res[0] > 1e-3
    slopes = [r / e for r, e in zip(res, (1e-2, 5e-3, 2.5e-3))]
    assert slopes[0] > 0
    assert max(slopes) / min(slopes) < 1.05


def test_golden_thompson(setup):
    spec, b = setup
    free = T.golden_thompson_check(spec.free(), b, 1.0)
    assert free.passed and abs(free.value) <= 1e-10
    for beta in (0.25, 1.0, 4.0):
        rep = T.golden_thompson_check(spec, b, beta)
        assert rep.passed and rep.value < 0


def test_golden_thompson_skips_non_positive_type():
    g = Grid(4, 1.0)
    spec = D.HamiltonianSpec(g, pair_potential_table(g, square_well(1.0, 1.0)), D.Trap(2.0))
    rep = T.golden_thompson_check(spec, fock.enumerate_basis(4, 2), 1.0)
    assert "skipped" in rep.note


def test_condensate():
    g = Grid(96, 0.375)
    prof = lambda x: np.exp(-x**2)
    one = T.condensate_energy(g, prof, 1.0, 1)
    fL = T.scaled_profile(g, prof, 1.0)
    assert one.energy == pytest.approx(one.one_body, abs=1e-12)
    assert one.one_body == pytest.approx(np.vdot(fL.amplitudes, laplacian(g) @ fL.amplitudes).real * g.h)
    two = T.condensate_energy(g, prof, 1.0, 2)
    assert two.identity_gap <= 1e-10
    assert two.energy == pytest.approx(2 * one.energy, rel=1e-10)
    wide = T.condensate_energy(g, prof, 2.0, 2)
    assert two.energy / wide.energy == pytest.approx(4.0, rel=0.05)
    with pytest.raises(ValueError):
        T.scaled_profile(g, prof, 20.0)


def test_scaled_profile_normalized():
    g = Grid(64, 0.25)
    f = T.scaled_profile(g, lambda x: np.exp(-x**2), 1.5)
    assert f.norm() == pytest.approx(1.0)
    assert f.inner(wave_packet(g, 0.0, 1.0)).real > 0
