"""Gibbs states of a trapped gas: KMS residuals, and how a small non-thermal
admixture shows up in them.

    python3 demos/thermal_states.py
"""
import numpy as np

from bosefock import dynamics as D
from bosefock import fock, thermo
from bosefock.lattice import Grid, gaussian_potential, pair_potential_table
from bosefock.numkit import random_hermitian

grid = Grid(6, 1.0)
spec = D.HamiltonianSpec(grid, pair_potential_table(grid, gaussian_potential(0.5, 1.0)), D.Trap(2.0))
basis = fock.enumerate_basis(grid.d, 3)
rng = np.random.default_rng(5)
A, B = random_hermitian(basis.dim, rng), random_hermitian(basis.dim, rng)

for beta in (0.25, 1.0, 4.0):
    gs = thermo.gibbs_state(spec, basis, beta, mu=-0.6)
    gt = thermo.golden_thompson_check(spec, basis, beta)
    print(f"beta={beta:<5} log Z={gs.log_Z:8.4f}  KMS residual={thermo.kms_residual(gs, A, B, 0.5):.1e}"
          f"  Z_int - Z_free={gt.value:.3e}")

gs = thermo.gibbs_state(spec, basis, 0.25, mu=-0.6)
for eps in (1e-2, 1e-3, 1e-4):
    rho = thermo.perturbed_density(gs, eps, np.random.default_rng(0))
    print(f"admixture {eps:.0e}: KMS residual {thermo.kms_residual(gs, A, B, 0.5, rho=rho):.3e}")
