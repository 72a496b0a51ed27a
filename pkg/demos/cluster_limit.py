"""Separate one particle from a window-local observable and watch the n-particle
matrix element factor into an (n-1)-particle one times an overlap.

    python3 demos/cluster_limit.py
"""
import numpy as np

from bosefock import fock, resolvent, structure
from bosefock.lattice import Grid, wave_packet

d, w, n = 24, 5, 3
grid = Grid(d, 1.0)
rng = np.random.default_rng(1)

small = fock.enumerate_basis(w, n)
f = rng.normal(size=w) + 1j * rng.normal(size=w)
g = rng.normal(size=w) + 1j * rng.normal(size=w)
M = resolvent.monomial(small, resolvent.ResolventSpec(((1.0, f), (-1.5, g))))
A = fock.LocalOperator(resolvent.gauge_average(M), range(w), d)

big = fock.enumerate_basis(d, n)
pos = grid.positions
fs = [wave_packet(grid, pos[1], 1.0, 0.2), wave_packet(grid, pos[2], 1.0), wave_packet(grid, pos[4], 1.0)]
gs = [wave_packet(grid, pos[2], 1.0, -0.1), wave_packet(grid, pos[1], 1.0), wave_packet(grid, pos[4], 1.3, 0.3)]
cv = structure.ClusterVectors(fs, gs)

print(f"{'shift':>6} {'lhs':>24} {'rhs':>24} {'gap':>10}")
for x in (0, 2, 4, 6, 8):
    lhs, rhs = structure.cluster_element(A, cv.shifted(x), big)
    print(f"{x:6d} {lhs:24.6e} {rhs:24.6e} {abs(lhs - rhs):10.2e}")
