"""Truncated Dyson series for the interaction cocycle against the exact
conjugation, next to the a-priori tail bound.

    python3 demos/dyson_orders.py
"""
import numpy as np

from bosefock import dynamics as D
from bosefock.fock import SectorOperator, sector_dim
from bosefock.lattice import Grid, compact_bump, pair_potential_table
from bosefock.numkit import operator_norm, random_hermitian

grid = Grid(8, 1.0)
spec = D.HamiltonianSpec(grid, pair_potential_table(grid, compact_bump(0.5, 2.0)))
n = 2
C = random_hermitian(sector_dim(grid.d, n), np.random.default_rng(3))
C = SectorOperator(n, C / operator_norm(C))

for t in (0.25, 0.5, 1.0):
    exact = D.exact_cocycle(spec, n, C, t).block
    print(f"t = {t}")
    for order in range(7):
        res = D.dyson_cocycle(spec, n, C, t, order)
        err = operator_norm(res.value.block - exact)
        print(f"  order {order}: residual {err:9.2e}   tail bound {res.tail_bound:9.2e}")
