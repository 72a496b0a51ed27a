"""Named check suites driven by a RunConfig.

Each suite maps a configuration to a list of CheckReports. Suite-local
recipes (window placement, packet shapes, translation ladders) are derived
from the configured grid so that the same suite scales across sizes.
"""
from __future__ import annotations

import itertools
import math
import time
import zlib
from functools import cached_property
from typing import Callable

import numpy as np

from . import dynamics as D
from . import fock, lattice
from . import resolvent as R
from . import structure as S
from . import thermo as T
from .config import RunConfig
from .fock import LocalOperator
from .lattice import Grid, WaveFn, wave_packet
from .numkit import operator_norm, random_hermitian
from .reports import ANCHORS, CheckReport, strictly_decreasing

INF = math.inf


class Context:
    """Lazily built objects shared by the suites of one run."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg

    def rng(self, suite: str) -> np.random.Generator:
        # one stream per suite, so results do not depend on suite order
        return np.random.default_rng([self.cfg.seed, zlib.crc32(suite.encode())])

    @cached_property
    def grid(self) -> Grid:
        g = self.cfg.grid
        return Grid(g.d, g.h, g.periodic)

    @cached_property
    def potential(self) -> Callable:
        kind, p = self.cfg.potential.kind, self.cfg.potential_params()
        if kind == "zero":
            return lattice.zero_potential()
        if kind == "gaussian":
            return lattice.gaussian_potential(p["strength"], p["width"])
        if kind == "squarewell":
            return lattice.square_well(p["depth"], p["radius"])
        if kind == "bump":
            return lattice.compact_bump(p["strength"], p["radius"])
        return lattice.table_potential(self.grid, p["values"])

    @cached_property
    def table(self) -> np.ndarray:
        return lattice.pair_potential_table(self.grid, self.potential)

    @cached_property
    def trap(self) -> D.Trap:
        return D.Trap(self.cfg.trap.L)

    @cached_property
    def spec(self) -> D.HamiltonianSpec:
        return D.HamiltonianSpec(self.grid, self.table, self.trap)

    def basis(self, nmax: int | None = None, d: int | None = None) -> fock.FockBasis:
        return fock.enumerate_basis(d or self.cfg.grid.d, self.cfg.fock.nmax if nmax is None else nmax,
                                    self.cfg.fock.memory_budget)

    @property
    def nmax(self) -> int:
        return self.cfg.fock.nmax


def _random_wave(grid: Grid, rng: np.random.Generator) -> WaveFn:
    return WaveFn(grid, rng.normal(size=grid.d) + 1j * rng.normal(size=grid.d)).normalize()


def _window_monomial(ctx: Context, rng, width: int, n: int, lams=(1.0, -1.5)) -> fock.FullOperator:
    """Gauge mean of a resolvent monomial on a ``width``-site window."""
    wgrid = Grid(width, ctx.cfg.grid.h, periodic=False)
    spec = R.ResolventSpec(tuple((lam, _random_wave(wgrid, rng)) for lam in lams))
    wb = fock.enumerate_basis(width, n, ctx.cfg.fock.memory_budget)
    return R.gauge_average(R.monomial(wb, spec))


def _max_abs(m: np.ndarray) -> float:
    return float(np.max(np.abs(m))) if m.size else 0.0


def _low_sectors(basis: fock.FockBasis, top: int) -> np.ndarray:
    return basis.number_diagonal <= top


# individual suites

def suite_ccr(ctx: Context) -> list[CheckReport]:
    rng = ctx.rng("ccr")
    b = ctx.basis()
    f, g = _random_wave(ctx.grid, rng), _random_wave(ctx.grid, rng)
    keep = _low_sectors(b, b.nmax - 1)
    sub = np.ix_(keep, keep)
    a_f, ad_f = fock.annihilation(b, f).matrix, fock.creation(b, f).matrix
    a_g, ad_g = fock.annihilation(b, g).matrix, fock.creation(b, g).matrix
    eye = np.eye(b.dim)
    mixed = (a_f @ ad_g - ad_g @ a_f - f.inner(g) * eye)[sub]
    pure = a_f @ a_g - a_g @ a_f
    phi_f = fock.field_op(b, f).matrix
    phi_if = fock.field_op(b, f.scale(1j)).matrix
    field = (phi_f @ phi_f + phi_if @ phi_if - 4 * ad_f @ a_f - 2 * f.inner(f) * eye)[sub]
    params = {"d": b.d, "nmax": b.nmax, "sectors": f"0..{b.nmax - 1}"}
    return [
        CheckReport("ccr[a,a*]", _max_abs(mixed), 0.0, 1e-12, params),
        CheckReport("ccr[a,a]", _max_abs(pure), 0.0, 1e-12, {"d": b.d, "nmax": b.nmax}),
        CheckReport("ccr[field]", _max_abs(field), 0.0, 1e-10, params),
    ]


def suite_resolvent(ctx: Context) -> list[CheckReport]:
    rng = ctx.rng("resolvent")
    b = ctx.basis()
    f = _random_wave(ctx.grid, rng)
    lam, mu, s = 1.3, -0.7, 0.9
    phi = fock.field_op(b, f).matrix
    Rl = R.resolvent(b, lam, f).matrix
    Rm = R.resolvent(b, mu, f).matrix
    eye = np.eye(b.dim)
    inverse = (1j * lam * eye + phi) @ Rl - eye
    adjoint = Rl.conj().T - R.resolvent(b, -lam, f).matrix
    first = Rl - Rm - 1j * (mu - lam) * Rl @ Rm
    U = fock.gauge_unitary(b, s).matrix
    gauge = U @ Rl @ U.conj().T - R.resolvent(b, lam, f.scale(np.exp(1j * s))).matrix
    mono = R.monomial(b, R.ResolventSpec(((lam, f), (mu, _random_wave(ctx.grid, rng)))))
    mean = R.gauge_average(mono).matrix - R.gauge_average_quadrature(mono).matrix
    params = {"d": b.d, "nmax": b.nmax, "lambda": lam, "mu": mu, "s": s}
    return [
        CheckReport("resolvent[inverse]", _max_abs(inverse), 0.0, 1e-10, params),
        CheckReport("resolvent[adjoint]", _max_abs(adjoint), 0.0, 1e-10, params),
        CheckReport("resolvent[first_identity]", _max_abs(first), 0.0, 1e-10, params),
        CheckReport("resolvent[gauge_covariance]", _max_abs(gauge), 0.0, 1e-10, params),
        CheckReport("resolvent[gauge_mean]", _max_abs(mean), 0.0, 1e-10, params),
    ]


def suite_matrix_units(ctx: Context) -> list[CheckReport]:
    b = ctx.basis()
    d = b.d
    single = lower = 0.0
    for n in range(1, b.nmax + 1):
        for i, k in itertools.product(range(d), repeat=2):
            W = R.matrix_unit(b, i, k, n)
            E = R.elementary(d, i, k)
            single = max(single, operator_norm(W.block(n) - fock.symmetric_embed([E], n).block))
            if n >= 2:
                target = (n - 1) / n * fock.symmetric_embed([E], n - 1).block
                lower = max(lower, operator_norm(W.block(n - 1) - target))
    composite, worst = 0.0, ""
    for n in range(2, b.nmax + 1):
        for i1, k1, i2, k2 in itertools.product(range(d), repeat=4):
            try:
                C = R.matrix_unit_composite(b, [i1, i2], [k1, k2], n)
            except R.MatrixUnitRecursionError as exc:
                composite, worst = INF, str(exc)
                continue
            E = [R.elementary(d, i1, k1), R.elementary(d, i2, k2)]
            gap = operator_norm(C.block(n) - fock.symmetric_embed(E, n).block)
            composite = max(composite, gap)
    params = {"d": d, "nmax": b.nmax}
    return [
        CheckReport("matrix_units[single]", single, 0.0, 1e-9, params),
        CheckReport("matrix_units[lower_sector]", lower, 0.0, 1e-9, params),
        CheckReport("matrix_units[composite_m2]", composite, 0.0, 1e-9, params, note=worst),
    ]


def _cluster_vectors(grid: Grid, n: int, w: int, rng) -> S.ClusterVectors:
    """f_1..f_{n-1}, g_1..g_{n-1} inside the window [0, w); f_n, g_n start there too."""
    pos = grid.positions
    r = 2.0 * grid.h
    c1, c2 = pos[2], pos[w - 3]
    fs = [wave_packet(grid, c1, grid.h, 0.2 * k / grid.h, r) for k in range(1, n)]
    gs = [wave_packet(grid, c2, 1.2 * grid.h, -0.1 * k / grid.h, r) for k in range(1, n)]
    fs.append(wave_packet(grid, c2, grid.h, 0.3 / grid.h, r))
    gs.append(wave_packet(grid, c1, 1.1 * grid.h, 0.0, r))
    return S.ClusterVectors(fs, gs)


def suite_cluster_limit(ctx: Context) -> list[CheckReport]:
    rng = ctx.rng("cluster_limit")
    d, w = ctx.cfg.grid.d, 6
    if d < 2 * w + 2:
        return [_unfit("cluster_limit", f"grid too small: need d >= {2 * w + 2}")]
    big = ctx.basis()
    out = []
    xs = [x for x in (0, 2, 4, 8, 16, 32) if w - 1 + x <= d - 1]
    far = max(xs)
    for n in range(2, ctx.nmax + 1):
        cv = _cluster_vectors(ctx.grid, n, w, rng)
        worst, series = 0.0, []
        for j in range(3):
            A = LocalOperator(_window_monomial(ctx, rng, w, n, lams=(1.0, -2.0 - j)), range(w), d)
            for x in xs:
                lhs, rhs = S.cluster_element(A, cv.shifted(x), big)
                series.append([j, x, abs(lhs - rhs)])
                if x == far:
                    worst = max(worst, abs(lhs - rhs))
        out.append(CheckReport(
            f"cluster_limit[n={n}]", worst, 0.0, 1e-10,
            {"d": d, "n": n, "window": [0, w - 1], "translation": far, "operators": 3},
            series=series, series_header=["operator", "translation", "gap"],
        ))
    return out


def suite_kappa(ctx: Context) -> list[CheckReport]:
    rng = ctx.rng("kappa")
    b = ctx.basis()
    d = b.d
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Y = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    c0 = 0.7 - 0.2j
    unit = [np.eye(d)[j] for j in range(d)]
    ad = [fock.creation(b, e).matrix for e in unit]
    a = [m.conj().T for m in ad]
    one = sum(X[i, k] * ad[i] @ a[k] for i in range(d) for k in range(d))
    two = sum(X[i, k] * Y[j, l] * ad[i] @ ad[j] @ a[l] @ a[k]
              for i in range(d) for j in range(d) for k in range(d) for l in range(d))
    A = fock.FullOperator(b, c0 * np.eye(b.dim) + one + two, True)
    i, k = int(rng.integers(d)), int(rng.integers(d))

    grading = coherence = 0.0
    for n in range(1, b.nmax + 1):
        terms = [S.GradedTerm(0, fock.SectorOperator(0, np.ones((1, 1))), c0),
                 S.factor_term([X], weight=n)]
        if n >= 2:
            terms.append(S.factor_term([X, Y], weight=n * (n - 1)))
        G = S.GradedOperator(n, d, terms)
        grading = max(grading, operator_norm(S.materialize(G).block - S.restrict(A, n).block))
        coherence = max(coherence, operator_norm(S.materialize(S.kappa(G)).block - S.restrict(A, n - 1).block))
        # matrix units: one-body term of weight 1 at level n
        W = R.matrix_unit(b, i, k, n)
        GW = S.GradedOperator(n, d, [S.factor_term([R.elementary(d, i, k)])])
        coherence = max(coherence, operator_norm(S.materialize(S.kappa(GW)).block - W.block(n - 1)))
    params = {"d": d, "nmax": b.nmax, "unit": [i, k]}
    return [
        CheckReport("kappa[grading]", grading, 0.0, 1e-9, params),
        CheckReport("kappa[coherence]", coherence, 0.0, 1e-9, params),
    ]


def suite_seminorm(ctx: Context, count: int = 24) -> list[CheckReport]:
    rng = ctx.rng("seminorm")
    d, w = ctx.cfg.grid.d, min(4, ctx.cfg.grid.d - 1)
    big = ctx.basis()
    start = (d - w) // 2
    window = list(range(start, start + w))
    worst, series = -INF, []
    for j in range(count):
        length = int(rng.integers(1, 4))
        lams = tuple(float(rng.choice([-1, 1]) * rng.uniform(0.5, 2.0)) for _ in range(length))
        A = LocalOperator(_window_monomial(ctx, rng, w, big.nmax, lams), window, d).full(big)
        norms = [S.seminorm(A, n) for n in range(big.nmax + 1)]
        excess = max(norms[n - 1] - norms[n] for n in range(1, big.nmax + 1))
        worst = max(worst, excess)
        series.append([j] + norms)
    return [CheckReport(
        "seminorm", worst, 0.0, 1e-10, {"d": d, "window": window, "monomials": count},
        series=series, series_header=["monomial"] + [f"norm_{n}" for n in range(big.nmax + 1)],
    )]


def suite_dyson(ctx: Context) -> list[CheckReport]:
    rng = ctx.rng("dyson")
    n, spec = ctx.nmax, ctx.spec
    dim = fock.sector_dim(ctx.cfg.grid.d, n)
    fock._check_budget(f"sector {n} operators", dim * dim * 8, ctx.cfg.fock.memory_budget)
    C = random_hermitian(dim, rng)
    C = fock.SectorOperator(n, C / operator_norm(C))
    qt, top = ctx.cfg.dynamics.quad_tol, ctx.cfg.dynamics.order
    out = []
    for t in ctx.cfg.dynamics.t:
        exact = D.exact_cocycle(spec, n, C, t).block
        rows = []
        for order in range(top + 1):
            name = f"dyson[t={t:g},order={order}]"
            try:
                res = D.dyson_cocycle(spec, n, C, t, order, quad_tol=qt)
            except D.QuadratureError as exc:
                out.append(CheckReport(name, INF, 0.0, params={"t": t, "order": order}, note=str(exc)))
                continue
            x = 2 * abs(t) * res.V_norm
            resid = operator_norm(res.value.block - exact)
            bound = res.tail_bound + 10 * qt
            # residual <= ||C|| + ||partial sum|| holds for free; a slack above it certifies nothing
            trivial = 1.0 + sum(x**l / math.factorial(l) for l in range(order + 1))
            notes, ok = [], resid <= bound
            if abs(t) * res.V_norm > 1:
                ok, notes = False, notes + ["t*||V_n|| > 1 is outside the certified range"]
            if 10 * qt >= trivial:
                ok, notes = False, notes + ["quadrature slack 10*quad_tol exceeds the a-priori bound"]
            rows.append([order, resid, bound])
            out.append(CheckReport(
                name, resid, bound, 0.0,
                {"t": t, "order": order, "n": n, "V_n": res.V_norm, "steps": res.steps, "quad_tol": qt},
                passed=bool(ok), note="; ".join(notes),
            ))
        if rows:
            out[-1].series, out[-1].series_header = rows, ["order", "residual", "bound"]
    # first- vs second-quantized sector Hamiltonians
    routes = max(_max_abs(D.sector_hamiltonian(spec, m).block - D.sector_hamiltonian_tensor(spec, m).block)
                 for m in range(n + 1))
    out.append(CheckReport("dyson[hamiltonian_routes]", routes, 0.0, 1e-10, {"n": n}))
    return out


def _power_ladder(lo: int, hi: int) -> list[int]:
    out, x = [], lo
    while x <= hi:
        out.append(x)
        x *= 2
    return out


def suite_coherence(ctx: Context) -> list[CheckReport]:
    rng = ctx.rng("coherence")
    d, n, w = ctx.cfg.grid.d, ctx.nmax, 4
    xs = _power_ladder(1, d - 16)
    if len(xs) < 3:
        return [_unfit("coherence", "grid too small for three separation doublings (need d >= 20)")]
    big = ctx.basis()
    cache = D.PropagatorCache(ctx.spec, big)
    A = LocalOperator(_window_monomial(ctx, rng, w, n), range(w), d)
    g, pos = ctx.grid, ctx.grid.positions
    r = 2.0 * g.h
    fs = [wave_packet(g, pos[2], g.h, 0.2 / g.h, r) for _ in range(n - 1)] + [wave_packet(g, pos[6], g.h, 0.0, r)]
    gs = [wave_packet(g, pos[1], g.h, -0.1 / g.h, r) for _ in range(n - 1)] + [wave_packet(g, pos[6], 1.2 * g.h, 0.3 / g.h, r)]
    cv = S.ClusterVectors(fs, gs)
    out = []
    for t in ctx.cfg.dynamics.t:
        rep = S.coherence_check(A, cache, t, cv, big, xs)
        rep.name = f"coherence[n={n},t={t:g}]"
        out.append(rep)
    return out


def suite_commutator(ctx: Context) -> list[CheckReport]:
    rng = ctx.rng("commutator")
    d, n, w = ctx.cfg.grid.d, ctx.nmax, 4
    xs = _power_ladder(4, d // 2 - 4)
    if len(xs) < 3:
        return [_unfit("commutator", "grid too small for x in {4, 8, 16} (need d >= 40)")]
    big = ctx.basis()
    cache = D.PropagatorCache(ctx.spec, big)
    start = d // 2 - w // 2
    window = range(start, start + w)
    A = LocalOperator(_window_monomial(ctx, rng, w, n, (1.0, -2.0)), window, d)
    B = LocalOperator(_window_monomial(ctx, rng, w, n, (1.0, -2.0)), window, d)
    out = []
    for t in ctx.cfg.dynamics.t:
        vals = [D.asymptotic_commutator(cache, A, B, t, x, n, big) for x in xs]
        ok = all(v <= 1e-12 for v in vals) if t == 0 else strictly_decreasing(vals)
        at0 = D.asymptotic_commutator(cache, A, B, t, 0, n, big)
        out.append(CheckReport(
            f"commutator[t={t:g}]", vals[-1], INF, 0.0, {"t": t, "n": n, "x": xs, "x0_value": at0},
            passed=bool(ok), note="" if ok else "not decreasing in x",
            series=[[x, v] for x, v in zip(xs, vals)], series_header=["x", "commutator"],
        ))
    return out


def suite_averaged_potential(ctx: Context) -> list[CheckReport]:
    spec = ctx.spec.with_trap(ctx.trap)
    h = ctx.cfg.grid.h
    cutoffs = [math.pi / (4 * h), math.pi / (2 * h)]
    out = []
    for t in ctx.cfg.dynamics.t:
        prof = D.averaged_potential_profile(spec, t, cutoffs)
        avg, inst = prof["averaged"], prof["instantaneous"]
        if t == 0:
            out.append(CheckReport(f"averaged_potential[t={t:g}]", max(avg), 0.0, 1e-12, {"t": t}))
            continue
        ok = avg[1] < avg[0] and avg[1] < inst[1]
        out.append(CheckReport(
            f"averaged_potential[t={t:g}]", avg[1], inst[1], 0.0,
            {"t": t, "cutoffs": cutoffs, "averaged": avg, "instantaneous": inst},
            passed=bool(ok), note="" if ok else "no decay below the instantaneous profile",
            series=[[c, a, b] for c, a, b in zip(cutoffs, avg, inst)],
            series_header=["cutoff", "averaged", "instantaneous"],
        ))
    return out


def suite_mehler(ctx: Context) -> list[CheckReport]:
    g = ctx.grid
    fine = Grid(2 * g.d, g.h / 2, g.periodic)
    L = ctx.cfg.trap.L

    def probes(grid):
        return [wave_packet(grid, c, 0.5, p) for c in (-1.0, 0.0, 1.0) for p in (-2.0, 0.0, 2.0)]

    vf = lattice.gaussian_potential(1.0, 1.0)
    out = []
    for tau in ctx.cfg.dynamics.t:
        name = f"mehler[tau={tau:g}]"
        try:
            coarse = D.mehler_comparison(g, L, tau, vf, probes(g))
            refined = D.mehler_comparison(fine, L, tau, vf, probes(fine))
        except D.RegularityError as exc:
            out.append(CheckReport(name, INF, 5e-2, params={"tau": tau}, note=str(exc)))
            continue
        halves = refined <= 0.5 * coarse
        out.append(CheckReport(
            name, coarse, 5e-2, 0.0,
            {"tau": tau, "L": L, "d": g.d, "h": g.h, "refined": refined, "ratio": refined / coarse},
            passed=bool(coarse <= 5e-2 and halves),
            note="" if halves else "gap does not halve under h -> h/2",
            series=[[g.h, coarse], [fine.h, refined]], series_header=["h", "gap"],
        ))
    return out


def suite_trap_removal(ctx: Context) -> list[CheckReport]:
    if ctx.cfg.trap.L is None:
        return [_unfit("trap_removal", "needs a finite trap.L to start the doubling ladder")]
    rng = ctx.rng("trap_removal")
    d, w = ctx.cfg.grid.d, 4
    n = min(ctx.nmax, 2)
    big = ctx.basis(n)
    start = d // 2 - w // 2
    A = LocalOperator(_window_monomial(ctx, rng, w, n, (1.0, -2.0)), range(start, start + w), d)
    L0 = ctx.cfg.trap.L
    Ls = [L0 * 2**k for k in range(4)]
    out = []
    for t in ctx.cfg.dynamics.t:
        rep = D.trap_removal(ctx.spec, A, t, n, Ls, big)
        rep.name = f"trap_removal[t={t:g}]"
        rep.value, rep.bound = rep.series[0][1], INF
        rep.note = "" if rep.passed else "gap not strictly decreasing in L"
        out.append(rep)
    return out


def suite_renormalized(ctx: Context) -> list[CheckReport]:
    spec = T.renormalize(ctx.spec, ctx.nmax)
    mins = [float(np.linalg.eigvalsh(D.sector_hamiltonian(spec, n).block)[0]) if n else 0.0
            for n in range(ctx.nmax + 1)]
    b = ctx.basis()
    Hr = D.full_hamiltonian(spec, b).matrix
    vac = float(np.linalg.norm(Hr @ b.vacuum()))
    params = {"E": [spec.sector_shift[n] for n in range(ctx.nmax + 1)], "min_eig": mins}
    out = [
        CheckReport("renormalized[positivity]", max(0.0, -min(mins)), 0.0, 1e-10, params),
        CheckReport("renormalized[vacuum]", vac, 0.0, 1e-10, {}),
    ]
    pt = T.positive_type_check(ctx.grid, ctx.table, nmax=ctx.nmax, trap=ctx.trap)
    if pt.accepted:
        out.append(CheckReport("renormalized[positive_type]", max(0.0, -pt.min_energy), 0.0, 1e-10,
                               {"min_energy": pt.min_energy}))
    return out


def suite_condensate(ctx: Context) -> list[CheckReport]:
    profile = lambda x: np.exp(-x**2)  # noqa: E731
    scales = [1.0, 2.0, 4.0]
    out, ident = [], 0.0
    for n in range(1, min(ctx.nmax, 2) + 1):
        try:
            res = [T.condensate_energy(ctx.grid, profile, L, n) for L in scales]
        except ValueError as exc:
            return [_unfit("condensate", str(exc))]
        ident = max(ident, max(r.identity_gap for r in res))
        ratios = [res[i].energy / res[i + 1].energy for i in range(len(res) - 1)]
        drift = max(abs(q / 4 - 1) for q in ratios)
        out.append(CheckReport(
            f"condensate[scaling,n={n}]", drift, 0.05, 0.0, {"n": n, "scales": scales, "ratios": ratios},
            series=[[L, r.energy] for L, r in zip(scales, res)], series_header=["L_scale", "energy"],
        ))
    out.insert(0, CheckReport("condensate[identity]", ident, 0.0, 1e-10, {"d": ctx.cfg.grid.d}))
    return out


def suite_golden_thompson(ctx: Context) -> list[CheckReport]:
    b = ctx.basis()
    out = []
    for beta in ctx.cfg.thermo.beta:
        rep = T.golden_thompson_check(ctx.spec, b, beta)
        rep.name = f"golden_thompson[beta={beta:g}]"
        out.append(rep)
    return out


def suite_kms(ctx: Context) -> list[CheckReport]:
    if ctx.cfg.trap.L is None:
        return [_unfit("kms", "Gibbs states need a finite trap.L")]
    rng = ctx.rng("kms")
    b = ctx.basis()
    v0 = float(ctx.table[0, 0])
    mu = ctx.cfg.thermo.mu if ctx.cfg.thermo.mu is not None else -v0 - 0.1
    A = rng.normal(size=(b.dim, b.dim)) + 1j * rng.normal(size=(b.dim, b.dim))
    B = rng.normal(size=(b.dim, b.dim)) + 1j * rng.normal(size=(b.dim, b.dim))
    A, B = A / _max_abs(A), B / _max_abs(B)
    times = sorted({0.0, *ctx.cfg.dynamics.t})
    N = np.diag(b.number_diagonal.astype(float))
    out = []
    for beta in ctx.cfg.thermo.beta:
        try:
            gs = T.gibbs_state(ctx.spec, b, beta, mu)
        except T.ChemicalPotentialError as exc:
            out.append(_unfit(f"kms[beta={beta:g}]", str(exc)))
            continue
        rho = gs.rho
        inv = max(abs(np.trace(rho).real - 1), _max_abs(rho @ N - N @ rho), _max_abs(rho - rho.conj().T))
        # the explicit-density route multiplies rounding noise in rho by e^{beta * spread}
        spread = float(np.ptp(gs.energies))
        general = math.exp(min(beta * spread, 700.0)) * np.finfo(float).eps <= 1e-9
        out.append(CheckReport(
            f"kms[beta={beta:g},state]", inv, 0.0, 1e-12,
            {"beta": beta, "mu": mu, "min_eig": float(np.linalg.eigvalsh(rho)[0]),
             "beta_spread": beta * spread, "general_route": general},
            note="" if general else "explicit-density route omitted: rho not representable at this beta",
        ))
        for t in times:
            p = {"beta": beta, "mu": mu, "t": t}
            out.append(CheckReport(f"kms[beta={beta:g},t={t:g}]", T.kms_residual(gs, A, B, t), 0.0, 1e-10, p))
            if general:
                out.append(CheckReport(f"kms[beta={beta:g},t={t:g},general]",
                                       T.kms_residual(gs, A, B, t, rho=rho), 0.0, 1e-10, p))
        pert = T.perturbed_density(gs, 1e-2, rng)
        det = T.kms_residual(gs, A, B, times[-1], rho=pert)
        out.append(CheckReport(f"kms[beta={beta:g},detector]", det, 1e-3, 0.0,
                               {"beta": beta, "eps": 1e-2, "t": times[-1]}, sense="lower"))
    return out


def suite_free_asymptotics(ctx: Context) -> list[CheckReport]:
    g = ctx.grid
    ts = [t for t in ctx.cfg.dynamics.t if t != 0]
    if len(ts) < 2:
        return [_unfit("free_asymptotics", "needs at least two nonzero times")]
    xi = wave_packet(g, 0.0, 1.0)
    A0 = D.projector_observable(xi)
    profile = lambda v: np.exp(-(v - 0.4) ** 2 / (2 * 0.4**2))  # noqa: E731
    psi = wave_packet(g, 0.0, 3.0, 0.2)
    c_s = 2 * math.pi
    res = [D.free_asymptotic_observable(A0, g, profile, t, psi, c_s) for t in ts]
    rel = [r.relative_gap for r in res]
    ok = strictly_decreasing(rel) and rel[-1] <= 0.05
    return [CheckReport(
        "free_asymptotics", rel[-1], 0.05, 0.0, {"t": ts, "c_s": c_s, "relative_gaps": rel},
        passed=bool(ok), note="" if strictly_decreasing(rel) else "relative gap not decreasing in t",
        series=[[r.t, r.lhs, r.rhs, r.relative_gap] for r in res],
        series_header=["t", "lhs", "rhs", "relative_gap"],
    )]


def _unfit(name: str, reason: str) -> CheckReport:
    return CheckReport(name, math.nan, 0.0, passed=False, note=f"not run: {reason}")


SUITES: dict[str, Callable[[Context], list[CheckReport]]] = {
    "ccr": suite_ccr,
    "resolvent": suite_resolvent,
    "matrix_units": suite_matrix_units,
    "cluster_limit": suite_cluster_limit,
    "kappa": suite_kappa,
    "seminorm": suite_seminorm,
    "dyson": suite_dyson,
    "coherence": suite_coherence,
    "commutator": suite_commutator,
    "averaged_potential": suite_averaged_potential,
    "free_asymptotics": suite_free_asymptotics,
    "mehler": suite_mehler,
    "trap_removal": suite_trap_removal,
    "renormalized": suite_renormalized,
    "condensate": suite_condensate,
    "golden_thompson": suite_golden_thompson,
    "kms": suite_kms,
}
assert list(SUITES) == list(ANCHORS)


def run_suites(cfg: RunConfig, ctx: Context | None = None) -> list[CheckReport]:
    """Run ``cfg.checks`` in declared order; budget violations skip the suite."""
    ctx = ctx or Context(cfg)
    out = []
    for name in cfg.checks:
        t0 = time.perf_counter()
        try:
            reports = SUITES[name](ctx)
        except fock.BudgetError as exc:
            reports = [CheckReport(name, math.nan, 0.0, passed=False, note=f"skipped: {exc}")]
        ms = 1e3 * (time.perf_counter() - t0)
        for r in reports:
            r.runtime_ms = ms / len(reports)
        out.extend(reports)
    return out
