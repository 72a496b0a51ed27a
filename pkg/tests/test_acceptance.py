"""Acceptance criteria, one test per criterion.

Each test runs the relevant suites through the same entry point as the CLI,
asserts every produced check passes at its own tolerance and that the
wall-clock budget holds.  A PASS/FAIL line per criterion is printed at the
end of the session (see conftest.py) and when this file is run directly.
"""
from __future__ import annotations

import time

import pytest
import yaml

from bosefock.config import parse_config
from bosefock.suites import run_suites

RESULTS: dict[str, str] = {}


def _run(doc: dict):
    cfg = parse_config(yaml.safe_dump(doc), "<acceptance>")
    return run_suites(cfg)


def _judge(key: str, title: str, runs: list[dict], budget_s: float, expect: set[str] = frozenset()):
    t0 = time.perf_counter()
    reports = [r for doc in runs for r in _run(doc)]
    elapsed = time.perf_counter() - t0
    failed = [r for r in reports if not r.passed]
    names = {r.name.split("[")[0] for r in reports}
    missing = set(expect) - names
    ok = not failed and not missing and elapsed < budget_s and bool(reports)
    detail = f"{len(reports)} checks, {elapsed:.1f}s (budget {budget_s:.0f}s)"
    if failed:
        detail += "; failing: " + ", ".join(r.name for r in failed[:4])
    if missing:
        detail += "; missing: " + ", ".join(sorted(missing))
    RESULTS[key] = f"{'PASS' if ok else 'FAIL'} {key} {title}: {detail}"
    print(RESULTS[key])
    for r in failed:
        print("   ", r.line())
    assert not missing, detail
    assert not failed, "\n".join(r.line() for r in failed)
    assert elapsed < budget_s, detail


def test_c01_ccr():
    runs = [{"grid": {"d": d}, "fock": {"nmax": 3}, "checks": ["ccr"]} for d in (4, 5, 6, 7, 8)]
    _judge("C01", "commutation relations, d=4..8, nmax=3", runs, 5.0, {"ccr"})


def test_c02_resolvent():
    runs = [{"grid": {"d": 6}, "fock": {"nmax": 3}, "checks": ["resolvent"]}]
    _judge("C02", "resolvent identities", runs, 5.0, {"resolvent"})


def test_c03_matrix_units():
    runs = [{"grid": {"d": d}, "fock": {"nmax": 3}, "checks": ["matrix_units"]} for d in (2, 3)]
    _judge("C03", "matrix-unit reproduction, d<=3, n<=3", runs, 30.0, {"matrix_units"})


def test_c04_cluster_limit():
    runs = [{"grid": {"d": d}, "fock": {"nmax": 3}, "checks": ["cluster_limit"]} for d in (16, 24)]
    runs.append({"grid": {"d": 3}, "fock": {"nmax": 3}, "checks": ["kappa"]})
    _judge("C04", "cluster limit and kappa grading, d=16,24, n=2,3", runs, 120.0,
           {"cluster_limit", "kappa"})


def test_c05_seminorm():
    runs = [{"grid": {"d": 8}, "fock": {"nmax": 3}, "checks": ["seminorm"]}]
    _judge("C05", "seminorm monotonicity over 24 monomials", runs, 60.0, {"seminorm"})


def test_c06_dyson():
    runs = [{
        "grid": {"d": 10}, "fock": {"nmax": 2},
        "potential": {"kind": "bump", "params": {"strength": 0.5, "radius": 2.0}},
        "dynamics": {"t": [0.5, 1.0], "order": 6, "quad_tol": 1e-8},
        "checks": ["dyson"],
    }]
    _judge("C06", "Dyson certificate, orders 0..6, n=2, d=10", runs, 120.0, {"dyson"})


def test_c07_coherence():
    bump = {"kind": "bump", "params": {"strength": 0.5, "radius": 2.0}}
    runs = [
        {"grid": {"d": 24}, "fock": {"nmax": 2}, "potential": bump,
         "dynamics": {"t": [0.25, 0.5]}, "checks": ["coherence"]},
        {"grid": {"d": 20}, "fock": {"nmax": 3}, "potential": bump,
         "dynamics": {"t": [0.5]}, "checks": ["coherence"]},
    ]
    _judge("C07", "interacting cluster coherence, n=2,3, t<=0.5", runs, 180.0, {"coherence"})


def test_c08_commutator():
    runs = [{
        "grid": {"d": 40}, "fock": {"nmax": 2},
        "potential": {"kind": "bump", "params": {"strength": 0.5, "radius": 2.0}},
        "dynamics": {"t": [0.0, 0.5]}, "checks": ["commutator"],
    }]
    _judge("C08", "asymptotic commutativity over x=4,8,16", runs, 60.0, {"commutator"})


def test_c09_mehler():
    runs = [{"grid": {"d": 64, "h": 0.125}, "trap": {"L": 2.0},
             "dynamics": {"t": [0.3]}, "checks": ["mehler"]}]
    _judge("C09", "Mehler kernel vs eigendecomposition, d=64 and refined", runs, 30.0, {"mehler"})


def test_c10_trap_removal():
    runs = [{
        "grid": {"d": 16}, "fock": {"nmax": 2},
        "potential": {"kind": "bump", "params": {"strength": 0.5, "radius": 2.0}},
        "trap": {"L": 2.0}, "dynamics": {"t": [0.0, 0.5]}, "checks": ["trap_removal"],
    }]
    _judge("C10", "trap removal over L=2,4,8,16, n<=2", runs, 120.0, {"trap_removal"})


def test_c11_thermo():
    runs = [
        {"grid": {"d": 6}, "fock": {"nmax": 3},
         "potential": {"kind": "gaussian", "params": {"strength": 0.5, "width": 1.0}},
         "trap": {"L": 2.0}, "dynamics": {"t": [0.5]},
         "thermo": {"beta": [0.25, 1.0, 4.0], "mu": -0.6},
         "checks": ["renormalized", "golden_thompson", "kms"]},
        {"grid": {"d": 128, "h": 0.375}, "fock": {"nmax": 2}, "checks": ["condensate"]},
    ]
    _judge("C11", "renormalized energy, Golden-Thompson, KMS, condensate", runs, 120.0,
           {"renormalized", "golden_thompson", "kms", "condensate"})


def test_c12_free_asymptotics():
    runs = [{"grid": {"d": 128, "h": 1.0}, "fock": {"nmax": 1},
             "dynamics": {"t": [8.0, 16.0, 32.0]}, "checks": ["free_asymptotics"]}]
    _judge("C12", "free-case asymptotic observable, t=8,16,32, d=128", runs, 60.0,
           {"free_asymptotics"})


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
