"""Check records and their JSON/CSV serialization."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

SCHEMA = 1

# suite name -> source anchor; ``list-checks`` prints this table in order
ANCHORS = {
    "ccr": "§2",
    "resolvent": "§2 / Lemma 3.1",
    "matrix_units": "Lemma 3.3",
    "cluster_limit": "Lemma 3.4",
    "kappa": "Lemma 3.4 / Theorem 3.5",
    "seminorm": "Lemma 3.4",
    "dyson": "Eq. 4.2 / Lemma 4.1",
    "coherence": "Lemma 4.5 / Eq. 4.5",
    "commutator": "Cor. 4.7",
    "averaged_potential": "§5.2",
    "free_asymptotics": "Eq. 5.1",
    "mehler": "Eq. A.2",
    "trap_removal": "Appendix",
    "renormalized": "§5.1",
    "condensate": "§5.1",
    "golden_thompson": "§5.3",
    "kms": "§5.3",
}


def anchor_for(name: str) -> str:
    return ANCHORS.get(name.split("[")[0], "")


@dataclass
class CheckReport:
    """One quantitative assertion.

    ``sense = "upper"`` means pass iff value <= bound + tolerance; detector
    checks use ``"lower"`` (pass iff value > bound).
    """

    name: str
    value: float
    bound: float
    tolerance: float = 0.0
    params: dict = field(default_factory=dict)
    passed: bool | None = None
    anchor: str = ""
    sense: str = "upper"
    runtime_ms: float = 0.0
    note: str = ""
    series: list = field(default_factory=list)
    series_header: list = field(default_factory=list)

    def __post_init__(self):
        if not self.anchor:
            self.anchor = anchor_for(self.name)
        if self.passed is None:
            ok = math.isfinite(self.value)
            if self.sense == "lower":
                ok = ok and self.value > self.bound
            else:
                ok = ok and self.value <= self.bound + self.tolerance
            self.passed = bool(ok)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        out["value"] = _clean(self.value)
        out["bound"] = _clean(self.bound)
        return out

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        rel = ">" if self.sense == "lower" else "<="
        out = f"{verdict} {self.name}: value={self.value:.3e} {rel} bound={self.bound:.3e} tol={self.tolerance:.1e}"
        return out + (f" ({self.note})" if self.note else "")


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def strictly_decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def write_report(path: Path, reports: list[CheckReport], meta: dict) -> None:
    doc = {
        "schema": SCHEMA,
        "meta": meta,
        "checks": [r.to_dict() for r in reports],
        "all_pass": all(r.passed for r in reports),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    try:
        import numpy as np

        if isinstance(x, np.generic):
            return x.item()
        if isinstance(x, np.ndarray):
            return x.tolist()
    except ImportError:  # pragma: no cover
        pass
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"not serializable: {type(x)}")


def write_series(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v
