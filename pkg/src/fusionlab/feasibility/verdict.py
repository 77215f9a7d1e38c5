"""Feasibility verdicts: witnesses, certificates, replay checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..classical import ClassicalModel
from ..tables import DataBundle

# An entry reference is (table key, flat index), e.g. ("do:A:0", 3).
EntryRef = tuple[str, int]


@dataclass(frozen=True)
class CertTerm:
    """coefficient * product over factor groups of (sum of table entries)."""

    coefficient: float
    factors: tuple[tuple[EntryRef, ...], ...]

    def evaluate(self, bundle: DataBundle) -> float:
        out = self.coefficient
        for group in self.factors:
            s = 0.0
            for key, idx in group:
                s += float(bundle.table_by_key(key).probs[idx])
            out *= s
        return out

    def to_dict(self) -> dict:
        return {
            "coefficient": self.coefficient,
            "factors": [[[key, idx] for key, idx in group] for group in self.factors],
        }


@dataclass(frozen=True)
class Certificate:
    """Inequality  sum(terms) <= bound  valid for classically compatible
    bundles; an Infeasible verdict's input violates it."""

    terms: tuple[CertTerm, ...]
    bound: float

    def evaluate(self, bundle: DataBundle) -> float:
        return float(sum(t.evaluate(bundle) for t in self.terms))

    def separation(self, bundle: DataBundle) -> float:
        return self.evaluate(bundle) - self.bound

    def to_dict(self) -> dict:
        return {"terms": [t.to_dict() for t in self.terms], "bound": self.bound}

    @staticmethod
    def from_dict(d: dict) -> "Certificate":
        terms = tuple(
            CertTerm(
                coefficient=float(t["coefficient"]),
                factors=tuple(
                    tuple((str(k), int(i)) for k, i in group) for group in t["factors"]
                ),
            )
            for t in d["terms"]
        )
        return Certificate(terms=terms, bound=float(d["bound"]))


@dataclass
class FeasibilityVerdict:
    status: str  # "feasible" | "infeasible" | "unknown"
    model: ClassicalModel | None = None
    certificate: Certificate | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    @property
    def infeasible(self) -> bool:
        return self.status == "infeasible"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "witness": self.model.to_dict() if self.model is not None else None,
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "diagnostics": self.diagnostics,
        }

    def exit_code(self) -> int:
        return {"feasible": 0, "infeasible": 2, "unknown": 3}[self.status]


def replay_max_deviation(model: ClassicalModel, bundle: DataBundle) -> float:
    """Largest |model-generated - bundle| entry over the bundle's tables."""
    worst = 0.0
    for table in bundle.tables:
        if table.kind == "obs":
            gen = model.observational_table()
        else:
            gen = model.do_table(table.target, table.setting)
        gen = gen.reordered(table.axis_names) if gen.axis_names != table.axis_names else gen
        worst = max(worst, float(np.max(np.abs(gen.probs - table.probs))))
    return worst
