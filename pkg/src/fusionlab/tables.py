"""Observational and do-conditional probability tables and their fusion.

Tables are flat float arrays in lexicographic outcome order; axis order
always follows the scenario's observable declaration order.  A bundle
fuses one observational table with interventional tables (one per
setting value of each interrupted target) over a single scenario.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import jsonio
from .errors import (
    MissingRegime,
    UnknownAxis,
    UnknownNode,
    ValidationResult,
)
from .scenario import Scenario

NORMALIZATION_TOL = 1e-9


def _lex_index(axes: tuple[tuple[str, int], ...], outcomes: tuple[int, ...]) -> int:
    idx = 0
    for (_, card), v in zip(axes, outcomes):
        idx = idx * card + v
    return idx


@dataclass(frozen=True)
class DataTable:
    """One probability table: observational, or under do(target=setting)."""

    kind: str  # "obs" | "do"
    axes: tuple[tuple[str, int], ...]
    probs: np.ndarray
    target: str | None = None
    setting: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=float).reshape(-1))
        self.probs.flags.writeable = False

    @property
    def axis_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.axes)

    @property
    def key(self) -> str:
        if self.kind == "obs":
            return "obs"
        return f"do:{self.target}:{self.setting}"

    def size(self) -> int:
        n = 1
        for _, card in self.axes:
            n *= card
        return n

    def value(self, outcomes: tuple[int, ...]) -> float:
        return float(self.probs[_lex_index(self.axes, outcomes)])

    def outcome_iter(self):
        return itertools.product(*(range(card) for _, card in self.axes))

    def validate(self, tol: float = NORMALIZATION_TOL) -> list[str]:
        failures = []
        if self.kind not in ("obs", "do"):
            failures.append(f"kind: unknown kind {self.kind!r}")
        if self.kind == "do" and (self.target is None or self.setting is None):
            failures.append("kind: do-table must carry target and setting")
        if self.kind == "do" and self.target in self.axis_names:
            failures.append(f"axes: do-table on {self.target} must not include it as an axis")
        if len(self.probs) != self.size():
            failures.append(f"shape: {len(self.probs)} entries for axes {self.axes}")
        if not np.all(np.isfinite(self.probs)):
            failures.append("finite: non-finite probability entries")
            return failures
        if float(self.probs.min(initial=0.0)) < -tol:
            failures.append(f"nonneg: min entry {self.probs.min():.3e}")
        total = float(self.probs.sum())
        if abs(total - 1.0) > tol:
            failures.append(f"normalization: sum = {total!r}")
        return [f"{self.key}/{f}" for f in failures]

    def marginal(self, keep) -> "DataTable":
        """Sum out every axis not in ``keep``; preserves kind metadata."""
        keep = list(keep)
        for k in keep:
            if k not in self.axis_names:
                raise UnknownAxis(f"axis {k!r} not in table {self.key}")
        shape = tuple(card for _, card in self.axes)
        arr = self.probs.reshape(shape) if shape else self.probs.copy()
        drop = tuple(i for i, (n, _) in enumerate(self.axes) if n not in keep)
        out = arr.sum(axis=drop) if drop else arr
        new_axes = tuple(a for a in self.axes if a[0] in keep)
        return replace(self, axes=new_axes, probs=np.asarray(out, dtype=float).reshape(-1))

    def reordered(self, names) -> "DataTable":
        names = tuple(names)
        if set(names) != set(self.axis_names):
            raise UnknownAxis(f"reorder {names} does not match axes {self.axis_names}")
        shape = tuple(card for _, card in self.axes)
        perm = tuple(self.axis_names.index(n) for n in names)
        arr = self.probs.reshape(shape).transpose(perm)
        new_axes = tuple(self.axes[p] for p in perm)
        return replace(self, axes=new_axes, probs=np.ascontiguousarray(arr).reshape(-1))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "do":
            d["target"] = self.target
            d["setting"] = int(self.setting)
        d["axes"] = list(self.axis_names)
        d["probs"] = [float(p) for p in self.probs]
        return d


@dataclass(frozen=True)
class DataBundle:
    """One observational table fused with do-tables over one scenario."""

    scenario: Scenario
    tables: tuple[DataTable, ...]

    def observational(self) -> DataTable:
        for t in self.tables:
            if t.kind == "obs":
                return t
        raise MissingRegime("bundle has no observational table")

    def has_observational(self) -> bool:
        return any(t.kind == "obs" for t in self.tables)

    def do_targets(self) -> dict[str, dict[int, DataTable]]:
        out: dict[str, dict[int, DataTable]] = {}
        for t in self.tables:
            if t.kind == "do":
                out.setdefault(t.target, {})[t.setting] = t
        return out

    def do_table(self, target: str, setting: int) -> DataTable:
        try:
            return self.do_targets()[target][setting]
        except KeyError:
            raise MissingRegime(f"bundle lacks do({target}={setting}) table") from None

    def table_by_key(self, key: str) -> DataTable:
        for t in self.tables:
            if t.key == key:
                return t
        raise MissingRegime(f"bundle lacks table {key!r}")

    def subset(self, keys) -> "DataBundle":
        keys = list(keys)
        return DataBundle(self.scenario, tuple(self.table_by_key(k) for k in keys))

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "tables": [t.to_dict() for t in self.tables],
        }

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        doc = self.to_dict()
        if extra:
            doc.update(extra)
        jsonio.dump_path(doc, path)

    @staticmethod
    def from_dict(d: dict, scenario: Scenario | None = None) -> "DataBundle":
        if scenario is None:
            ref = d["scenario"]
            scenario = Scenario.from_dict(ref) if isinstance(ref, dict) else Scenario.load(ref)
        tables = []
        for td in d["tables"]:
            axes = tuple((n, scenario.card(n)) for n in td["axes"])
            tables.append(
                DataTable(
                    kind=td["kind"],
                    axes=axes,
                    probs=np.array([float(p) for p in td["probs"]]),
                    target=td.get("target"),
                    setting=td.get("setting"),
                )
            )
        return DataBundle(scenario, tuple(tables))

    @staticmethod
    def load(path: str | Path) -> "DataBundle":
        return DataBundle.from_dict(jsonio.load_path(path))


def validate_bundle(bundle: DataBundle, tol: float = NORMALIZATION_TOL) -> ValidationResult:
    failures: list[str] = []
    scen = bundle.scenario
    obs_count = sum(1 for t in bundle.tables if t.kind == "obs")
    if obs_count > 1:
        failures.append("bundle: more than one observational table")
    for t in bundle.tables:
        failures.extend(t.validate(tol))
        for name, card in t.axes:
            if not scen.is_observable(name):
                failures.append(f"{t.key}/axes: {name!r} not a scenario observable")
            elif scen.card(name) != card:
                failures.append(f"{t.key}/axes: {name!r} cardinality {card} != {scen.card(name)}")
        if t.kind == "do" and t.target is not None:
            if not scen.is_observable(t.target):
                failures.append(f"{t.key}/target: {t.target!r} not a scenario observable")
            elif not (0 <= int(t.setting) < scen.card(t.target)):
                failures.append(f"{t.key}/setting: {t.setting} out of range")
    for target, per_setting in bundle.do_targets().items():
        if scen.is_observable(target):
            missing = sorted(set(range(scen.card(target))) - set(per_setting))
            if missing:
                failures.append(f"do:{target}/settings: missing settings {missing}")
    return ValidationResult.collect(failures)


# -- SWIG-level linear constraints ------------------------------------


@dataclass(frozen=True)
class SwigConstraintSystem:
    """Linear equalities tying the SWIG conditional Q(outcomes | settings)
    to the entries of a fused bundle.

    Q is indexed by (setting assignment, outcome assignment), both in
    lexicographic order over the interrupted scenario's setting/observable
    declaration orders.  Rows are 0/1-coefficient sums of Q coordinates.
    """

    scenario: Scenario  # interrupted form
    setting_axes: tuple[tuple[str, int], ...]
    outcome_axes: tuple[tuple[str, int], ...]
    rows: tuple[tuple[int, ...], ...]  # Q flat coordinates per equality
    rhs: tuple[float, ...]
    row_labels: tuple[str, ...]

    @property
    def n_vars(self) -> int:
        n = 1
        for _, card in self.setting_axes + self.outcome_axes:
            n *= card
        return n

    def q_index(self, settings: tuple[int, ...], outcomes: tuple[int, ...]) -> int:
        return _lex_index(self.setting_axes + self.outcome_axes, settings + outcomes)

    def check(self, q: np.ndarray, tol: float = 1e-9) -> float:
        """Max absolute residual of the equalities on a flat Q vector."""
        worst = 0.0
        for coords, value in zip(self.rows, self.rhs):
            worst = max(worst, abs(float(sum(q[c] for c in coords)) - value))
        return worst


def swig_constraints(bundle: DataBundle) -> SwigConstraintSystem:
    """Constraint system over Q(outcomes | settings) for the bundle's
    regimes: diagonal rows for the observational table, natural-outcome
    marginal rows for each do-table, and per-setting normalization."""
    scen = bundle.scenario
    targets = sorted(bundle.do_targets(), key=lambda n: scen.observable_names.index(n))
    if not targets:
        raise MissingRegime("bundle has no interventional tables")
    if not bundle.has_observational():
        raise MissingRegime("bundle has no observational table")
    for t in targets:
        if not scen.is_observable(t):
            raise UnknownNode(t)
    swig = scen.interrupt_all(targets)
    setting_axes = tuple((s.name, s.card) for s in swig.settings)
    outcome_axes = tuple((o.name, o.card) for o in swig.observables)
    obs_names = swig.observable_names

    rows: list[tuple[int, ...]] = []
    rhs: list[float] = []
    labels: list[str] = []

    def q_index(settings, outcomes):
        return _lex_index(setting_axes + outcome_axes, tuple(settings) + tuple(outcomes))

    obs = bundle.observational()
    obs_aligned = obs.reordered(obs_names)
    for o in obs_aligned.outcome_iter():
        sigma = tuple(o[obs_names.index(t)] for t in targets)
        rows.append((q_index(sigma, o),))
        rhs.append(obs_aligned.value(o))
        labels.append(f"diag|{o}")

    for t_i, target in enumerate(targets):
        per_setting = bundle.do_targets()[target]
        others = tuple(n for n in obs_names if n != target)
        t_pos = obs_names.index(target)
        for setting, table in sorted(per_setting.items()):
            aligned = table.reordered(others)
            for o_rest in aligned.outcome_iter():
                full = {n: v for n, v in zip(others, o_rest)}
                sigma = tuple(
                    setting if j == t_i else full[tg] for j, tg in enumerate(targets)
                )
                coords = []
                for v in range(scen.card(target)):
                    outc = tuple(
                        v if k == t_pos else full[n] for k, n in enumerate(obs_names)
                    )
                    coords.append(q_index(sigma, outc))
                rows.append(tuple(coords))
                rhs.append(aligned.value(o_rest))
                labels.append(f"do({target}={setting})|{o_rest}")

    for sigma in itertools.product(*(range(card) for _, card in setting_axes)):
        coords = tuple(
            q_index(sigma, o)
            for o in itertools.product(*(range(card) for _, card in outcome_axes))
        )
        rows.append(coords)
        rhs.append(1.0)
        labels.append(f"norm|{sigma}")

    return SwigConstraintSystem(
        scenario=swig,
        setting_axes=setting_axes,
        outcome_axes=outcome_axes,
        rows=tuple(rows),
        rhs=tuple(rhs),
        row_labels=tuple(labels),
    )
