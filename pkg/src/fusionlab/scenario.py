"""Latent-exogenous causal scenarios over observed variables.

A ``Scenario`` is a DAG with three node kinds: observables (finite
cardinality), exogenous latents (no parents, only children), and
setting nodes produced by interrupting an observable.  Interruption
splits a node X into its natural-outcome half (keeps the name and all
incoming edges) and an exogenous setting half ``X#`` that takes over
the outgoing edges.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import AlreadyInterrupted, UnknownNode, ValidationResult
from . import jsonio

SETTING_SUFFIX = "#"


@dataclass(frozen=True)
class Observable:
    name: str
    card: int


@dataclass(frozen=True)
class Latent:
    name: str
    children: tuple[str, ...]


@dataclass(frozen=True)
class SettingNode:
    name: str
    card: int


@dataclass(frozen=True)
class Scenario:
    observables: tuple[Observable, ...]
    latents: tuple[Latent, ...]
    edges: tuple[tuple[str, str], ...]
    settings: tuple[SettingNode, ...] = ()

    # -- lookups ------------------------------------------------------

    @property
    def observable_names(self) -> tuple[str, ...]:
        return tuple(o.name for o in self.observables)

    @property
    def setting_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.settings)

    def is_observable(self, name: str) -> bool:
        return name in self.observable_names

    def is_setting(self, name: str) -> bool:
        return name in self.setting_names

    def card(self, name: str) -> int:
        for o in self.observables:
            if o.name == name:
                return o.card
        for s in self.settings:
            if s.name == name:
                return s.card
        raise UnknownNode(name)

    def observed_parents(self, name: str) -> tuple[str, ...]:
        """Parents of ``name`` among observables and settings, in
        declaration order (observables first, then settings)."""
        parents = {src for src, dst in self.edges if dst == name}
        ordered = [n for n in self.observable_names if n in parents]
        ordered += [n for n in self.setting_names if n in parents]
        return tuple(ordered)

    def latent_parents(self, name: str) -> tuple[str, ...]:
        return tuple(l.name for l in self.latents if name in l.children)

    def children(self, name: str) -> tuple[str, ...]:
        return tuple(dst for src, dst in self.edges if src == name)

    def topological(self) -> tuple[str, ...]:
        """Observables sorted so parents precede children."""
        remaining = list(self.observable_names)
        done: list[str] = []
        while remaining:
            progressed = False
            for n in list(remaining):
                obs_parents = [p for p in self.observed_parents(n) if self.is_observable(p)]
                if all(p in done for p in obs_parents):
                    done.append(n)
                    remaining.remove(n)
                    progressed = True
            if not progressed:
                raise ValueError(f"cycle among observables: {remaining}")
        return tuple(done)

    # -- validation ---------------------------------------------------

    def validate(self) -> ValidationResult:
        failures: list[str] = []
        names = list(self.observable_names) + list(self.setting_names)
        latent_names = [l.name for l in self.latents]
        for dup in {n for n in names + latent_names if (names + latent_names).count(n) > 1}:
            failures.append(f"names: duplicate node name {dup!r}")
        for o in self.observables:
            if o.card < 2:
                failures.append(f"cardinality: observable {o.name} has card {o.card} < 2")
        for src, dst in self.edges:
            if src in latent_names or dst in latent_names:
                failures.append(
                    f"latent-exogeneity: edge ({src}, {dst}) touches a latent; "
                    "latent links belong in the latent's child list"
                )
                continue
            if src not in names:
                failures.append(f"edges: unknown source {src!r}")
            if dst not in names:
                failures.append(f"edges: unknown target {dst!r}")
            if dst in self.setting_names:
                failures.append(f"settings: setting node {dst} cannot have parents")
        for l in self.latents:
            if len(l.children) < 2:
                failures.append(f"latent-children: latent {l.name} has < 2 children")
            for c in l.children:
                if c not in self.observable_names:
                    failures.append(f"latent-children: latent {l.name} child {c!r} not observable")
        # acyclicity over observables + settings (Kahn)
        try:
            self.topological()
        except ValueError as exc:
            failures.append(f"acyclic: {exc}")
        return ValidationResult.collect(failures)

    # -- interruption -------------------------------------------------

    def interrupt(self, node: str) -> "Scenario":
        """Split ``node`` into natural outcome + exogenous setting ``node#``.

        Outgoing edges re-originate from the setting half; incoming edges
        stay on the natural half.
        """
        if not self.is_observable(node):
            raise UnknownNode(f"{node!r} is not an observable of this scenario")
        setting_name = node + SETTING_SUFFIX
        if setting_name in self.setting_names:
            raise AlreadyInterrupted(f"{setting_name} already exists")
        new_edges = tuple(
            (setting_name, dst) if src == node else (src, dst) for src, dst in self.edges
        )
        new_setting = SettingNode(setting_name, self.card(node))
        return replace(self, edges=new_edges, settings=self.settings + (new_setting,))

    def interrupt_all(self, nodes) -> "Scenario":
        s = self
        for n in nodes:
            s = s.interrupt(n)
        return s

    # -- serialization ------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "observables": [{"name": o.name, "card": o.card} for o in self.observables],
            "latents": [{"name": l.name, "children": list(l.children)} for l in self.latents],
            "edges": [list(e) for e in self.edges],
            "settings": [{"name": s.name, "card": s.card} for s in self.settings],
        }

    @staticmethod
    def from_dict(d: dict) -> "Scenario":
        return Scenario(
            observables=tuple(Observable(o["name"], int(o["card"])) for o in d["observables"]),
            latents=tuple(Latent(l["name"], tuple(l["children"])) for l in d.get("latents", [])),
            edges=tuple((e[0], e[1]) for e in d.get("edges", [])),
            settings=tuple(SettingNode(s["name"], int(s["card"])) for s in d.get("settings", [])),
        )

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        doc = self.to_dict()
        if extra:
            doc.update(extra)
        jsonio.dump_path(doc, path)

    @staticmethod
    def load(path: str | Path) -> "Scenario":
        return Scenario.from_dict(jsonio.load_path(path))


@dataclass(frozen=True)
class StrategySpace:
    """All deterministic response functions of one node.

    ``parent_sig`` lists the node's observed parents with cardinalities;
    each strategy is a tuple of outcomes indexed by the lexicographic
    rank of the parent-value tuple.  Latent parents are excluded: latent
    values index mixtures, which belong to the solvers.
    """

    node: str
    outcome_card: int
    parent_sig: tuple[tuple[str, int], ...]
    strategies: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def parent_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.parent_sig)

    def parent_index(self, values: tuple[int, ...]) -> int:
        idx = 0
        for (_, card), v in zip(self.parent_sig, values):
            idx = idx * card + v
        return idx

    def evaluate(self, strategy_id: int, parent_values: tuple[int, ...]) -> int:
        return self.strategies[strategy_id][self.parent_index(parent_values)]


def enumerate_strategies(scenario: Scenario, node: str) -> StrategySpace:
    """Lexicographically ordered deterministic strategies of ``node``."""
    if not scenario.is_observable(node):
        raise UnknownNode(f"{node!r} is not an observable")
    parents = scenario.observed_parents(node)
    sig = tuple((p, scenario.card(p)) for p in parents)
    out = scenario.card(node)
    n_combos = 1
    for _, card in sig:
        n_combos *= card
    strategies = tuple(itertools.product(range(out), repeat=n_combos))
    return StrategySpace(node, out, sig, strategies)


# -- canonical three-variable scenarios -------------------------------


def scenario_triangle_edge() -> Scenario:
    """Triangle of bipartite latents with one direct edge A -> B."""
    return Scenario(
        observables=(Observable("A", 2), Observable("B", 2), Observable("C", 2)),
        latents=(
            Latent("alpha", ("B", "C")),
            Latent("beta", ("A", "C")),
            Latent("gamma", ("A", "B")),
        ),
        edges=(("A", "B"),),
    )


def scenario_uc_relaxation() -> Scenario:
    """Two bipartite latents, B influencing A and C, plus A -> C."""
    return Scenario(
        observables=(Observable("A", 2), Observable("B", 2), Observable("C", 2)),
        latents=(Latent("alpha", ("B", "C")), Latent("gamma", ("A", "B"))),
        edges=(("B", "A"), ("B", "C"), ("A", "C")),
    )


def scenario_chain() -> Scenario:
    """Chain A -> B -> C with one tripartite latent."""
    return Scenario(
        observables=(Observable("A", 2), Observable("B", 2), Observable("C", 2)),
        latents=(Latent("lambda", ("A", "B", "C")),),
        edges=(("A", "B"), ("B", "C")),
    )


BUILTIN_SCENARIOS = {
    "triangle-edge": scenario_triangle_edge,
    "uc-relaxation": scenario_uc_relaxation,
    "chain": scenario_chain,
}
