"""Quantum causal models over latent-exogenous scenarios.

A model assigns each latent a density matrix split into subsystems owned
by the latent's children, and each observable node a family of effects
conditioned on the node's observed-parent values.  Probabilities come
from Tr(state . effects); an intervention replaces the target's effect
by the identity and feeds the set value to the children's conditioning.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import jsonio
from .errors import (
    InvalidModel,
    NonPhysicalProbability,
    NotNormalized,
    OutOfRange,
    UnknownNode,
    ValidationResult,
)
from .linalg import embed, identity, kron_all, min_eigenvalue, trace_product, validate_state
from .scenario import Scenario
from .tables import DataBundle, DataTable, validate_bundle

NEGATIVITY_TOL = 1e-9
EFFECT_TOL = 1e-9


@dataclass(frozen=True)
class LatentState:
    """Density matrix of one latent, with (dimension, owner) per subsystem."""

    name: str
    rho: np.ndarray
    subsystems: tuple[tuple[int, str], ...]

    @property
    def dim(self) -> int:
        d = 1
        for dim, _ in self.subsystems:
            d *= dim
        return d


@dataclass(frozen=True)
class EffectFamily:
    """Effects of one node: (outcome, observed-parent values) -> matrix.

    Matrices act on the node's composite space, i.e. the tensor product
    of the subsystems the node owns, in global subsystem order.
    """

    node: str
    parent_names: tuple[str, ...]
    effects: dict[tuple[int, tuple[int, ...]], np.ndarray]

    def effect(self, outcome: int, parent_values: tuple[int, ...]) -> np.ndarray:
        return self.effects[(outcome, tuple(parent_values))]


@dataclass(frozen=True)
class QuantumCausalModel:
    scenario: Scenario
    states: tuple[LatentState, ...]
    effect_families: dict[str, EffectFamily]

    def state(self, latent: str) -> LatentState:
        for s in self.states:
            if s.name == latent:
                return s
        raise UnknownNode(latent)


def _global_layout(model: QuantumCausalModel):
    """Subsystem dims in global order (latents sorted by name, declared
    order within a latent) plus each node's owned positions."""
    dims: list[int] = []
    owner_positions: dict[str, list[int]] = {o: [] for o in model.scenario.observable_names}
    for st in sorted(model.states, key=lambda s: s.name):
        for dim, owner in st.subsystems:
            owner_positions.setdefault(owner, []).append(len(dims))
            dims.append(dim)
    return dims, owner_positions


def validate_model(model: QuantumCausalModel, tol: float = EFFECT_TOL) -> ValidationResult:
    failures: list[str] = []
    scen = model.scenario
    declared = {s.name for s in model.states}
    expected = {l.name for l in scen.latents}
    if declared != expected:
        failures.append(f"latents: states {sorted(declared)} != scenario latents {sorted(expected)}")
    for st in model.states:
        res = validate_state(st.rho, tol)
        failures.extend(f"state {st.name}/{f}" for f in res.failures)
        children = set(next((l.children for l in scen.latents if l.name == st.name), ()))
        for _, owner in st.subsystems:
            if owner not in children:
                failures.append(f"state {st.name}: owner {owner!r} is not a child")
        if st.rho.shape != (st.dim, st.dim):
            failures.append(f"state {st.name}: shape {st.rho.shape} != subsystem dims {st.subsystems}")
    dims, owners = _global_layout(model)
    for node in scen.observable_names:
        fam = model.effect_families.get(node)
        if fam is None:
            failures.append(f"effects {node}: missing family")
            continue
        if fam.parent_names != scen.observed_parents(node):
            failures.append(
                f"effects {node}: parents {fam.parent_names} != scenario {scen.observed_parents(node)}"
            )
            continue
        node_dim = 1
        for p in owners[node]:
            node_dim *= dims[p]
        parent_cards = [scen.card(p) for p in fam.parent_names]
        for pv in itertools.product(*(range(c) for c in parent_cards)):
            total = np.zeros((node_dim, node_dim), dtype=complex)
            for outcome in range(scen.card(node)):
                eff = fam.effects.get((outcome, pv))
                if eff is None:
                    failures.append(f"effects {node}: missing outcome {outcome} at parents {pv}")
                    continue
                if eff.shape != (node_dim, node_dim):
                    failures.append(f"effects {node}{pv}: shape {eff.shape} != node dim {node_dim}")
                    continue
                if min_eigenvalue(eff) < -tol:
                    failures.append(f"effects {node}|{pv}: outcome {outcome} not PSD")
                total = total + eff
            if np.max(np.abs(total - identity(node_dim))) > tol:
                failures.append(f"effects {node}|{pv}: effects do not sum to identity")
    return ValidationResult.collect(failures)


class _Evaluator:
    """Caches the joint state and per-node embedded effects."""

    def __init__(self, model: QuantumCausalModel):
        self.model = model
        self.scen = model.scenario
        self.dims, self.owners = _global_layout(model)
        self.rho = kron_all(st.rho for st in sorted(model.states, key=lambda s: s.name))
        self.total_dim = int(np.prod(self.dims)) if self.dims else 1
        self._embedded: dict[tuple[str, int, tuple[int, ...]], np.ndarray] = {}

    def embedded_effect(self, node: str, outcome: int, parent_values: tuple[int, ...]) -> np.ndarray:
        key = (node, outcome, parent_values)
        if key not in self._embedded:
            fam = self.model.effect_families[node]
            eff = fam.effect(outcome, parent_values)
            self._embedded[key] = embed(eff, self.owners[node], self.dims)
        return self._embedded[key]

    def probability(self, outcomes: dict[str, int], conditioning: dict[str, int],
                    skip: set[str]) -> float:
        """Tr(rho . product of effects); ``conditioning`` supplies parent
        values (natural outcomes overridden by interventions/settings);
        nodes in ``skip`` contribute the identity."""
        op = None
        for node in self.scen.observable_names:
            if node in skip:
                continue
            fam = self.model.effect_families[node]
            pv = tuple(conditioning[p] for p in fam.parent_names)
            e = self.embedded_effect(node, outcomes[node], pv)
            op = e if op is None else op @ e
        if op is None:
            op = identity(self.total_dim)
        return trace_product(self.rho, op, NEGATIVITY_TOL)


def observational_table(model: QuantumCausalModel) -> DataTable:
    ev = _Evaluator(model)
    scen = model.scenario
    axes = tuple((n, scen.card(n)) for n in scen.observable_names)
    probs = []
    for o in itertools.product(*(range(c) for _, c in axes)):
        vals = dict(zip(scen.observable_names, o))
        probs.append(ev.probability(vals, dict(vals), set()))
    return DataTable(kind="obs", axes=axes, probs=np.array(probs))


def do_table(model: QuantumCausalModel, target: str, setting: int) -> DataTable:
    scen = model.scenario
    if not scen.is_observable(target):
        raise UnknownNode(target)
    ev = _Evaluator(model)
    others = tuple(n for n in scen.observable_names if n != target)
    axes = tuple((n, scen.card(n)) for n in others)
    probs = []
    for o in itertools.product(*(range(c) for _, c in axes)):
        vals = dict(zip(others, o))
        cond = dict(vals)
        cond[target] = setting
        probs.append(ev.probability(vals, cond, {target}))
    return DataTable(kind="do", axes=axes, probs=np.array(probs), target=target, setting=setting)


def generate_bundle(model: QuantumCausalModel, targets) -> DataBundle:
    """Observational table plus do-tables for every setting of each target."""
    res = validate_model(model)
    if not res.ok:
        raise InvalidModel("; ".join(res.failures))
    scen = model.scenario
    tables = [observational_table(model)]
    for t in targets:
        for setting in range(scen.card(t)):
            tables.append(do_table(model, t, setting))
    bundle = DataBundle(scen, tuple(tables))
    check = validate_bundle(bundle)
    if not check.ok:
        raise NonPhysicalProbability("; ".join(check.failures))
    return bundle


# -- full SWIG conditional distributions ------------------------------


@dataclass(frozen=True)
class SwigDistribution:
    """Q(outcomes | settings) over an interrupted scenario.

    ``q`` has shape (prod setting cards, prod outcome cards), rows indexed
    lexicographically over setting values, columns over outcomes.
    """

    scenario: Scenario  # interrupted form
    setting_axes: tuple[tuple[str, int], ...]
    outcome_axes: tuple[tuple[str, int], ...]
    q: np.ndarray

    def setting_index(self, sigma: tuple[int, ...]) -> int:
        idx = 0
        for (_, card), v in zip(self.setting_axes, sigma):
            idx = idx * card + v
        return idx

    def outcome_index(self, o: tuple[int, ...]) -> int:
        idx = 0
        for (_, card), v in zip(self.outcome_axes, o):
            idx = idx * card + v
        return idx

    def value(self, sigma: tuple[int, ...], o: tuple[int, ...]) -> float:
        return float(self.q[self.setting_index(sigma), self.outcome_index(o)])

    def validate(self, tol: float = 1e-9) -> None:
        sums = self.q.sum(axis=1)
        if np.max(np.abs(sums - 1.0)) > tol:
            raise NotNormalized(f"per-setting sums deviate by {np.max(np.abs(sums - 1.0)):.3e}")

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "settings": [n for n, _ in self.setting_axes],
            "outcomes": [n for n, _ in self.outcome_axes],
            "q": [[float(x) for x in row] for row in self.q],
        }

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        doc = self.to_dict()
        if extra:
            doc.update(extra)
        jsonio.dump_path(doc, path)

    @staticmethod
    def from_dict(d: dict) -> "SwigDistribution":
        scen = Scenario.from_dict(d["scenario"])
        setting_axes = tuple((n, scen.card(n)) for n in d["settings"])
        outcome_axes = tuple((n, scen.card(n)) for n in d["outcomes"])
        return SwigDistribution(scen, setting_axes, outcome_axes, np.array(d["q"], dtype=float))

    @staticmethod
    def load(path: str | Path) -> "SwigDistribution":
        return SwigDistribution.from_dict(jsonio.load_path(path))


def swig_distribution(model: QuantumCausalModel, targets) -> SwigDistribution:
    """Full Q(outcomes | settings) after interrupting ``targets``: every
    node keeps its effect, children of a target condition on the setting."""
    scen = model.scenario
    targets = list(targets)
    swig = scen.interrupt_all(targets)
    ev = _Evaluator(model)
    setting_axes = tuple((s.name, s.card) for s in swig.settings)
    outcome_axes = tuple((n, scen.card(n)) for n in scen.observable_names)
    n_sigma = int(np.prod([c for _, c in setting_axes]))
    n_out = int(np.prod([c for _, c in outcome_axes]))
    q = np.zeros((n_sigma, n_out))
    for i, sigma in enumerate(itertools.product(*(range(c) for _, c in setting_axes))):
        for j, o in enumerate(itertools.product(*(range(c) for _, c in outcome_axes))):
            vals = dict(zip(scen.observable_names, o))
            cond = dict(vals)
            for t, v in zip(targets, sigma):
                cond[t] = v
            q[i, j] = ev.probability(vals, cond, set())
    dist = SwigDistribution(swig, setting_axes, outcome_axes, q)
    dist.validate()
    return dist


def bundle_from_swig(dist: SwigDistribution) -> DataBundle:
    """Observational table from the diagonal Q(o | settings = o's values),
    do-tables from natural-outcome marginals at fixed settings."""
    dist.validate()
    swig = dist.scenario
    targets = [s.name[:-1] for s in swig.settings]
    obs_names = swig.observable_names
    base = Scenario(swig.observables, swig.latents, swig.edges, settings=())
    axes = tuple((n, swig.card(n)) for n in obs_names)
    probs = []
    for o in itertools.product(*(range(c) for _, c in axes)):
        sigma = tuple(o[obs_names.index(t)] for t in targets)
        probs.append(dist.value(sigma, o))
    tables = [DataTable(kind="obs", axes=axes, probs=np.array(probs))]
    for t_i, target in enumerate(targets):
        others = tuple(n for n in obs_names if n != target)
        o_axes = tuple((n, swig.card(n)) for n in others)
        t_pos = obs_names.index(target)
        for setting in range(swig.card(target)):
            vals = []
            for o_rest in itertools.product(*(range(c) for _, c in o_axes)):
                full = dict(zip(others, o_rest))
                sigma = tuple(
                    setting if j == t_i else full[tg] for j, tg in enumerate(targets)
                )
                total = 0.0
                for v in range(swig.card(target)):
                    o = tuple(v if k == t_pos else full[n] for k, n in enumerate(obs_names))
                    total += dist.value(sigma, o)
                vals.append(total)
            tables.append(
                DataTable(kind="do", axes=o_axes, probs=np.array(vals), target=target, setting=setting)
            )
    return DataBundle(base, tuple(tables))


def isotropic(state, v: float) -> np.ndarray:
    """v * state + (1 - v) * maximally mixed, on the state's own space."""
    if not 0.0 <= v <= 1.0:
        raise OutOfRange(f"visibility {v} outside [0, 1]")
    rho = np.asarray(state, dtype=complex)
    d = rho.shape[0]
    return v * rho + (1.0 - v) * identity(d) / d
