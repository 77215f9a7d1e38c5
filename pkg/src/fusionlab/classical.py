"""Classical latent-variable models: sampling, table generation, replay.

A classical model assigns each latent a finite cardinality and a weight
vector, and each observable node a conditional probability table over
(latent-parent values, observed-parent values).  The same machinery
generates observational tables, do-tables and full SWIG distributions,
which makes it the replay oracle for feasibility witnesses.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidModel, UnknownNode, ValidationResult
from .quantum import SwigDistribution
from .scenario import Scenario, StrategySpace, enumerate_strategies
from .tables import DataBundle, DataTable

CPT_TOL = 1e-12


@dataclass(frozen=True)
class ClassicalModel:
    """Latent weights plus per-node response tables.

    ``weights[latent]`` is a simplex vector.  ``responses[node]`` has
    shape (*latent-parent cards, *observed-parent cards, outcome card),
    with latent parents in scenario latent order and observed parents in
    the scenario's ``observed_parents`` order.
    """

    scenario: Scenario
    weights: dict[str, np.ndarray]
    responses: dict[str, np.ndarray]

    def latent_card(self, name: str) -> int:
        return len(self.weights[name])

    def validate(self, tol: float = CPT_TOL) -> ValidationResult:
        failures: list[str] = []
        scen = self.scenario
        for l in scen.latents:
            w = self.weights.get(l.name)
            if w is None:
                failures.append(f"weights {l.name}: missing")
                continue
            if np.any(w < -tol) or abs(float(w.sum()) - 1.0) > tol:
                failures.append(f"weights {l.name}: not a simplex vector")
        for node in scen.observable_names:
            r = self.responses.get(node)
            if r is None:
                failures.append(f"responses {node}: missing")
                continue
            lp = scen.latent_parents(node)
            op = scen.observed_parents(node)
            want = tuple(self.latent_card(l) for l in lp) + tuple(
                scen.card(p) for p in op
            ) + (scen.card(node),)
            if r.shape != want:
                failures.append(f"responses {node}: shape {r.shape} != {want}")
                continue
            if np.any(r < -tol):
                failures.append(f"responses {node}: negative entries")
            sums = r.sum(axis=-1)
            if np.max(np.abs(sums - 1.0)) > tol:
                failures.append(f"responses {node}: rows not normalized")
        return ValidationResult.collect(failures)

    # -- generation ----------------------------------------------------

    def _node_prob(self, node: str, outcome: int, latent_vals: dict[str, int],
                   parent_vals: dict[str, int]) -> float:
        idx = tuple(latent_vals[l] for l in self.scenario.latent_parents(node))
        idx += tuple(parent_vals[p] for p in self.scenario.observed_parents(node))
        return float(self.responses[node][idx + (outcome,)])

    def _latent_iter(self):
        names = [l.name for l in self.scenario.latents]
        cards = [self.latent_card(n) for n in names]
        for combo in itertools.product(*(range(c) for c in cards)):
            w = 1.0
            for n, v in zip(names, combo):
                w *= float(self.weights[n][v])
            yield dict(zip(names, combo)), w

    def observational_table(self) -> DataTable:
        scen = self.scenario
        axes = tuple((n, scen.card(n)) for n in scen.observable_names)
        probs = np.zeros(int(np.prod([c for _, c in axes])))
        for i, o in enumerate(itertools.product(*(range(c) for _, c in axes))):
            vals = dict(zip(scen.observable_names, o))
            total = 0.0
            for lv, w in self._latent_iter():
                if w == 0.0:
                    continue
                p = w
                for node in scen.observable_names:
                    p *= self._node_prob(node, vals[node], lv, vals)
                total += p
            probs[i] = total
        return DataTable(kind="obs", axes=axes, probs=probs)

    def do_table(self, target: str, setting: int) -> DataTable:
        scen = self.scenario
        if not scen.is_observable(target):
            raise UnknownNode(target)
        others = tuple(n for n in scen.observable_names if n != target)
        axes = tuple((n, scen.card(n)) for n in others)
        probs = np.zeros(int(np.prod([c for _, c in axes])))
        for i, o in enumerate(itertools.product(*(range(c) for _, c in axes))):
            vals = dict(zip(others, o))
            cond = dict(vals)
            cond[target] = setting
            total = 0.0
            for lv, w in self._latent_iter():
                if w == 0.0:
                    continue
                p = w
                for node in others:
                    p *= self._node_prob(node, vals[node], lv, cond)
                total += p
            probs[i] = total
        return DataTable(kind="do", axes=axes, probs=probs, target=target, setting=setting)

    def generate_bundle(self, targets) -> DataBundle:
        res = self.validate(tol=1e-9)
        if not res.ok:
            raise InvalidModel("; ".join(res.failures))
        tables = [self.observational_table()]
        for t in targets:
            for setting in range(self.scenario.card(t)):
                tables.append(self.do_table(t, setting))
        return DataBundle(self.scenario, tuple(tables))

    def swig_distribution(self, targets) -> SwigDistribution:
        scen = self.scenario
        targets = list(targets)
        swig = scen.interrupt_all(targets)
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
                total = 0.0
                for lv, w in self._latent_iter():
                    if w == 0.0:
                        continue
                    p = w
                    for node in scen.observable_names:
                        p *= self._node_prob(node, vals[node], lv, cond)
                    total += p
                q[i, j] = total
        return SwigDistribution(swig, setting_axes, outcome_axes, q)

    # -- serialization (feasibility witnesses) --------------------------

    def to_dict(self) -> dict:
        return {
            "weights": {n: [float(x) for x in w] for n, w in self.weights.items()},
            "responses": {
                n: {"shape": list(r.shape), "probs": [float(x) for x in r.reshape(-1)]}
                for n, r in self.responses.items()
            },
        }

    @staticmethod
    def from_dict(d: dict, scenario: Scenario) -> "ClassicalModel":
        weights = {n: np.array(w, dtype=float) for n, w in d["weights"].items()}
        responses = {
            n: np.array(r["probs"], dtype=float).reshape(r["shape"])
            for n, r in d["responses"].items()
        }
        return ClassicalModel(scenario, weights, responses)


def random_model(
    scenario: Scenario,
    rng: np.random.Generator,
    latent_cards: dict[str, int] | None = None,
    deterministic: bool = False,
) -> ClassicalModel:
    """Sample a model: Dirichlet(1) weights and CPT rows, or one-hot
    rows when ``deterministic``."""
    cards = dict(latent_cards or {})
    for l in scenario.latents:
        cards.setdefault(l.name, int(rng.integers(2, 5)))
    weights = {l.name: rng.dirichlet(np.ones(cards[l.name])) for l in scenario.latents}
    responses = {}
    for node in scenario.observable_names:
        lp = scenario.latent_parents(node)
        op = scenario.observed_parents(node)
        shape = tuple(cards[l] for l in lp) + tuple(scenario.card(p) for p in op)
        out = scenario.card(node)
        rows = int(np.prod(shape)) if shape else 1
        if deterministic:
            table = np.zeros((rows, out))
            table[np.arange(rows), rng.integers(0, out, size=rows)] = 1.0
        else:
            table = rng.dirichlet(np.ones(out), size=rows)
        responses[node] = table.reshape(shape + (out,))
    return ClassicalModel(scenario, weights, responses)


def model_from_strategy_weights(
    scenario: Scenario,
    spaces: list[StrategySpace],
    weights: np.ndarray,
) -> ClassicalModel:
    """Single-latent model whose latent values index products of
    deterministic strategies (one strategy per node, all nodes)."""
    if len(scenario.latents) != 1:
        raise InvalidModel("strategy-product models need exactly one latent")
    latent = scenario.latents[0].name
    counts = [len(sp.strategies) for sp in spaces]
    total = int(np.prod(counts))
    if len(weights) != total:
        raise InvalidModel(f"{len(weights)} weights for {total} strategy products")
    responses = {}
    for k, sp in enumerate(spaces):
        op_cards = [card for _, card in sp.parent_sig]
        shape = (total,) + tuple(op_cards) + (sp.outcome_card,)
        table = np.zeros(shape)
        for lam, combo in enumerate(itertools.product(*(range(c) for c in counts))):
            sid = combo[k]
            for pi, pv in enumerate(itertools.product(*(range(c) for c in op_cards))):
                table[(lam,) + pv + (sp.evaluate(sid, pv),)] = 1.0
        responses[sp.node] = table
    return ClassicalModel(scenario, {latent: np.asarray(weights, dtype=float)}, responses)


def strategy_spaces(scenario: Scenario) -> list[StrategySpace]:
    return [enumerate_strategies(scenario, n) for n in scenario.observable_names]
