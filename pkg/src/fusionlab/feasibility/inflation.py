"""Inflation LP over interrupted scenarios, with dual certificates.

Construction: after interrupting every do-target, each observable reads
only latents and setting nodes.  Order-n inflation makes n copies of
every latent; an "atom" is one random variable per (node, latent-copy
combination, setting-value combination), the setting combinations
playing the role of counterfactual inputs.  The LP variable is a joint
distribution over all atom outcomes, collapsed to orbits of the
latent-copy permutation group.

Constraints tie that joint to the bundle:
  * linear rows: every bundle-visible functional (diagonal observational
    events and do-table marginal events, closed under dropping nodes no
    kept atom conditions on) pinned on the canonical copy injection;
  * product rows: for every pair of visible events placed on disjoint
    latent copies, the joint event equals the product of the two pinned
    values (source independence, the inflation's power);
  * nonnegativity and total normalization.

The verdict minimizes the L-infinity violation of the pinned rows;
Infeasible verdicts carry the LP dual as an explicit compatibility
inequality over bundle entries (linear and product terms) whose
classical validity is re-certified by a second LP.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix, hstack, vstack

from ..errors import SizeLimit, WrongTopology
from ..tables import DataBundle
from .verdict import Certificate, CertTerm, FeasibilityVerdict

DEFAULT_TOL = 1e-8
DEFAULT_VAR_CAP = 10 ** 7


@dataclass(frozen=True)
class _Atom:
    node: str
    copies: tuple[int, ...]  # copy index per latent parent (scenario latent order)
    settings: tuple[int, ...]  # value per setting parent (swig parent order)
    card: int


@dataclass(frozen=True)
class _Event:
    """Partial assignment: ((node, settings, outcome), ...) sorted."""

    atoms: tuple[tuple[str, tuple[int, ...], int], ...]

    @staticmethod
    def of(entries) -> "_Event":
        return _Event(tuple(sorted(entries)))


@dataclass
class _Structure:
    swig: object
    targets: list[str]
    order: int
    atoms: list[_Atom]
    atom_index: dict
    n_assign: int
    orbit_index: np.ndarray
    n_orbits: int
    orbit_sizes: np.ndarray
    outcomes: np.ndarray  # (n_assign, n_atoms) uint8
    events: list  # (_Event, [recipes], label); recipe = (table_key, [entry indices])
    rows: csr_matrix  # pinned rows over orbit variables
    row_meta: list  # ("lin", event_idx, recipe_idx) | ("prod", e1, e2)
    norm_row: np.ndarray


_CACHE: dict = {}


def _structure_key(bundle: DataBundle, order: int, use_swig: bool) -> str:
    return json.dumps(
        {
            "scenario": bundle.scenario.to_dict(),
            "tables": sorted(t.key for t in bundle.tables),
            "order": order,
            "use_swig": use_swig,
        },
        sort_keys=True,
    )


def _visible_events(bundle: DataBundle, swig, targets, use_swig: bool):
    """Bundle-visible counterfactual events with value recipes.

    Returns a list of (_Event, recipes, label); a recipe is
    (table_key, entry index list) whose entry sum is the event's value.
    """
    scen = bundle.scenario
    events: dict[_Event, list] = {}
    labels: dict[_Event, str] = {}

    def setting_parents(node):
        return swig.observed_parents(node)

    regimes = []
    if bundle.has_observational():
        regimes.append((bundle.observational(), None, None))
    if use_swig:
        for target, per_setting in sorted(bundle.do_targets().items()):
            for setting, table in sorted(per_setting.items()):
                regimes.append((table, target, setting))

    for table, do_target, do_setting in regimes:
        axis_names = table.axis_names
        for keep_mask in itertools.product((False, True), repeat=len(axis_names)):
            keep = [n for n, k in zip(axis_names, keep_mask) if k]
            if not keep:
                continue
            dropped = [n for n in axis_names if n not in keep]
            ok = True
            for y in keep:
                for par in setting_parents(y):
                    src = par[:-1]
                    if src in dropped:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                continue
            # entry indices of the marginal, grouped by kept-outcome tuple
            groups: dict[tuple, list[int]] = {}
            for idx, o in enumerate(table.outcome_iter()):
                full = dict(zip(axis_names, o))
                kept_o = tuple(full[n] for n in keep)
                groups.setdefault(kept_o, []).append(idx)
            for kept_o, entry_idx in sorted(groups.items()):
                full = dict(zip(keep, kept_o))
                atoms = []
                for y in keep:
                    sv = []
                    for par in setting_parents(y):
                        src = par[:-1]
                        if src == do_target:
                            sv.append(int(do_setting))
                        else:
                            sv.append(full[src])
                    atoms.append((y, tuple(sv), full[y]))
                ev = _Event.of(atoms)
                recipe = (table.key, entry_idx)
                events.setdefault(ev, []).append(recipe)
                labels.setdefault(
                    ev,
                    f"{table.key}|{''.join(keep)}={kept_o}",
                )
    return [(ev, recipes, labels[ev]) for ev, recipes in sorted(events.items(), key=lambda kv: kv[1][0])]


def _build_structure(bundle: DataBundle, order: int, use_swig: bool,
                     var_cap: int) -> _Structure:
    scen = bundle.scenario
    targets = sorted(bundle.do_targets(), key=lambda n: scen.observable_names.index(n))
    swig = scen.interrupt_all(targets)
    for node in swig.observable_names:
        for p in swig.observed_parents(node):
            if not swig.is_setting(p):
                raise WrongTopology(
                    f"inflation needs a fully interrupted scenario; {node} still has "
                    f"observable parent {p} (intervene on {p} or drop its table)"
                )

    latents = [l.name for l in scen.latents]
    atoms: list[_Atom] = []
    for node in scen.observable_names:
        lp = scen.latent_parents(node)
        sp = swig.observed_parents(node)
        sp_cards = [swig.card(p) for p in sp]
        for copies in itertools.product(range(order), repeat=len(lp)):
            for sv in itertools.product(*(range(c) for c in sp_cards)):
                atoms.append(_Atom(node, copies, sv, scen.card(node)))
    atom_index = {(a.node, a.copies, a.settings): k for k, a in enumerate(atoms)}
    cards = np.array([a.card for a in atoms], dtype=np.int64)
    n_assign = int(np.prod(cards))
    if n_assign > var_cap:
        raise SizeLimit(f"inflation joint has {n_assign} variables > cap {var_cap}")

    # outcome matrix: mixed-radix digits, last atom fastest
    outcomes = np.zeros((n_assign, len(atoms)), dtype=np.uint8)
    block = n_assign
    for k, c in enumerate(cards):
        block = block // c
        pattern = np.repeat(np.arange(c, dtype=np.uint8), block)
        outcomes[:, k] = np.tile(pattern, n_assign // (block * c))

    # copy-permutation group: product over latents of S_order
    weights = np.ones(len(atoms), dtype=np.int64)
    acc = 1
    for k in range(len(atoms) - 1, -1, -1):
        weights[k] = acc
        acc *= int(cards[k])

    def atom_perm(latent_perms):
        perm = np.empty(len(atoms), dtype=np.int64)
        for k, a in enumerate(atoms):
            lp = scen.latent_parents(a.node)
            new_copies = tuple(
                latent_perms[latents.index(l)][c] for l, c in zip(lp, a.copies)
            )
            perm[k] = atom_index[(a.node, new_copies, a.settings)]
        return perm

    single = list(itertools.permutations(range(order)))
    reps = np.arange(n_assign, dtype=np.int64)
    for latent_perms in itertools.product(single, repeat=len(latents)):
        if all(p == single[0] for p in latent_perms):
            continue
        perm = atom_perm(latent_perms)
        # assignment b with b[perm[k]] = a[k]  =>  index via weights[perm]
        idx = outcomes.astype(np.int64) @ weights[perm]
        reps = np.minimum(reps, idx)
    uniq, orbit_index = np.unique(reps, return_inverse=True)
    n_orbits = len(uniq)
    orbit_sizes = np.bincount(orbit_index, minlength=n_orbits).astype(float)

    events = _visible_events(bundle, swig, targets, use_swig)

    def event_mask(ev: _Event, copy_choice: dict[str, int]):
        mask = np.ones(n_assign, dtype=bool)
        for node, sv, outcome in ev.atoms:
            lp = scen.latent_parents(node)
            copies = tuple(copy_choice[l] for l in lp)
            k = atom_index[(node, copies, sv)]
            mask &= outcomes[:, k] == outcome
        return mask

    def row_from_mask(mask):
        data = np.bincount(orbit_index[mask], minlength=n_orbits).astype(float)
        return data

    row_list = []
    row_meta = []
    canonical = {l: 0 for l in latents}
    for ei, (ev, recipes, label) in enumerate(events):
        row = row_from_mask(event_mask(ev, canonical))
        for ri in range(len(recipes)):
            row_list.append(row)
            row_meta.append(("lin", ei, ri, label))

    def used_latents(ev: _Event):
        used = set()
        for node, _, _ in ev.atoms:
            used.update(scen.latent_parents(node))
        return used

    if order >= 2:
        for i in range(len(events)):
            ev1 = events[i][0]
            u1 = used_latents(ev1)
            for j in range(i, len(events)):
                ev2 = events[j][0]
                choice1 = {l: 0 for l in latents}
                choice2 = {l: (1 if l in u1 else 0) for l in latents}
                mask = event_mask(ev1, choice1) & event_mask(ev2, choice2)
                row_list.append(row_from_mask(mask))
                row_meta.append(("prod", i, j, f"{events[i][2]} * {events[j][2]}"))

    rows = csr_matrix(np.asarray(row_list))
    return _Structure(
        swig=swig, targets=targets, order=order,
        atoms=atoms, atom_index=atom_index, n_assign=n_assign,
        orbit_index=orbit_index, n_orbits=n_orbits, orbit_sizes=orbit_sizes,
        outcomes=outcomes, events=events, rows=rows, row_meta=row_meta,
        norm_row=orbit_sizes.copy(),
    )


def _recipe_value(bundle: DataBundle, recipe) -> float:
    key, idx = recipe
    probs = bundle.table_by_key(key).probs
    return float(sum(probs[i] for i in idx))


def _rhs_for(structure: _Structure, bundle: DataBundle) -> np.ndarray:
    vals = []
    ev_values = [
        [_recipe_value(bundle, r) for r in recipes]
        for _, recipes, _ in structure.events
    ]
    for meta in structure.row_meta:
        if meta[0] == "lin":
            vals.append(ev_values[meta[1]][meta[2]])
        else:
            vals.append(ev_values[meta[1]][0] * ev_values[meta[2]][0])
    return np.asarray(vals)


def _certificate_terms(structure: _Structure, coef: np.ndarray) -> tuple[CertTerm, ...]:
    terms = []
    for c, meta in zip(coef, structure.row_meta):
        if c == 0.0:
            continue
        if meta[0] == "lin":
            recipe = structure.events[meta[1]][1][meta[2]]
            factors = ((tuple((recipe[0], int(i)) for i in recipe[1])),)
        else:
            r1 = structure.events[meta[1]][1][0]
            r2 = structure.events[meta[2]][1][0]
            factors = (
                tuple((r1[0], int(i)) for i in r1[1]),
                tuple((r2[0], int(i)) for i in r2[1]),
            )
        terms.append(CertTerm(coefficient=float(c), factors=factors))
    return tuple(terms)


def inflation_lp(
    bundle: DataBundle,
    order: int = 2,
    use_swig: bool = True,
    tol: float = DEFAULT_TOL,
    var_cap: int = DEFAULT_VAR_CAP,
) -> FeasibilityVerdict:
    """Necessary classical-compatibility test via the order-n inflation.

    ``use_swig=True`` pins all SWIG-visible functionals of the fused
    bundle; ``use_swig=False`` pins only observational functionals.
    Feasible verdicts carry no model (the test is a relaxation); an
    Infeasible verdict carries a replayable dual inequality.
    """
    t0 = time.monotonic()
    key = _structure_key(bundle, order, use_swig)
    structure = _CACHE.get(key)
    if structure is None:
        structure = _build_structure(bundle, order, use_swig, var_cap)
        _CACHE[key] = structure
    R = structure.rows
    r_vals = _rhs_for(structure, bundle)
    n = structure.n_orbits + 1
    m = R.shape[0]

    ones_col = csr_matrix(-np.ones((m, 1)))
    A_ub = vstack([hstack([R, ones_col]), hstack([-R, ones_col])]).tocsr()
    b_ub = np.concatenate([r_vals, -r_vals])
    A_eq = csr_matrix(np.concatenate([structure.norm_row, [0.0]])[None, :])
    cvec = np.zeros(n)
    cvec[-1] = 1.0
    res = linprog(cvec, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0.0, None)] * n, method="highs")
    if res.status != 0:
        raise RuntimeError(f"inflation distance LP failed: {res.message}")
    t_star = float(res.fun)
    diagnostics = {
        "solver": "inflation_lp",
        "order": order,
        "use_swig": use_swig,
        "atoms": len(structure.atoms),
        "orbits": structure.n_orbits,
        "rows": m,
        "distance": t_star,
        "runtime_s": None,
    }
    if t_star <= tol:
        diagnostics["runtime_s"] = time.monotonic() - t0
        return FeasibilityVerdict(status="feasible", diagnostics=diagnostics)

    u = np.asarray(res.ineqlin.marginals[:m])
    w = np.asarray(res.ineqlin.marginals[m:])
    coef = u - w
    # rigorous classical bound for the dual functional: maximize it over
    # the inflation polytope itself
    obj = -(coef @ R.toarray())
    res2 = linprog(np.concatenate([obj, [0.0]]), A_eq=A_eq, b_eq=[1.0],
                   bounds=[(0.0, None)] * n, method="highs")
    if res2.status != 0:
        raise RuntimeError(f"certificate bound LP failed: {res2.message}")
    bound = -float(res2.fun)
    achieved = float(coef @ r_vals)
    if achieved - bound <= tol * 0.5:
        raise RuntimeError("dual certificate failed replay against its own bundle")
    cert = Certificate(terms=_certificate_terms(structure, coef), bound=bound)
    diagnostics["separation"] = achieved - bound
    diagnostics["runtime_s"] = time.monotonic() - t0
    return FeasibilityVerdict(status="infeasible", certificate=cert, diagnostics=diagnostics)
