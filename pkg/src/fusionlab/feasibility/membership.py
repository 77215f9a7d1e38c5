"""Exact LP membership for single-latent scenarios.

The classical set is the convex hull of products of deterministic
strategies, one strategy per observable node, all regimes coupled
through one shared latent weight vector.  The solver minimizes the
L-infinity distance between the bundle and that polytope with exact
rational arithmetic, so Feasible verdicts carry an exactly replayable
mixture and Infeasible verdicts an exact separating functional.
"""

from __future__ import annotations

import itertools
import time
from fractions import Fraction

import numpy as np

from ..classical import model_from_strategy_weights, strategy_spaces
from ..errors import DegenerateBundle, MissingRegime, WrongTopology
from ..tables import DataBundle, DataTable
from ._simplex import solve_lp, to_fraction
from .verdict import Certificate, CertTerm, FeasibilityVerdict

DEFAULT_TOL = 1e-8


def parse_table_tokens(bundle: DataBundle, tokens) -> list[str]:
    """Expand friendly tokens ("obs", "doA", "doA1") to table keys."""
    keys = []
    for tok in tokens:
        tok = tok.strip()
        if tok == "obs" or tok.startswith("do:"):
            keys.append(tok)
        elif tok.startswith("do") and len(tok) >= 3:
            target = tok[2]
            rest = tok[3:]
            if rest:
                keys.append(f"do:{target}:{int(rest)}")
            else:
                settings = bundle.do_targets().get(target)
                if not settings:
                    raise MissingRegime(f"no do-tables for target {target!r}")
                keys.extend(f"do:{target}:{s}" for s in sorted(settings))
        else:
            raise MissingRegime(f"unknown table token {tok!r}")
    return keys


def _strategy_column_entries(scenario, spaces, column, table: DataTable):
    """Outcome tuple this deterministic strategy product generates in the
    regime of ``table`` (axes order), or None for impossible regimes."""
    values: dict[str, int] = {}
    if table.kind == "do":
        values[table.target] = int(table.setting)
    for node, space, sid in zip(scenario.observable_names, spaces, column):
        if table.kind == "do" and node == table.target:
            continue
        pv = tuple(values[p] for p in space.parent_names)
        values[node] = space.evaluate(sid, pv)
    return tuple(values[n] for n in table.axis_names)


def lp_membership(
    bundle: DataBundle,
    cardinality: int | None = None,
    table_subset=None,
    tol: float = DEFAULT_TOL,
) -> FeasibilityVerdict:
    """Decide polytope membership of the (selected) fused tables.

    Requires a scenario with exactly one latent whose children are all
    observables.  ``table_subset`` is a list of table keys/tokens; the
    default couples every table in the bundle.
    """
    t0 = time.monotonic()
    scen = bundle.scenario
    if len(scen.latents) != 1 or set(scen.latents[0].children) != set(scen.observable_names):
        raise WrongTopology(
            "lp_membership needs exactly one latent connected to all observables"
        )
    if table_subset is None:
        tables = list(bundle.tables)
    else:
        keys = parse_table_tokens(bundle, table_subset)
        tables = [bundle.table_by_key(k) for k in keys]
    if not tables:
        raise DegenerateBundle("no tables selected")

    spaces = strategy_spaces(scen)
    counts = [len(sp.strategies) for sp in spaces]
    n_cols = int(np.prod(counts))

    rows: list[np.ndarray] = []
    refs: list[tuple[str, int]] = []
    rhs: list[float] = []
    for table in tables:
        entry_index = {o: i for i, o in enumerate(table.outcome_iter())}
        block = np.zeros((len(entry_index), n_cols))
        for j, column in enumerate(itertools.product(*(range(c) for c in counts))):
            block[entry_index[_strategy_column_entries(scen, spaces, column, table)], j] = 1.0
        for o, i in entry_index.items():
            rows.append(block[i])
            refs.append((table.key, i))
            rhs.append(float(table.probs[i]))

    R = len(rows)
    # min t  s.t.  |M mu - p| <= t,  sum(mu) = 1,  mu >= 0
    A_ub = []
    b_ub = []
    for r in range(R):
        A_ub.append(list(rows[r]) + [-1.0])
        b_ub.append(rhs[r])
    for r in range(R):
        A_ub.append([-v for v in rows[r]] + [-1.0])
        b_ub.append(-rhs[r])
    A_eq = [[1.0] * n_cols + [0.0]]
    res = solve_lp([0.0] * n_cols + [1.0], A_ub, b_ub, A_eq, [1.0])
    if res.status != "optimal":
        raise RuntimeError(f"distance LP unexpectedly {res.status}")
    t_star = float(res.objective)
    diagnostics = {
        "solver": "lp_membership",
        "columns": n_cols,
        "rows": R,
        "distance": t_star,
        "iterations": res.iterations,
        "cardinality": cardinality if cardinality is not None else n_cols,
        "tables": [t.key for t in tables],
    }
    if t_star <= tol:
        mu = np.array([float(v) for v in res.x[:n_cols]])
        mu = np.clip(mu, 0.0, None)
        mu /= mu.sum()
        model = model_from_strategy_weights(scen, spaces, mu)
        diagnostics["runtime_s"] = time.monotonic() - t0
        return FeasibilityVerdict(status="feasible", model=model, diagnostics=diagnostics)

    # Exact separating functional from the duals: c = u - w over rows,
    # classical bound recomputed column-wise for rigor.
    u = res.duals[:R]
    w = res.duals[R : 2 * R]
    coef = [ui - wi for ui, wi in zip(u, w)]
    bound = None
    exact_rows = [[to_fraction(v) for v in row] for row in rows]
    for j in range(n_cols):
        col_val = sum(coef[r] * exact_rows[r][j] for r in range(R))
        if bound is None or col_val > bound:
            bound = col_val
    achieved = sum(coef[r] * to_fraction(rhs[r]) for r in range(R))
    assert achieved - bound > 0, "certificate failed exact replay"
    cert = Certificate(
        terms=tuple(
            CertTerm(coefficient=float(coef[r]), factors=((refs[r],),))
            for r in range(R)
            if coef[r] != 0
        ),
        bound=float(bound),
    )
    diagnostics["separation"] = float(achieved - bound)
    diagnostics["runtime_s"] = time.monotonic() - t0
    return FeasibilityVerdict(status="infeasible", certificate=cert, diagnostics=diagnostics)


def vertex_models(scenario):
    """Yield the deterministic strategy-product models of a single-latent
    scenario (the polytope's vertices); tests use this as a bound oracle."""
    spaces = strategy_spaces(scenario)
    counts = [len(sp.strategies) for sp in spaces]
    total = int(np.prod(counts))
    for flat in range(total):
        weights = np.zeros(total)
        weights[flat] = 1.0
        yield model_from_strategy_weights(scenario, spaces, weights)
