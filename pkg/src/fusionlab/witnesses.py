"""Closed-form witnesses over fused data tables.

``eval_W`` is the quadratic witness for the relaxed-unrelated-confounders
scenario (classical bound 0), ``eval_D`` the linear chain witness
(classical bound 1), and ``eval_chsh_fritz`` the CHSH combination read
off a triangle SWIG distribution (classical bound 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import MissingRegime, WrongCardinality, ZeroConditioningEvent
from .quantum import SwigDistribution
from .tables import DataBundle

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class WitnessReport:
    witness: str
    value: float
    bound: float
    components: dict[str, float] = field(default_factory=dict)

    @property
    def violation(self) -> float:
        return self.value - self.bound

    def to_dict(self) -> dict:
        return {
            "witness": self.witness,
            "value": self.value,
            "bound": self.bound,
            "violation": self.violation,
            "components": dict(self.components),
        }


def _require_binary(bundle: DataBundle, nodes=("A", "B", "C")) -> None:
    for n in nodes:
        if bundle.scenario.card(n) != 2:
            raise WrongCardinality(f"witness needs binary {n}, card {bundle.scenario.card(n)}")


def eval_W(bundle: DataBundle) -> WitnessReport:
    """Quadratic witness W = P^2 - P*I + E_quad + J with P = P_A(0|do(B=0)).

    The third product term of E_quad uses P_ABC(0,1,1): the expression is
    calibrated against the component values it must reproduce (see the
    frozen tests), which fixes that index unambiguously.
    """
    _require_binary(bundle)
    obs = bundle.observational()
    if set(obs.axis_names) != {"A", "B", "C"}:
        raise MissingRegime("observational table must cover A, B, C")
    do_a0 = bundle.do_table("A", 0)
    do_b0 = bundle.do_table("B", 0)

    p_ab = obs.marginal(["A", "B"])
    p_b = obs.marginal(["B"])
    P = do_b0.marginal(["A"]).value((0,))
    pab00 = p_ab.value((0, 0))
    pab01 = p_ab.value((0, 1))
    pb0 = p_b.value((0,))
    pb1 = p_b.value((1,))
    pbc10_doa0 = do_a0.reordered(["B", "C"]).value((1, 0))
    p010 = obs.reordered(["A", "B", "C"]).value((0, 1, 0))
    p011 = obs.reordered(["A", "B", "C"]).value((0, 1, 1))

    I = 2 * pab00 + pb1 + pbc10_doa0 + p011 - 2 * p010
    # J as printed, including P_AB(0,0) twice.
    J = pab00 - 2 * pb0 + 2 * pab00 - 2 * p010
    E_quad = (
        2 * pab01 * pbc10_doa0
        + pab00 * pb0
        + (2 * pb0 - pab00) * (pbc10_doa0 + p011)
        - pab00 ** 2
        - p010 ** 2
    )
    value = P ** 2 - P * I + E_quad + J
    return WitnessReport(
        witness="W",
        value=value,
        bound=0.0,
        components={"P": P, "I": I, "J": J, "E_quad": E_quad},
    )


def eval_D(bundle: DataBundle) -> WitnessReport:
    """Linear chain witness; P_AC(0,0) is the observational marginal and
    P_BC(b != c | do(A=1)) sums the (0,1) and (1,0) entries."""
    _require_binary(bundle)
    obs = bundle.observational().reordered(["A", "B", "C"])
    do_b0 = bundle.do_table("B", 0).reordered(["A", "C"])
    do_a1 = bundle.do_table("A", 1).reordered(["B", "C"])

    p100 = obs.value((1, 0, 0))
    p111 = obs.value((1, 1, 1))
    pac00 = obs.marginal(["A", "C"]).value((0, 0))
    pac00_dob0 = do_b0.value((0, 0))
    neq = do_a1.value((0, 1)) + do_a1.value((1, 0))
    value = p100 + p111 - pac00 + pac00_dob0 + neq
    return WitnessReport(
        witness="D",
        value=value,
        bound=1.0,
        components={
            "P_ABC(1,0,0)": p100,
            "P_ABC(1,1,1)": p111,
            "P_AC(0,0)": pac00,
            "P_AC(0,0|do(B=0))": pac00_dob0,
            "P_BC(b!=c|do(A=1))": neq,
        },
    )


def eval_chsh_fritz(dist: SwigDistribution) -> WitnessReport:
    """CHSH combination over a triangle SWIG distribution Q(a,b,c | a#):
    settings are (c, a#), outcomes translate as o -> (-1)^o."""
    names = tuple(n for n, _ in dist.outcome_axes)
    if names != ("A", "B", "C") or tuple(n for n, _ in dist.setting_axes) != ("A#",):
        raise MissingRegime(f"need Q(A,B,C | A#), got {names} | {dist.setting_axes}")
    for _, card in dist.outcome_axes + dist.setting_axes:
        if card != 2:
            raise WrongCardinality("CHSH needs binary outcomes and settings")
    S = 0.0
    components: dict[str, float] = {}
    for x in range(2):
        for s in range(2):
            num = 0.0
            den = 0.0
            for a in range(2):
                for b in range(2):
                    val = dist.value((s,), (a, b, x))
                    num += ((-1) ** (a + b)) * val
                    den += val
            if den <= 0.0:
                raise ZeroConditioningEvent(f"P(c={x} | a#={s}) = 0")
            corr = num / den
            components[f"E(c={x},a#={s})"] = corr
            components[f"P(c={x}|a#={s})"] = den
            S += ((-1) ** (x * s)) * corr
    return WitnessReport(witness="chsh", value=S, bound=2.0, components=components)


WITNESS_PROTOCOLS = {"W": "uc_relaxation", "D": "chain", "chsh": "fritz_edge_triangle"}


def sweep(protocol: str, witness: str, v_from: float, v_to: float, steps: int):
    """Evaluate a witness across evenly spaced visibilities.

    Returns (rows, crossings): rows are dicts with v/value/bound/violation
    (or an error message), crossings are linear-interpolated zeros of the
    violation between adjacent grid points.
    """
    from .protocols import DEFAULT_TARGETS, ProtocolSpec, build_protocol
    from .quantum import generate_bundle, swig_distribution

    if steps < 2:
        raise ValueError("sweep needs at least 2 steps")
    rows = []
    for i in range(steps):
        v = v_from + (v_to - v_from) * i / (steps - 1)
        row: dict = {"v": v}
        try:
            model = build_protocol(ProtocolSpec(protocol, v))
            if witness == "chsh":
                report = eval_chsh_fritz(swig_distribution(model, DEFAULT_TARGETS[protocol]))
            else:
                bundle = generate_bundle(model, DEFAULT_TARGETS[protocol])
                report = eval_W(bundle) if witness == "W" else eval_D(bundle)
            row.update(
                value=report.value,
                bound=report.bound,
                violation=report.violation,
                components=dict(report.components),
            )
        except Exception as exc:  # keep sweeping past per-point failures
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    crossings = []
    prev = None
    for row in rows:
        if "violation" not in row:
            prev = None
            continue
        if prev is not None:
            v0, f0 = prev
            v1, f1 = row["v"], row["violation"]
            if f0 == 0.0:
                crossings.append(v0)
            elif (f0 < 0.0 < f1) or (f1 < 0.0 < f0):
                crossings.append(v0 + (v1 - v0) * (-f0) / (f1 - f0))
        prev = (row["v"], row["violation"])
    return rows, crossings
