"""Exact-rational two-phase simplex with Bland's rule.

Small dense LPs only (tens of rows and columns): the point is replayable
certificates, not speed.  All arithmetic is over ``fractions.Fraction``;
float inputs are quantized to denominator <= 10^12 first, far below any
tolerance used by the callers.

The artificial columns are kept in the tableau through phase 2: they
start as the identity, so at any basis they hold B^{-1}, which makes the
row prices y = c_B B^{-1} (duals / Farkas certificates) a direct read.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

QUANTIZE_DEN = 10 ** 12
ZERO = Fraction(0)
ONE = Fraction(1)


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(float(x)).limit_denominator(QUANTIZE_DEN)


@dataclass
class LpResult:
    """Exact LP solution.

    ``duals``/``farkas`` are per original row (ub rows first, then eq
    rows).  Optimal duals satisfy duals . (b_ub; b_eq) = objective, have
    nonpositive entries on ub rows, and c - duals . A >= 0 columnwise.
    A Farkas vector has y . A <= 0 columnwise, nonpositive ub entries,
    and y . b > 0.
    """

    status: str  # "optimal" | "infeasible" | "unbounded"
    x: list[Fraction] | None = None
    objective: Fraction | None = None
    duals: list[Fraction] | None = None
    farkas: list[Fraction] | None = None
    iterations: int = 0


def _pivot(rows, basis, r, c):
    piv = rows[r][c]
    if piv != ONE:
        rows[r] = [v / piv for v in rows[r]]
    prow = rows[r]
    for i, row in enumerate(rows):
        if i != r and row[c] != 0:
            f = row[c]
            rows[i] = [v - f * pv for v, pv in zip(row, prow)]
    basis[r] = c


def _reduced_costs(rows, basis, cost):
    z = list(cost) + [ZERO]
    for r, b in enumerate(basis):
        f = z[b]
        if f != 0:
            row = rows[r]
            z = [v - f * rv for v, rv in zip(z, row)]
    return z


def _run(rows, basis, cost, allowed, max_iter):
    """Bland's-rule simplex; returns (status, iterations)."""
    it = 0
    z = _reduced_costs(rows, basis, cost)
    while it < max_iter:
        enter = -1
        for j in allowed:
            if z[j] < 0:
                enter = j
                break
        if enter < 0:
            return "optimal", it
        leave, ratio = -1, None
        for r, row in enumerate(rows):
            a = row[enter]
            if a > 0:
                cand = row[-1] / a
                if ratio is None or cand < ratio or (cand == ratio and basis[r] < basis[leave]):
                    ratio, leave = cand, r
        if leave < 0:
            return "unbounded", it
        _pivot(rows, basis, leave, enter)
        f = z[enter]
        if f != 0:
            prow = rows[leave]
            z = [v - f * pv for v, pv in zip(z, prow)]
        it += 1
    raise RuntimeError("simplex iteration limit exceeded")


def solve_lp(c, A_ub=(), b_ub=(), A_eq=(), b_eq=(), max_iter: int = 50000) -> LpResult:
    """min c.x  s.t.  A_ub x <= b_ub, A_eq x = b_eq, x >= 0, exactly."""
    c = [to_fraction(v) for v in c]
    A_ub = [[to_fraction(v) for v in row] for row in A_ub]
    b_ub = [to_fraction(v) for v in b_ub]
    A_eq = [[to_fraction(v) for v in row] for row in A_eq]
    b_eq = [to_fraction(v) for v in b_eq]
    n, m_ub, m_eq = len(c), len(A_ub), len(A_eq)
    m = m_ub + m_eq
    n_slack = m_ub
    art0 = n + n_slack
    width = art0 + m  # + rhs

    rows: list[list[Fraction]] = []
    sign: list[int] = []
    for i in range(m):
        body = list(A_ub[i]) if i < m_ub else list(A_eq[i - m_ub])
        slack = [ZERO] * n_slack
        if i < m_ub:
            slack[i] = ONE
        rhs = b_ub[i] if i < m_ub else b_eq[i - m_ub]
        row = body + slack + [ZERO] * m + [rhs]
        if rhs < 0:
            row = [-v for v in row]
            sign.append(-1)
        else:
            sign.append(1)
        row[art0 + i] = ONE
        rows.append(row)

    basis = [art0 + i for i in range(m)]
    cost1 = [ZERO] * art0 + [ONE] * m
    status, it1 = _run(rows, basis, cost1, range(width), max_iter)
    theta = sum(rows[r][-1] for r in range(m) if basis[r] >= art0)

    def prices(cost):
        y = []
        for i in range(m):
            yi = ZERO
            for r, b in enumerate(basis):
                cb = cost[b] if b < len(cost) else ZERO
                if cb != 0:
                    yi += cb * rows[r][art0 + i]
            y.append(sign[i] * yi)
        return y

    if theta > 0:
        return LpResult(status="infeasible", farkas=prices(cost1), iterations=it1)

    # Drive leftover artificials from the basis where the row has support
    # on real columns; all-zero rows are redundant and stay inert.
    for r in range(m):
        if basis[r] >= art0:
            for j in range(art0):
                if rows[r][j] != 0:
                    _pivot(rows, basis, r, j)
                    break

    cost2 = list(c) + [ZERO] * n_slack + [ZERO] * m
    status, it2 = _run(rows, basis, cost2, range(art0), max_iter)
    if status == "unbounded":
        return LpResult(status="unbounded", iterations=it1 + it2)
    x = [ZERO] * n
    for r, b in enumerate(basis):
        if b < n:
            x[b] = rows[r][-1]
    obj = sum(ci * xi for ci, xi in zip(c, x))
    return LpResult(
        status="optimal", x=x, objective=obj, duals=prices(cost2), iterations=it1 + it2
    )
