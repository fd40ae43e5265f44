"""Exact rational feasibility for {w >= 0, V w = b} by phase-1 simplex.

Independent of the floating-point LP route; used to settle hull-membership
boundary disputes where a 1e-8 tolerance could flip the verdict.  Sizes here
are tiny (12 vertices, 10 equations for the qutrit case), so clarity beats
speed.
"""

from __future__ import annotations

from fractions import Fraction

__all__ = ["feasible_nonnegative"]


def feasible_nonnegative(V, b) -> tuple[bool, list | None]:
    """Decide exactly whether V w = b admits w >= 0; return (feasible, w).

    V: list of rows (lists of Fraction/int), b: list of Fraction/int.
    Phase-1 simplex with Bland's rule, exact Fraction pivots throughout.
    """
    m = len(V)
    if m == 0:
        return True, []
    k = len(V[0])
    rows = [[Fraction(x) for x in row] for row in V]
    rhs = [Fraction(x) for x in b]
    for i in range(m):
        if len(rows[i]) != k:
            raise ValueError("ragged constraint matrix")
        if rhs[i] < 0:
            rows[i] = [-x for x in rows[i]]
            rhs[i] = -rhs[i]

    # tableau columns: k structural + m artificial + rhs
    tab = [rows[i] + [Fraction(int(i == j)) for j in range(m)] + [rhs[i]] for i in range(m)]
    basis = [k + i for i in range(m)]
    # objective row: minimize sum of artificials, reduced costs after pricing out
    obj = [Fraction(0)] * (k + m + 1)
    for i in range(m):
        for j in range(k + m + 1):
            obj[j] -= tab[i][j]
    for i in range(m):
        obj[k + i] = Fraction(0)

    total = k + m
    while True:
        col = next((j for j in range(total) if obj[j] < 0), None)
        if col is None:
            break
        best_row, best_ratio = None, None
        for i in range(m):
            if tab[i][col] > 0:
                ratio = tab[i][total] / tab[i][col]
                if (
                    best_ratio is None
                    or ratio < best_ratio
                    or (ratio == best_ratio and basis[i] < basis[best_row])
                ):
                    best_row, best_ratio = i, ratio
        if best_row is None:
            # phase-1 objective is bounded below by 0, so this cannot happen
            raise RuntimeError("unbounded phase-1 objective")
        piv = tab[best_row][col]
        tab[best_row] = [x / piv for x in tab[best_row]]
        for i in range(m):
            if i != best_row and tab[i][col] != 0:
                f = tab[i][col]
                tab[i] = [x - f * y for x, y in zip(tab[i], tab[best_row])]
        if obj[col] != 0:
            f = obj[col]
            obj = [x - f * y for x, y in zip(obj, tab[best_row])]
        basis[best_row] = col

    infeasibility = -obj[total]
    if infeasibility > 0:
        return False, None
    w = [Fraction(0)] * k
    for i in range(m):
        if basis[i] < k:
            w[basis[i]] = tab[i][total]
    return True, w
