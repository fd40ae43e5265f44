from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linprog

from dwigner.exactlp import feasible_nonnegative


def F(a, b=1):
    return Fraction(a, b)


def test_simple_feasible():
    # x1 + x2 = 1, x1 - x2 = 0 -> x = (1/2, 1/2)
    V = [[F(1), F(1)], [F(1), F(-1)]]
    ok, w = feasible_nonnegative(V, [F(1), F(0)])
    assert ok
    assert w == [F(1, 2), F(1, 2)]


def test_simple_infeasible():
    # x1 + x2 = 1 and x1 + x2 = 2 cannot hold together
    V = [[F(1), F(1)], [F(1), F(1)]]
    ok, w = feasible_nonnegative(V, [F(1), F(2)])
    assert not ok
    assert w is None


def test_negativity_blocks_feasibility():
    # x = -1 with x >= 0
    ok, _ = feasible_nonnegative([[F(1)]], [F(-1)])
    assert not ok


def test_degenerate_boundary_case():
    # boundary membership with a zero weight forced
    V = [[F(1), F(0), F(1)], [F(0), F(1), F(1)]]
    ok, w = feasible_nonnegative(V, [F(1), F(0)])
    assert ok
    recon0 = sum(V[0][j] * w[j] for j in range(3))
    recon1 = sum(V[1][j] * w[j] for j in range(3))
    assert (recon0, recon1) == (F(1), F(0))


def test_matches_float_lp_on_random_instances():
    rng = np.random.default_rng(17)
    for _ in range(25):
        m, k = 4, 7
        A = rng.integers(-3, 4, size=(m, k))
        # build b either from a random nonnegative combination (feasible)
        # or at random (possibly infeasible)
        if rng.random() < 0.5:
            x = rng.integers(0, 3, size=k)
            b = A @ x
        else:
            b = rng.integers(-6, 7, size=m)
        Vf = [[F(int(A[i, j])) for j in range(k)] for i in range(m)]
        bf = [F(int(v)) for v in b]
        ok, w = feasible_nonnegative(Vf, bf)
        res = linprog(
            np.zeros(k), A_eq=A.astype(float), b_eq=b.astype(float),
            bounds=[(0, None)] * k, method="highs",
        )
        assert ok == res.success
        if ok:
            for i in range(m):
                assert sum(Vf[i][j] * w[j] for j in range(k)) == bf[i]
            assert all(x >= 0 for x in w)


def test_exact_qutrit_boundary_row(mub3):
    # the X = 0 row of the seven-pinned 2-coordinate scan lies exactly on the
    # hull boundary; floats can wobble here, the exact route must say inside
    from dwigner.geometry import exact_vertex_matrix

    rows = exact_vertex_matrix(mub3)
    target = [F(0), F(2, 9)] + [F(1, 9)] * 7
    V = [[rows[i][u] for i in range(12)] for u in range(9)]
    V.append([F(1)] * 12)
    ok, w = feasible_nonnegative(V, target + [F(1)])
    assert ok
    for u in range(9):
        assert sum(rows[i][u] * w[i] for i in range(12)) == target[u]
