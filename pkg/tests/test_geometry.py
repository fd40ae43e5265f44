from fractions import Fraction

import numpy as np
import pytest

from dwigner.geometry import (
    SliceSpec,
    classify_state,
    facet_check,
    hull_membership,
    slice_csv,
    slice_scan,
)
from dwigner.fields import all_points
from dwigner.wigner import wigner_of_state


def F(a, b=1):
    return Fraction(a, b)


def test_facets_qutrit(mub3):
    for u in all_points(3, 1):
        r = facet_check(u, mub3)
        assert r.all_vertices_nonnegative
        assert r.is_facet
        assert r.saturating_count == 8
        assert r.saturating_span_dim == 8
        assert r.min_vertex_value >= -1e-12


def test_facet_p5_spot_check(mub5):
    r = facet_check((0, 0), mub5)
    assert r.is_facet
    assert r.saturating_span_dim == 24
    assert r.all_vertices_nonnegative


def test_hull_mixed_inside(mub3):
    cert = hull_membership(np.eye(3, dtype=complex) / 3, mub3)
    assert cert.inside
    assert cert.residual < 1e-9
    assert abs(cert.weights.sum() - 1) < 1e-9
    assert cert.weights.min() > -1e-12


def test_hull_each_vertex_inside(mub3):
    for rho in mub3.states[:4]:
        cert = hull_membership(rho, mub3)
        assert cert.inside


def test_hull_strange_outside_with_witness(mub3, strange_state):
    cert = hull_membership(strange_state, mub3)
    assert not cert.inside
    assert abs(cert.violation - 2 / 3) < 1e-8
    # dense witness separates: Tr(H rho) - max_i Tr(H S_i) = d * violation
    H = cert.witness_operator(3, 1)
    lhs = np.trace(H @ strange_state).real
    best = max(np.trace(H @ s).real for s in mub3.states)
    assert abs((lhs - best) - 3 * cert.violation) < 1e-8


def test_classify_chain(mub3, strange_state):
    label, det = classify_state(rho=np.eye(3, dtype=complex) / 3, S=mub3)
    assert label == "STABILIZER_MIX"
    assert det["certificate"].inside

    label, det = classify_state(rho=strange_state, S=mub3)
    assert label == "NEGATIVE"
    assert abs(det["min_wigner"] + 1 / 3) < 1e-12

    # nonnegative Wigner vector that is not a physical state
    w = np.zeros(9)
    w[0] = 1.0
    label, _ = classify_state(W=w, S=mub3)
    assert label == "NONPHYSICAL"


def test_classify_bound_point(mub3):
    # frozen from the 1/9-pinned 3-coordinate scan: first BOUND grid point
    vals = {
        (0, 0): F(0),
        (0, 1): F(1, 45),
        (1, 0): F(14, 45),
    }
    w = []
    for u in all_points(3, 1):
        w.append(float(vals.get(tuple(u), F(1, 9))))
    exact = [vals.get(tuple(u), F(1, 9)) for u in all_points(3, 1)]
    label, det = classify_state(W=np.array(w), S=mub3, exact_w=exact)
    assert label == "BOUND"
    assert det["certificate"].violation > 1e-6


def test_slice_spec_validation():
    fixed = {tuple(u): F(1, 9) for u in all_points(3, 1)[3:]}
    free = [((0, 0), (F(-1, 3), F(1, 3), F(1, 6))), ((0, 1), (F(-1, 3), F(1, 3), F(1, 6))), ((0, 2), None)]
    SliceSpec(p=3, fixed=fixed, free=free)
    # missing point
    with pytest.raises(ValueError):
        SliceSpec(p=3, fixed=dict(list(fixed.items())[:-1]), free=free)
    # derived not last
    with pytest.raises(ValueError):
        SliceSpec(p=3, fixed=fixed, free=[free[2], free[0], free[1]])
    # wrong p
    with pytest.raises(ValueError):
        SliceSpec(p=5, fixed=fixed, free=free)


def test_slice_scan_coarse_derived(mub3):
    fixed = {tuple(u): F(1, 9) for u in all_points(3, 1)[3:]}
    free = [
        ((0, 0), (F(-1, 3), F(1, 3), F(1, 6))),
        ((0, 1), (F(-1, 3), F(1, 3), F(1, 6))),
        ((0, 2), None),
    ]
    rows = slice_scan(SliceSpec(p=3, fixed=fixed, free=free), S=mub3)
    assert len(rows) == 25
    assert all(r.label != "INVALID" for r in rows)
    # every row's three coordinates sum to 1/3 (normalization)
    for r in rows:
        assert sum(r.coords) == F(1, 3)
    labels = {r.label for r in rows}
    assert "STABILIZER_MIX" in labels
    assert "NONPHYSICAL" in labels


def test_slice_scan_coarse_two_free(mub3):
    fixed = {tuple(u): F(1, 9) for u in all_points(3, 1)[2:]}
    free = [
        ((0, 0), (F(-1, 3), F(5, 9), F(1, 9))),
        ((0, 1), (F(-1, 3), F(5, 9), F(1, 9))),
    ]
    spec = SliceSpec(p=3, fixed=fixed, free=free)
    rows = slice_scan(spec, S=mub3)
    assert len(rows) == 81
    invalid = [r for r in rows if r.label == "INVALID"]
    valid = [r for r in rows if r.label != "INVALID"]
    # the valid rows sit on the X + Y = 2/9 line
    for r in valid:
        assert sum(r.coords) == F(2, 9)
    assert len(invalid) == 81 - len(valid)
    assert len(valid) >= 5


def test_slice_csv_format(mub3):
    fixed = {tuple(u): F(1, 9) for u in all_points(3, 1)[3:]}
    free = [
        ((0, 0), (F(0), F(1, 3), F(1, 3))),
        ((0, 1), (F(0), F(1, 3), F(1, 3))),
        ((0, 2), None),
    ]
    spec = SliceSpec(p=3, fixed=fixed, free=free)
    rows = slice_scan(spec, S=mub3)
    text = slice_csv(rows, spec)
    lines = text.strip().split("\n")
    assert lines[0] == "# format-version 1"
    assert lines[1] == "axis1,axis2,axis3,label,min_eig,min_wigner,lp_margin"
    assert len(lines) == 2 + len(rows)
    first = lines[2].split(",")
    assert len(first) == 7
    float(first[0])  # numeric cells parse
    float(first[4])


def test_hull_membership_accepts_wigner_vector(mub3):
    w = np.full(9, 1 / 9)
    cert = hull_membership(w, mub3)
    assert cert.inside


def test_exact_route_dispute_handling(mub3):
    # X = 0 boundary row of the seven-pinned scan: exact route must land inside
    exact = [F(0), F(2, 9)] + [F(1, 9)] * 7
    w = np.array([float(x) for x in exact])
    label, det = classify_state(W=w, S=mub3, exact_w=exact)
    assert label == "STABILIZER_MIX"
