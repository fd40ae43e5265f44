import numpy as np
import pytest

from dwigner.circuits import (
    CircuitError,
    computational_povm,
    load_matrix_file,
    load_povm_file,
    load_wigner_file,
    parse_circuit,
    parse_circuit_file,
    parse_slice_file,
    validate_circuit,
    write_matrix_file,
)

MINIMAL = """\
qudits p=3 n=1
input 1 zero
measure 1 computational
"""


def test_parse_minimal():
    prog = parse_circuit(MINIMAL)
    assert prog.p == 3 and prog.n == 1
    assert len(prog.items) == 1
    assert prog.max_registers == 1
    assert validate_circuit(prog).ok


def test_parse_four_register_adaptive():
    # three-way branch on register 4's outcome selecting the final Clifford
    src = """\
qudits p=3 n=4
input 1 mixed
input 2 zero
input 3 zero
input 4 zero
gate fourier(1); sum(1,2); sum(2,3); sum(3,4)
measure 4 computational branch: 0->c0 1->c1 2->c2
label c0:
gate fourier(3)
measure 3 computational
measure 2 computational
measure 1 computational
label c1:
gate quadratic(3)
measure 3 computational
measure 2 computational
measure 1 computational
label c2:
gate multiply(2,3)
measure 3 computational
measure 2 computational
measure 1 computational
"""
    prog = parse_circuit(src)
    assert prog.n == 4
    branch = next(it for it in prog.items if getattr(it, "branch", None))
    assert len(branch.branch) == 3
    assert validate_circuit(prog).ok


def test_reject_wrong_measure_order():
    src = """\
qudits p=3 n=2
input 1 zero
input 2 zero
measure 1 computational
measure 2 computational
"""
    with pytest.raises(CircuitError, match="order"):
        parse_circuit(src)


def test_reject_double_measure():
    src = """\
qudits p=3 n=1
input 1 zero
measure 1 computational
measure 1 computational
"""
    with pytest.raises(CircuitError):
        parse_circuit(src)


def test_reject_unmeasured_register():
    src = """\
qudits p=3 n=2
input 1 zero
input 2 zero
measure 2 computational
"""
    with pytest.raises(CircuitError, match="unmeasured"):
        parse_circuit(src)


def test_reject_non_total_branch():
    src = """\
qudits p=3 n=1
input 1 zero
measure 1 computational branch: 0->a 1->a
label a:
"""
    with pytest.raises(CircuitError, match="total"):
        parse_circuit(src)


def test_reject_backward_branch_target():
    src = """\
qudits p=3 n=1
label back:
input 1 zero
measure 1 computational branch: 0->back 1->back 2->back
"""
    # inputs must precede instructions, so restructure to isolate the rule
    src = """\
qudits p=3 n=1
input 1 zero
label back:
measure 1 computational branch: 0->back 1->back 2->back
"""
    with pytest.raises(CircuitError, match="ahead"):
        parse_circuit(src)


def test_reject_unknown_preset_and_povm():
    with pytest.raises(CircuitError, match="preset"):
        parse_circuit("qudits p=3 n=1\ninput 1 wat\nmeasure 1 computational\n")
    with pytest.raises(CircuitError, match="POVM"):
        parse_circuit("qudits p=3 n=1\ninput 1 zero\nmeasure 1 bell\n")


def test_reject_bad_header_and_prime():
    with pytest.raises(CircuitError):
        parse_circuit("qudits p=4 n=1\ninput 1 zero\nmeasure 1 computational\n")
    with pytest.raises(CircuitError):
        parse_circuit("hello\n")
    with pytest.raises(CircuitError):
        parse_circuit("")


def test_reject_input_after_instruction():
    src = """\
qudits p=3 n=2
input 1 zero
gate fourier(1)
input 2 zero
measure 2 computational
measure 1 computational
"""
    with pytest.raises(CircuitError, match="precede"):
        parse_circuit(src)


def test_reject_duplicate_input_and_missing_input():
    with pytest.raises(CircuitError, match="two inputs"):
        parse_circuit(
            "qudits p=3 n=1\ninput 1 zero\ninput 1 zero\nmeasure 1 computational\n"
        )
    with pytest.raises(CircuitError, match="no input"):
        parse_circuit("qudits p=3 n=2\ninput 1 zero\nmeasure 2 computational\n")


def test_reject_gate_word_errors():
    base = "qudits p=3 n=2\ninput 1 zero\ninput 2 zero\n{}\nmeasure 2 computational\nmeasure 1 computational\n"
    for bad in (
        "gate sum(1,1)",
        "gate fourier(3)",
        "gate warp(1)",
        "gate multiply(0,1)",
        "gate fourier(1);; sum(1,2)",
    ):
        with pytest.raises(CircuitError):
            parse_circuit(base.format(bad))


def test_error_carries_line_number():
    try:
        parse_circuit("qudits p=3 n=1\ninput 1 zero\ngate warp(1)\nmeasure 1 computational\n")
    except CircuitError as exc:
        assert exc.line == 3
        assert "line 3" in str(exc)
    else:
        pytest.fail("expected CircuitError")


def test_validate_rejects_negative_input(samples_dir):
    prog = parse_circuit_file(samples_dir / "bad_negative_input.circ")
    rep = validate_circuit(prog)
    assert not rep.ok
    assert any("negative Wigner value" in p and "(0,0)" in p for p in rep.problems)


def test_validate_rejects_negative_effect(tmp_path, strange_state):
    # PSD POVM whose first effect has a negative Wigner value
    comp = np.eye(3) - strange_state
    lines = ["povm p=3 outcomes=2", "effect s"]
    for row in strange_state:
        lines.append("  ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row))
    lines.append("effect rest")
    for row in comp:
        lines.append("  ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row))
    povm_path = tmp_path / "neg.povm"
    povm_path.write_text("\n".join(lines) + "\n")
    src = f"""\
qudits p=3 n=1
input 1 mixed
measure 1 povm-file:{povm_path.name}
"""
    prog = parse_circuit(src, base_dir=tmp_path)
    rep = validate_circuit(prog)
    assert not rep.ok
    assert any("negative Wigner value" in p for p in rep.problems)


def test_gate_unitary_matches_claimed_map():
    src = """\
qudits p=3 n=2
input 1 zero
input 2 zero
gate fourier(1); sum(2,1); quadratic(2)
measure 2 computational
measure 1 computational
"""
    prog = parse_circuit(src)
    rep = validate_circuit(prog)
    assert rep.ok
    # the validator re-derived (F, a) for the gate at n=2
    assert any(g.a.sum() == 0 for g in rep.gate_maps.values())


def test_matrix_file_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    M = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    path = tmp_path / "m.mat"
    write_matrix_file(path, M)
    assert np.max(np.abs(load_matrix_file(path) - M)) < 1e-15


def test_matrix_file_errors(tmp_path):
    path = tmp_path / "bad.mat"
    path.write_text("dim 2\n1 0 0 0\n")
    with pytest.raises(CircuitError):
        load_matrix_file(path)
    path.write_text("2\n1 0 0 0 0 0 1 0\n")
    with pytest.raises(CircuitError):
        load_matrix_file(path)


def test_wigner_file(tmp_path):
    path = tmp_path / "w.wig"
    rows = "\n".join(f"{a} {b} 1/9" for a in range(3) for b in range(3))
    path.write_text(f"wigner p=3\n{rows}\n")
    w = load_wigner_file(path, 3)
    assert all(x == 1 for x in (9 * v for v in w))
    path.write_text("wigner p=3\n0 0 1\n")
    with pytest.raises(CircuitError):
        load_wigner_file(path, 3)


def test_computational_povm():
    povm = computational_povm(3)
    assert povm.labels == ("0", "1", "2")
    total = sum(povm.effects)
    assert np.allclose(total, np.eye(3))


def test_povm_file_label_and_completeness(tmp_path, samples_dir):
    povm = load_povm_file(samples_dir / "two_outcome.povm", 3)
    assert povm.labels == ("hit", "miss")
    assert np.allclose(sum(povm.effects), np.eye(3), atol=1e-12)
    # incomplete POVM rejected
    bad = tmp_path / "bad.povm"
    bad.write_text(
        "povm p=3 outcomes=1\neffect only\n1 0  0 0  0 0\n0 0  0 0  0 0\n0 0  0 0  0 0\n"
    )
    with pytest.raises(CircuitError):
        load_povm_file(bad, 3)


def test_extend_paths_and_measure_rule():
    # after extend, the new highest register must be measured first
    src = """\
qudits p=3 n=1
input 1 zero
extend 1 mixed
measure 1 computational
measure 2 computational
"""
    with pytest.raises(CircuitError, match="order"):
        parse_circuit(src)
    ok = src.replace(
        "measure 1 computational\nmeasure 2 computational",
        "measure 2 computational\nmeasure 1 computational",
    )
    prog = parse_circuit(ok)
    assert prog.max_registers == 2


def test_parse_slice_file_errors(tmp_path, samples_dir):
    spec = parse_slice_file(samples_dir / "pinned_ninth_2d.slice")
    assert spec.p == 3
    assert len(spec.free) == 2
    bad = tmp_path / "bad.slice"
    bad.write_text("slice p=3\nfixed (0,0) 1/9\n")
    with pytest.raises((CircuitError, ValueError)):
        parse_slice_file(bad)
    bad.write_text("slice p=5\n")
    with pytest.raises((CircuitError, ValueError)):
        parse_slice_file(bad)


def test_format_header_line_tolerated():
    src = "format 1\n" + MINIMAL
    prog = parse_circuit(src)
    assert prog.p == 3
