"""Command-line surface.

Subcommands: wigner, sample, facets, classify, slice, distill-check.
Exit codes: 0 = PASS (or informational success), 1 = FAIL verdict,
2 = invalid input.  Every output starts with a `# format-version 1` header
and prints numbers at 12 significant digits, so identical command lines with
identical seeds produce byte-identical files at any --jobs setting.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import FORMAT_VERSION, __version__
from .circuits import (
    CircuitError,
    load_matrix_file,
    parse_circuit_file,
    parse_slice_file,
    preset_state,
    validate_circuit,
)
from .fields import index_point, require_odd_prime
from .geometry import classify_state, facet_check, slice_csv, slice_scan
from .simulate import (
    InputNegativelyRepresented,
    OracleGuardError,
    ZeroProbabilityBranch,
    compare_distributions,
    distill_step,
    parse_distill_file,
    random_distill_instance,
    run_oracle,
    sample_classical,
)
from .stabilizer import mub_stabilizer_states
from .wigner import negativity_F, wigner_of_state

__all__ = ["main"]


def _g(x) -> str:
    x = float(x)
    if abs(x) < 1e-13:  # suppress representation noise in reports
        x = 0.0
    return "%.12g" % x


def _emit(text: str, out_path) -> None:
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def _load_state(spec: str, p: int):
    """Preset name or state file; bare paths are treated as matrix files."""
    if spec in ("zero", "mixed") or spec.startswith(("basis(", "wigner-file:", "matrix-file:")):
        rho, _ = preset_state(spec, p, Path.cwd())
        return rho
    return load_matrix_file(spec)


def cmd_wigner(args) -> int:
    p = args.p
    require_odd_prime(p)
    rho = _load_state(args.state, p)
    d = rho.shape[0]
    n = 0
    while p**n < d:
        n += 1
    if p**n != d:
        raise ValueError(f"state dimension {d} is not a power of p={p}")
    W = wigner_of_state(rho, p)
    lines = [f"# format-version {FORMAT_VERSION}"]
    coord_names = (
        ["a1", "a2"] if n == 1 else [f"{c}_{j}" for j in range(1, n + 1) for c in ("a1", "a2")]
    )
    lines.append("index," + ",".join(coord_names) + ",value")
    for i, v in enumerate(W.values):
        pt = index_point(i, p, n)
        lines.append(f"{i}," + ",".join(str(c) for c in pt) + f",{_g(v)}")
    worst = int(np.argmin(W.values))
    flag = "NEGATIVE" if W.values[worst] < -1e-12 else "NONNEGATIVE"
    lines.append(f"# min_W = {_g(W.values[worst])} at index {worst}")
    lines.append(f"# F = {_g(negativity_F(rho, p))}")
    lines.append(f"# flag = {flag}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_sample(args) -> int:
    prog = parse_circuit_file(args.circuit)
    report = validate_circuit(prog)
    if not report.ok:
        for prob in report.problems:
            print(f"reject: {prob}", file=sys.stderr)
        print("REJECT", file=sys.stderr)
        return 2
    if args.shots == 0:
        print("ACCEPT")
        return 0
    if args.seed is None:
        print("error: sampling requires an explicit --seed", file=sys.stderr)
        return 2
    rpt = sample_classical(prog, seed=args.seed, shots=args.shots, jobs=args.jobs, validated=True)
    ref = None
    cmp_res = None
    if args.oracle_check:
        ref = run_oracle(prog)
        cmp_res = compare_distributions(ref, rpt.counts, rpt.shots)
    lines = [f"# format-version {FORMAT_VERSION}"]
    lines.append("outcome,count,probability,reference_probability")
    alphabet = sorted(set(rpt.counts) | (set(ref.probabilities) if ref else set()))
    for k in alphabet:
        c = rpt.counts.get(k, 0)
        refp = _g(ref.probabilities[k]) if ref else ""
        lines.append(f"{k},{c},{_g(c / rpt.shots)},{refp}")
    lines.append(f"# shots = {rpt.shots}")
    lines.append(f"# seed = {rpt.seed}")
    lines.append(f"# field_mults = {rpt.field_mults}")
    lines.append(f"# field_adds = {rpt.field_adds}")
    if cmp_res:
        lines.append(f"# tv = {_g(cmp_res.tv)}")
        lines.append(f"# epsilon = {_g(cmp_res.epsilon)}")
        lines.append(f"# chi2_stat = {_g(cmp_res.chi2_stat)}")
        lines.append(f"# chi2_p = {_g(cmp_res.chi2_p)}")
        lines.append(f"# verdict = {cmp_res.verdict}")
    _emit("\n".join(lines) + "\n", args.out)
    if cmp_res and cmp_res.verdict != "PASS":
        return 1
    return 0


def cmd_facets(args) -> int:
    p = args.p
    require_odd_prime(p)
    S = mub_stabilizer_states(p)
    lines = [f"# format-version {FORMAT_VERSION}"]
    lines.append(
        "a1,a2,all_vertices_nonnegative,saturating_count,saturating_span_dim,"
        "is_facet,min_vertex_value"
    )
    all_ok = True
    for a1 in range(p):
        for a2 in range(p):
            r = facet_check((a1, a2), S)
            all_ok &= r.is_facet
            lines.append(
                f"{a1},{a2},{r.all_vertices_nonnegative},{r.saturating_count},"
                f"{r.saturating_span_dim},{r.is_facet},{_g(r.min_vertex_value)}"
            )
    _emit("\n".join(lines) + "\n", args.out)
    return 0 if all_ok else 1


def cmd_classify(args) -> int:
    p = args.p
    require_odd_prime(p)
    rho = _load_state(args.state, p)
    if rho.shape[0] != p:
        raise ValueError(f"classify handles single qudits; got dimension {rho.shape[0]}")
    S = mub_stabilizer_states(p)
    label, details = classify_state(rho=rho, p=p, S=S)
    lines = [f"# format-version {FORMAT_VERSION}"]
    lines.append(f"label = {label}")
    lines.append(f"min_eig = {_g(details['min_eig'])}")
    lines.append(f"min_W = {_g(details['min_wigner'])}")
    cert = details.get("certificate")
    if cert is not None:
        if cert.inside:
            lines.append(f"lp_residual = {_g(cert.residual)}")
        else:
            lines.append(f"lp_violation = {_g(cert.violation)}")
            lines.append("witness_y = " + " ".join(_g(y) for y in cert.witness_y))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_slice(args) -> int:
    spec = parse_slice_file(args.spec)
    S = mub_stabilizer_states(spec.p)
    rows = slice_scan(spec, S=S)
    _emit(slice_csv(rows, spec), args.out)
    return 0


def cmd_distill_check(args) -> int:
    if args.random_suite is not None:
        if args.seed is None:
            print("error: --random-suite requires an explicit --seed", file=sys.stderr)
            return 2
        rng = np.random.default_rng(args.seed)
        lines = [f"# format-version {FORMAT_VERSION}"]
        lines.append("instance,F_in,F_out,branch_probability,verdict")
        all_pass = True
        for i in range(args.random_suite):
            inst = random_distill_instance(args.p, args.n, rng)
            try:
                res = distill_step(inst)
            except ZeroProbabilityBranch:
                lines.append(f"{i},,,0,SKIP")
                continue
            all_pass &= res.verdict == "PASS"
            lines.append(
                f"{i},{_g(res.F_in)},{_g(res.F_out)},"
                f"{_g(res.branch_probability)},{res.verdict}"
            )
        lines.append(f"# verdict = {'PASS' if all_pass else 'FAIL'}")
        _emit("\n".join(lines) + "\n", args.out)
        return 0 if all_pass else 1
    if args.instance is None:
        print("error: need an instance file or --random-suite", file=sys.stderr)
        return 2
    inst = parse_distill_file(args.instance)
    res = distill_step(inst, force_negative_input=args.force_negative_input)
    lines = [f"# format-version {FORMAT_VERSION}"]
    lines.append(f"F_in = {_g(res.F_in)}")
    lines.append(f"F_out = {_g(res.F_out)}")
    lines.append(f"branch_probability = {_g(res.branch_probability)}")
    lines.append(f"verdict = {res.verdict if res.verdict else 'RECORDED'}")
    _emit("\n".join(lines) + "\n", args.out)
    if res.verdict == "FAIL":
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dwigner",
        description="Discrete Wigner functions, stabilizer geometry and "
        "hidden-variable circuit sampling for odd-prime qudits.",
    )
    ap.add_argument(
        "--version",
        action="version",
        version=f"dwigner {__version__} (format-version {FORMAT_VERSION})",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    w = sub.add_parser("wigner", help="Wigner table and negativity of a state")
    w.add_argument("state", help="preset (zero, basis(k), mixed, *-file:path) or matrix file path")
    w.add_argument("--p", type=int, default=3)
    w.add_argument("--out")
    w.set_defaults(func=cmd_wigner)

    s = sub.add_parser("sample", help="classically sample a circuit document")
    s.add_argument("circuit")
    s.add_argument("--shots", type=int, required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--oracle-check", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sample)

    f = sub.add_parser("facets", help="phase-point facet report for the stabilizer polytope")
    f.add_argument("p", type=int)
    f.add_argument("--out")
    f.set_defaults(func=cmd_facets)

    c = sub.add_parser("classify", help="classify a single-qudit state")
    c.add_argument("state")
    c.add_argument("--p", type=int, default=3)
    c.add_argument("--out")
    c.set_defaults(func=cmd_classify)

    sl = sub.add_parser("slice", help="scan a Wigner-simplex slice and label each grid point")
    sl.add_argument("spec")
    sl.add_argument("--jobs", type=int, default=1)
    sl.add_argument("--out")
    sl.set_defaults(func=cmd_slice)

    d = sub.add_parser("distill-check", help="distillation positivity check")
    d.add_argument("instance", nargs="?")
    d.add_argument("--force-negative-input", action="store_true")
    d.add_argument("--random-suite", type=int)
    d.add_argument("--seed", type=int)
    d.add_argument("--p", type=int, default=3)
    d.add_argument("--n", type=int, default=2)
    d.add_argument("--out")
    d.set_defaults(func=cmd_distill_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CircuitError, InputNegativelyRepresented, OracleGuardError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
