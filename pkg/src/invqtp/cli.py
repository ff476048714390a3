"""Command-line front end.

Subcommands: ``validate``, ``inverse``, ``check-kkt`` and ``generate``.
Exit codes are disjoint by failure class: 1 parse error, 2 validation or
input-condition failure, 3 size guard exceeded, 4 no optimality certificate
(check-kkt only).  Reports are canonical JSON on stdout or ``--out``.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import fileio
from .inverse_l1 import closed_form_l1, solve_l1
from .inverse_linf import closed_form_linf, solve_linf
from .kkt import (
    CyclicSupportError,
    SizeGuardError,
    certificate_report,
    frank_wolfe_gap,
    frank_wolfe_optimize,
    kkt_check,
    tree_potentials,
)
from .model import (
    FlowMatrix,
    check_flow_feasibility,
    generate_instance,
    support_partition,
    validate_instance,
)
from .oracle import OracleGuardError, verify_inverse

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_VALIDATION = 2
EXIT_GUARD = 3
EXIT_NO_CERTIFICATE = 4


def _write_report(report: dict, out: str | None) -> None:
    text = fileio.canonical_json(report)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(path: str) -> tuple[str, fileio.InstanceDocument]:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return text, fileio.parse_instance_text(text)


def _echo(text: str, doc: fileio.InstanceDocument) -> dict:
    return {"n": doc.n, "m": doc.m, "input_sha256": fileio.content_hash(text)}


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        text, doc = _load(args.path)
    except (OSError, fileio.InstanceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    inst = doc.instance()
    validation = validate_instance(inst)
    report = {"instance": _echo(text, doc), "validation": validation.as_dict()}
    ok = validation.accepted
    flow = doc.flow()
    if flow is not None:
        feas = check_flow_feasibility(inst, flow)
        report["flow_feasibility"] = feas.as_dict()
        ok = ok and feas.feasible
    _write_report(report, args.out)
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_inverse(args: argparse.Namespace) -> int:
    try:
        text, doc = _load(args.path)
    except (OSError, fileio.InstanceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if doc.x0 is None:
        print("error: instance file carries no x0", file=sys.stderr)
        return EXIT_VALIDATION
    inst = doc.instance()
    cost = doc.cost()
    flow = doc.flow()
    if not validate_instance(inst).accepted or not check_flow_feasibility(inst, flow).feasible:
        print("error: instance invalid or x0 infeasible", file=sys.stderr)
        return EXIT_VALIDATION
    partition = support_partition(flow)

    if args.w1 == "free":
        if args.method == "closed":
            print("error: --method closed needs fixed potentials (--w1 tree or zero)", file=sys.stderr)
            return EXIT_VALIDATION
        potentials = None
    elif args.w1 == "zero":
        potentials = np.zeros(inst.n + inst.m)
    else:
        try:
            potentials = tree_potentials(inst, cost, flow, partition)
        except CyclicSupportError as exc:
            print(f"error: {exc}; use --w1 free or --w1 zero", file=sys.stderr)
            return EXIT_VALIDATION

    started = time.perf_counter()
    if args.method == "lp":
        solver = solve_l1 if args.norm == "l1" else solve_linf
        sol = solver(inst, cost, flow, partition, potentials)
    else:
        closed = closed_form_l1 if args.norm == "l1" else closed_form_linf
        sol = closed(inst, cost, flow, partition, potentials)

    diagnostics = dict(sol.diagnostics)
    if args.verify:
        try:
            verdict = verify_inverse(inst, cost, flow, sol)
        except OracleGuardError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_GUARD
        diagnostics["verification"] = verdict.as_dict()
    elapsed = time.perf_counter() - started

    report = {
        "instance": _echo(text, doc),
        "method": f"{sol.norm}-{'closed' if sol.method == 'closed' else 'lp'}",
        "norm": sol.norm,
        "objective_value": sol.objective_value,
        "Hstar_dense": [[float(v) for v in row] for row in sol.matrix_cost],
        "dstar": [float(v) for v in sol.vector_cost],
        "certificate": sol.certificate.as_dict(),
        "diagnostics": diagnostics,
        "timing": {"seconds": elapsed},
    }
    _write_report(report, args.out)
    return EXIT_OK


def cmd_check_kkt(args: argparse.Namespace) -> int:
    try:
        text, doc = _load(args.path)
    except (OSError, fileio.InstanceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if doc.x0 is None:
        print("error: instance file carries no x0", file=sys.stderr)
        return EXIT_VALIDATION
    inst = doc.instance()
    cost = doc.cost()
    flow = doc.flow()
    if not validate_instance(inst).accepted or not check_flow_feasibility(inst, flow).feasible:
        print("error: instance invalid or x0 infeasible", file=sys.stderr)
        return EXIT_VALIDATION
    partition = support_partition(flow)
    cert = kkt_check(inst, cost, flow, partition)
    report = {"instance": _echo(text, doc), "certificate_exists": cert is not None}
    if cert is not None:
        report["certificate"] = cert.as_dict()
        report["diagnostics"] = certificate_report(inst, cost, flow, cert)
    else:
        report["diagnostics"] = {
            "detail": "no potentials and nonnegative slacks satisfy the optimality system",
            "positive_cells": partition.positive_sorted(),
        }
    _write_report(report, args.out)
    return EXIT_OK if cert is not None else EXIT_NO_CERTIFICATE


def cmd_generate(args: argparse.Namespace) -> int:
    problem = generate_instance(args.seed, args.n, args.m, diagonal=args.diagonal)
    inst, cost = problem.instance, problem.cost
    if args.optimal_x0:
        try:
            x0 = frank_wolfe_optimize(inst, cost, tol=1e-9)
            gap = frank_wolfe_gap(inst, cost, FlowMatrix(x0))
        except SizeGuardError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_GUARD
        if gap > 1e-8:
            print(f"error: optimization stalled at gap {gap}", file=sys.stderr)
            return EXIT_VALIDATION
    else:
        x0 = problem.flow.x
    doc = fileio.document_from_parts(inst, cost, x0)
    text = doc.serialize()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invqtp",
        description="Minimal cost perturbations making a flow optimal for a quadratic transportation problem",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="structurally and numerically validate an instance file")
    p.add_argument("path")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("inverse", help="compute the minimal cost perturbation for the embedded x0")
    p.add_argument("path")
    p.add_argument("--norm", choices=["l1", "linf"], default="l1")
    p.add_argument("--method", choices=["lp", "closed"], default="lp")
    p.add_argument("--w1", choices=["free", "tree", "zero"], default="free")
    p.add_argument("--verify", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_inverse)

    p = sub.add_parser("check-kkt", help="test whether the embedded x0 is already optimal")
    p.add_argument("path")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check_kkt)

    p = sub.add_parser("generate", help="write a random instance file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--diagonal", action="store_true")
    p.add_argument("--optimal-x0", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
