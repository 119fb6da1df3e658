"""Command line entry point: ``gradmap <command> [measure.json] [options]``.

Exit codes: 0 success, 1 solver failure (TargetUnreachable, NonConvergence or
a failed check), 2 invalid input.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import invariants
from .abelian import Status, affine_component, orbit_image_sample, polytope_P, solve_torus_target
from .measures import (
    DiscreteMeasure,
    gradient_F,
    gradient_F_torus,
    in_W_class,
    isotropy_algebra_torus,
)
from .model_space import ModelSpace
from .nonabelian import F_nu, balance, reduce_and_recenter, regularity_proxy
from .reports import (
    InputError,
    load_measure,
    measure_to_obj,
    parse_coords,
    write_csv,
    write_report,
)

COMMANDS = ("compute", "balance", "orbit-image", "polytope", "reduce", "check")
OUTPUT_ENV = "GRADMAP_OUTPUT_DIR"
EXIT_OK, EXIT_SOLVER, EXIT_INPUT = 0, 1, 2


@dataclass
class Scenario:
    command: str
    model: ModelSpace | None = None
    measure: DiscreteMeasure | None = None
    params: dict = field(default_factory=dict)


@dataclass
class RunResult:
    exit_code: int
    report: dict
    paths: list = field(default_factory=list)


def parse_model_arg(text: str) -> ModelSpace:
    """``rp:2`` or ``cp:1``."""
    try:
        kind, n = text.split(":")
        return ModelSpace(kind.strip().lower(), int(n))
    except ValueError as exc:
        raise InputError(f"--model: expected KIND:N such as rp:2, got {text!r}") from exc


def parse_target(text, model: ModelSpace, matrix: bool):
    """Target literal: a length-N list (diagonal) or, with ``matrix``, an N x N nested list."""
    if text is None:
        return None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"--target: not a JSON literal ({exc.msg})") from exc
    N = model.N
    if matrix and isinstance(raw, list) and len(raw) == N and all(
            isinstance(r, list) and len(r) == N for r in raw):
        T = np.array([parse_coords(r, model, f"--target[{i}]") for i, r in enumerate(raw)])
        if np.max(np.abs(T - T.conj().T)) > 1e-9 or abs(np.trace(T)) > 1e-9:
            raise InputError("--target: matrix must be symmetric/Hermitian and traceless")
        return T
    v = parse_coords(raw, ModelSpace("rp", model.n), "--target")
    if abs(v.sum()) > 1e-9:
        raise InputError("--target: diagonal target must sum to zero")
    return np.diag(v).astype(model.dtype) if matrix else v


def _compute(s: Scenario):
    nu = s.measure
    reg = regularity_proxy(nu)
    report = {
        "status": "Computed",
        "gradient_F": gradient_F(nu),
        "gradient_F_torus": gradient_F_torus(nu),
        "torus_isotropy_basis": isotropy_algebra_torus(nu),
        "in_W_class": in_W_class(nu),
        "regularity": {"ok": reg.ok, "max_weight": reg.max_weight,
                       "stability_margin": reg.stability_margin, "reasons": reg.reasons},
    }
    return EXIT_OK, report, None


def _balance(s: Scenario):
    p = s.params
    nu = s.measure
    rep = balance(nu, p.get("target"), tol=p["tol"], max_iter=p["max_iter"])
    report = {
        "status": rep.status.value,
        "residual_norm": rep.residual_norm,
        "iterations": rep.iterations,
        "message": rep.message,
        "solution": rep.solution,
        "p_part": rep.extras["p_part"],
        "positive_factor": rep.extras["positive_factor"],
        "F_at_solution": F_nu(nu, rep.solution),
    }
    table = (["iteration", "residual_norm"],
             [(i, r) for i, (_, r) in enumerate(rep.trace)],
             ["balancing trace: iteration index, ||target - F(g . nu)|| after that iteration"])
    code = EXIT_OK if rep.status is Status.CONVERGED else EXIT_SOLVER
    return code, report, table


def _orbit_image(s: Scenario):
    p = s.params
    nu = s.measure
    pts = orbit_image_sample(nu, p["samples"], p["radius"], p["seed"])
    offset, direction = affine_component(nu)
    report = {
        "status": "Sampled",
        "samples": p["samples"],
        "radius": p["radius"],
        "affine_offset": offset,
        "affine_direction": direction,
    }
    code = EXIT_OK
    if p.get("target") is not None:
        rep = solve_torus_target(nu, p["target"], tol=p["tol"], max_iter=p["max_iter"])
        report["status"] = rep.status.value
        report["solve"] = {"status": rep.status.value, "alpha": rep.solution,
                           "residual_norm": rep.residual_norm, "iterations": rep.iterations,
                           "message": rep.message}
        if rep.status is not Status.CONVERGED:
            code = EXIT_SOLVER
    N = nu.model.N
    table = ([f"a{j}" for j in range(N)], [list(map(float, x)) for x in pts],
             [f"torus orbit-image samples F_a(exp(alpha) . nu), alpha uniform in the radius-{p['radius']:g} ball",
              "columns a0..a{N-1}: diagonal entries (they sum to zero)".replace("{N-1}", str(N - 1))])
    return code, report, table


def _polytope(s: Scenario):
    body = polytope_P(s.model)
    report = {"status": "Computed", "vertices": body.vertices,
              "facet_normals": body.normals, "facet_offsets": body.offsets,
              "volume": body.volume()}
    N = s.model.N
    table = ([f"a{j}" for j in range(N)], [list(map(float, v)) for v in body.vertices],
             ["vertices of the torus momentum simplex, e_i - 1/N"])
    return EXIT_OK, report, table


def _reduce(s: Scenario):
    p = s.params
    rr = reduce_and_recenter(s.measure, p["samples"], p["seed"])
    report = {"status": rr.verdict.value, "shift": rr.shift, "subspace_basis": rr.subspace_basis,
              "reduced_dimension": rr.reduced_dimension, "lower_dimensional": rr.lower_dimensional,
              "margin": rr.margin, "off_subspace": rr.off_subspace}
    return EXIT_OK, report, None


def _check(s: Scenario):
    results = invariants.run_all(scale=s.params.get("scale", 1.0), seed=s.params["seed"])
    for r in results:
        print(r.line())
    report = {"status": "Passed" if all(r.passed for r in results) else "Failed",
              "checks": [{"criterion": r.number, "name": r.name, "passed": r.passed,
                          "worst": r.worst, "detail": r.detail} for r in results]}
    return (EXIT_OK if all(r.passed for r in results) else EXIT_SOLVER), report, None


HANDLERS = {"compute": _compute, "balance": _balance, "orbit-image": _orbit_image,
            "polytope": _polytope, "reduce": _reduce, "check": _check}


def run_scenario(s: Scenario, outdir, fmt: str = "json", timing: bool = False) -> RunResult:
    """Run one command and write ``<command>.json`` (plus ``<command>.csv`` when asked)."""
    if s.command not in HANDLERS:
        raise InputError(f"unknown command {s.command!r}")
    start = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        code, outputs, table = HANDLERS[s.command](s)
    report = {"command": s.command,
              "inputs": {"model": None if s.model is None else {"kind": s.model.kind, "n": s.model.n},
                         "measure": None if s.measure is None else measure_to_obj(s.measure),
                         "params": {k: v for k, v in sorted(s.params.items())}},
              "seed": s.params.get("seed", 0),
              "outputs": outputs,
              "warnings": [str(w.message) for w in caught]}
    if timing:
        report["wall_time_s"] = time.perf_counter() - start
    outdir = Path(outdir)
    paths = [write_report(report, outdir / f"{s.command}.json")]
    if fmt == "csv" and table is not None:
        header, rows, comments = table
        paths.append(write_csv(outdir / f"{s.command}.csv", header, rows, comments))
    return RunResult(code, report, paths)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gradmap",
                                 description="Gradient maps of measures on projective models.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name in ("compute", "balance", "orbit-image", "reduce"):
            sp.add_argument("measure", help="measure JSON file")
        if name == "polytope":
            sp.add_argument("measure", nargs="?", help="measure JSON file (its model is used)")
            sp.add_argument("--model", help="model as KIND:N, e.g. rp:2")
        sp.add_argument("--tol", type=float, default=1e-8)
        sp.add_argument("--max-iter", type=int, default=500)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--target", help="JSON vector (diagonal) or matrix literal")
        sp.add_argument("--samples", type=int, default=200)
        sp.add_argument("--radius", type=float, default=5.0)
        sp.add_argument("--output", help=f"output directory (default ${OUTPUT_ENV} or .)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--timing", action="store_true", help="record wall time in the report")
        if name == "check":
            sp.add_argument("--scale", type=float, default=1.0,
                            help="fraction of the full instance counts to run")
    return ap


def scenario_from_args(args) -> Scenario:
    if not args.tol > 0:
        raise InputError("--tol must be positive")
    if args.max_iter < 0:
        raise InputError("--max-iter must be nonnegative")
    if args.samples < 1:
        raise InputError("--samples must be at least 1")
    params = {"tol": args.tol, "max_iter": args.max_iter, "seed": args.seed,
              "samples": args.samples, "radius": args.radius}
    measure = model = None
    if getattr(args, "measure", None):
        measure = load_measure(args.measure)
        model = measure.model
    if getattr(args, "model", None):
        m = parse_model_arg(args.model)
        if model is not None and m != model:
            raise InputError("--model disagrees with the measure file")
        model = m
    if args.command == "polytope" and model is None:
        raise InputError("polytope needs a measure file or --model")
    if args.target is not None:
        if model is None:
            raise InputError("--target needs a model")
        params["target"] = parse_target(args.target, model, matrix=args.command == "balance")
    if args.command == "check":
        params["scale"] = args.scale
    return Scenario(args.command, model, measure, params)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    outdir = args.output or os.environ.get(OUTPUT_ENV) or "."
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            scenario = scenario_from_args(args)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        result = run_scenario(scenario, outdir, args.format, args.timing)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for w in result.report["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{args.command}: {result.report['outputs'].get('status', '')}")
    for p in result.paths:
        print(f"wrote {p}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
