"""Command line entry point: ``viscobeam <subcommand> ...``.

Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import ExperimentSpec, DEFAULT_LADDER, run_spec, summarize_checks
from .linalg import NumericalFailure

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


def _floats(s: str) -> tuple:
    return tuple(float(x) for x in s.split(",") if x)


def _ints(s: str) -> tuple:
    return tuple(int(x) for x in s.split(",") if x)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dt", type=float, help="time step (overrides the spec)")
    p.add_argument("--out", help="output directory (overrides the spec)")
    p.add_argument("--seed", type=int, help="random seed (overrides the spec)")


def _beam_args(p: argparse.ArgumentParser, ladder=DEFAULT_LADDER) -> None:
    p.add_argument("--bc", default="clamped", help="comma-separated: clamped, simply_supported")
    p.add_argument("--element", default="P1", choices=["P1", "P2"])
    p.add_argument("--ladder", type=_ints, default=ladder, help="comma-separated element counts")
    p.add_argument("--thickness", type=_floats, default=(1e-1, 1e-2, 1e-3), help="comma-separated d values")
    p.add_argument("--T", type=float, default=10.0, help="final time")
    p.add_argument("--stride", type=int, help="keep every stride-th step (default: automatic)")


def _abstract_args(p: argparse.ArgumentParser, n_seeds: int) -> None:
    p.add_argument("--n-seeds", type=int, default=n_seeds)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--kernel-max", type=float, default=0.5, help="largest kernel bound")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="viscobeam", description="Viscoelastic Timoshenko beam experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a JSON experiment spec")
    p.add_argument("spec", help="path to the spec file")
    _common(p)

    p = sub.add_parser("convergence", help="mesh convergence table")
    _beam_args(p)
    p.add_argument("--integration", default="mixed", choices=["mixed", "primal-exact", "primal-reduced"])
    _common(p)

    p = sub.add_parser("locking", help="primal exact / primal reduced / mixed comparison")
    _beam_args(p)
    _common(p)

    p = sub.add_parser("lambda-sweep", help="second-theorem bounds across lambda")
    _abstract_args(p, 20)
    p.add_argument("--lambdas", type=_floats, default=(1e-2, 1e-4, 1e-6, 1e-8))
    _common(p)

    p = sub.add_parser("abstract-verify", help="first-theorem bounds on random systems")
    _abstract_args(p, 100)
    _common(p)

    p = sub.add_parser("single-run", help="one solve; writes the history and midspan deflection")
    p.add_argument("--n", type=int, default=40, help="number of elements")
    p.add_argument("--element", default="P1", choices=["P1", "P2"])
    p.add_argument("--integration", default="mixed", choices=["mixed", "primal-exact", "primal-reduced"])
    p.add_argument("--d", type=float, default=0.1)
    p.add_argument("--bc", default="clamped")
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--dump-matrices", action="store_true", help="write the operators in MatrixMarket format")
    _common(p)
    return ap


def spec_from_args(args) -> ExperimentSpec:
    cmd = args.command
    if cmd == "run":
        with open(args.spec) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError("spec must be a JSON object")
        raw.setdefault("beam", {})
        if args.dt is not None:
            raw["beam"] = {**raw["beam"], "dt": args.dt}
            raw["options"] = {**raw.get("options", {}), "dt": args.dt}
        if args.out is not None:
            raw["out"] = args.out
        if args.seed is not None:
            raw["seed"] = args.seed
        return ExperimentSpec.from_dict(raw)
    kw = {"out": args.out or "results", "seed": args.seed or 0}
    if cmd in ("convergence", "locking"):
        beam = {"T": args.T}
        if args.dt is not None:
            beam["dt"] = args.dt
        kw.update(beam=beam, ladder=args.ladder, element=args.element, thicknesses=args.thickness,
                  bcs=tuple(args.bc.split(",")), stride=args.stride)
        if cmd == "convergence":
            kw["integration"] = args.integration
        return ExperimentSpec(cmd, **kw)
    if cmd in ("lambda-sweep", "abstract-verify"):
        opts = {"n_seeds": args.n_seeds, "T": args.T, "kernel_max": args.kernel_max}
        if args.dt is not None:
            opts["dt"] = args.dt
        if cmd == "lambda-sweep":
            opts["lambdas"] = list(args.lambdas)
        return ExperimentSpec(cmd, options=opts, **kw)
    beam = {"T": args.T}
    if args.dt is not None:
        beam["dt"] = args.dt
    return ExperimentSpec("single-run", beam=beam, ladder=(args.n,), element=args.element,
                          integration=args.integration, thicknesses=(args.d,), bcs=(args.bc,),
                          options={"dump_matrices": args.dump_matrices}, **kw)


def _summary(spec: ExperimentSpec, result) -> str:
    if spec.kind in ("abstract-verify", "lambda-sweep"):
        s = summarize_checks(result)
        return f"{spec.kind}: {s['holds']}/{s['cases']} inequalities hold, min slack {s['min_slack']:.3e}"
    if spec.kind == "single-run":
        return f"single-run: {len(result)} samples, final midspan deflection {result.midspan_deflection()[-1]:.6e}"
    return f"{spec.kind}: results written to {spec.out}"


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        spec = spec_from_args(args)
    except (OSError, ValueError, TypeError, KeyError) as exc:
        print(f"viscobeam: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = run_spec(spec)
    except NumericalFailure as exc:
        print(f"viscobeam: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(_summary(spec, result))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
