"""Command-line front end: ``diflow <command> [options]``.

Exit codes: 0 success, 2 unreadable/ill-formed request, 3 invalid instance,
4 solver did not converge (best iterate still written), 5 property violations.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import io
from .directed import (
    di_cmi_sum,
    di_divergence,
    di_logratio,
    di_reverse,
    directed_information,
    mutual_information,
)
from .extremum import InfeasibleConstraint, SolverConfig, SolverResult, feedback_capacity, nrdf
from .measures import InvalidInstance, compose_joint
from .oracles import brute_force_capacity, brute_force_nrdf
from .properties import SUITES, run_all
from .variational import (
    lambda_deviation,
    objective_A,
    objective_B,
    optimal_nu,
    optimal_reverse_decomposition,
    reciprocity_check,
)

EXIT_OK, EXIT_PARSE, EXIT_INVALID, EXIT_NOCONV, EXIT_VIOLATIONS = 0, 2, 3, 4, 5
COMMANDS = ("compute", "reverse", "variational", "capacity", "rdf", "properties", "oracle", "validate")

log = logging.getLogger("diflow")


class RequestError(Exception):
    """A command-specific field is missing from the request or instance."""


def _default_seed() -> int:
    raw = os.environ.get("DIFLOW_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise RequestError(f"DIFLOW_SEED must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diflow", description="Directed information on finite alphabets.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--instance", help="instance JSON file")
    p.add_argument("--out", help="output file (stdout when omitted)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=None, help="default: $DIFLOW_SEED or 0")
    p.add_argument("--trials", type=int, default=None, help="trials per property suite (suite default)")
    p.add_argument("--suite", action="append", choices=sorted(SUITES), help="property suite (repeatable)")
    p.add_argument("--max-iters", type=int, default=SolverConfig.max_iters)
    p.add_argument("--tol", type=float, default=SolverConfig.rel_tol, help="relative stopping tolerance")
    p.add_argument("--grid", type=int, default=SolverConfig.grid_resolution, help="oracle grid resolution m")
    p.add_argument("--distortion-budget", type=float, default=None)
    p.add_argument("--power-budget", type=float, default=None)
    p.add_argument("--target", choices=("capacity", "rdf"), default="capacity", help="oracle problem")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


# ------------------------------------------------------------------ commands

def _need_instance(args) -> io.Instance:
    if not args.instance:
        raise RequestError(f"{args.command} needs --instance")
    doc = io.load_json(args.instance)
    diags = io.validate_document(doc)
    if diags:
        raise InvalidInstance("; ".join(str(d) for d in diags))
    return io.instance_from_document(doc)


def _need(inst: io.Instance, *fields: str) -> None:
    missing = [f for f in fields if getattr(inst, f) is None]
    if missing:
        keys = {"policy": "input_kernels", "channel": "channel_kernels"}
        raise RequestError("instance lacks " + ", ".join(keys.get(f, f) for f in missing))


def _cmd_compute(args, inst):
    _need(inst, "policy", "channel")
    reports = [f(inst.policy, inst.channel) for f in (di_cmi_sum, di_divergence, di_logratio)]
    header = ["route", "step", "per_step_bits", "total_bits"]
    records = [[r.route, i, b, r.total_bits] for r in reports for i, b in enumerate(r.per_step_bits)]
    return {"instance": io.spec_document(inst.spec), "routes": [r.to_dict() for r in reports]}, header, records


def _cmd_reverse(args, inst):
    _need(inst, "policy", "channel")
    rev = di_reverse(inst.policy, inst.channel)
    di = di_cmi_sum(inst.policy, inst.channel)
    mi = mutual_information(compose_joint(inst.policy, inst.channel))
    body = {
        "instance": io.spec_document(inst.spec),
        "reverse": rev.to_dict(),
        "directed": di.to_dict(),
        "mutual_information_bits": mi,
        "conservation_error": mi - di.total_bits - rev.total_bits,
    }
    header = ["quantity", "step", "per_step_bits", "total_bits"]
    records = [["reverse", i, b, rev.total_bits] for i, b in enumerate(rev.per_step_bits)]
    records += [["directed", i, b, di.total_bits] for i, b in enumerate(di.per_step_bits)]
    return body, header, records


def _cmd_variational(args, inst):
    _need(inst, "policy", "channel")
    p, q = inst.policy, inst.channel
    di = directed_information(p, q)
    sr = optimal_reverse_decomposition(p, q)
    nu = optimal_nu(p, q)
    rec = reciprocity_check(p, q, sr)
    body = {
        "instance": io.spec_document(inst.spec),
        "directed_bits": di,
        "objective_A_at_optimum": objective_A(p, q, nu),
        "objective_B_at_optimum": objective_B(p, q, sr),
        "optimal_nu": nu.reshape(-1).tolist(),
        "lambda_deviation": lambda_deviation(p, q, sr),
        "reciprocity": {"holds": rec.holds, "max_deviation": rec.max_deviation, "cells_checked": rec.cells_checked},
        "optimal_decomposition": io.sr_document(sr),
    }
    header = ["quantity", "bits"]
    records = [[k, body[k]] for k in ("directed_bits", "objective_A_at_optimum", "objective_B_at_optimum")]
    return body, header, records


def _config(args) -> SolverConfig:
    return SolverConfig(max_iters=args.max_iters, rel_tol=args.tol, grid_resolution=args.grid, seed=args.seed)


def _solver_body(res: SolverResult, argument_doc: dict) -> dict:
    return {
        "value_bits": res.value_bits,
        "iterations": res.iterations,
        "converged": res.converged,
        "trace": list(res.trace),
        "multiplier": res.multiplier,
        "constraint_value": res.constraint_value,
        "upper_bound_bits": res.upper_bound_bits,
        "argument": argument_doc,
    }


def _power(args, inst):
    budget = args.power_budget if args.power_budget is not None else inst.power_budget
    return None if budget is None else io.power_spec(inst, budget)


def _distortion(args, inst):
    budget = args.distortion_budget if args.distortion_budget is not None else inst.distortion_budget
    if budget is None:
        raise RequestError("rate distortion needs --distortion-budget or distortion_budget in the instance")
    return io.distortion_spec(inst, budget)


def _cmd_capacity(args, inst):
    _need(inst, "channel")
    res = feedback_capacity(inst.channel, _config(args), _power(args, inst), inst.policy)
    body = _solver_body(res, io.policy_document(res.argument))
    return body, ["iteration", "directed_bits"], list(enumerate(res.trace)), res.converged


def _cmd_rdf(args, inst):
    _need(inst, "policy")
    res = nrdf(inst.policy, _distortion(args, inst), _config(args), inst.channel)
    body = _solver_body(res, io.channel_document(res.argument))
    return body, ["iteration", "directed_bits"], list(enumerate(res.trace)), res.converged


def _cmd_oracle(args, inst):
    if args.target == "capacity":
        _need(inst, "channel")
        value = brute_force_capacity(inst.channel, args.grid, _power(args, inst))
    else:
        _need(inst, "policy")
        value = brute_force_nrdf(inst.policy, _distortion(args, inst), m=args.grid)
    body = {"target": args.target, "grid": args.grid, "value_bits": value}
    return body, ["target", "grid", "value_bits"], [[args.target, args.grid, value]]


def _cmd_properties(args):
    spec = _need_instance(args).spec if args.instance else None
    if args.trials is not None and args.trials < 0:
        raise RequestError("--trials must be >= 0")
    reports = [] if args.trials == 0 else run_all(spec, args.trials, args.seed, args.suite)
    header = ["property_name", "trials", "violations", "worst_margin", "seed"]
    records = [[r.property_name, r.trials, r.violations, r.worst_margin, r.seed] for r in reports]
    return [r.to_dict() for r in reports], header, records, sum(r.violations for r in reports)


def _cmd_validate(args):
    if not args.instance:
        raise RequestError("validate needs --instance")
    diags = io.validate(args.instance)
    return diags, ["diagnostic"], [[d] for d in diags]


# ------------------------------------------------------------------ entry point

def _write(args, body, header, records) -> None:
    text = io.dumps_csv(header, records) if args.format == "csv" else io.dumps_json(body)
    io.emit(text, args.out)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.seed is None:
            args.seed = _default_seed()
        if args.command == "validate":
            body, header, records = _cmd_validate(args)
            _write(args, body, header, records)
            return EXIT_INVALID if body else EXIT_OK
        if args.command == "properties":
            body, header, records, violations = _cmd_properties(args)
            _write(args, body, header, records)
            return EXIT_VIOLATIONS if violations else EXIT_OK
        inst = _need_instance(args)
        handler = {
            "compute": _cmd_compute,
            "reverse": _cmd_reverse,
            "variational": _cmd_variational,
            "capacity": _cmd_capacity,
            "rdf": _cmd_rdf,
            "oracle": _cmd_oracle,
        }[args.command]
        out = handler(args, inst)
        _write(args, *out[:3])
        if len(out) == 4 and not out[3]:
            log.error("%s did not converge within %d iterations", args.command, args.max_iters)
            return EXIT_NOCONV
        return EXIT_OK
    except (io.ParseError, RequestError) as exc:
        print(f"diflow: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InvalidInstance, InfeasibleConstraint) as exc:
        print(f"diflow: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        # e.g. oracle grid too large, bad solver overrides
        print(f"diflow: {exc}", file=sys.stderr)
        return EXIT_PARSE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
