"""``qevent`` command-line experiment runner.

Each subcommand prints (or writes to ``--output``) one JSON document with
sorted keys and no timestamps, so the same arguments always give the same
bytes.  Exit status: 0 success, 1 a reported check failed, 2 usage or input
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import __version__
from .bounds import random_instance_suite
from .counterexamples import (
    build_blended_counterexample,
    build_random_counterexample,
    run_counterexample,
)
from .io import (
    ConfigError,
    instance_from_json,
    instance_hash,
    instance_to_json,
    load_json_source,
)
from .measurements import MeasurementEnsemble
from .plotting import CurveTable, geometric_checkpoints, render_figure, write_csv
from .protocols import (
    OrInstance,
    binomial_sigma,
    count_distribution,
    event_finding_batch,
    mean_estimation_batch,
    mean_estimation_variance,
    plant_case_one,
    plant_case_two,
    run_or_blended,
    run_or_random,
)
from .qla import ContractError, DensityMatrix
from .sequential import (
    EngineConfig,
    blended_accept_curve,
    default_workers,
    first_accept_curve,
    random_accept_curve,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

_RANGES = {"d_range": (2, 6), "m_range": (1, 4), "k_range": (1, 5)}
PROFILES = {
    "default": {"count": 100, "projective_only": True, **_RANGES},
    "general": {"count": 100, "projective_only": False, **_RANGES},
    "quick": {"count": 10, "projective_only": True, **_RANGES},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# -- argument groups ------------------------------------------------------------


def _common(p: argparse.ArgumentParser, shots: int = 10000) -> None:
    p.add_argument("--seed", type=int, default=0, help="run seed (recorded in the output)")
    p.add_argument("--shots", type=int, default=shots, help="Monte-Carlo shots")
    p.add_argument("--output", "-o", help="write the JSON result here instead of stdout")
    p.add_argument("--csv", help="write per-round curves as CSV")
    p.add_argument("--figure", help="also render the CSV curves to this image file")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $QEVENT_THREADS or all cores)")


def _instance_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("instance", "load with --instance or plant one with --case")
    g.add_argument("--instance", help="instance JSON file, or inline JSON object")
    g.add_argument("--case", choices=["one", "two", "mean-example"], default=None)
    g.add_argument("--dim", type=int, default=4)
    g.add_argument("--m", type=int, default=8)
    g.add_argument("--p-down", type=float, default=0.9)
    g.add_argument("--beta", type=float, default=0.5)
    g.add_argument("--eps", type=float, default=0.15)
    g.add_argument("--delta", type=float, default=0.05)
    g.add_argument("--instance-seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qevent", description="Sequential-measurement experiments.")
    parser.add_argument("--version", action="version", version=f"qevent {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("or-blended", help="Quantum OR with repeated blended measurements")
    _common(p), _instance_args(p)
    p.add_argument("--rounds", type=int, default=None, help="override the default of m rounds")

    p = sub.add_parser("or-random", help="Quantum OR with uniformly random measurements")
    _common(p), _instance_args(p)
    p.add_argument("--rounds", type=int, default=None)

    p = sub.add_parser("event-find", help="find a measurement that accepts with high probability")
    _common(p), _instance_args(p)
    p.add_argument("--mode", choices=["blended", "random"], default="blended")

    p = sub.add_parser("mean-estimate", help="estimate the average accept probability")
    _common(p), _instance_args(p)
    p.add_argument("--t", type=int, default=8, help="repeats per copy")
    p.add_argument("--k", type=int, default=1, help="copies per estimate")

    p = sub.add_parser("verify-bounds", help="check every inequality on random instances")
    _common(p, shots=0)
    p.add_argument("--profile", choices=sorted(PROFILES), default="default")
    p.add_argument("--count", type=int, default=None, help="instances per bound (overrides profile)")
    p.add_argument("--reports", help="write every check as JSON lines here")

    p = sub.add_parser("counterexample", help="run the two-dimensional first-accept instances")
    _common(p)
    p.add_argument("--kind", choices=["blended", "random"], default="blended")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--rounds", type=int, default=None)

    p = sub.add_parser("gen-instance", help="write a planted instance as JSON")
    p.add_argument("--output", "-o")
    p.add_argument("--case", choices=["one", "two", "mean-example"], required=True)
    for name, typ, default in [("--dim", int, 4), ("--m", int, 8), ("--p-down", float, 0.9),
                               ("--beta", float, 0.5), ("--eps", float, 0.15),
                               ("--delta", float, 0.05), ("--instance-seed", int, 0)]:
        p.add_argument(name, type=typ, default=default)
    return parser


# -- helpers ------------------------------------------------------------------


def _workers(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
        return args.threads
    return default_workers()


def _config(args) -> EngineConfig:
    if args.shots < 1:
        raise ConfigError("--shots: must be >= 1")
    return EngineConfig(rng_seed=args.seed, shots=args.shots, workers=_workers(args))


def _mean_example() -> OrInstance:
    ket_plus = np.array([1.0, 1.0]) / math.sqrt(2.0)
    ens = MeasurementEnsemble([np.diag([0.0, 1.0]), np.outer(ket_plus, ket_plus)], labels=["one", "plus"])
    return OrInstance(ens, DensityMatrix.pure([1.0, 0.0]), label="two-measurement qubit example")


def _planted(args) -> OrInstance:
    if args.case == "one":
        return plant_case_one(args.dim, args.m, args.p_down, args.beta, args.eps, args.instance_seed)
    if args.case == "two":
        return plant_case_two(args.dim, args.m, args.delta, args.instance_seed)
    return _mean_example()


def _load_instance(args) -> tuple[OrInstance, dict]:
    if args.instance:
        raw = load_json_source(args.instance)
        inst = instance_from_json(raw)
    elif args.case:
        inst = _planted(args)
    else:
        raise ConfigError("instance: give --instance PATH|JSON or --case one|two|mean-example")
    return inst, instance_to_json(inst)


def _emit(args, payload: dict) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_table(args, table: CurveTable) -> None:
    if args.csv:
        write_csv(table, args.csv)
    if args.figure:
        render_figure(table, args.figure)


def _or_curves(inst: OrInstance, rounds: int) -> CurveTable:
    ks = np.arange(rounds + 1)
    table = CurveTable(ks, title=inst.label or "")
    table.add("B_k", blended_accept_curve(inst.rho, inst.ens, ks))
    if inst.ens.is_projective:
        table.add("A_k", random_accept_curve(inst.rho, inst.ens, rounds))
    return table


def _instance_header(args, name: str, raw: dict, inst: OrInstance) -> dict:
    return {
        "protocol": name,
        "seed": args.seed,
        "shots": args.shots,
        "instance_hash": instance_hash(raw),
        "instance_label": inst.label,
        "case_tag": inst.case_tag,
        "p_down": inst.p_down,
        "p_up": inst.p_up,
        "m": inst.m,
    }


# -- subcommands ------------------------------------------------------------


def _cmd_or(args, random_mode: bool) -> int:
    inst, raw = _load_instance(args)
    cfg = _config(args)
    runner = run_or_random if random_mode else run_or_blended
    res = runner(inst, cfg, rounds=args.rounds)
    payload = _instance_header(args, res.protocol, raw, inst)
    body = res.to_dict()
    payload.update(body)
    payload["pass"] = bool(res.exact_within_bounds and res.empirical_within_bounds)
    _emit(args, payload)
    if args.csv or args.figure:
        _emit_table(args, _or_curves(inst, res.rounds))
    return EXIT_OK if payload["pass"] else EXIT_FAIL


def _cmd_event(args) -> int:
    inst, raw = _load_instance(args)
    cfg = _config(args)
    s = event_finding_batch(inst, args.mode, cfg)
    payload = _instance_header(args, f"event-find-{args.mode}", raw, inst)
    payload.update(s.to_dict())
    case_one = inst.p_down > 1.0 - inst.eps
    case_two = inst.case_tag == "two" or (inst.delta > 0 and inst.p_up <= inst.delta)
    checks = {}
    if case_one:
        checks["exact_accept_and_good_above_bound"] = s.exact_good >= s.lower_bound - 1e-9
        checks["empirical_accept_and_good_above_bound"] = s.good_rate >= s.lower_bound - 3.0 * s.sigma
    if case_two:
        sig = binomial_sigma(s.accept_rate, s.shots)
        checks["exact_accept_below_case_two_bound"] = s.exact_accept <= s.case_two_upper + 1e-9
        checks["empirical_accept_below_case_two_bound"] = s.accept_rate <= s.case_two_upper + 3.0 * sig
    payload["checks"] = {k: bool(v) for k, v in checks.items()}
    payload["pass"] = all(checks.values())
    _emit(args, payload)
    if args.csv or args.figure:
        _emit_table(args, _or_curves(inst, inst.m))
    return EXIT_OK if payload["pass"] else EXIT_FAIL


def _cmd_mean(args) -> int:
    inst, raw = _load_instance(args)
    if args.t < 1 or args.k < 1:
        raise ConfigError("--t/--k: must be >= 1")
    cfg = _config(args)
    counts = mean_estimation_batch(inst.rho, inst.ens, args.t, args.k, cfg)
    est = counts.sum(axis=1) / (args.t * args.k)
    target = float(np.real(np.trace(inst.ens.average_operator() @ inst.rho.mat)))
    mean = float(est.mean())
    stderr = float(est.std(ddof=1) / math.sqrt(est.size)) if est.size > 1 else float("inf")
    payload = _instance_header(args, "mean-estimate", raw, inst)
    payload.update({"t": args.t, "k": args.k, "target": target, "mean_estimate": mean,
                    "standard_error": stderr, "empirical_variance": float(est.var(ddof=1)) if est.size > 1 else None})
    checks = {"unbiased_within_4_standard_errors": abs(mean - target) <= 4.0 * stderr}
    if inst.rho.is_pure():
        vb = mean_estimation_variance(inst.rho, inst.ens, args.t)
        payload.update({"predicted_variance": vb.predicted / args.k, "sigma_sq_residual": vb.sigma_sq,
                        "sigma_sq_bound": vb.sigma_sq_bound, "eigenvalues": list(vb.eigenvalues)})
        checks["residual_below_bound"] = vb.sigma_sq <= vb.sigma_sq_bound + 1e-12
    payload["checks"] = {k: bool(v) for k, v in checks.items()}
    payload["pass"] = all(checks.values())
    _emit(args, payload)
    if args.csv or args.figure:
        xs = np.arange(args.t + 1)
        table = CurveTable(xs, title="accepts per copy", index_name="accepts")
        table.add("exact", count_distribution(inst.rho, inst.ens, args.t))
        table.add("empirical", np.bincount(counts[:, 0], minlength=args.t + 1) / counts.shape[0])
        _emit_table(args, table)
    return EXIT_OK if payload["pass"] else EXIT_FAIL


def _cmd_verify(args) -> int:
    prof = dict(PROFILES[args.profile])
    if args.count is not None:
        if args.count < 0:
            raise ConfigError("--count: must be >= 0")
        prof["count"] = args.count
    suite = random_instance_suite(count=prof["count"], seed=args.seed, d_range=prof["d_range"],
                                  m_range=prof["m_range"], k_range=prof["k_range"], workers=_workers(args),
                                  projective_only=prof["projective_only"])
    summary = suite.summary()
    summary["failing_seeds"] = [list(x) for x in summary["failing_seeds"]]
    summary["trace_from_blended_stated_constant_held"] = list(summary["trace_from_blended_stated_constant_held"])
    payload = {"protocol": "verify-bounds", "seed": args.seed, "profile": args.profile,
               "count": prof["count"], "summary": summary, "pass": summary["failed"] == 0}
    if args.reports:
        with open(args.reports, "w") as fh:
            fh.write(suite.to_jsonl())
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bound_id", "seed", "lhs", "rhs", "margin", "pass"])
            for r in suite.reports:
                w.writerow([r.bound_id.value, r.seed, repr(r.lhs), repr(r.rhs), repr(r.margin), int(r.passed)])
    _emit(args, payload)
    return EXIT_OK if payload["pass"] else EXIT_FAIL


def _cmd_counterexample(args) -> int:
    try:
        inst = (build_blended_counterexample(args.eps) if args.kind == "blended"
                else build_random_counterexample(args.eps))
    except ContractError as exc:
        raise ConfigError(f"--eps: {exc}") from exc
    cfg = _config(args)
    res = run_counterexample(inst, cfg, rounds=args.rounds)
    payload = {"protocol": f"counterexample-{args.kind}", "seed": args.seed, "shots": args.shots,
               "size_A": inst.size_a, "size_B": inst.size_b, "B_initial_weight": inst.b_weight()}
    payload.update(res.to_dict())
    checks = {"B_initial_weight_zero": abs(inst.b_weight()) <= 1e-12}
    if args.kind == "blended":
        lower = 1.0 - (1.0 - args.eps**3 / (1.0 + args.eps)) ** res.rounds
        payload["accept_lower_bound"] = lower
        checks["exact_accept_above_lower_bound"] = res.exact["accept"] >= lower - 1e-10
    payload["checks"] = {k: bool(v) for k, v in checks.items()}
    payload["pass"] = all(checks.values())
    _emit(args, payload)
    if args.csv or args.figure:
        cps = geometric_checkpoints(res.rounds)
        cum = first_accept_curve(inst.rho, inst.ens, cps, inst.kind)
        table = CurveTable(cps, title=f"{args.kind} first-accept curves, eps={args.eps}",
                           reference_lines={"1 - eps": 1.0 - args.eps})
        table.add("accept", cum.sum(axis=1))
        table.add("first_in_B", cum[:, 1])
        _emit_table(args, table)
    return EXIT_OK if payload["pass"] else EXIT_FAIL


def _cmd_gen(args) -> int:
    inst = _planted(args)
    raw = instance_to_json(inst)
    text = json.dumps(raw, sort_keys=True, indent=2) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


_COMMANDS = {
    "or-blended": lambda a: _cmd_or(a, False),
    "or-random": lambda a: _cmd_or(a, True),
    "event-find": _cmd_event,
    "mean-estimate": _cmd_mean,
    "verify-bounds": _cmd_verify,
    "counterexample": _cmd_counterexample,
    "gen-instance": _cmd_gen,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ContractError, ValueError) as exc:
        print(f"qevent {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
