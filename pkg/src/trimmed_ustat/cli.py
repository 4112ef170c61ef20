"""Command-line front end.

Subcommands: ``estimate``, ``population``, ``simulate-limit``, ``verify``
and ``identities``. Exit status is 0 on success, 1 on a runtime failure
(including failed verification thresholds) and 2 on invalid input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from ._validation import ConfigurationError, DegenerateTrimError
from .empirical import TrimSpec, enumerate_values, trim_counts, trimmed_l, trimmed_u, u_statistic
from .experiment import ExperimentConfig, convergence_study, evaluate_thresholds
from .identities import FAULTS, check_identities
from .kernels import KERNEL_NAMES, MODEL_NAMES, SeedSpec, builtin_kernel, builtin_model
from .limit_law import LimitParams, sample_limit
from .population import population_summary

EXIT_OK, EXIT_FAILURE, EXIT_INVALID = 0, 1, 2


class InputError(ValueError):
    pass


def read_sample_csv(path) -> list[float]:
    """One real per row, optionally preceded by a single header line."""
    values = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 1:
                raise InputError(f"line {lineno}: expected one value, got {len(row)}")
            try:
                values.append(float(row[0]))
            except ValueError:
                if lineno == 1:
                    continue
                raise InputError(f"line {lineno}: cannot parse {row[0]!r} as a number") from None
    return values


def _parse_param(text):
    key, sep, val = text.partition("=")
    if not sep:
        raise InputError(f"model parameter {text!r} must look like key=value")
    for cast in (int, float):
        try:
            return key, cast(val)
        except ValueError:
            pass
    return key, val


def _kernel(args):
    return builtin_kernel(args.kernel, args.m if args.kernel == "max_m" else None)


def _model(args):
    return builtin_model(args.model, **dict(_parse_param(p) for p in args.model_param))


def _trim(args):
    return TrimSpec(args.alpha, args.beta)


def cmd_estimate(args):
    kernel, trim = _kernel(args), _trim(args)
    x = read_sample_csv(args.data)
    if len(x) < kernel.arity:
        raise InputError(f"need at least {kernel.arity} rows for kernel {kernel.name!r}, got {len(x)}")
    vals = enumerate_values(x, kernel)
    c = trim_counts(vals, trim, check=False)
    try:
        u_trim = trimmed_u(vals, trim)
    except DegenerateTrimError:
        u_trim = None
    return {
        "n": vals.n,
        "m": vals.m,
        "N": vals.N,
        "u": u_statistic(vals),
        "u_trimmed": u_trim,
        "l_trimmed": trimmed_l(vals, trim),
        "n_alpha": c.n_alpha,
        "n_beta": c.n_beta,
        "nbar_alpha": c.nbar_alpha,
        "nbar_beta": c.nbar_beta,
    }, EXIT_OK


def cmd_population(args):
    calibration = None
    if args.calibration_size:
        calibration = {"size": args.calibration_size, "seed": SeedSpec(args.seed, 3)}
    summary = population_summary(
        _model(args), _kernel(args), _trim(args), method=args.method,
        k_outer=args.k_outer, k_inner=args.k_inner, seed=SeedSpec(args.seed, 1),
        calibration=calibration,
    )
    return summary.to_dict(), EXIT_OK


def cmd_simulate_limit(args):
    summary = population_summary(_model(args), _kernel(args), _trim(args), method="analytic")
    w = sample_limit(LimitParams.from_summary(summary), args.count, SeedSpec(args.seed, 2))
    return {"theta": summary.theta, "delta_alpha": summary.delta_alpha,
            "delta_beta": summary.delta_beta, "samples": w.tolist()}, EXIT_OK


def load_config(ref: str) -> dict:
    """Read a config from a path, or by name from the bundled configs."""
    p = Path(ref)
    if p.exists():
        text = p.read_text()
    else:
        try:
            text = resources.files("trimmed_ustat.configs").joinpath(p.name).read_text()
        except FileNotFoundError:
            raise InputError(f"config {ref!r} not found") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"config {ref!r} is not valid JSON: {exc}") from None


def cmd_verify(args):
    raw = load_config(args.config)
    if args.seed_given:
        raw["seed"] = {"root_seed": args.seed, "stream_id": 0}
    config = ExperimentConfig.from_dict(raw)
    report = convergence_study(config, n_jobs=args.threads)
    failures = evaluate_thresholds(report, config.thresholds)
    out = report.to_dict()
    out["failures"] = failures
    out["passed"] = not failures
    if args.dump_draws:
        with open(args.dump_draws, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "rep", "t_u", "t_l", "rem_alpha", "rem_beta"])
            for d in report.draws:
                w.writerow([d.n, d.rep, repr(d.t_u), repr(d.t_l), repr(d.rem_alpha), repr(d.rem_beta)])
    return out, EXIT_OK if not failures else EXIT_FAILURE


def cmd_identities(args):
    report = check_identities(args.seed, args.trials, args.inject_fault)
    return report, EXIT_OK if report["passed"] else EXIT_FAILURE


def _to_csv(payload) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if "samples" in payload:
        w.writerow(["w"])
        for v in payload["samples"]:
            w.writerow([repr(v)])
        return buf.getvalue()
    flat = {k: v for k, v in payload.items() if not isinstance(v, (dict, list))}
    w.writerow(list(flat))
    w.writerow(["" if v is None else v for v in flat.values()])
    return buf.getvalue()


def _emit(payload, args):
    if args.format == "csv":
        text = _to_csv(payload)
    else:
        if not args.no_timestamp:
            payload = {**payload, "timestamp": datetime.now(timezone.utc).isoformat()}
        text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="root seed (unsigned 64-bit)")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--no-timestamp", action="store_true")

    def stat_args(p, with_model=True):
        if with_model:
            p.add_argument("--model", choices=MODEL_NAMES, required=True)
            p.add_argument("--model-param", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--kernel", choices=KERNEL_NAMES, required=True)
        p.add_argument("--m", type=int, default=2, help="arity of max_m")
        p.add_argument("--alpha", required=True)
        p.add_argument("--beta", required=True)

    parser = argparse.ArgumentParser(prog="trimmed-ustat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common], help="U, U_ab and L_ab of a CSV sample")
    p.add_argument("data")
    stat_args(p, with_model=False)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("population", parents=[common], help="theta, brackets and covariance")
    stat_args(p)
    p.add_argument("--method", choices=("analytic", "monte-carlo"), default="analytic")
    p.add_argument("--k-outer", type=int, default=10**5)
    p.add_argument("--k-inner", type=int, default=10**3)
    p.add_argument("--calibration-size", type=int, default=None)
    p.set_defaults(func=cmd_population)

    p = sub.add_parser("simulate-limit", parents=[common], help="draws from the limit law")
    stat_args(p)
    p.add_argument("--count", type=int, default=10**5)
    p.set_defaults(func=cmd_simulate_limit)

    p = sub.add_parser("verify", parents=[common], help="run a convergence study from a JSON config")
    p.add_argument("config", help="path, or name of a bundled config (uniform-max2.json, piecewise-max2.json)")
    p.add_argument("--dump-draws", help="CSV file for per-replication draws")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("identities", parents=[common], help="randomised exact-identity checks")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--inject-fault", choices=FAULTS, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_identities)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    try:
        payload, code = args.func(args)
    except (InputError, ConfigurationError, DegenerateTrimError, ValueError, KeyError, TypeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": msg}) + "\n")
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return EXIT_FAILURE
    _emit(payload, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
