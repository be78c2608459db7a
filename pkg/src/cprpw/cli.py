"""Command-line entry point: ``cprpw <subcommand> [flags]``.

Exit codes: 0 success, 1 invalid usage or failed validation, 2 runtime or
data error (unreadable / malformed files, numerical failure).
"""
import argparse
import json
import sys

from .experiments import (
    ExperimentConfig,
    emit_traces,
    run_e2e_benchmark,
    run_gs_benchmark,
    write_e2e_records,
    write_gs_records,
)
from .finite import UnsupportedDimensionError, certify_cpr, example_matrix, read_matrix
from .gs import GsConfig, RankDeficiencyError, build_pinv
from .pipeline import ConfigError, PipelineConfig, config_echo, run_algorithm1, run_algorithm2
from .signal import read_signal

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p, seed_required=False):
    p.add_argument("--seed", type=int, required=seed_required)
    p.add_argument("--iters", type=int, default=900)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--threads", type=int, default=None, help="defaults to $CPR_THREADS or 1")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "structured-text"), default="csv")


def build_parser():
    parser = _Parser(prog="cprpw", description="Conjugate phase retrieval experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify-matrix", help="certify a real 2xM or 3xM matrix")
    p.add_argument("--matrix", required=True)

    for name in ("gs-bench", "emit-traces"):
        p = sub.add_parser(name, help="single-start Gerchberg-Saxton benchmark")
        p.add_argument("--matrix")
        p.add_argument("--trials", type=int, default=1000)
        p.add_argument("--classify", choices=("epsilon", "residual"), default="epsilon")
        _common(p, seed_required=True)

    p = sub.add_parser("e2e-bench", help="end-to-end reconstruction benchmark")
    p.add_argument("--matrix")
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--betas", type=int, default=20)
    p.add_argument("--restarts", type=int, default=100)
    _common(p, seed_required=True)

    p = sub.add_parser("reconstruct", help="reconstruct a signal from its own phaseless samples")
    p.add_argument("--signal", required=True)
    p.add_argument("--matrix")
    p.add_argument("--beta", type=float)
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--algorithm", type=int, choices=(1, 2), default=1)
    _common(p)
    p.set_defaults(seed=0)
    return parser


def _load_matrix(path):
    if path is None:
        return example_matrix()
    try:
        return read_matrix(path)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from None


def _require_cpr(V):
    try:
        ok = certify_cpr(V)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not ok:
        raise ConfigError("matrix does not do conjugate phase retrieval (certification failed)")


def _gs(args, restarts=1):
    return GsConfig(max_iterations=args.iters, tolerance=args.tol, restarts=restarts, rng_seed=args.seed or 0)


def cmd_verify_matrix(args, out):
    V = _load_matrix(args.matrix)
    try:
        ok = certify_cpr(V)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(f"matrix: {V.K} x {V.M}", file=out)
    print(f"CPR: {'yes' if ok else 'no'}", file=out)
    return EXIT_OK


def _gs_config(args, kind):
    V = _load_matrix(args.matrix)
    _require_cpr(V)
    build_pinv(V)
    cfg = ExperimentConfig(kind=kind, trials=args.trials, gs=_gs(args), seed=args.seed,
                           classify=args.classify, threads=args.threads, output=args.out)
    return V, cfg


def cmd_gs_bench(args, out):
    V, cfg = _gs_config(args, "gs-bench")
    summary = run_gs_benchmark(cfg, V)
    for line in summary.lines():
        print(line, file=out)
    if args.out:
        write_gs_records(args.out, summary)
    return EXIT_OK


def cmd_emit_traces(args, out):
    V, cfg = _gs_config(args, "emit-traces")
    if not args.out:
        raise UsageError("emit-traces needs --out")
    summary = emit_traces(cfg, args.out, V)
    for line in summary.lines():
        print(line, file=out)
    return EXIT_OK


def cmd_e2e_bench(args, out):
    V = _load_matrix(args.matrix)
    _require_cpr(V)
    pcfg = PipelineConfig(matrix=V, gs=_gs(args, args.restarts)).validate()
    cfg = ExperimentConfig(kind="e2e-bench", instances=args.instances, betas_per_instance=args.betas,
                           gs=pcfg.gs, pipeline=pcfg, seed=args.seed, threads=args.threads, output=args.out)
    summary = run_e2e_benchmark(cfg)
    for line in summary.lines():
        print(line, file=out)
    if args.out:
        write_e2e_records(args.out, summary)
    return EXIT_OK


def cmd_reconstruct(args, out):
    V = _load_matrix(args.matrix)
    _require_cpr(V)
    try:
        f = read_signal(args.signal)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from None
    lo = min(-10, int(f.n_min))
    hi = max(10, int(f.n_max))
    pcfg = PipelineConfig(matrix=V, gs=_gs(args, args.restarts), beta=args.beta, support=(lo, hi)).validate()
    if args.algorithm == 1:
        res = run_algorithm1(f, pcfg)
    else:
        res = run_algorithm2(f, config=pcfg)
    print(f"beta: {res.beta:.12g}", file=out)
    print(f"relative error: {res.relative_error:.6g}", file=out)
    print(f"max column residual: {res.max_column_residual:.6g}", file=out)
    if res.degenerate_overlap:
        print("warning: degenerate overlap detected", file=out)
    if args.out:
        if args.format == "csv":
            res.write_samples_csv(args.out)
        else:
            res.write_json(args.out, pcfg)
    return EXIT_OK


COMMANDS = {
    "verify-matrix": cmd_verify_matrix,
    "gs-bench": cmd_gs_bench,
    "emit-traces": cmd_emit_traces,
    "e2e-bench": cmd_e2e_bench,
    "reconstruct": cmd_reconstruct,
}


def main(argv=None, out=None):
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        for name in ("trials", "instances", "betas", "restarts", "iters"):
            if getattr(args, name, 1) is not None and getattr(args, name, 1) < 1:
                raise UsageError(f"--{name} must be positive")
        if getattr(args, "threads", None) is not None and args.threads < 1:
            raise UsageError("--threads must be positive")
        return COMMANDS[args.command](args, out)
    except (UsageError, ConfigError, UnsupportedDimensionError, RankDeficiencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
