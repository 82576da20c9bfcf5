"""Command-line interface: parse, validate, sample, infer, exact, sweep.

Exit codes: 0 success, 1 usage or input error, 2 inference error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .cluster_graph import (
    DEFAULT_WIDTH_CAP,
    JoinGraphParams,
    build_join_graph,
    build_junction_tree,
    validate_running_intersection,
)
from .engine import EngineConfig, ReprKind, run_algorithm_1
from .errors import ContractError, ParseError, SMPError
from .evaluation import AXES, SweepSpec, generate_ising, lower_envelope, sweep, write_csv
from .exact import exact_marginals
from .formats import format_marginals
from .sampling import SamplerConfig, generate_samples, load_samples
from .uai import apply_evidence, parse_evidence, parse_uai

EXIT_OK, EXIT_USAGE, EXIT_INFERENCE = 0, 1, 2


class UsageError(Exception):
    pass


def _read(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def _load_model(args):
    try:
        model = parse_uai(_read(args.model))
        if getattr(args, "evidence", None):
            model = apply_evidence(model, parse_evidence(_read(args.evidence)))
    except (ParseError, ContractError) as exc:
        raise UsageError(f"{args.model}: {exc}") from None
    return model


def _emit(text, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _positive_float_list(text, cast=float):
    try:
        return [cast(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}")


def _int_list(text):
    return _positive_float_list(text, int)


# --------------------------------------------------------------------------
# subcommands


def cmd_parse(args):
    model = _load_model(args)
    arities = [len(f.scope) for f in model.factors]
    lines = [
        f"variables {model.n}",
        f"factors {len(model.factors)}",
        f"max_cardinality {max(model.cards)}",
        f"max_arity {max(arities, default=0)}",
        f"zero_fraction {model.zero_fraction():.6f}",
    ]
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def cmd_validate(args):
    model = _load_model(args)
    if args.junction_tree:
        g = build_junction_tree(model, args.width_cap)
    else:
        g = build_join_graph(model, JoinGraphParams(args.i_bound, not args.full_labels))
    problems = validate_running_intersection(g)
    if args.dump:
        Path(args.dump).write_text(g.dump())
    _emit("\n".join(problems) + "\n" if problems else "OK\n", args.output)
    return EXIT_OK


def cmd_sample(args):
    model = _load_model(args)
    cfg = SamplerConfig(args.method, args.k, args.seed, args.burn_in, args.thinning)
    _emit(generate_samples(model, cfg).dumps(), args.output)
    return EXIT_OK


def cmd_infer(args):
    model = _load_model(args)
    if args.lossless and (args.k is not None or args.samples):
        raise UsageError("--lossless cannot be combined with --k or --samples")
    if args.k is not None and args.samples:
        raise UsageError("--k and --samples are mutually exclusive")
    sampler, samples = None, None
    if args.k is not None:
        sampler = SamplerConfig(args.method, args.k, args.seed)
    elif args.samples:
        try:
            samples = load_samples(_read(args.samples), model.cards)
        except (ValueError, ContractError) as exc:
            raise UsageError(f"{args.samples}: {exc}") from None
    config = EngineConfig(
        epsilon=args.epsilon, schedule=args.schedule, max_iterations=args.max_iters,
        tolerance=args.tolerance, damping=args.damping, time_limit_ms=args.time_limit_ms,
    )
    graph = build_junction_tree(model, args.width_cap) if args.junction_tree else None
    res = run_algorithm_1(model, JoinGraphParams(args.i_bound), sampler, config,
                          args.repr, graph=graph, samples=samples)
    meta = dict(res.metadata)
    work = meta.pop("work")
    meta.pop("starved", None)
    meta["i_bound"] = "jt" if args.junction_tree else args.i_bound
    if not args.timing:
        meta["wall_ms"] = 0
    meta.update({f"work_{k}": v for k, v in work.items()})
    _emit(format_marginals(res.marginals, res.flags, meta), args.output)
    return EXIT_INFERENCE if all(res.flags) and model.n else EXIT_OK


def cmd_exact(args):
    model = _load_model(args)
    res = exact_marginals(model, args.width_cap)
    if not res.defined:
        print("error: the model has partition function 0; marginals undefined", file=sys.stderr)
        _emit(format_marginals(res.marginals, header={"log_z": "-inf"}), args.output)
        return EXIT_INFERENCE
    header = {"log_z": repr(res.log_z), "width": res.width}
    _emit(format_marginals(res.marginals, header=header), args.output)
    return EXIT_OK


def cmd_sweep(args):
    if bool(args.model) == bool(args.ising):
        raise UsageError("give exactly one of --model or --ising")
    if args.model:
        model = _load_model(args)
    else:
        try:
            rows, cols = (int(x) for x in args.ising.lower().split("x"))
        except ValueError:
            raise UsageError(f"--ising expects ROWSxCOLS, got {args.ising!r}") from None
        model = generate_ising(rows, cols, (-args.coupling, args.coupling), seed=args.model_seed)
    cast = {"k": int, "epsilon": float, "ibound": int, "time": int}[args.axis]
    values = [cast(v) for v in args.values]
    try:
        spec = SweepSpec(
            model, args.axis, values, reps=args.reps, repr=args.repr, i_bound=args.i_bound,
            k=args.k, epsilon=args.epsilon, schedule=args.schedule, method=args.method,
            seed=args.seed, max_iterations=args.max_iters, tolerance=args.tolerance,
        )
    except ContractError as exc:
        raise UsageError(str(exc)) from None
    records = sweep(spec, jobs=args.jobs)
    _emit(write_csv(records, args.axis, timing=args.timing), args.output)
    if args.envelope:
        Path(args.envelope).write_text(lower_envelope(records))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _common(p, evidence=True):
    p.add_argument("--model", required=True, help="model file in UAI MARKOV format")
    if evidence:
        p.add_argument("--evidence", help="evidence file (count, then variable/value pairs)")
    p.add_argument("--output", "-o", help="output path (default: stdout)")


def _engine_flags(p, repr_default="dense", eps_default=0.0, eps_label="0"):
    p.add_argument("--repr", choices=[r.value for r in ReprKind], default=repr_default,
                   help=f"function representation (default: {repr_default})")
    p.add_argument("--i-bound", type=int, default=6, help="max variables per cluster (default: 6)")
    p.add_argument("--epsilon", type=float, default=eps_default,
                   help=f"quantization threshold (default: {eps_label})")
    p.add_argument("--schedule", choices=["sum_product", "belief_update"], default="sum_product",
                   help="message-passing schedule (default: sum_product)")
    p.add_argument("--method", choices=["gibbs", "importance"], default="gibbs",
                   help="sampler used when --k is given (default: gibbs)")
    p.add_argument("--seed", type=int, default=0, help="sampler seed (default: 0)")
    p.add_argument("--max-iters", type=int, default=100, help="propagation round limit (default: 100)")
    p.add_argument("--tolerance", type=float, default=1e-6,
                   help="convergence threshold on max message change (default: 1e-6)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="smp", description="Sampling-based structured message passing for Markov networks."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("parse", help="read a model and print a summary")
    _common(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("validate", help="build a cluster graph and check running intersection")
    _common(p)
    p.add_argument("--i-bound", type=int, default=6, help="max variables per cluster (default: 6)")
    p.add_argument("--full-labels", action="store_true",
                   help="keep full-intersection edge labels instead of minimizing them")
    p.add_argument("--junction-tree", action="store_true", help="check the junction tree instead")
    p.add_argument("--width-cap", type=int, default=DEFAULT_WIDTH_CAP,
                   help="max induced width for junction trees (default: $SMP_WIDTH_CAP or 20)")
    p.add_argument("--dump", help="also write the graph listing to this path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sample", help="draw samples, one assignment per line")
    _common(p)
    p.add_argument("--method", choices=["gibbs", "importance"], default="gibbs",
                   help="sampling method (default: gibbs)")
    p.add_argument("--k", type=int, required=True, help="number of samples")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--burn-in", type=int, default=100, help="Gibbs burn-in sweeps (default: 100)")
    p.add_argument("--thinning", type=int, default=2, help="keep every n-th Gibbs sweep (default: 2)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("infer", help="approximate marginals by sampled-support message passing")
    _common(p)
    _engine_flags(p)
    p.add_argument("--k", type=int, help="number of samples inducing the supports")
    p.add_argument("--samples", help="read the sample set from a file instead of sampling")
    p.add_argument("--lossless", action="store_true",
                   help="full supports, no sampling (the default when neither --k nor --samples)")
    p.add_argument("--damping", type=float, default=0.0, help="message damping in [0, 1) (default: 0)")
    p.add_argument("--time-limit-ms", type=int, help="stop propagation after this many milliseconds")
    p.add_argument("--junction-tree", action="store_true", help="run on the junction tree")
    p.add_argument("--width-cap", type=int, default=DEFAULT_WIDTH_CAP,
                   help="max induced width for junction trees (default: $SMP_WIDTH_CAP or 20)")
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock time (output is then not reproducible)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("exact", help="exact marginals by junction-tree calibration")
    _common(p)
    p.add_argument("--width-cap", type=int, default=DEFAULT_WIDTH_CAP,
                   help="max induced width (default: $SMP_WIDTH_CAP or 20)")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("sweep", help="repeat inference over one parameter axis, write CSV")
    p.add_argument("--model", help="model file in UAI MARKOV format")
    p.add_argument("--evidence", help="evidence file for --model")
    p.add_argument("--ising", metavar="RxC", help="generate a grid Ising model instead of --model")
    p.add_argument("--coupling", type=float, default=1.0,
                   help="Ising couplings drawn from [-c, c] (default: 1.0)")
    p.add_argument("--model-seed", type=int, default=0, help="seed of the generated model (default: 0)")
    p.add_argument("--output", "-o", help="CSV output path (default: stdout)")
    p.add_argument("--axis", choices=AXES, required=True, help="parameter to vary")
    p.add_argument("--values", type=_positive_float_list, required=True,
                   help="comma-separated axis values")
    p.add_argument("--reps", type=int, default=10, help="repetitions per point (default: 10)")
    _engine_flags(p, "sparse", 2.0**-20, "2^-20")
    p.add_argument("--k", type=int, default=1024, help="samples per run (default: 1024)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes (default: 1)")
    p.add_argument("--envelope", help="also write the per-point best-configuration CSV here")
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock time (output is then not reproducible)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SMPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFERENCE


if __name__ == "__main__":
    sys.exit(main())
