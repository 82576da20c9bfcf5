"""Shared plumbing for the experiment scripts: model choice, output, progress."""
import argparse
import sys
import time
from pathlib import Path

from smp.evaluation import generate_deterministic, generate_ising, summarize, sweep, write_csv
from smp.uai import parse_uai


def base_parser(description, out_name):
    p = argparse.ArgumentParser(description=description)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--model", help="UAI model file (default: generated Ising grid)")
    src.add_argument("--deterministic", type=int, metavar="N",
                     help="generated model with N variables and hard constraints")
    p.add_argument("--grid", type=int, default=10, help="Ising grid side (default: 10)")
    p.add_argument("--coupling", type=float, default=1.0, help="Ising coupling range (default: 1.0)")
    p.add_argument("--model-seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--repr", default="dense", choices=["dense", "sparse", "add"])
    p.add_argument("--method", choices=["gibbs", "importance"],
                   help="sampler (default: importance for --deterministic, else gibbs)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=f"results/{out_name}.csv")
    return p


def load_model(args, seed=None):
    seed = args.model_seed if seed is None else seed
    if args.model:
        return parse_uai(Path(args.model).read_text())
    if args.deterministic:
        return generate_deterministic(args.deterministic, 1.0, seed)[0]
    return generate_ising(args.grid, args.grid, (-args.coupling, args.coupling), seed=seed)


def sampler_method(args):
    return args.method or ("importance" if args.deterministic else "gibbs")


def run_and_write(spec, axis, out, jobs=1, timing=False):
    start = time.perf_counter()
    records = sweep(spec, jobs=jobs)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(write_csv(records, axis, timing=timing))
    for (_, value), _, mean, sd in summarize(records):
        print(f"{axis}={value:<12g} avg_kl {mean:.4g} +- {sd:.2g}", file=sys.stderr)
    print(f"wrote {out} ({time.perf_counter() - start:.0f}s)", file=sys.stderr)
    return records
