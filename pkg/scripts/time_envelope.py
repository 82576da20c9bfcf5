"""Anytime behaviour: average KL under wall-clock budgets, best configuration per budget.

Crosses each time limit with a grid of (i-bound, k) settings and also writes
the lower envelope.  Timings depend on the machine, so rows are not reproducible.
"""
from pathlib import Path

from _common import base_parser, load_model, run_and_write, sampler_method

from smp.evaluation import SweepSpec, lower_envelope


def main():
    p = base_parser(__doc__, "time_sweep")
    p.add_argument("--budgets-ms", default="250,1000,4000")
    p.add_argument("--i-bounds", default="2,4,6")
    p.add_argument("--ks", default="128,1024")
    p.add_argument("--epsilon", type=float, default=2.0**-20)
    args = p.parse_args()
    grid = {"i_bound": [int(b) for b in args.i_bounds.split(",")],
            "k": [int(k) for k in args.ks.split(",")]}
    budgets = [int(b) for b in args.budgets_ms.split(",")]
    spec = SweepSpec(load_model(args), "time", budgets, reps=args.reps, repr=args.repr,
                     method=sampler_method(args),
                     epsilon=args.epsilon, grid=grid)
    records = run_and_write(spec, "time", args.out, args.jobs, timing=True)
    env = Path(args.out).with_name(Path(args.out).stem + "_envelope.csv")
    env.write_text(lower_envelope(records))


if __name__ == "__main__":
    main()
