"""Average KL against the i-bound at fixed k, over several model seeds.

Larger clusters cut the bias of the cluster-graph approximation but spread
the same samples over more variables, so the curve need not fall monotonically.
"""
import sys
from pathlib import Path

from _common import base_parser, load_model, run_and_write, sampler_method

from smp.evaluation import SweepSpec


def main():
    p = base_parser(__doc__, "ibound_sweep")
    p.add_argument("--i-bounds", default="2,4,6,8")
    p.add_argument("--k", type=int, default=512)
    p.add_argument("--epsilon", type=float, default=2.0**-20)
    p.add_argument("--models", type=int, default=5, help="model seeds 0..N-1 (default: 5)")
    args = p.parse_args()
    bounds = [int(b) for b in args.i_bounds.split(",")]
    out = Path(args.out)
    for seed in range(args.models):
        print(f"model seed {seed}", file=sys.stderr)
        spec = SweepSpec(load_model(args, seed), "ibound", bounds, reps=args.reps,
                         repr=args.repr, method=sampler_method(args),
                         k=args.k, epsilon=args.epsilon)
        run_and_write(spec, "ibound", out.with_name(f"{out.stem}_m{seed}{out.suffix}"), args.jobs)


if __name__ == "__main__":
    main()
