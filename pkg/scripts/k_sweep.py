"""Average KL against the number of samples k at a fixed i-bound."""
from _common import base_parser, load_model, run_and_write, sampler_method

from smp.evaluation import SweepSpec


def main():
    p = base_parser(__doc__, "k_sweep")
    p.add_argument("--ks", default="32,128,512,2048,8192")
    p.add_argument("--i-bound", type=int, default=6)
    p.add_argument("--epsilon", type=float, default=2.0**-20)
    args = p.parse_args()
    ks = [int(k) for k in args.ks.split(",")]
    spec = SweepSpec(load_model(args), "k", ks, reps=args.reps, repr=args.repr,
                     method=sampler_method(args),
                     i_bound=args.i_bound, epsilon=args.epsilon)
    run_and_write(spec, "k", args.out, args.jobs)


if __name__ == "__main__":
    main()
