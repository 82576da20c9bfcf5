"""Average KL against the quantization threshold epsilon at fixed k and i-bound."""
from _common import base_parser, load_model, run_and_write, sampler_method

from smp.evaluation import SweepSpec


def main():
    p = base_parser(__doc__, "epsilon_sweep")
    p.add_argument("--log2-eps", default="-20,-16,-12,-8,-6,-4,-2",
                   help="exponents e, epsilon = 2^e")
    p.add_argument("--k", type=int, default=1024)
    p.add_argument("--i-bound", type=int, default=6)
    args = p.parse_args()
    eps = [2.0 ** int(e) for e in args.log2_eps.split(",")]
    spec = SweepSpec(load_model(args), "epsilon", eps, reps=args.reps, repr=args.repr,
                     method=sampler_method(args),
                     i_bound=args.i_bound, k=args.k)
    run_and_write(spec, "epsilon", args.out, args.jobs)


if __name__ == "__main__":
    main()
