"""Predictive Bhattacharyya of trained and compressed models on renewal N=4 data.

Prints one row per memory size with the quantum fit, the Baum-Welch fit, the
compressed quantum model and the entropy-preserving classical compression.
"""
import argparse
import json

from stochsim.experiments import _fig5_job


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--D", type=int, nargs="+", default=[4, 2])
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--train-len", type=int, default=10**4)
    p.add_argument("--pasts", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    print(f"{'D':>2} {'q-fit':>7} {'c-fit':>7} {'q-comp':>7} {'c-comp':>7}")
    for D in args.D:
        rows = _fig5_job(4, D, args.train_len, args.restarts, args.pasts, 10, 0, args.seed)
        b = {json.loads(r[1])["model"]: float(r[3]) for r in rows}
        print(f"{D:>2} {b['q-fit']:7.3f} {b['c-fit']:7.3f} {b['q-comp']:7.3f} {b['c-comp']:7.3f}")


if __name__ == "__main__":
    main()
