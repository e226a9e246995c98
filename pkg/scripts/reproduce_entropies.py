"""Memory entropies of the renewal clock: exact, compressed to half memory, and truncated spectrum."""
import argparse

from stochsim.processes import renewal_quantum
from stochsim.quantum import divergence_density, memory_entropy, mps_compress, truncated_spectrum_entropy


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--N", type=int, nargs="+", default=[8, 16, 32, 64])
    args = p.parse_args(argv)
    print(f"{'N':>4} {'exact':>8} {'compressed':>11} {'truncated':>10} {'divergence':>11}")
    for N in args.N:
        K = renewal_quantum(N)
        C = mps_compress(K, N // 2)
        print(
            f"{N:>4} {memory_entropy(K):8.4f} {memory_entropy(C):11.4f} "
            f"{truncated_spectrum_entropy(K, N // 2):10.4f} {divergence_density(K, C):11.3e}"
        )


if __name__ == "__main__":
    main()
