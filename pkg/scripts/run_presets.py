"""Run one or more experiment presets and write ``<outdir>/<preset>.csv``."""
import argparse
import sys
from pathlib import Path

from stochsim.experiments import PRESETS, SCALES, ExperimentConfig, run_experiment
from stochsim.io import read_sequences, write_results


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("presets", nargs="*", default=["fig2", "fig3", "fig4", "fig5"], choices=PRESETS)
    p.add_argument("--scale", choices=SCALES, default="desk")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int)
    p.add_argument("--outdir", default="results")
    p.add_argument("--data", help="sequence file for table1")
    args = p.parse_args(argv)

    data = read_sequences(args.data)[0].symbols.tolist() if args.data else None
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    failed = False
    for preset in args.presets:
        cfg = ExperimentConfig(preset, args.scale, args.seed, args.workers, data)
        rows, errors = run_experiment(cfg)
        write_results(rows, outdir / f"{preset}.csv")
        print(f"{preset}: {len(rows)} rows, {len(errors)} failed jobs")
        failed |= bool(errors)
    return 3 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
