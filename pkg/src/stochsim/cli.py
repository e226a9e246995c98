"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 numerical or convergence failure, 4 I/O.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import StochSimError
from .experiments import PRESETS, SCALES, ExperimentConfig, run_experiment
from .hmm import (
    TransitionTensor,
    compress_entropy_preserving,
    compress_spectral,
    sample_classical,
    similarity_decay_rate,
    summarize,
)
from .learning import PROJECT, STIEFEL, TrainingConfig, fit_classical, predictive_bhattacharyya, train_quantum
from .processes import gap_histogram, renewal_classical, renewal_quantum
from .quantum import (
    QuantumTensor,
    divergence_density,
    fidelity,
    memory_entropy,
    mps_compress,
    mps_normalize,
    optimal_compressed_initial_state,
    probability_tensor,
    sample_quantum,
    similarity_decay_rate_quantum,
    steady_coherent_state,
    steady_fidelity,
)
from .spectral import shannon_entropy

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
METRICS = ("fidelity", "divergence", "steady-fidelity", "bhattacharyya", "similarity", "entropy")


class UsageError(Exception):
    pass


class FormatError(OSError):
    pass


def _load(path):
    try:
        return io.load_model(path)
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: not a valid model file ({exc})") from exc


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _normalized(model) -> QuantumTensor:
    return model if model.normalized else mps_normalize(model)


def entropy_of(model) -> float:
    """Memory entropy in bits: von Neumann for quantum, Shannon of pi for classical."""
    if isinstance(model, QuantumTensor):
        return memory_entropy(_normalized(model))
    return shannon_entropy(summarize(model).pi)


# ---- subcommands ----


def cmd_model_build(a):
    if a.process != "renewal":
        raise UsageError(f"unknown process {a.process!r}")
    try:
        model = renewal_classical(a.N) if a.kind == "classical" else renewal_quantum(a.N)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(json.dumps(io.model_to_dict(model), indent=1) + "\n", a.out)


def cmd_compress(a):
    model = _load(a.inp)
    quantum = isinstance(model, QuantumTensor)
    if (a.method == "mps") != quantum:
        raise UsageError(f"method {a.method!r} does not apply to a {'quantum' if quantum else 'classical'} model")
    if not 1 <= a.dim <= model.D:
        raise UsageError(f"--dim must be in 1..{model.D}")
    report = {"method": a.method, "D": model.D, "dim": a.dim, "entropy_before": entropy_of(model)}
    if quantum:
        exact = _normalized(model)
        out = mps_compress(exact, a.dim)
        report["divergence"] = divergence_density(exact, out)
    else:
        out = compress_entropy_preserving(model, a.dim) if a.method == "entropy" else compress_spectral(model, a.dim)
    report["entropy_after"] = entropy_of(out)
    io.save_model(out, a.out)
    text = json.dumps(report, indent=1) + "\n"
    if a.report:
        Path(a.report).write_text(text)
    sys.stdout.write(text)


def _initial(model):
    if isinstance(model, TransitionTensor):
        return summarize(model).pi
    return steady_coherent_state(_normalized(model))


def cmd_sample(a):
    model = _load(a.inp)
    if a.len < 0 or a.count < 1:
        raise UsageError("--len must be >= 0 and --count >= 1")
    init = _initial(model)
    seqs = []
    for i in range(a.count):
        seed = [a.seed, i]
        if isinstance(model, TransitionTensor):
            seqs.append(sample_classical(model, init, a.len, seed=seed).symbols)
        else:
            seqs.append(sample_quantum(_normalized(model), init, a.len, seed=seed).symbols)
    if a.out:
        io.write_sequences(seqs, a.out)
    else:
        sys.stdout.write("".join(" ".join(map(str, s.tolist())) + "\n" for s in seqs))


def cmd_gap_hist(a):
    counts: dict[int, int] = {}
    for seq in io.read_sequences(a.inp):
        if seq.d > 2:
            raise UsageError("gap histograms need binary sequences")
        for g, n in gap_histogram(seq.symbols, d=2).items():
            counts[g] = counts.get(g, 0) + n
    total = sum(counts.values())
    lines = ["gap,count,frequency"]
    for g in range(max(counts, default=-1) + 1):
        n = counts.get(g, 0)
        lines.append(f"{g},{n},{io.format_value(n / total if total else 0.0)}")
    _emit("\n".join(lines) + "\n", a.out)


def _prob_tensor(model):
    if isinstance(model, QuantumTensor):
        return probability_tensor(_normalized(model).K)
    return model.T


def evaluate_metric(metric, exact, approx, L, pasts=100, past_len=200, seed=0) -> float:
    quantum = isinstance(exact, QuantumTensor) and isinstance(approx, QuantumTensor)
    if metric in ("fidelity", "divergence", "steady-fidelity") and not quantum:
        raise UsageError(f"metric {metric!r} needs two quantum models")
    if metric == "entropy":
        return entropy_of(approx)
    if metric == "bhattacharyya":
        if isinstance(exact, TransitionTensor):
            pi = summarize(exact).pi
            P = [sample_classical(exact, pi, past_len, seed=[seed, i]).symbols for i in range(pasts)]
        else:
            e = _normalized(exact)
            phi = steady_coherent_state(e)
            P = [sample_quantum(e, phi, past_len, seed=[seed, i]).symbols for i in range(pasts)]
        ex = exact if isinstance(exact, TransitionTensor) else _normalized(exact)
        ap = approx if isinstance(approx, TransitionTensor) else _normalized(approx)
        return predictive_bhattacharyya(ex, ap, P, L)
    if metric == "similarity":
        if quantum:
            return similarity_decay_rate_quantum(_normalized(exact), _normalized(approx))
        return similarity_decay_rate(_prob_tensor(exact), _prob_tensor(approx))
    A, B = _normalized(exact), _normalized(approx)
    if metric == "divergence":
        return divergence_density(A, B)
    if metric == "steady-fidelity":
        return steady_fidelity(A, B, L)
    sa = steady_coherent_state(A)
    sb = optimal_compressed_initial_state(A, B, sa)
    return fidelity(A, B, sa, sb, L)


def cmd_eval(a):
    exact = _load(a.exact)
    approx = _load(a.approx) if a.approx else exact
    if a.metric == "entropy":
        values = {"entropy_exact": entropy_of(exact)}
        if a.approx:
            values["entropy_approx"] = entropy_of(approx)
    else:
        if a.L < 0:
            raise UsageError("--L must be non-negative")
        values = {a.metric: evaluate_metric(a.metric, exact, approx, a.L, a.pasts, a.past_len, a.seed)}
    for k, v in values.items():
        sys.stdout.write(f"{k} {io.format_value(v)}\n")
    if a.results:
        params = {"exact": a.exact, "approx": a.approx, "L": a.L}
        io.write_results(io.results_rows("eval", params, values, a.seed), a.results, append=True)


def cmd_train(a):
    seqs = io.read_sequences(a.data)
    if len(seqs) > 1:
        sys.stderr.write(f"note: {a.data} holds {len(seqs)} sequences; training on the first\n")
    seq = seqs[0]
    if a.kind == "quantum":
        rule = STIEFEL if a.update == "stiefel" else PROJECT
        try:
            cfg = TrainingConfig(
                D=a.dim, update_rule=rule, learning_rate=a.lr, max_iters=a.max_iters, restarts=a.restarts, seed=a.seed
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        trace = train_quantum(seq, cfg)
        model = trace.model
        trace_dict = {"kind": "quantum", **trace.to_dict()}
    else:
        if a.dim < 1 or a.restarts < 1:
            raise UsageError("--dim and --restarts must be positive")
        res = fit_classical(seq, a.dim, restarts=a.restarts, seed=a.seed, d=seq.d, max_iter=a.max_iters)
        model = res.to_tensor()
        trace_dict = {"kind": "classical", "log_likelihoods": [float(v) for v in res.log_likelihoods]}
    model.meta.update({"trained_on": Path(a.data).name, "seed": a.seed})
    io.save_model(model, a.out)
    trace_dict["model"] = io.model_to_dict(model)
    trace_path = a.trace or str(Path(a.out).with_suffix(".trace.json"))
    Path(trace_path).write_text(json.dumps(trace_dict, indent=1) + "\n")


def cmd_ingest(a):
    try:
        symbols, labels = io.ingest_column(a.csv, a.column)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc.args[0]) if exc.args else str(exc)) from exc
    io.write_sequences([symbols], a.out)
    map_path = a.map or str(Path(a.out).with_suffix(".labels.json"))
    Path(map_path).write_text(json.dumps(labels, indent=1) + "\n")
    sys.stdout.write(f"{len(symbols)} symbols, d={len(labels)}\n")


def cmd_experiment(a):
    data = None
    if a.preset == "table1":
        if not a.data:
            raise UsageError("table1 needs --data (a sequence file, e.g. from `ingest`)")
        data = io.read_sequences(a.data)[0].symbols.tolist()
    cfg = ExperimentConfig(a.preset, a.scale, a.seed, a.workers, data)
    rows, errors = run_experiment(cfg)
    outdir = Path(a.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    io.write_results(rows, outdir / f"{a.preset}.csv")
    for exc in errors:
        sys.stderr.write(f"stage failed: {type(exc).__name__}: {exc}\n")
    if errors:
        return EXIT_NUMERIC
    return EXIT_OK


# ---- parser ----


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochsim", description="Classical and quantum simulators of stochastic processes.")
    sub = p.add_subparsers(dest="command", required=True)

    model = sub.add_parser("model", help="model construction")
    msub = model.add_subparsers(dest="model_command", required=True)
    b = msub.add_parser("build", help="build an analytic model")
    b.add_argument("--process", default="renewal")
    b.add_argument("--N", type=int, required=True)
    b.add_argument("--kind", choices=("classical", "quantum"), default="classical")
    b.add_argument("--out")
    b.set_defaults(func=cmd_model_build)

    c = sub.add_parser("compress", help="reduce the memory dimension")
    c.add_argument("--in", dest="inp", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--dim", type=int, required=True)
    c.add_argument("--method", choices=("mps", "entropy", "spectral"), required=True)
    c.add_argument("--report", help="also write the JSON report here")
    c.set_defaults(func=cmd_compress)

    s = sub.add_parser("sample", help="draw symbol sequences")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--len", type=int, required=True)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sample)

    g = sub.add_parser("gap-hist", help="histogram of zero-runs between ones")
    g.add_argument("--in", dest="inp", required=True)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gap_hist)

    e = sub.add_parser("eval", help="compare two models")
    e.add_argument("--exact", required=True)
    e.add_argument("--approx")
    e.add_argument("--metric", choices=METRICS, required=True)
    e.add_argument("--L", type=int, default=10)
    e.add_argument("--pasts", type=int, default=100)
    e.add_argument("--past-len", type=int, default=200)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--results", help="append rows to this CSV")
    e.set_defaults(func=cmd_eval)

    t = sub.add_parser("train", help="fit a model to a sequence file")
    t.add_argument("--data", required=True)
    t.add_argument("--kind", choices=("classical", "quantum"), default="quantum")
    t.add_argument("--dim", type=int, required=True)
    t.add_argument("--restarts", type=int, default=10)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--update", choices=("project", "stiefel"), default="stiefel")
    t.add_argument("--lr", type=float, default=0.5)
    t.add_argument("--max-iters", type=int, default=2000)
    t.add_argument("--out", required=True)
    t.add_argument("--trace")
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("ingest", help="turn a categorical CSV column into symbols")
    i.add_argument("--csv", required=True)
    i.add_argument("--column", required=True)
    i.add_argument("--out", required=True)
    i.add_argument("--map")
    i.set_defaults(func=cmd_ingest)

    x = sub.add_parser("experiment", help="run a preset pipeline")
    x.add_argument("--preset", choices=PRESETS, required=True)
    x.add_argument("--scale", choices=SCALES, default="desk")
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--outdir", default="results")
    x.add_argument("--workers", type=int)
    x.add_argument("--data", help="sequence file (table1)")
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args) or EXIT_OK
    except UsageError as exc:
        sys.stderr.write(f"stochsim: error: {exc}\n")
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"stochsim: I/O error: {exc}\n")
        return EXIT_IO
    except (StochSimError, np.linalg.LinAlgError, ValueError) as exc:
        sys.stderr.write(f"stochsim: numerical error: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
