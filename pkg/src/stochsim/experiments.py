"""Preset pipelines that regenerate the figure and table data as CSV rows.

Every preset expands into independent jobs.  Each job gets a seed derived
from the base seed and its position, returns result rows, and never shares
state, so the pool size cannot change the output.  Rows are sorted before
they are written.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .hmm import (
    compress_entropy_preserving,
    compress_spectral,
    sample_classical,
    similarity_decay_rate,
    summarize,
)
from .io import results_rows
from .learning import (
    TrainingConfig,
    default_initial_state,
    evaluate_predictive,
    fit_classical,
    predictive_bhattacharyya,
    train_quantum,
)
from .processes import gap_histogram, renewal_classical, renewal_quantum
from .quantum import (
    divergence_density,
    memory_entropy,
    mps_compress,
    sample_quantum,
    similarity_decay_rate_quantum,
    steady_coherent_state,
    truncated_spectrum_entropy,
)

PRESETS = ("fig2", "fig3", "fig4", "fig5", "table1")
SCALES = ("desk", "paper")


@dataclass
class ExperimentConfig:
    preset: str
    scale: str = "desk"
    seed: int = 0
    workers: int | None = None
    data: list | None = None  # symbol sequence for table1
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {PRESETS}")
        if self.scale not in SCALES:
            raise ValueError(f"unknown scale {self.scale!r}; choose from {SCALES}")


def worker_count(requested: int | None = None) -> int:
    """Pool size: explicit request, else ``STOCHSIM_THREADS``, else CPU count."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("STOCHSIM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _seed(base: int, *path: int) -> list[int]:
    return [int(base), *map(int, path)]


# ---- job bodies (module level so they pickle) ----


def _fig2_job(N: int, model: str, ticks: int, chunks: int, seed: int):
    K = renewal_quantum(N)
    if model == "compressed":
        K = mps_compress(K, N // 2)
    phi = steady_coherent_state(K)
    counts: dict[int, int] = {}
    per = ticks // chunks
    for c in range(chunks):
        seq = sample_quantum(K, phi, per, seed=_seed(seed, N, c))
        for g, n in gap_histogram(seq).items():
            counts[g] = counts.get(g, 0) + n
    total = sum(counts.values())
    rows = []
    for g in range(max(max(counts, default=0) + 1, N)):
        n = counts.get(g, 0)
        params = {"N": N, "model": model, "gap": g, "ticks": per * chunks}
        rows += results_rows("fig2", params, {"count": n, "frequency": n / total if total else 0.0}, seed)
    return rows


def _fig3_job(N: int, M: int, seed: int):
    K = renewal_quantum(N)
    Kc = mps_compress(K, M)
    metrics = {
        "entropy": memory_entropy(Kc),
        "truncated_entropy": truncated_spectrum_entropy(K, M),
        "divergence": divergence_density(K, Kc),
    }
    return results_rows("fig3", {"N": N, "M": M}, metrics, seed)


def _renewal_pasts(N: int, count: int, length: int, seed: int):
    T = renewal_classical(N)
    pi = summarize(T).pi
    return [sample_classical(T, pi, length, seed=_seed(seed, N, i)).symbols for i in range(count)]


def _fig4_job(N: int, M: int, pasts: int, past_len: int, future: int, seed: int):
    T = renewal_classical(N)
    K = renewal_quantum(N)
    P = _renewal_pasts(N, pasts, past_len, seed)
    models = {
        "quantum": mps_compress(K, M),
        "entropy": compress_entropy_preserving(T, M),
        "spectral": compress_spectral(T, M),
    }
    metrics = {}
    for name, m in models.items():
        b = predictive_bhattacharyya(T, m, P, future)
        metrics[f"bhattacharyya_{name}"] = b
        metrics[f"discrepancy_{name}"] = -np.log(b)
    metrics["similarity_quantum"] = similarity_decay_rate_quantum(K, models["quantum"])
    metrics["similarity_entropy"] = similarity_decay_rate(T, models["entropy"])
    metrics["similarity_spectral"] = similarity_decay_rate(T, models["spectral"])
    return results_rows("fig4", {"N": N, "M": M, "pasts": pasts, "future": future}, metrics, seed)


def _fig5_job(N: int, D: int, train_len: int, restarts: int, pasts: int, future: int, ticks: int, seed: int):
    T = renewal_classical(N)
    K = renewal_quantum(N)
    pi = summarize(T).pi
    data = sample_classical(T, pi, train_len, seed=_seed(seed, N, 999))
    P = _renewal_pasts(N, pasts, 200, seed)
    trace = train_quantum(data, TrainingConfig(D=D, restarts=restarts, seed=seed))
    bw = fit_classical(data, D, restarts=restarts, seed=seed).to_tensor()
    models = {
        "q-fit": trace.model,
        "c-fit": bw,
        "q-comp": mps_compress(K, D),
        "c-comp": compress_entropy_preserving(T, D),
    }
    rows = []
    for name, m in models.items():
        b = predictive_bhattacharyya(T, m, P, future)
        rows += results_rows("fig5", {"N": N, "D": D, "model": name}, {"bhattacharyya": b}, seed)
        if ticks:
            if name.startswith("q"):
                seq = sample_quantum(m, default_initial_state(m), ticks, seed=_seed(seed, D, 7))
            else:
                seq = sample_classical(m, summarize(m).pi, ticks, seed=_seed(seed, D, 7))
            hist = gap_histogram(seq)
            total = sum(hist.values())
            for g, n in hist.items():
                params = {"N": N, "D": D, "model": name, "gap": g}
                rows += results_rows("fig5-gaps", params, {"frequency": n / total}, seed)
    return rows


def _table1_job(data, D: int, restarts: int, future: int, seed: int):
    arr = np.asarray(data, dtype=np.int64)
    d = int(arr.max()) + 1
    train = past = arr[:-future]
    tail = arr[-future:]
    index = int(np.ravel_multi_index(tail, (d,) * future))
    q_vals, c_vals = [], []
    for r in range(restarts):
        tr = train_quantum(train, TrainingConfig(D=D, restarts=1, seed=seed + r), d=d)
        q_vals.append(evaluate_predictive(tr.model, past, future)[index])
        bw = fit_classical(train, D, restarts=1, seed=seed + r, d=d).to_tensor()
        c_vals.append(evaluate_predictive(bw, past, future)[index])
    rows = []
    for kind, vals in (("quantum", q_vals), ("classical", c_vals)):
        metrics = {"best": max(vals), "median": float(np.median(vals))}
        rows += results_rows("table1", {"D": D, "kind": kind, "restarts": restarts}, metrics, seed)
    return rows


# ---- preset expansion ----


def build_jobs(cfg: ExperimentConfig) -> list[tuple]:
    desk = cfg.scale == "desk"
    o = cfg.overrides
    s = cfg.seed
    if cfg.preset == "fig2":
        N = o.get("N", 32 if desk else 64)
        ticks = o.get("ticks", 10**6 if desk else 10**8)
        chunks = o.get("chunks", 10 if desk else 100)
        return [(_fig2_job, dict(N=N, model=m, ticks=ticks, chunks=chunks, seed=s)) for m in ("exact", "compressed")]
    if cfg.preset == "fig3":
        Ns = o.get("Ns", (8, 16, 32) if desk else (8, 16, 32, 64))
        return [(_fig3_job, dict(N=N, M=M, seed=s)) for N in Ns for M in range(2, N + 1)]
    if cfg.preset == "fig4":
        N = o.get("N", 16 if desk else 32)
        pasts = o.get("pasts", 100 if desk else 1000)
        return [
            (_fig4_job, dict(N=N, M=M, pasts=pasts, past_len=200, future=10, seed=s)) for M in range(2, N)
        ]
    if cfg.preset == "fig5":
        ticks = o.get("ticks", 10**6 if desk else 10**8)
        restarts = o.get("restarts", 10 if desk else 100)
        train_len = o.get("train_len", 10**4)
        pasts = o.get("pasts", 100)
        return [
            (_fig5_job, dict(N=4, D=D, train_len=train_len, restarts=restarts, pasts=pasts, future=10, ticks=ticks, seed=s))
            for D in o.get("Ds", (4, 2))
        ]
    if cfg.data is None:
        raise ValueError("table1 needs a symbol sequence (use --data)")
    Ds = o.get("Ds", (4, 8, 16) if desk else (16, 32, 64))
    restarts = o.get("restarts", 5 if desk else 100)
    return [(_table1_job, dict(data=list(cfg.data), D=D, restarts=restarts, future=10, seed=s)) for D in Ds]


def _orderable(v):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return (0, v, "")
    return (1, 0, json.dumps(v, sort_keys=True))


def row_sort_key(row):
    """Order rows by experiment, then numerically by parameter values, then metric."""
    params = json.loads(row[1])
    return (row[0], tuple((k, _orderable(v)) for k, v in sorted(params.items())), row[2])


def _run(job):
    fn, kwargs = job
    try:
        return fn(**kwargs), None
    except Exception as exc:  # recorded per row, reported by the caller
        params = {k: v for k, v in kwargs.items() if k not in ("data", "seed")}
        return results_rows(fn.__name__.strip("_").replace("_job", ""), params, {f"error:{type(exc).__name__}": float("nan")}, kwargs.get("seed")), exc


def run_experiment(cfg: ExperimentConfig) -> tuple[list[tuple], list[Exception]]:
    """Run every job of a preset; returns sorted rows and any job errors."""
    jobs = build_jobs(cfg)
    n = min(worker_count(cfg.workers), len(jobs))
    if n <= 1:
        results = [_run(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_run, jobs))
    rows = sorted((r for rs, _ in results for r in rs), key=row_sort_key)
    errors = [e for _, e in results if e is not None]
    return rows, errors
