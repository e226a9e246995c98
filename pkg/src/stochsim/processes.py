"""Discrete renewal process of period N, in classical and quantum form.

The 1-based label ``k = 1..N`` (number of zeros since the last one,
plus one) maps to memory index ``k - 1``.
"""
from collections import Counter

import numpy as np

from .errors import DomainError
from .hmm import SymbolSequence, TransitionTensor


def _check_period(N):
    if int(N) != N or N < 2:
        raise ValueError(f"renewal period must be an integer >= 2, got {N!r}")
    return int(N)


def renewal_classical(N: int) -> TransitionTensor:
    N = _check_period(N)
    T = np.zeros((2, N, N))
    for k in range(1, N + 1):
        if k < N:
            T[0, k, k - 1] = (N - k) / (N + 1 - k)
        T[1, 0, k - 1] = 1.0 / (N + 1 - k)
    return TransitionTensor(T, {"process": "renewal", "N": N})


def renewal_quantum(N: int):
    """Analytic normalized Kraus operators of the renewal clock."""
    from .quantum import QuantumTensor

    N = _check_period(N)
    K = np.zeros((2, N, N), dtype=complex)
    K[0, np.arange(1, N), np.arange(N - 1)] = 1.0
    K[1, :, N - 1] = 1.0 / np.sqrt(N)
    return QuantumTensor(K, normalized=True, meta={"process": "renewal", "N": N})


def gap_histogram(seq, d: int | None = None) -> dict[int, int]:
    """Counts of zero-runs between consecutive ones.

    Zeros before the first one and after the last one are ignored.
    """
    if isinstance(seq, SymbolSequence):
        d = seq.d if d is None else d
    symbols = np.asarray(seq, dtype=np.int64).ravel()
    if d is None:
        d = 2
    if d != 2:
        raise DomainError("gap histograms need a binary alphabet")
    if symbols.size and (symbols.min() < 0 or symbols.max() > 1):
        raise DomainError("symbols must be 0 or 1")
    ones = np.flatnonzero(symbols == 1)
    gaps = np.diff(ones) - 1
    return dict(sorted(Counter(gaps.tolist()).items()))
