"""Edge-emitting hidden Markov models.

A model is a tensor ``T[x, a, b] = P(x_t = x, s_t = a | s_{t-1} = b)``;
columns over ``(x, a)`` sum to one.  Memory states are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegeneracyError, DomainError, ImpossibleSequenceError, ShapeError, SizeError
from .spectral import (
    DENSE_MAX,
    TRANSPOSE_ON_RIGHT,
    TransferMap,
    _default_hint,
    apply_map,
    dominant_eigenpair,
    krylov_dominant_eigenvalue,
)

UNIFILAR_TOL = 1e-12
STOCHASTIC_TOL = 1e-9
ENUMERATION_LIMIT = 10**7


@dataclass
class TransitionTensor:
    T: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        T = np.array(self.T, dtype=float)
        if T.ndim != 3 or T.shape[1] != T.shape[2]:
            raise ShapeError(f"transition tensor must be (d, D, D), got {T.shape}")
        if T.min() < -1e-12:
            raise DomainError("transition tensor has negative entries")
        T[T < 0] = 0.0
        cols = T.sum(axis=(0, 1))
        if np.max(np.abs(cols - 1.0)) > STOCHASTIC_TOL:
            raise DomainError(f"columns do not sum to one (worst {cols[np.argmax(np.abs(cols - 1))]!r})")
        self.T = T

    @property
    def d(self) -> int:
        return self.T.shape[0]

    @property
    def D(self) -> int:
        return self.T.shape[1]

    @classmethod
    def from_factors(cls, J, E, **meta) -> "TransitionTensor":
        """Factorized model ``T^x_{ab} = J_{ab} E^x_b``."""
        J = np.asarray(J, dtype=float)
        E = np.asarray(E, dtype=float)
        return cls(J[None, :, :] * E[:, None, :], dict(meta))


@dataclass
class ClassicalSummary:
    J: np.ndarray
    E: np.ndarray
    pi: np.ndarray
    unifilar: bool


@dataclass
class SymbolSequence:
    symbols: np.ndarray
    d: int

    def __post_init__(self):
        self.symbols = np.asarray(self.symbols, dtype=np.int64).ravel()
        if self.symbols.size and (self.symbols.min() < 0 or self.symbols.max() >= self.d):
            raise DomainError(f"symbols must lie in 0..{self.d - 1}")

    def __len__(self):
        return self.symbols.size

    def __iter__(self):
        return iter(self.symbols.tolist())

    def __array__(self, dtype=None, copy=None):
        return self.symbols if dtype is None else self.symbols.astype(dtype)


def as_symbols(seq, d: int) -> np.ndarray:
    """Validated int64 array of symbols in ``0..d-1``."""
    if isinstance(seq, SymbolSequence):
        arr = seq.symbols
    else:
        arr = np.asarray(seq, dtype=np.int64).ravel()
    if arr.size and (arr.min() < 0 or arr.max() >= d):
        raise DomainError(f"symbol out of range for alphabet size {d}")
    return arr


def _tensor(T) -> np.ndarray:
    return T.T if isinstance(T, TransitionTensor) else np.asarray(T)


def steady_state(J: np.ndarray, gap_tol: float = 1e-9) -> np.ndarray:
    """Stationary distribution of a column-stochastic matrix."""
    w, V = np.linalg.eig(J)
    order = np.argsort(-np.abs(w), kind="stable")
    if len(w) > 1 and abs(w[order[1]]) > 1.0 - gap_tol:
        raise DegeneracyError(f"steady state is not unique (|lambda_2| = {abs(w[order[1]]):.12f})")
    v = np.real(V[:, order[0]])
    v = v / v.sum()
    v[v < 0] = 0.0
    return v / v.sum()


def is_unifilar(T, tol: float = UNIFILAR_TOL) -> bool:
    T = _tensor(T)
    return bool(np.all((T > tol).sum(axis=1) <= 1))


def summarize(T: TransitionTensor) -> ClassicalSummary:
    A = _tensor(T)
    J = A.sum(axis=0)
    E = A.sum(axis=1)
    return ClassicalSummary(J=J, E=E, pi=steady_state(J), unifilar=is_unifilar(A))


def sequence_probability(T: TransitionTensor, p_init, seq) -> float:
    A = _tensor(T)
    p = np.asarray(p_init, dtype=float)
    if p.shape != (A.shape[1],):
        raise ShapeError(f"initial distribution must have length {A.shape[1]}")
    for x in as_symbols(seq, A.shape[0]):
        p = A[x] @ p
    return float(p.sum())


def conditional_initial(T: TransitionTensor, past, p0=None) -> np.ndarray:
    """Memory distribution given an observed past (Bayes filtering)."""
    A = _tensor(T)
    D = A.shape[1]
    p = np.full(D, 1.0 / D) if p0 is None else np.asarray(p0, dtype=float)
    for t, x in enumerate(as_symbols(past, A.shape[0])):
        p = A[x] @ p
        s = p.sum()
        if not s > 0.0:
            raise ImpossibleSequenceError(f"past has zero probability (symbol index {t})", index=t)
        p = p / s
    return p


def sample_classical(T: TransitionTensor, p_init, L: int, seed=None) -> SymbolSequence:
    A = _tensor(T)
    d, D, _ = A.shape
    if L < 0:
        raise ValueError("L must be non-negative")
    rng = np.random.default_rng(seed)
    uniforms = rng.random(L + 1)
    cols = np.ascontiguousarray(A.transpose(2, 0, 1).reshape(D, d * D))
    cdf_cols = np.cumsum(cols, axis=1)
    cdf_init = np.cumsum(np.asarray(p_init, dtype=float))
    out = _kernels.sample_classical(cdf_init, cdf_cols, D, uniforms)
    return SymbolSequence(out, d)


def compress_entropy_preserving(T: TransitionTensor, D_new: int) -> TransitionTensor:
    """Encode/decode compression that keeps the renormalized top of ``pi``.

    Memory states are relabelled by decreasing stationary weight first; the
    permutation is stored in ``meta["permutation"]``.
    """
    A = _tensor(T)
    D = A.shape[1]
    if not 1 <= D_new <= D:
        raise ValueError(f"target dimension must be in 1..{D}, got {D_new}")
    pi = steady_state(A.sum(axis=0))
    order = np.argsort(-pi, kind="stable")
    pi = pi[order]
    A = A[:, order][:, :, order]
    lam = pi[:D_new].sum()
    if not lam > 0.0:
        raise DegeneracyError("retained stationary weight is zero")
    pi_new = pi[:D_new] / lam

    R = np.zeros((D, D_new))
    R[np.arange(D_new), np.arange(D_new)] = lam
    R[D_new:, :] = pi[D_new:, None]
    C = np.zeros((D_new, D))
    C[np.arange(D_new), np.arange(D_new)] = 1.0
    # Bayes rule R[a, a'] pi'[a'] / pi[a]; for discarded states this is pi'[a'].
    C[:, D_new:] = pi_new[:, None]

    T_new = np.einsum("ia,xab,bj->xij", C, A, R)
    meta = {"permutation": order.tolist(), "pi_compressed": pi_new.tolist(), "method": "entropy"}
    return TransitionTensor(T_new, meta)


def compress_spectral(T: TransitionTensor, D_new: int) -> TransitionTensor:
    """Spectral compression through the SVD of ``F = J diag(pi)``."""
    A = _tensor(T)
    d, D, _ = A.shape
    if not 1 <= D_new <= D:
        raise ValueError(f"target dimension must be in 1..{D}, got {D_new}")
    J = A.sum(axis=0)
    E = A.sum(axis=1)
    pi = steady_state(J)
    U, s, Vt = np.linalg.svd(J * pi[None, :])
    Q = s[:, None] * Vt
    B = np.einsum("xg,ag,gb->xab", E, Q[:D_new], U[:, :D_new])
    B[B <= 0] = 0.0
    norms = B.sum(axis=(0, 1))
    out = np.empty_like(B)
    for b in range(D_new):
        out[:, :, b] = B[:, :, b] / norms[b] if norms[b] != 0 else 1.0 / (d * D_new)
    return TransitionTensor(out, {"method": "spectral"})


@dataclass
class BaumWelchResult:
    J: np.ndarray
    E: np.ndarray
    initial: np.ndarray
    log_likelihoods: list
    reseeded: bool = False

    def to_tensor(self) -> TransitionTensor:
        return TransitionTensor.from_factors(self.J, self.E, method="baum-welch")

    @property
    def log_likelihood(self) -> float:
        return self.log_likelihoods[-1]


def baum_welch(
    seq,
    D: int,
    d: int | None = None,
    init=None,
    seed=None,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> BaumWelchResult:
    """Fit a factorized model ``T^x_{ab} = J_{ab} E^x_b`` by scaled EM.

    ``log_likelihoods`` holds ``log P(seq)`` (natural log, so larger is
    better) before every update plus one entry for the returned parameters.
    """
    seq = np.asarray(seq, dtype=np.int64).ravel()
    if seq.size == 0:
        raise ValueError("sequence must be nonempty")
    if D < 1:
        raise ValueError("D must be positive")
    d = int(seq.max()) + 1 if d is None else d
    seq = as_symbols(seq, d)
    rng = np.random.default_rng(seed)
    if init is None:
        J = rng.random((D, D))
        E = rng.random((d, D))
        J /= J.sum(axis=0)
        E /= E.sum(axis=0)
    else:
        J, E = (np.array(a, dtype=float) for a in init)
    p0 = np.full(D, 1.0 / D)

    trace = []
    reseeded = False
    for _ in range(max_iter):
        ll, Jn, En, p0n, occ, occ_t = _kernels.baum_welch_step(J, E, p0, seq)
        trace.append(float(ll))
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol:
            break
        for i in range(D):
            if occ_t[i] > 1e-300:
                J[:, i] = Jn[:, i] / occ_t[i]
            else:
                J[:, i] = 1.0 / D
                reseeded = True
            if occ[i] > 1e-300:
                E[:, i] = En[:, i] / occ[i]
            else:
                E[:, i] = 1.0 / d
                reseeded = True
        p0 = p0n / p0n.sum()
    else:
        trace.append(float(_kernels.baum_welch_step(J, E, p0, seq)[0]))
    return BaumWelchResult(J, E, p0, trace, reseeded)


def sequence_log_likelihood(T: TransitionTensor, seq, p_init=None) -> float:
    """Natural-log likelihood with per-step normalization (no underflow)."""
    A = _tensor(T)
    D = A.shape[1]
    p = np.full(D, 1.0 / D) if p_init is None else np.asarray(p_init, dtype=float)
    total = 0.0
    for t, x in enumerate(as_symbols(seq, A.shape[0])):
        p = A[x] @ p
        s = p.sum()
        if not s > 0:
            raise ImpossibleSequenceError(f"zero probability at index {t}", index=t)
        total += np.log(s)
        p /= s
    return float(total)


def all_sequence_probabilities(T, p_init, L: int) -> np.ndarray:
    """Probabilities of all ``d**L`` strings, first symbol most significant."""
    A = _tensor(T)
    d = A.shape[0]
    if d**L > ENUMERATION_LIMIT:
        raise SizeError(f"{d}**{L} strings exceed the enumeration limit {ENUMERATION_LIMIT}")
    vecs = np.asarray(p_init, dtype=A.dtype)[None, :]
    for _ in range(L):
        vecs = np.einsum("xab,nb->nxa", A, vecs).reshape(-1, A.shape[1])
    return vecs.sum(axis=1)


def bhattacharyya_exhaustive(T, T_bar, p, p_bar, L: int) -> float:
    P = all_sequence_probabilities(T, p, L)
    Q = all_sequence_probabilities(T_bar, p_bar, L)
    return float(np.sqrt(np.clip(P, 0, None) * np.clip(Q, 0, None)).sum())


def similarity_eigenvalue(T, T_bar) -> float:
    """``|lambda|`` of the dominant eigenvalue of ``Y -> sum_x T^x Y T_bar^xT``.

    Accepts any tensors with matching alphabets, including the complex
    probability tensors of quantum models.
    """
    tmap = TransferMap(_tensor(T), _tensor(T_bar), TRANSPOSE_ON_RIGHT)
    if tmap.size <= DENSE_MAX:
        return abs(dominant_eigenpair(tmap).eigenvalue)
    # power iteration mixes too slowly on these maps; use Arnoldi
    shape = tmap.operator_shape
    v0 = _default_hint(shape).ravel()
    return abs(krylov_dominant_eigenvalue(lambda v: apply_map(tmap, v.reshape(shape)).ravel(), v0))


def similarity_decay_rate(T, T_bar) -> float:
    """Asymptotic decay rate (nats/step) of the cosine similarity of the two laws."""
    cross = similarity_eigenvalue(T, T_bar)
    self_a = similarity_eigenvalue(T, T)
    self_b = similarity_eigenvalue(T_bar, T_bar)
    return float(-np.log(cross / np.sqrt(self_a * self_b)))
