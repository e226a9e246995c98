"""Matrix-product quantum simulators of stochastic processes.

A simulator is a complex tensor ``K[x]`` of shape ``(d, D, D)``.  When it is
normalized, ``sum_x K[x]^† K[x] = I`` and the outcome law of a pure memory
state ``phi`` is ``P(x_1..x_L) = ||K[x_L] ... K[x_1] phi||^2``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import (
    CompressionError,
    DegeneracyError,
    DomainError,
    ImpossibleSequenceError,
    ShapeError,
    SizeError,
)
from .hmm import (
    ENUMERATION_LIMIT,
    SymbolSequence,
    TransitionTensor,
    as_symbols,
    is_unifilar,
    sequence_probability,
    similarity_eigenvalue,
    steady_state,
)
from .spectral import (
    ADJOINT_MAP,
    ADJOINT_ON_RIGHT,
    TransferMap,
    _entropy_of_spectrum,
    apply_map,
    DENSE_MAX,
    dominant_eigenpair,
    krylov_dominant_eigenvalue,
    psd_sqrt_and_inverse,
    trace_norm,
    von_neumann_entropy,
)

KRAUS_TOL = 1e-9


def kraus_defect(K) -> float:
    K = _arr(K)
    return float(np.linalg.norm(np.einsum("xji,xjk->ik", K.conj(), K) - np.eye(K.shape[1])))


@dataclass
class QuantumTensor:
    K: np.ndarray
    normalized: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        K = np.array(self.K, dtype=complex)
        if K.ndim != 3 or K.shape[1] != K.shape[2]:
            raise ShapeError(f"quantum tensor must be (d, D, D), got {K.shape}")
        self.K = K
        if self.normalized and "support_rank" not in self.meta:
            defect = kraus_defect(K)
            if defect > KRAUS_TOL:
                raise DomainError(f"Kraus identity violated by {defect:.3g}")

    @property
    def d(self) -> int:
        return self.K.shape[0]

    @property
    def D(self) -> int:
        return self.K.shape[1]


def _arr(K) -> np.ndarray:
    if isinstance(K, QuantumTensor):
        return K.K
    return np.asarray(K)


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    n = np.linalg.norm(v)
    if n == 0:
        raise DomainError("memory state is the zero vector")
    return v / n


def from_unifilar(T: TransitionTensor) -> QuantumTensor:
    """Elementwise square root of a unifilar transition tensor."""
    A = T.T if isinstance(T, TransitionTensor) else np.asarray(T, dtype=float)
    if not is_unifilar(A):
        raise DomainError(
            "transition tensor is not unifilar: the square-root simulator only "
            "reproduces the classical law when each (symbol, state) has one successor"
        )
    return QuantumTensor(np.sqrt(A), normalized=False, meta={"source": "unifilar"})


def _normalize(A, gauge="eigen", rank_tol=1e-12):
    A = _arr(A).astype(complex)
    if gauge not in ("eigen", "hermitian"):
        raise ValueError(f"unknown gauge {gauge!r}")
    res = dominant_eigenpair(TransferMap(A, A, ADJOINT_MAP))
    mu = res.eigenvalue
    if not (abs(mu) > 0 and mu.real > 0):
        raise DomainError(f"dominant eigenvalue {mu!r} of the dual map is not positive")
    mu = mu.real
    G = res.right_eigenoperator
    W, W_pinv, rank = psd_sqrt_and_inverse((G + G.conj().T) / 2, rank_tol, hermitian=gauge == "hermitian")
    B = W[None] @ A @ W_pinv[None] / np.sqrt(mu)
    meta = {"mu": float(mu)}
    if rank < A.shape[1]:
        meta["support_rank"] = rank
    elif kraus_defect(B) > 1e-12:
        # ill-conditioned W: a second pass on B has a near-identity Gram operator
        res = dominant_eigenpair(TransferMap(B, B, ADJOINT_MAP))
        G2 = res.right_eigenoperator
        W2, W2_pinv, rank2 = psd_sqrt_and_inverse((G2 + G2.conj().T) / 2, rank_tol, hermitian=True)
        if rank2 == rank:
            mu2 = res.eigenvalue.real
            B = W2[None] @ B @ W2_pinv[None] / np.sqrt(mu2)
            W, mu = W2 @ W, mu * mu2
            meta["mu"] = float(mu)
    return QuantumTensor(B, normalized=True, meta=meta), W, mu


def mps_normalize(A, gauge: str = "eigen", rank_tol: float = 1e-12) -> QuantumTensor:
    """Turn a tensor into normalized Kraus operators by a similarity transform.

    ``G`` is the dominant eigenoperator of ``Y -> sum_x A^x† Y A^x``.
    ``gauge="eigen"`` uses ``W = s^{1/2} U†`` from ``G = U s U†``;
    ``gauge="hermitian"`` uses the positive root ``U s^{1/2} U†``, which
    leaves already-normalized tensors untouched.  A rank-deficient ``G`` is
    handled through its pseudo-inverse and recorded in ``meta["support_rank"]``.
    """
    return _normalize(A, gauge, rank_tol)[0]


def steady_state_quantum(K) -> np.ndarray:
    """Hermitian, trace-one fixed point of ``rho -> sum_x K^x rho K^x†``."""
    K = _arr(K)
    D = K.shape[1]
    res = dominant_eigenpair(TransferMap(K, K, ADJOINT_ON_RIGHT))
    if res.degenerate:
        raise DegeneracyError("the channel has more than one steady state")
    rho = res.right_eigenoperator
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


def memory_entropy(K) -> float:
    return von_neumann_entropy(steady_state_quantum(K))


def truncated_spectrum_entropy(K, keep: int) -> float:
    """Entropy of the ``keep`` largest steady-state eigenvalues, renormalized."""
    K = _arr(K)
    if not 1 <= keep <= K.shape[1]:
        raise ValueError(f"keep must be in 1..{K.shape[1]}")
    lam = np.sort(np.clip(np.linalg.eigvalsh(steady_state_quantum(K)), 0, None))[::-1][:keep]
    return _entropy_of_spectrum(lam / lam.sum())


def _sorted_eigh(rho, degen_tol=1e-9):
    lam, U = np.linalg.eigh(rho)
    order = np.argsort(-lam, kind="stable")
    lam, U = lam[order], U[:, order]
    # inside a degenerate eigenspace pick the basis grown from computational vectors
    start = 0
    for i in range(1, len(lam) + 1):
        if i == len(lam) or lam[start] - lam[i] > degen_tol:
            if i - start > 1:
                V = U[:, start:i]
                Q = scipy.linalg.qr(V @ V.conj().T, pivoting=True)[0]
                U[:, start:i] = Q[:, : i - start]
            start = i
    # deterministic eigenvector phases: largest component real positive
    idx = np.argmax(np.abs(U), axis=0)
    ph = U[idx, np.arange(U.shape[1])]
    U = U * (np.abs(ph) / ph)[None, :]
    return np.clip(lam, 0, None), U


def steady_coherent_state(K) -> np.ndarray:
    """Pure memory state ``sum_i sqrt(l_i) |l_i>`` from the steady state spectrum."""
    lam, U = _sorted_eigh(steady_state_quantum(K))
    return _unit(U @ np.sqrt(lam))


def mps_compress(A, D_new: int) -> QuantumTensor:
    """Truncate to the ``D_new`` dominant steady-state directions, then renormalize."""
    A = _arr(A)
    D = A.shape[1]
    if not 1 <= D_new <= D:
        raise ValueError(f"target dimension must be in 1..{D}, got {D_new}")
    _, W = _sorted_eigh(steady_state_quantum(A))
    B = (W.conj().T[None] @ A @ W[None])[:, :D_new, :D_new]
    if not np.any(np.abs(B) > 0):
        raise CompressionError("truncated tensor vanishes")
    try:
        out = mps_normalize(B)
    except DomainError as exc:
        raise CompressionError(f"truncated map has no usable dominant eigenvalue: {exc}") from exc
    out.meta["method"] = "mps"
    return out


def sequence_probability_quantum(K, phi, seq) -> float:
    K = _arr(K)
    psi = np.asarray(phi, dtype=complex)
    for x in as_symbols(seq, K.shape[0]):
        psi = K[x] @ psi
    return float(np.vdot(psi, psi).real)


def all_sequence_probabilities_quantum(K, phi, L: int) -> np.ndarray:
    """Probabilities of all ``d**L`` strings, first symbol most significant."""
    K = _arr(K)
    d, D, _ = K.shape
    if d**L > ENUMERATION_LIMIT:
        raise SizeError(f"{d}**{L} strings exceed the enumeration limit {ENUMERATION_LIMIT}")
    psi = np.asarray(phi, dtype=complex)[None, :]
    for _ in range(L):
        psi = np.einsum("xab,nb->nxa", K, psi).reshape(-1, D)
    return np.einsum("na,na->n", psi.conj(), psi).real


def _kernel_dtype(K):
    return K.real.copy() if np.all(K.imag == 0) else K.copy()


def sample_quantum(K, phi, L: int, seed=None) -> SymbolSequence:
    """Sequential measurement sampling with seeded uniforms."""
    K = _arr(K)
    if L < 0:
        raise ValueError("L must be non-negative")
    rng = np.random.default_rng(seed)
    uniforms = rng.random(L)
    Kk = _kernel_dtype(K)
    phi = _unit(phi)
    phi = phi.real.copy() if Kk.dtype.kind == "f" and np.all(phi.imag == 0) else phi
    if phi.dtype != Kk.dtype:
        Kk = Kk.astype(complex)
        phi = phi.astype(complex)
    out, done = _kernels.sample_quantum(np.ascontiguousarray(Kk), phi, uniforms)
    if done < L:
        raise ImpossibleSequenceError(f"all branch probabilities vanished at step {done}", index=done)
    return SymbolSequence(out, K.shape[0])


def fidelity_curve(A, B, sigma_A, sigma_B, L_max: int) -> np.ndarray:
    """Fidelities for ``L = 0..L_max`` from iterating the mixed transfer map."""
    A, B = _arr(A), _arr(B)
    tmap = TransferMap(A, B, ADJOINT_ON_RIGHT)
    Y = np.outer(_unit(sigma_A), _unit(sigma_B).conj())
    out = [trace_norm(Y)]
    for _ in range(L_max):
        Y = apply_map(tmap, Y)
        out.append(trace_norm(Y))
    return np.array(out)


def fidelity(A, B, sigma_A, sigma_B, L: int) -> float:
    """Uhlmann fidelity of the outcome states of two simulators after L steps."""
    return float(fidelity_curve(A, B, sigma_A, sigma_B, L)[-1])


def divergence_eigenvalue(A, B) -> complex:
    return dominant_eigenpair(TransferMap(_arr(A), _arr(B), ADJOINT_ON_RIGHT)).eigenvalue


def divergence_density(A, B) -> float:
    """Asymptotic fidelity decay rate ``-log|lambda_AB|`` in nats per symbol."""
    return float(-np.log(abs(divergence_eigenvalue(A, B))))


def optimal_compressed_initial_state(A, B, sigma_A) -> np.ndarray:
    """Memory state of ``B`` maximizing the asymptotic overlap with ``(A, sigma_A)``."""
    res = dominant_eigenpair(TransferMap(_arr(A), _arr(B), ADJOINT_ON_RIGHT), want_left=True)
    v = res.left_eigenoperator.conj().T @ np.asarray(sigma_A, dtype=complex)
    if np.linalg.norm(v) < 1e-14:
        raise DegeneracyError("left eigenoperator annihilates the initial state")
    return _unit(v)


def purification(rho) -> np.ndarray:
    """Purification ``sum_i sqrt(l_i) |l_i>|i>`` as a ``(D, D)`` amplitude matrix."""
    lam, U = _sorted_eigh(rho)
    return U * np.sqrt(lam)[None, :]


def steady_fidelity_curve(A, B, L_max: int) -> np.ndarray:
    A, B = _arr(A), _arr(B)
    pa = purification(steady_state_quantum(A)).ravel()
    pb = purification(steady_state_quantum(B)).ravel()
    ext_a = np.stack([np.kron(a, np.eye(A.shape[1])) for a in A])
    ext_b = np.stack([np.kron(b, np.eye(B.shape[1])) for b in B])
    tmap = TransferMap(ext_a, ext_b, ADJOINT_ON_RIGHT)
    Y = np.outer(pa, pb.conj())
    out = [trace_norm(Y)]
    for _ in range(L_max):
        Y = apply_map(tmap, Y)
        out.append(trace_norm(Y))
    return np.array(out)


def steady_fidelity(A, B, L: int) -> float:
    """Fidelity when both simulators start from (purified) steady states."""
    return float(steady_fidelity_curve(A, B, L)[-1])


@dataclass
class AccuracyReport:
    fidelity_at_L: dict
    divergence_density: float
    steady_fidelity_at_L: dict | None = None
    degenerate_spectrum: bool = False


def accuracy_report(A, B, sigma_A, sigma_B, Ls, steady: bool = False) -> AccuracyReport:
    Ls = sorted(set(int(L) for L in Ls))
    curve = fidelity_curve(A, B, sigma_A, sigma_B, Ls[-1])
    res = dominant_eigenpair(TransferMap(_arr(A), _arr(B), ADJOINT_ON_RIGHT))
    sf = None
    if steady:
        sc = steady_fidelity_curve(A, B, Ls[-1])
        sf = {L: float(sc[L]) for L in Ls}
    return AccuracyReport(
        fidelity_at_L={L: float(curve[L]) for L in Ls},
        divergence_density=float(-np.log(abs(res.eigenvalue))),
        steady_fidelity_at_L=sf,
        degenerate_spectrum=res.degenerate,
    )


def probability_tensor(K) -> np.ndarray:
    """Tensor ``K^x ⊗ conj(K^x)`` that propagates ``vec(rho)`` linearly."""
    K = _arr(K)
    return np.stack([np.kron(k, k.conj()) for k in K])


def similarity_eigenvalue_quantum(A, B) -> float:
    """``|lambda|`` of the similarity map built from the probability tensors of A and B.

    The map ``Y -> sum_x (A^x (x) conj A^x) Y (B^x (x) conj B^x)^T`` is regrouped
    as the completely positive map ``Z -> sum_x C^x Z C^x†`` with
    ``C^x = A^x (x) B^x`` and applied factor by factor, which costs
    ``O(D^5)`` per application instead of ``O(D^6)``.
    """
    A, B = _arr(A).astype(complex), _arr(B).astype(complex)
    d, Da, _ = A.shape
    Db = B.shape[1]
    if (Da * Db) ** 2 <= DENSE_MAX**2:
        return similarity_eigenvalue(probability_tensor(A), probability_tensor(B))
    Ac, Bc = A.conj(), B.conj()

    def matvec(v):
        Z = np.asarray(v).reshape(Da, Db, Da, Db)
        out = np.zeros_like(Z)
        for x in range(d):
            W = np.tensordot(A[x], Z, axes=(1, 0))
            W = np.tensordot(B[x], W, axes=(1, 1)).transpose(1, 0, 2, 3)
            W = np.tensordot(W, Ac[x], axes=(2, 1)).transpose(0, 1, 3, 2)
            out += np.tensordot(W, Bc[x], axes=(3, 1))
        return out.ravel()

    n = Da * Db
    rng = np.random.default_rng(12345)
    v0 = np.eye(n).ravel() + 1e-3 * rng.standard_normal(n * n)
    return abs(krylov_dominant_eigenvalue(matvec, v0))


def similarity_decay_rate_quantum(A, B) -> float:
    """Cosine-similarity decay rate (nats/step) of the outcome laws of two quantum simulators."""
    cross = similarity_eigenvalue_quantum(A, B)
    self_a = similarity_eigenvalue_quantum(A, A)
    self_b = similarity_eigenvalue_quantum(B, B)
    return float(-np.log(cross / np.sqrt(self_a * self_b)))


@dataclass
class EquivalenceReport:
    max_deviation: float
    sequences_checked: int
    mu: float | None = None


def nonnormalized_equivalence_check(A_raw, sigma_A, L: int) -> EquivalenceReport:
    """Compare a raw simulator with a left operator against its normalized form.

    With ``B = W A W^{-1} / sqrt(mu)`` and ``sigma_B ∝ W sigma_A``, the raw law
    ``||O_l A^{x_l}..A^{x_1} sigma_A||^2`` with
    ``O_l = mu^{-l/2} W / ||W sigma_A||`` must match ``B`` for every length ``l``.
    """
    A = _arr(A_raw).astype(complex)
    norm_res, W, mu = _normalize(A)
    if "support_rank" in norm_res.meta:
        raise DomainError("Gram factor is singular")
    sigma_A = np.asarray(sigma_A, dtype=complex)
    w_sigma = W @ sigma_A
    scale = np.linalg.norm(w_sigma)
    if scale == 0:
        raise DomainError("W annihilates the initial state")
    sigma_B = w_sigma / scale
    worst, count = 0.0, 0
    for l in range(L + 1):
        O = mu ** (-l / 2) * W / scale
        raw = np.asarray(sigma_A)[None, :]
        for _ in range(l):
            raw = np.einsum("xab,nb->nxa", A, raw).reshape(-1, A.shape[1])
        pa = np.einsum("ab,nb->na", O, raw)
        pa = np.einsum("na,na->n", pa.conj(), pa).real
        pb = all_sequence_probabilities_quantum(norm_res.K, sigma_B, l)
        worst = max(worst, float(np.max(np.abs(pa - pb))))
        count += pa.size
    return EquivalenceReport(worst, count, float(mu))


def _mpdo_probability(T: np.ndarray, rho0: np.ndarray, seq) -> float:
    """Trace of the iterated classical channel applied through its Kraus form."""
    d, D, _ = T.shape
    rho = rho0
    for x in seq:
        new = np.zeros_like(rho)
        for a, b in zip(*np.nonzero(T[x])):
            M = np.zeros((D, D))
            M[a, b] = np.sqrt(T[x, a, b])
            new += M @ rho @ M.T
        rho = new
    return float(np.trace(rho).real)


def nonunifilar_probability_check(T, L: int, p_init=None) -> EquivalenceReport:
    """Check that the density-operator simulator reproduces the classical law."""
    A = T.T if isinstance(T, TransitionTensor) else np.asarray(T, dtype=float)
    d, D, _ = A.shape
    if sum(d**l for l in range(L + 1)) > ENUMERATION_LIMIT:
        raise SizeError("enumeration limit exceeded")
    p = steady_state(A.sum(axis=0)) if p_init is None else np.asarray(p_init, dtype=float)
    rho0 = np.diag(p)
    worst, count = 0.0, 0
    for l in range(L + 1):
        for seq in itertools.product(range(d), repeat=l):
            q = _mpdo_probability(A, rho0, seq)
            c = sequence_probability(A, p, seq)
            worst = max(worst, abs(q - c))
            count += 1
    return EquivalenceReport(worst, count)
