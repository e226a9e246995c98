"""Maximum-likelihood fitting of quantum simulators, plus the classical baseline.

The cost is ``L(K) = -log ||K[x_L] ... K[x_1] phi||^2`` (natural log), always
accumulated from per-step norms.  Gradients are Wirtinger derivatives with
respect to ``conj(K)``, so ``-G`` is the steepest-descent direction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError, ImpossibleSequenceError, SizeError, TrainingError
from .hmm import (
    ENUMERATION_LIMIT,
    BaumWelchResult,
    SymbolSequence,
    TransitionTensor,
    all_sequence_probabilities,
    as_symbols,
    baum_welch,
    conditional_initial,
)
from .quantum import (
    QuantumTensor,
    _arr,
    _unit,
    all_sequence_probabilities_quantum,
    mps_normalize,
    steady_coherent_state,
)

PROJECT = "project-normalize"
STIEFEL = "stiefel-wen-yin"
UPDATE_RULES = (PROJECT, STIEFEL)
MAX_HALVINGS = 30


@dataclass
class TrainingConfig:
    """Settings for :func:`train_quantum`.

    ``learning_rate`` multiplies the per-symbol gradient ``G / len(seq)``.
    Training stops once ``|dL| < tol * len(seq)`` or after ``max_iters``.
    """

    D: int
    update_rule: str = STIEFEL
    learning_rate: float = 0.5
    max_iters: int = 2000
    tol: float = 1e-7
    restarts: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.D < 1:
            raise ValueError("D must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.update_rule not in UPDATE_RULES:
            raise ValueError(f"update_rule must be one of {UPDATE_RULES}")


@dataclass
class TrainingTrace:
    losses: list
    model: QuantumTensor
    best_restart: int
    restart_losses: list = field(default_factory=list)
    phi: np.ndarray | None = None

    @property
    def loss(self) -> float:
        return self.losses[-1]

    def to_dict(self) -> dict:
        return {
            "losses": [float(v) for v in self.losses],
            "best_restart": int(self.best_restart),
            "restart_losses": [float(v) for v in self.restart_losses],
        }


def _kernel_args(K, phi, seq):
    K = np.ascontiguousarray(_arr(K), dtype=complex)
    phi = _unit(phi)
    seq = np.ascontiguousarray(as_symbols(seq, K.shape[0]))
    if seq.size == 0:
        raise ValueError("sequence must be nonempty")
    return K, phi, seq


def log_likelihood(K, phi, seq) -> float:
    """Stabilized ``-log P(seq)``; raises on a zero-probability prefix."""
    K, phi, seq = _kernel_args(K, phi, seq)
    value, fail = _kernels.forward_loglik(K, phi, seq)
    if fail >= 0:
        raise ImpossibleSequenceError(f"sequence has zero probability at index {fail}", index=int(fail))
    return float(value)


def gradient(K, phi, seq) -> np.ndarray:
    """Wirtinger derivative ``dL/dconj(K)`` via forward and backward states."""
    K, phi, seq = _kernel_args(K, phi, seq)
    value, G, fail = _kernels.wirtinger_gradient(K, phi, seq)
    if fail >= 0:
        if not np.isfinite(value):
            raise ImpossibleSequenceError(f"sequence has zero probability at index {fail}", index=int(fail))
        raise DomainError(f"singular gradient denominator at index {fail}")
    return G


def step_project(K, G, eta: float) -> QuantumTensor:
    """Euclidean step ``K - eta G`` followed by renormalization.

    The Hermitian gauge keeps an already normalized tensor fixed, so the
    memory basis (and the meaning of ``phi``) survives small steps.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    return mps_normalize(_arr(K) - eta * np.asarray(G), gauge="hermitian")


def _stack(K):
    d, D, _ = K.shape
    return K.reshape(d * D, D)


def step_stiefel(K, G, eta: float) -> QuantumTensor:
    """Cayley retraction on the isometries ``[K^1; ...; K^d]``.

    With ``A = G K† - K G†`` the update ``(I + eta A)^{-1} (I - eta A) K``
    moves against the gradient and keeps the stack exactly isometric.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    K = _arr(K).astype(complex)
    d, D, _ = K.shape
    Ks = _stack(K)
    if np.linalg.norm(Ks.conj().T @ Ks - np.eye(D)) > 1e-8:
        raise DomainError("stacked Kraus operators are not an isometry")
    Gs = _stack(np.asarray(G, dtype=complex))
    A = Gs @ Ks.conj().T - Ks @ Gs.conj().T
    I = np.eye(d * D)
    for _ in range(MAX_HALVINGS + 1):
        try:
            # A is skew-Hermitian, so this only fails on overflow or NaN input
            new = np.linalg.solve(I + eta * A, (I - eta * A) @ Ks)
            if np.all(np.isfinite(new)):
                break
        except np.linalg.LinAlgError:
            pass
        eta /= 2
    else:
        raise DomainError("Cayley system stayed singular after repeated step halving")
    # one polar clean-up removes accumulated round-off
    U, _, Vh = np.linalg.svd(new, full_matrices=False)
    new = U @ Vh
    return QuantumTensor(new.reshape(d, D, D), normalized=True)


def haar_isometry(d: int, D: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random isometry of shape ``(d*D, D)`` split into ``d`` blocks."""
    Z = (rng.standard_normal((d * D, D)) + 1j * rng.standard_normal((d * D, D))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return (Q * ph[None, :]).reshape(d, D, D)


def _fit_once(K0, phi, seq, config: TrainingConfig):
    n = seq.size
    step = step_stiefel if config.update_rule == STIEFEL else step_project
    K = np.ascontiguousarray(K0, dtype=complex)
    loss, G, fail = _kernels.wirtinger_gradient(K, phi, seq)
    if fail >= 0:
        raise ImpossibleSequenceError(f"initial model cannot produce the data (index {fail})", index=int(fail))
    losses = [float(loss)]
    eta = config.learning_rate
    for _ in range(config.max_iters):
        accepted = False
        for _ in range(MAX_HALVINGS):
            trial = np.ascontiguousarray(step(K, G / n, eta).K)
            t_loss, fail = _kernels.forward_loglik(trial, phi, seq)
            if fail < 0 and t_loss < loss:
                accepted = True
                break
            eta /= 2
        if not accepted:
            break
        delta = loss - t_loss
        K = trial
        loss, G, fail = _kernels.wirtinger_gradient(K, phi, seq)
        losses.append(float(loss))
        eta = min(2 * eta, config.learning_rate)
        if delta < config.tol * n:
            break
    return K, losses


def train_quantum(seq, config: TrainingConfig, d: int | None = None) -> TrainingTrace:
    """Best of ``config.restarts`` fits from Haar-random isometries.

    The initial memory state is fixed to the first basis vector.
    """
    if isinstance(seq, SymbolSequence):
        d = seq.d if d is None else d
    arr = np.asarray(seq, dtype=np.int64).ravel()
    if arr.size == 0:
        raise ValueError("sequence must be nonempty")
    d = int(arr.max()) + 1 if d is None else d
    arr = np.ascontiguousarray(as_symbols(arr, d))
    phi = np.zeros(config.D, dtype=complex)
    phi[0] = 1.0

    best = None
    finals, errors = [], []
    for r in range(config.restarts):
        rng = np.random.default_rng([config.seed, r])
        K0 = haar_isometry(d, config.D, rng)
        try:
            K, losses = _fit_once(K0, phi, arr, config)
        except (ImpossibleSequenceError, DomainError, np.linalg.LinAlgError) as exc:
            errors.append(f"restart {r}: {exc}")
            finals.append(float("inf"))
            continue
        finals.append(losses[-1])
        if best is None or losses[-1] < best[1][-1]:
            best = (K, losses, r)
    if best is None:
        raise TrainingError("every restart failed", diagnostics=errors)
    K, losses, r = best
    model = QuantumTensor(K, normalized=True, meta={"trained": True, "update_rule": config.update_rule})
    return TrainingTrace(losses, model, r, finals, phi)


def fit_classical(seq, D: int, restarts: int = 10, seed: int = 0, d: int | None = None, **kw) -> BaumWelchResult:
    """Best-likelihood Baum-Welch fit over independently seeded restarts."""
    if isinstance(seq, SymbolSequence):
        d = seq.d if d is None else d
    best = None
    for r in range(restarts):
        res = baum_welch(seq, D, d=d, seed=[seed, r], **kw)
        if best is None or res.log_likelihood > best.log_likelihood:
            best = res
    return best


def default_initial_state(model):
    """Initial memory state used when none is supplied for prediction."""
    if isinstance(model, TransitionTensor):
        return np.full(model.D, 1.0 / model.D)
    if isinstance(model, QuantumTensor) and model.meta.get("trained"):
        phi = np.zeros(model.D, dtype=complex)
        phi[0] = 1.0
        return phi
    return steady_coherent_state(model)


def evaluate_predictive(model, past, future_len: int, init=None) -> np.ndarray:
    """Exact law of the next ``future_len`` symbols after observing ``past``.

    Classical models filter a distribution (uniform unless ``init`` is
    given); quantum models filter a pure state (``|0>`` for trained models,
    otherwise the steady coherent state).  Entries are ordered with the
    first future symbol most significant.
    """
    init = default_initial_state(model) if init is None else init
    if model.d**future_len > ENUMERATION_LIMIT:
        raise SizeError(f"{model.d}**{future_len} futures exceed the enumeration limit")
    if isinstance(model, TransitionTensor):
        p = conditional_initial(model, past, init)
        return all_sequence_probabilities(model, p, future_len)
    K = _arr(model)
    psi = _unit(init)
    for t, x in enumerate(as_symbols(past, K.shape[0])):
        psi = K[x] @ psi
        nrm = np.linalg.norm(psi)
        if nrm == 0:
            raise ImpossibleSequenceError(f"past has zero probability at index {t}", index=t)
        psi = psi / nrm
    return all_sequence_probabilities_quantum(K, psi, future_len)


def predictive_bhattacharyya(exact, approx, pasts, future_len: int = 10, exact_init=None, approx_init=None) -> float:
    """Bhattacharyya coefficient of the future laws, averaged over ``pasts``."""
    vals = []
    for past in pasts:
        P = evaluate_predictive(exact, past, future_len, exact_init)
        Q = evaluate_predictive(approx, past, future_len, approx_init)
        vals.append(np.sqrt(np.clip(P, 0, None) * np.clip(Q, 0, None)).sum())
    return float(np.mean(vals))


def predictive_discrepancy(exact, approx, pasts, future_len: int = 10, exact_init=None, approx_init=None) -> float:
    return float(-np.log(predictive_bhattacharyya(exact, approx, pasts, future_len, exact_init, approx_init)))
