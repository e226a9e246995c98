"""Dense linear algebra shared by the classical and quantum code paths.

Transfer maps act on operators ``Y`` of shape ``(D_A, D_B)``.  Vectorization
is row-major throughout, so ``vec(A Y C^T) = kron(A, C) @ vec(Y)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, DomainError, ShapeError

ADJOINT_ON_RIGHT = "adjoint-on-right"  # Y -> sum_x A^x Y B^x†
ADJOINT_MAP = "adjoint-map"  # Y -> sum_x A^x† Y B^x
TRANSPOSE_ON_RIGHT = "transpose-on-right"  # Y -> sum_x A^x Y B^xT
MODES = (ADJOINT_ON_RIGHT, ADJOINT_MAP, TRANSPOSE_ON_RIGHT)

DENSE_MAX = 64
NEG_CLIP = 1e-9


@dataclass(frozen=True)
class TransferMap:
    """Bilinear superoperator built from two ``(d, D, D)`` tensors."""

    left_tensor: np.ndarray
    right_tensor: np.ndarray
    conjugation_mode: str = ADJOINT_ON_RIGHT

    def __post_init__(self):
        a = np.asarray(self.left_tensor)
        b = np.asarray(self.right_tensor)
        if a.ndim != 3 or b.ndim != 3:
            raise ShapeError("transfer-map tensors must have shape (d, D, D)")
        if a.shape[0] != b.shape[0]:
            raise ShapeError(f"alphabet mismatch: {a.shape[0]} vs {b.shape[0]}")
        if a.shape[1] != a.shape[2] or b.shape[1] != b.shape[2]:
            raise ShapeError("transfer-map tensors must be square per symbol")
        if self.conjugation_mode not in MODES:
            raise ValueError(f"unknown conjugation mode {self.conjugation_mode!r}")
        object.__setattr__(self, "left_tensor", a)
        object.__setattr__(self, "right_tensor", b)

    @property
    def operator_shape(self) -> tuple[int, int]:
        return self.left_tensor.shape[1], self.right_tensor.shape[1]

    @property
    def size(self) -> int:
        da, db = self.operator_shape
        return da * db

    def adjoint(self) -> "TransferMap":
        """Adjoint with respect to the Frobenius inner product."""
        a, b = self.left_tensor, self.right_tensor
        if self.conjugation_mode == ADJOINT_ON_RIGHT:
            return TransferMap(a, b, ADJOINT_MAP)
        if self.conjugation_mode == ADJOINT_MAP:
            return TransferMap(a, b, ADJOINT_ON_RIGHT)
        return TransferMap(a, b.conj(), ADJOINT_MAP)

    def matrix(self) -> np.ndarray:
        """Explicit ``(D_A*D_B, D_A*D_B)`` matrix acting on row-major ``vec(Y)``."""
        a, b = self.left_tensor, self.right_tensor
        if self.conjugation_mode == ADJOINT_ON_RIGHT:
            pairs = ((ax, bx.conj()) for ax, bx in zip(a, b))
        elif self.conjugation_mode == ADJOINT_MAP:
            pairs = ((ax.conj().T, bx.T) for ax, bx in zip(a, b))
        else:
            pairs = zip(a, b)
        return sum(np.kron(l, r) for l, r in pairs)

    def __call__(self, Y: np.ndarray) -> np.ndarray:
        return apply_map(self, Y)


def apply_map(tmap: TransferMap, Y: np.ndarray) -> np.ndarray:
    Y = np.asarray(Y)
    if Y.shape != tmap.operator_shape:
        raise ShapeError(f"operator has shape {Y.shape}, map expects {tmap.operator_shape}")
    a, b = tmap.left_tensor, tmap.right_tensor
    if tmap.conjugation_mode == ADJOINT_ON_RIGHT:
        return (a @ Y @ b.conj().transpose(0, 2, 1)).sum(axis=0)
    if tmap.conjugation_mode == ADJOINT_MAP:
        return (a.conj().transpose(0, 2, 1) @ Y @ b).sum(axis=0)
    return (a @ Y @ b.transpose(0, 2, 1)).sum(axis=0)


@dataclass
class SpectralResult:
    eigenvalue: complex
    right_eigenoperator: np.ndarray
    left_eigenoperator: np.ndarray | None = None
    converged: bool = True
    iterations: int = 0
    degenerate: bool = False


def _fix_phase(Y: np.ndarray) -> np.ndarray:
    """Unit Frobenius norm, with a deterministic global phase."""
    Y = Y / np.linalg.norm(Y)
    tr = np.trace(Y) if Y.shape[0] == Y.shape[1] else 0.0
    if abs(tr) > 1e-8:
        ref = tr
    else:
        ref = Y.flat[np.argmax(np.abs(Y))]
    return Y * (abs(ref) / ref)


def _default_hint(shape) -> np.ndarray:
    # Fixed-seed perturbation keeps the start generic but reproducible.
    rng = np.random.default_rng(12345)
    Y = np.eye(*shape, dtype=complex)
    Y += 1e-3 * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return Y


def _dense_eig(tmap: TransferMap, want_left: bool, gap_tol: float):
    M = tmap.matrix()
    w, V = np.linalg.eig(M)
    order = np.argsort(-np.abs(w), kind="stable")
    lam = w[order[0]]
    degenerate = len(w) > 1 and abs(w[order[0]]) - abs(w[order[1]]) <= gap_tol
    right = _fix_phase(_polish(M, lam, V[:, order[0]]).reshape(tmap.operator_shape))
    left = None
    if want_left:
        wl, VL = np.linalg.eig(M.conj().T)
        j = np.argmin(np.abs(wl - np.conj(lam)))
        left = _fix_phase(_polish(M.conj().T, np.conj(lam), VL[:, j]).reshape(tmap.operator_shape))
    return lam, right, left, degenerate


def _polish(M: np.ndarray, lam: complex, v: np.ndarray, steps: int = 20) -> np.ndarray:
    """A few power steps; LAPACK vectors can be loose when small eigenvalues are defective."""
    if lam == 0:
        return v
    v = v / np.linalg.norm(v)
    best, best_r = v, np.linalg.norm(M @ v - lam * v)
    for _ in range(steps):
        if best_r <= 1e-15 * abs(lam):
            break
        z = M @ v / lam
        v = z / np.linalg.norm(z)
        r = np.linalg.norm(M @ v - lam * v)
        if r < best_r:
            best, best_r = v, r
    return best


def _power(tmap: TransferMap, Y: np.ndarray, tol: float, max_iter: int):
    Y = Y / np.linalg.norm(Y)
    lam = 0.0
    for it in range(1, max_iter + 1):
        Z = apply_map(tmap, Y)
        lam = np.vdot(Y, Z)
        resid = np.linalg.norm(Z - lam * Y)
        if resid <= tol * max(abs(lam), 1e-300):
            return lam, Y, it, True
        nz = np.linalg.norm(Z)
        if nz == 0.0:
            return 0.0, Y, it, True
        Y = Z / nz
    return lam, Y, max_iter, False


def dominant_eigenpair(
    tmap: TransferMap,
    hint: np.ndarray | None = None,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    want_left: bool = False,
    dense_max: int = DENSE_MAX,
    gap_tol: float = 1e-9,
) -> SpectralResult:
    """Eigenvalue of largest modulus of a transfer map and its eigenoperator(s).

    Maps with ``D_A*D_B <= dense_max`` are matricized and solved densely.
    Larger maps use power iteration started from ``hint``; a
    :class:`ConvergenceError` carrying the last iterate is raised if the
    residual does not drop below ``tol*|lambda|`` within ``max_iter`` steps.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if tmap.size <= dense_max:
        lam, right, left, degenerate = _dense_eig(tmap, want_left, gap_tol)
        return SpectralResult(complex(lam), right, left, True, 0, bool(degenerate))

    start = _default_hint(tmap.operator_shape) if hint is None else np.asarray(hint, dtype=complex)
    lam, right, its, ok = _power(tmap, start, tol, max_iter)
    if not ok:
        raise ConvergenceError(
            f"power iteration did not converge in {max_iter} steps (|lambda|~{abs(lam):.6g})",
            last=SpectralResult(complex(lam), _fix_phase(right), None, False, its),
        )
    left = None
    if want_left:
        adj = tmap.adjoint()
        lam_l, left, its_l, ok_l = _power(adj, _default_hint(tmap.operator_shape), tol, max_iter)
        if not ok_l:
            raise ConvergenceError("left eigenoperator did not converge", last=left)
        left = _fix_phase(left)
        its += its_l
    return SpectralResult(complex(lam), _fix_phase(right), left, True, its, False)


def krylov_dominant_eigenvalue(matvec, v0: np.ndarray, tol: float = 1e-12) -> complex:
    """Largest-modulus eigenvalue of a matrix-free operator (implicitly restarted Arnoldi).

    Used for maps too large to matricize whose power iteration mixes slowly.
    ``v0`` fixes the Krylov start so results are reproducible.
    """
    from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs

    v0 = np.asarray(v0, dtype=complex).ravel()
    n = v0.size
    op = LinearOperator((n, n), matvec=matvec, dtype=complex)
    try:
        w = eigs(op, k=1, which="LM", v0=v0, tol=tol, return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        raise ConvergenceError("Arnoldi iteration did not converge", last=exc.eigenvalues) from exc
    return complex(w[0])


def trace_norm(Y: np.ndarray) -> float:
    """Schatten 1-norm (sum of singular values)."""
    return float(np.linalg.svd(np.asarray(Y), compute_uv=False).sum())


def shannon_entropy(p) -> float:
    """Entropy of a probability vector, in bits."""
    p = np.asarray(p, dtype=float).ravel()
    if np.any(p < -1e-12):
        raise DomainError("probability vector has negative entries")
    if abs(p.sum() - 1.0) > 1e-9:
        raise DomainError(f"probabilities sum to {p.sum()!r}, not 1")
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def _entropy_of_spectrum(lam: np.ndarray) -> float:
    lam = np.where(lam < 0, 0.0, lam)
    lam = lam[lam > 0]
    return float(-(lam * np.log2(lam)).sum())


def von_neumann_entropy(rho: np.ndarray) -> float:
    """Von Neumann entropy in bits; tiny negative eigenvalues are clipped."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ShapeError("density matrix must be square")
    if np.linalg.norm(rho - rho.conj().T) > 1e-9 * max(1.0, np.linalg.norm(rho)):
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > 1e-9:
        raise DomainError(f"density matrix has trace {np.trace(rho)!r}")
    lam = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    if lam.min() < -NEG_CLIP:
        raise DomainError(f"density matrix has eigenvalue {lam.min():.3g}")
    return _entropy_of_spectrum(lam)


class PsdFactor(NamedTuple):
    W: np.ndarray
    W_pinv: np.ndarray
    rank: int


def psd_sqrt_and_inverse(G: np.ndarray, rank_tol: float = 1e-12, hermitian: bool = False) -> PsdFactor:
    """Factor ``G = W† W`` with ``W = s^{1/2} U†`` and a pseudo-inverse of ``W``.

    Eigenvalues below ``rank_tol * max(s)`` are treated as zero, so
    ``W_pinv @ W`` is the projector onto the numerical range of ``G``.
    With ``hermitian=True`` the positive root ``U s^{1/2} U†`` is returned.
    """
    G = np.asarray(G)
    s, U = np.linalg.eigh((G + G.conj().T) / 2)
    s = np.clip(s, 0.0, None)
    keep = s > rank_tol * max(s.max(), 0.0)
    root = np.sqrt(s)
    inv_root = np.zeros_like(root)
    inv_root[keep] = 1.0 / root[keep]
    W = root[:, None] * U.conj().T
    W_pinv = U * inv_root[None, :]
    if hermitian:
        W = U @ W
        W_pinv = W_pinv @ U.conj().T
    return PsdFactor(W, W_pinv, int(keep.sum()))
