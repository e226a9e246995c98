import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochsim.errors import ConvergenceError, DomainError, ShapeError
from stochsim.spectral import (
    ADJOINT_MAP,
    ADJOINT_ON_RIGHT,
    TRANSPOSE_ON_RIGHT,
    TransferMap,
    apply_map,
    dominant_eigenpair,
    krylov_dominant_eigenvalue,
    psd_sqrt_and_inverse,
    shannon_entropy,
    trace_norm,
    von_neumann_entropy,
)

from conftest import random_kraus


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_unitary(rng, n):
    Q, R = np.linalg.qr(crandn(rng, n, n))
    return Q * (np.diag(R) / abs(np.diag(R)))


seeds = st.integers(0, 2**32 - 1)


class TestApplyMap:
    def test_identity_tensors(self):
        I = np.eye(2)[None]
        assert np.allclose(apply_map(TransferMap(I, I), np.eye(2)), np.eye(2))

    def test_kraus_dual_is_unital(self, rng):
        K = random_kraus(rng, 2, 3)
        out = apply_map(TransferMap(K, K, ADJOINT_MAP), np.eye(3))
        assert np.allclose(out, np.eye(3), atol=1e-12)

    @pytest.mark.parametrize("mode", [ADJOINT_ON_RIGHT, ADJOINT_MAP, TRANSPOSE_ON_RIGHT])
    def test_matches_matricized_oracle(self, rng, mode):
        A, B = crandn(rng, 2, 2, 2), crandn(rng, 2, 2, 2)
        Y = crandn(rng, 2, 2)
        # oracle built independently from the row-major vec identity
        if mode == ADJOINT_ON_RIGHT:
            M = sum(np.kron(A[x], B[x].conj()) for x in range(2))
        elif mode == ADJOINT_MAP:
            M = sum(np.kron(A[x].conj().T, B[x].T) for x in range(2))
        else:
            M = sum(np.kron(A[x], B[x]) for x in range(2))
        tmap = TransferMap(A, B, mode)
        assert np.allclose(apply_map(tmap, Y).ravel(), M @ Y.ravel())
        assert np.allclose(tmap.matrix(), M)

    def test_rectangular_operators(self, rng):
        A, B = crandn(rng, 2, 3, 3), crandn(rng, 2, 2, 2)
        Y = crandn(rng, 3, 2)
        out = apply_map(TransferMap(A, B), Y)
        assert out.shape == (3, 2)
        assert np.allclose(out.ravel(), TransferMap(A, B).matrix() @ Y.ravel())

    def test_shape_mismatch(self, rng):
        A = crandn(rng, 2, 2, 2)
        with pytest.raises(ShapeError):
            apply_map(TransferMap(A, A), np.eye(3))
        with pytest.raises(ShapeError):
            TransferMap(A, crandn(rng, 3, 2, 2))

    @given(seeds)
    def test_linearity(self, seed):
        rng = np.random.default_rng(seed)
        A, B = crandn(rng, 2, 3, 3), crandn(rng, 2, 2, 2)
        Y, Z = crandn(rng, 3, 2), crandn(rng, 3, 2)
        a, b = crandn(rng, 2)
        tmap = TransferMap(A, B)
        lhs = tmap(a * Y + b * Z)
        rhs = a * tmap(Y) + b * tmap(Z)
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(1.0, np.linalg.norm(rhs))

    def test_adjoint_is_frobenius_adjoint(self, rng):
        A, B = crandn(rng, 2, 3, 3), crandn(rng, 2, 2, 2)
        Y, Z = crandn(rng, 3, 2), crandn(rng, 3, 2)
        for mode in (ADJOINT_ON_RIGHT, ADJOINT_MAP, TRANSPOSE_ON_RIGHT):
            tmap = TransferMap(A, B, mode)
            assert np.isclose(np.vdot(Z, tmap(Y)), np.vdot(tmap.adjoint()(Z), Y))


class TestDominantEigenpair:
    def test_kraus_dual_eigenvalue_one(self, rng):
        K = random_kraus(rng, 2, 4)
        res = dominant_eigenpair(TransferMap(K, K, ADJOINT_MAP))
        assert abs(res.eigenvalue - 1) < 1e-10

    def test_steady_state_is_fixed_point(self, rng):
        K = random_kraus(rng, 2, 3)
        res = dominant_eigenpair(TransferMap(K, K))
        rho = res.right_eigenoperator / np.trace(res.right_eigenoperator)
        assert abs(abs(res.eigenvalue) - 1) < 1e-10
        assert np.allclose(sum(k @ rho @ k.conj().T for k in K), rho, atol=1e-10)

    def test_stochastic_matrix_against_dense_oracle(self, rng):
        J = rng.random((2, 2))
        J /= J.sum(0)
        res = dominant_eigenpair(TransferMap(J[None], np.ones((1, 1, 1))))
        assert np.isclose(res.eigenvalue, max(np.linalg.eigvals(J), key=abs))

    def test_residual_and_unit_norm(self, rng):
        A, B = crandn(rng, 2, 3, 3), crandn(rng, 2, 3, 3)
        tmap = TransferMap(A, B)
        res = dominant_eigenpair(tmap, want_left=True)
        R = res.right_eigenoperator
        assert np.isclose(np.linalg.norm(R), 1.0)
        assert np.linalg.norm(tmap(R) - res.eigenvalue * R) <= 1e-9 * abs(res.eigenvalue)
        Lft = res.left_eigenoperator
        assert np.linalg.norm(tmap.adjoint()(Lft) - np.conj(res.eigenvalue) * Lft) <= 1e-9 * abs(res.eigenvalue)

    def test_power_path_matches_dense(self, rng):
        K = random_kraus(rng, 2, 3)
        B = random_kraus(rng, 2, 3)
        tmap = TransferMap(K, B)
        dense = dominant_eigenpair(tmap)
        power = dominant_eigenpair(tmap, dense_max=1, tol=1e-13)
        assert abs(abs(dense.eigenvalue) - abs(power.eigenvalue)) < 1e-9
        assert power.iterations > 0

    def test_left_eigenoperator_on_power_path(self, rng):
        A = random_kraus(rng, 2, 3)
        res = dominant_eigenpair(TransferMap(A, A), dense_max=1, want_left=True)
        # left fixed point of a channel is the identity
        L = res.left_eigenoperator
        assert np.allclose(L / L[0, 0], np.eye(3), atol=1e-8)

    def test_nonconvergence_carries_last_iterate(self):
        # rotation: two eigenvalues of equal modulus, power iteration cannot settle
        R = np.array([[0.0, -1.0], [1.0, 0.0]])[None]
        with pytest.raises(ConvergenceError) as info:
            dominant_eigenpair(TransferMap(R, np.ones((1, 1, 1))), dense_max=0, max_iter=50)
        assert info.value.last is not None

    def test_degenerate_modulus_flagged(self):
        P = np.array([[0.0, 1.0], [1.0, 0.0]])[None]
        res = dominant_eigenpair(TransferMap(P, np.ones((1, 1, 1))))
        assert res.degenerate

    def test_deterministic(self, rng):
        A, B = crandn(rng, 2, 9, 9), crandn(rng, 2, 9, 9)
        r1 = dominant_eigenpair(TransferMap(A, B))
        r2 = dominant_eigenpair(TransferMap(A, B))
        assert r1.eigenvalue == r2.eigenvalue
        assert np.array_equal(r1.right_eigenoperator, r2.right_eigenoperator)

    def test_bad_tolerance(self, rng):
        A = crandn(rng, 1, 2, 2)
        with pytest.raises(ValueError):
            dominant_eigenpair(TransferMap(A, A), tol=0)

    def test_krylov_matches_dense(self, rng):
        A, B = crandn(rng, 2, 4, 4), crandn(rng, 2, 3, 3)
        tmap = TransferMap(A, B)
        lam = krylov_dominant_eigenvalue(lambda v: tmap(v.reshape(4, 3)).ravel(), np.ones(12))
        assert np.isclose(abs(lam), abs(dominant_eigenpair(tmap).eigenvalue), rtol=1e-10)


class TestNormsAndEntropies:
    def test_trace_norm_examples(self, rng):
        assert np.isclose(trace_norm(np.eye(3)), 3)
        u, v = crandn(rng, 4), crandn(rng, 3)
        assert np.isclose(trace_norm(np.outer(u / np.linalg.norm(u), v.conj() / np.linalg.norm(v))), 1)
        Y = crandn(rng, 3, 2)
        assert np.isclose(trace_norm(Y), np.linalg.svd(Y, compute_uv=False).sum())

    def test_trace_norm_psd_is_trace(self, rng):
        X = crandn(rng, 4, 4)
        P = X @ X.conj().T
        assert np.isclose(trace_norm(P), np.trace(P).real)

    @given(seeds)
    def test_trace_norm_unitary_invariance(self, seed):
        rng = np.random.default_rng(seed)
        Y = crandn(rng, 3, 4)
        U, V = random_unitary(rng, 3), random_unitary(rng, 4)
        assert abs(trace_norm(U @ Y @ V) - trace_norm(Y)) < 1e-10

    def test_shannon_examples(self):
        assert shannon_entropy([1, 0]) == 0
        assert np.isclose(shannon_entropy([0.5, 0.5]), 1)
        # renewal N=2 steady state, solved by hand: pi = (2/3, 1/3)
        assert np.isclose(shannon_entropy([2 / 3, 1 / 3]), 0.9183, atol=5e-5)

    def test_shannon_domain(self):
        with pytest.raises(DomainError):
            shannon_entropy([1.2, -0.2])
        with pytest.raises(DomainError):
            shannon_entropy([0.5, 0.4])

    def test_von_neumann_examples(self, rng):
        assert np.isclose(von_neumann_entropy(np.eye(2) / 2), 1)
        v = crandn(rng, 3)
        v /= np.linalg.norm(v)
        assert abs(von_neumann_entropy(np.outer(v, v.conj()))) < 1e-9
        p = rng.dirichlet(np.ones(5))
        assert np.isclose(von_neumann_entropy(np.diag(p)), shannon_entropy(p))

    def test_von_neumann_domain(self):
        with pytest.raises(DomainError):
            von_neumann_entropy(np.array([[0.5, 1.0], [0.0, 0.5]]))
        with pytest.raises(DomainError):
            von_neumann_entropy(np.eye(2))
        with pytest.raises(ShapeError):
            von_neumann_entropy(np.ones((2, 3)))

    @given(seeds)
    def test_von_neumann_basis_independent(self, seed):
        rng = np.random.default_rng(seed)
        X = crandn(rng, 4, 4)
        rho = X @ X.conj().T
        rho /= np.trace(rho).real
        U = random_unitary(rng, 4)
        assert abs(von_neumann_entropy(U @ rho @ U.conj().T) - von_neumann_entropy(rho)) < 1e-10


class TestPsdFactor:
    def test_identity(self):
        W, Wp, rank = psd_sqrt_and_inverse(np.eye(3))
        assert np.allclose(W.conj().T @ W, np.eye(3))
        assert np.allclose(Wp @ W, np.eye(3))
        assert rank == 3

    def test_diagonal(self):
        W, Wp, _ = psd_sqrt_and_inverse(np.diag([4.0, 1.0]), hermitian=True)
        assert np.allclose(W, np.diag([2.0, 1.0]))
        assert np.allclose(Wp, np.diag([0.5, 1.0]))

    @given(seeds)
    def test_reconstruction(self, seed):
        rng = np.random.default_rng(seed)
        X = crandn(rng, 4, 4)
        G = X @ X.conj().T
        for herm in (False, True):
            W, Wp, _ = psd_sqrt_and_inverse(G, hermitian=herm)
            assert np.linalg.norm(W.conj().T @ W - G) <= 1e-10 * max(1, np.linalg.norm(G))
            assert np.allclose(Wp @ W, np.eye(4), atol=1e-8)

    def test_rank_deficient_projector(self, rng):
        v = crandn(rng, 3, 2)
        G = v @ v.conj().T
        W, Wp, rank = psd_sqrt_and_inverse(G)
        assert rank == 2
        P = Wp @ W
        assert np.allclose(P @ P, P, atol=1e-10)
        assert np.allclose(P @ v, v, atol=1e-10)
