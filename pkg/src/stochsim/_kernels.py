"""Compiled inner loops for sequential recursions (sampling, filtering, EM).

Random numbers are always drawn by the caller from a seeded
``numpy.random.Generator`` so results do not depend on numba's RNG.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _pick(cdf, u):
    # first index with cdf > u; guards against cdf[-1] < 1 from round-off
    n = cdf.shape[0]
    for k in range(n):
        if u < cdf[k]:
            return k
    for k in range(n - 1, -1, -1):
        if k == 0 or cdf[k] > cdf[k - 1]:
            return k
    return n - 1


@njit(cache=True)
def sample_classical(cdf_init, cdf_cols, D, uniforms):
    """cdf_cols[beta] is the cumulative law of k = x*D + alpha given beta."""
    L = uniforms.shape[0] - 1
    out = np.empty(L, dtype=np.int64)
    s = _pick(cdf_init, uniforms[0])
    for t in range(L):
        k = _pick(cdf_cols[s], uniforms[t + 1])
        out[t] = k // D
        s = k % D
    return out


@njit(cache=True)
def sample_quantum(K, phi, uniforms):
    d = K.shape[0]
    D = K.shape[1]
    L = uniforms.shape[0]
    out = np.empty(L, dtype=np.int64)
    branch = np.empty((d, D), dtype=K.dtype)
    probs = np.empty(d)
    psi = phi.copy()
    for t in range(L):
        total = 0.0
        for x in range(d):
            for i in range(D):
                acc = K[x, i, 0] * psi[0]
                for j in range(1, D):
                    acc += K[x, i, j] * psi[j]
                branch[x, i] = acc
            p = 0.0
            for i in range(D):
                p += branch[x, i].real ** 2 + branch[x, i].imag ** 2
            probs[x] = p
            total += p
        if not total > 0.0:
            return out[:t], t
        u = uniforms[t] * total
        acc_p = 0.0
        chosen = d - 1
        for x in range(d):
            acc_p += probs[x]
            if u < acc_p and probs[x] > 0.0:
                chosen = x
                break
        while probs[chosen] <= 0.0:
            chosen -= 1
        out[t] = chosen
        norm = np.sqrt(probs[chosen])
        for i in range(D):
            psi[i] = branch[chosen, i] / norm
    return out, L


@njit(cache=True)
def forward_loglik(K, phi, seq):
    """Stabilized -log P: returns (value, failing index or -1)."""
    D = K.shape[1]
    f = phi.copy()
    g = np.empty(D, dtype=K.dtype)
    total = 0.0
    for t in range(seq.shape[0]):
        x = seq[t]
        nrm = 0.0
        for i in range(D):
            acc = K[x, i, 0] * f[0]
            for j in range(1, D):
                acc += K[x, i, j] * f[j]
            g[i] = acc
            nrm += acc.real ** 2 + acc.imag ** 2
        if not nrm > 0.0:
            return np.inf, t
        nrm = np.sqrt(nrm)
        total -= 2.0 * np.log(nrm)
        for i in range(D):
            f[i] = g[i] / nrm
    return total, -1


@njit(cache=True)
def wirtinger_gradient(K, phi, seq):
    """Gradient of -log ||K^{x_L}..K^{x_1} phi||^2 w.r.t. conj(K).

    Returns (loglik, G, failing index or -1).
    """
    d = K.shape[0]
    D = K.shape[1]
    L = seq.shape[0]
    F = np.empty((L + 1, D), dtype=K.dtype)
    F[0, :] = phi
    total = 0.0
    G = np.zeros((d, D, D), dtype=K.dtype)
    for t in range(L):
        x = seq[t]
        nrm = 0.0
        for i in range(D):
            acc = K[x, i, 0] * F[t, 0]
            for j in range(1, D):
                acc += K[x, i, j] * F[t, j]
            F[t + 1, i] = acc
            nrm += acc.real ** 2 + acc.imag ** 2
        if not nrm > 0.0:
            return np.inf, G, t
        nrm = np.sqrt(nrm)
        total -= 2.0 * np.log(nrm)
        for i in range(D):
            F[t + 1, i] /= nrm
    b = F[L, :].copy()
    nb = np.empty(D, dtype=K.dtype)
    for t in range(L - 1, -1, -1):
        x = seq[t]
        # denominator <F_t| K^{x_t}† |B_t> = conj(<B_t| K^{x_t} |F_t>)
        den = 0.0 * K[0, 0, 0]
        for i in range(D):
            acc = K[x, i, 0] * F[t, 0]
            for j in range(1, D):
                acc += K[x, i, j] * F[t, j]
            den += np.conj(b[i]) * acc
        den = np.conj(den)
        if den == 0.0:
            return total, G, t
        for i in range(D):
            for j in range(D):
                G[x, i, j] -= b[i] * np.conj(F[t, j]) / den
        if t > 0:
            nrm = 0.0
            for j in range(D):
                acc = np.conj(K[x, 0, j]) * b[0]
                for i in range(1, D):
                    acc += np.conj(K[x, i, j]) * b[i]
                nb[j] = acc
                nrm += acc.real ** 2 + acc.imag ** 2
            nrm = np.sqrt(nrm)
            if not nrm > 0.0:
                return total, G, t
            for j in range(D):
                b[j] = nb[j] / nrm
    return total, G, -1


@njit(cache=True)
def baum_welch_step(J, E, p0, seq):
    """One EM sweep for T^x_{ab} = J_{ab} E^x_b (state b emits, then moves).

    Returns (loglik of the input parameters, J_new, E_new, p0_new, occupancy).
    """
    D = J.shape[0]
    d = E.shape[0]
    L = seq.shape[0]
    alpha = np.empty((L, D))
    beta = np.empty((L, D))
    c = np.empty(L)
    s = 0.0
    for i in range(D):
        alpha[0, i] = p0[i] * E[seq[0], i]
        s += alpha[0, i]
    c[0] = s
    for i in range(D):
        alpha[0, i] /= s
    for t in range(1, L):
        x = seq[t]
        s = 0.0
        for j in range(D):
            acc = 0.0
            for i in range(D):
                acc += J[j, i] * alpha[t - 1, i]
            alpha[t, j] = acc * E[x, j]
            s += alpha[t, j]
        c[t] = s
        if s > 0.0:
            for j in range(D):
                alpha[t, j] /= s
    loglik = 0.0
    for t in range(L):
        loglik += np.log(c[t])
    for i in range(D):
        beta[L - 1, i] = 1.0
    for t in range(L - 2, -1, -1):
        x = seq[t + 1]
        for i in range(D):
            acc = 0.0
            for j in range(D):
                acc += J[j, i] * E[x, j] * beta[t + 1, j]
            beta[t, i] = acc / c[t + 1]
    Jnum = np.zeros((D, D))
    Enum = np.zeros((d, D))
    occ = np.zeros(D)
    occ_trans = np.zeros(D)
    for t in range(L):
        x = seq[t]
        for i in range(D):
            gam = alpha[t, i] * beta[t, i]
            Enum[x, i] += gam
            occ[i] += gam
            if t < L - 1:
                occ_trans[i] += gam
    for t in range(L - 1):
        x = seq[t + 1]
        for i in range(D):
            a = alpha[t, i]
            for j in range(D):
                Jnum[j, i] += a * J[j, i] * E[x, j] * beta[t + 1, j] / c[t + 1]
    p0_new = np.empty(D)
    for i in range(D):
        p0_new[i] = alpha[0, i] * beta[0, i]
    return loglik, Jnum, Enum, p0_new, occ, occ_trans
