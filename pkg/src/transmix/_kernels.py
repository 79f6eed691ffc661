"""Fused likelihood-and-gradient cores.

Both cores compute the data part of the log posterior and its gradient with
respect to (alpha, log psi, log nu, beta) plus the per-component
responsibility mass needed for the stick-fraction gradient:

    returns (loglik, g_alpha, g_beta, g_logpsi, g_lognu, S, ok)

``core_numpy`` is the vectorized reference implementation; ``core_numba`` is
a compiled loop version of the identical computation (within float reorder
noise), used when numba is importable.  ok=False marks points where the
transform or its derivative collapses to zero, which callers treat as
rejectable (-inf) states.
"""

from __future__ import annotations

import numpy as np

__all__ = ["core_numpy", "core_numba", "HAVE_NUMBA", "default_core"]


def core_numpy(B, Mm, Z, delta, alpha, logpsi, nu, lognu, logp, beta, cap):
    n, K = B.shape
    L = nu.size
    i1 = np.flatnonzero(delta)
    i0 = np.flatnonzero(~delta)
    zeros = (np.zeros(K), np.zeros(beta.size), np.zeros(L), np.zeros(L), np.zeros(L))

    H = B @ alpha
    Hp = Mm @ alpha
    b = Z @ beta
    if np.any(H <= 0.0) or np.any(Hp[i1] <= 0.0):
        return -np.inf, *zeros, False
    logu = np.log(H) - b

    E = logu[:, None] * nu[None, :] - (nu * logpsi)[None, :]
    clip = E >= cap
    lam = np.exp(np.where(clip, cap, E))
    dlam = np.where(clip, 0.0, lam)

    # log-sum-exp over components, by hand to keep the hot path lean
    R = logp[None, :] + lognu[None, :] + E[i1] - logu[i1, None] - lam[i1]
    mx1 = R.max(axis=1)
    Wr = np.exp(R - mx1[:, None])
    sm1 = Wr.sum(axis=1)
    Wr /= sm1[:, None]
    C = logp[None, :] - lam[i0]
    mx0 = C.max(axis=1)
    Om = np.exp(C - mx0[:, None])
    sm0 = Om.sum(axis=1)
    Om /= sm0[:, None]

    loglik = (
        (mx1 + np.log(sm1)).sum()
        + np.log(Hp[i1]).sum()
        - b[i1].sum()
        + (mx0 + np.log(sm0)).sum()
    )

    Q = np.zeros((n, L))
    Q[i1] = Wr
    Q[i0] = Om
    nud1 = nu[None, :] * dlam[i1]
    f_u = np.empty(n)
    f_u[i1] = Wr @ (nu - 1.0) - np.sum(Wr * nud1, axis=1)
    f_u[i0] = -np.sum(Om * (nu[None, :] * dlam[i0]), axis=1)

    inv_Hp = np.zeros(n)
    inv_Hp[i1] = 1.0 / Hp[i1]
    g_alpha = B.T @ (f_u / H) + Mm.T @ inv_Hp
    d1f = delta.astype(float)
    g_beta = -Z.T @ (f_u + d1f)

    T1 = Wr.sum(axis=0)
    g_logpsi = nu * (np.sum(Q * dlam, axis=0) - T1)
    with np.errstate(over="ignore", invalid="ignore"):
        # clipped entries would overflow in lam * E; the where discards them
        dlam_dlognu = np.where(clip, 0.0, lam * E)
    g_lognu = T1 + np.sum(Wr * E[i1], axis=0) - np.sum(Q * dlam_dlognu, axis=0)
    S = Q.sum(axis=0)
    return loglik, g_alpha, g_beta, g_logpsi, g_lognu, S, True


def _core_loops(B, Mm, Z, delta, alpha, logpsi, nu, lognu, logp, beta, cap):
    n, K = B.shape
    L = nu.size
    p = beta.size
    loglik = 0.0
    g_alpha = np.zeros(K)
    g_beta = np.zeros(p)
    g_logpsi = np.zeros(L)
    g_lognu = np.zeros(L)
    S = np.zeros(L)
    row = np.empty(L)
    lam_r = np.empty(L)
    E_r = np.empty(L)
    for i in range(n):
        H = 0.0
        Hp = 0.0
        for k in range(K):
            H += B[i, k] * alpha[k]
            Hp += Mm[i, k] * alpha[k]
        b = 0.0
        for j in range(p):
            b += Z[i, j] * beta[j]
        obs = delta[i]
        if H <= 0.0 or (obs and Hp <= 0.0):
            return -np.inf, g_alpha, g_beta, g_logpsi, g_lognu, S, False
        logu = np.log(H) - b
        mx = -np.inf
        for l in range(L):
            E = nu[l] * (logu - logpsi[l])
            E_r[l] = E
            lam = np.exp(E) if E < cap else np.exp(cap)
            lam_r[l] = lam if E < cap else 0.0
            r = (logp[l] + lognu[l] + E - logu - lam) if obs else (logp[l] - lam)
            row[l] = r
            if r > mx:
                mx = r
        sm = 0.0
        for l in range(L):
            row[l] = np.exp(row[l] - mx)
            sm += row[l]
        loglik += mx + np.log(sm)
        if obs:
            loglik += np.log(Hp) - b
        fu = 0.0
        for l in range(L):
            q = row[l] / sm
            S[l] += q
            dl = nu[l] * lam_r[l]
            dln = lam_r[l] * E_r[l]
            if obs:
                fu += q * ((nu[l] - 1.0) - dl)
                g_logpsi[l] += q * (dl - nu[l])
                g_lognu[l] += q * (1.0 + E_r[l] - dln)
            else:
                fu -= q * dl
                g_logpsi[l] += q * dl
                g_lognu[l] -= q * dln
        coef = fu / H
        if obs:
            for k in range(K):
                g_alpha[k] += B[i, k] * coef + Mm[i, k] / Hp
            for j in range(p):
                g_beta[j] -= Z[i, j] * (fu + 1.0)
        else:
            for k in range(K):
                g_alpha[k] += B[i, k] * coef
            for j in range(p):
                g_beta[j] -= Z[i, j] * fu
    return loglik, g_alpha, g_beta, g_logpsi, g_lognu, S, True


try:  # compiled core is optional; results match the reference either way
    import numba

    core_numba = numba.njit(cache=True, fastmath=False)(_core_loops)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    core_numba = None
    HAVE_NUMBA = False


def default_core():
    return core_numba if HAVE_NUMBA else core_numpy
