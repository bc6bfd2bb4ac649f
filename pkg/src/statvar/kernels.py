"""Per-point tensor kernels.

Each kernel exists twice: an explicit-loop version compiled with numba
(``*_loops``) and an einsum version (``*_numpy``).  The public name binds to
the loop version when numba is active (see :mod:`statvar._accel`).

Index conventions: ``dg[a, b, c] = ∂_c g_ab``; ``gamma[k, i, j] = Γ^k_ij``
with ``∇_{∂i} ∂j = Γ^k_ij ∂k``; derivative indices are appended last;
``R[l, i, j, k] = (R(∂i, ∂j) ∂k)^l``.
"""
import numpy as np

from ._accel import USING_NUMBA, maybe_njit


# --- Levi-Civita connection jets ----------------------------------------------

def _lc_low(dg):
    return 0.5 * (np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg) - np.einsum("ijl->lij", dg))


def christoffel_numpy(G, dg):
    return np.einsum("kl,lij->kij", G, _lc_low(dg))


def christoffel_d1_numpy(G, dg, d2g):
    low = _lc_low(dg)
    dlow = 0.5 * (np.einsum("jlia->lija", d2g) + np.einsum("ilja->lija", d2g)
                  - np.einsum("ijla->lija", d2g))
    dG = -np.einsum("kp,pqa,ql->kla", G, dg, G)
    return np.einsum("kla,lij->kija", dG, low) + np.einsum("kl,lija->kija", G, dlow)


def christoffel_d2_numpy(G, dg, d2g, d3g):
    low = _lc_low(dg)
    dlow = 0.5 * (np.einsum("jlia->lija", d2g) + np.einsum("ilja->lija", d2g)
                  - np.einsum("ijla->lija", d2g))
    d2low = 0.5 * (np.einsum("jliab->lijab", d3g) + np.einsum("iljab->lijab", d3g)
                   - np.einsum("ijlab->lijab", d3g))
    dG = -np.einsum("kp,pqa,ql->kla", G, dg, G)
    d2G = (np.einsum("kp,pqb,qr,rsa,sl->klab", G, dg, G, dg, G)
           + np.einsum("kp,pqa,qr,rsb,sl->klab", G, dg, G, dg, G)
           - np.einsum("kp,psab,sl->klab", G, d2g, G))
    return (np.einsum("klab,lij->kijab", d2G, low)
            + np.einsum("kla,lijb->kijab", dG, dlow)
            + np.einsum("klb,lija->kijab", dG, dlow)
            + np.einsum("kl,lijab->kijab", G, d2low))


@maybe_njit
def christoffel_loops(G, dg):
    m = G.shape[0]
    out = np.zeros((m, m, m))
    for k in range(m):
        for i in range(m):
            for j in range(i, m):
                s = 0.0
                for l in range(m):
                    s += G[k, l] * 0.5 * (dg[j, l, i] + dg[i, l, j] - dg[i, j, l])
                out[k, i, j] = s
                out[k, j, i] = s
    return out


@maybe_njit
def _inverse_d1_loops(G, dg):
    m = G.shape[0]
    dG = np.zeros((m, m, m))
    for a in range(m):
        for k in range(m):
            for l in range(m):
                s = 0.0
                for p in range(m):
                    for q in range(m):
                        s += G[k, p] * dg[p, q, a] * G[q, l]
                dG[k, l, a] = -s
    return dG


@maybe_njit
def christoffel_d1_loops(G, dg, d2g):
    m = G.shape[0]
    dG = _inverse_d1_loops(G, dg)
    out = np.zeros((m, m, m, m))
    for k in range(m):
        for i in range(m):
            for j in range(i, m):
                for a in range(m):
                    s = 0.0
                    for l in range(m):
                        low = 0.5 * (dg[j, l, i] + dg[i, l, j] - dg[i, j, l])
                        dlow = 0.5 * (d2g[j, l, i, a] + d2g[i, l, j, a] - d2g[i, j, l, a])
                        s += dG[k, l, a] * low + G[k, l] * dlow
                    out[k, i, j, a] = s
                    out[k, j, i, a] = s
    return out


@maybe_njit
def christoffel_d2_loops(G, dg, d2g, d3g):
    m = G.shape[0]
    dG = _inverse_d1_loops(G, dg)
    d2G = np.zeros((m, m, m, m))
    for a in range(m):
        for b in range(m):
            for k in range(m):
                for l in range(m):
                    s = 0.0
                    for p in range(m):
                        for s_ in range(m):
                            inner = -d2g[p, s_, a, b]
                            for q in range(m):
                                for r in range(m):
                                    inner += (dg[p, q, b] * G[q, r] * dg[r, s_, a]
                                              + dg[p, q, a] * G[q, r] * dg[r, s_, b])
                            s += G[k, p] * inner * G[s_, l]
                    d2G[k, l, a, b] = s
    out = np.zeros((m, m, m, m, m))
    for k in range(m):
        for i in range(m):
            for j in range(i, m):
                for a in range(m):
                    for b in range(m):
                        s = 0.0
                        for l in range(m):
                            low = 0.5 * (dg[j, l, i] + dg[i, l, j] - dg[i, j, l])
                            dlow_a = 0.5 * (d2g[j, l, i, a] + d2g[i, l, j, a] - d2g[i, j, l, a])
                            dlow_b = 0.5 * (d2g[j, l, i, b] + d2g[i, l, j, b] - d2g[i, j, l, b])
                            d2low = 0.5 * (d3g[j, l, i, a, b] + d3g[i, l, j, a, b]
                                           - d3g[i, j, l, a, b])
                            s += (d2G[k, l, a, b] * low + dG[k, l, a] * dlow_b
                                  + dG[k, l, b] * dlow_a + G[k, l] * d2low)
                        out[k, i, j, a, b] = s
                        out[k, j, i, a, b] = s
    return out


# --- curvature ------------------------------------------------------------------

def riemann_numpy(gamma, dgamma):
    return (np.einsum("ljki->lijk", dgamma) - np.einsum("likj->lijk", dgamma)
            + np.einsum("lip,pjk->lijk", gamma, gamma) - np.einsum("ljp,pik->lijk", gamma, gamma))


def riemann_d1_numpy(gamma, dgamma, d2gamma):
    return (np.einsum("ljkia->lijka", d2gamma) - np.einsum("likja->lijka", d2gamma)
            + np.einsum("lipa,pjk->lijka", dgamma, gamma) + np.einsum("lip,pjka->lijka", gamma, dgamma)
            - np.einsum("ljpa,pik->lijka", dgamma, gamma) - np.einsum("ljp,pika->lijka", gamma, dgamma))


@maybe_njit
def riemann_loops(gamma, dgamma):
    m = gamma.shape[0]
    out = np.zeros((m, m, m, m))
    for l in range(m):
        for i in range(m):
            for j in range(i + 1, m):
                for k in range(m):
                    s = dgamma[l, j, k, i] - dgamma[l, i, k, j]
                    for p in range(m):
                        s += gamma[l, i, p] * gamma[p, j, k] - gamma[l, j, p] * gamma[p, i, k]
                    out[l, i, j, k] = s
                    out[l, j, i, k] = -s
    return out


@maybe_njit
def riemann_d1_loops(gamma, dgamma, d2gamma):
    m = gamma.shape[0]
    out = np.zeros((m, m, m, m, m))
    for l in range(m):
        for i in range(m):
            for j in range(i + 1, m):
                for k in range(m):
                    for a in range(m):
                        s = d2gamma[l, j, k, i, a] - d2gamma[l, i, k, j, a]
                        for p in range(m):
                            s += (dgamma[l, i, p, a] * gamma[p, j, k] + gamma[l, i, p] * dgamma[p, j, k, a]
                                  - dgamma[l, j, p, a] * gamma[p, i, k] - gamma[l, j, p] * dgamma[p, i, k, a])
                        out[l, i, j, k, a] = s
                        out[l, j, i, k, a] = -s
    return out


# --- covariant derivatives of (1,2) and (1,3) tensors ------------------------------

def covd12_numpy(gamma, T, dT):
    return (dT + np.einsum("lap,pij->lija", gamma, T)
            - np.einsum("pai,lpj->lija", gamma, T) - np.einsum("paj,lip->lija", gamma, T))


def covd13_numpy(gamma, T, dT):
    return (dT + np.einsum("lap,pijk->lijka", gamma, T)
            - np.einsum("pai,lpjk->lijka", gamma, T)
            - np.einsum("paj,lipk->lijka", gamma, T)
            - np.einsum("pak,lijp->lijka", gamma, T))


@maybe_njit
def covd12_loops(gamma, T, dT):
    m = gamma.shape[0]
    out = np.zeros((m, m, m, m))
    for l in range(m):
        for i in range(m):
            for j in range(m):
                for a in range(m):
                    s = dT[l, i, j, a]
                    for p in range(m):
                        s += (gamma[l, a, p] * T[p, i, j] - gamma[p, a, i] * T[l, p, j]
                              - gamma[p, a, j] * T[l, i, p])
                    out[l, i, j, a] = s
    return out


@maybe_njit
def covd13_loops(gamma, T, dT):
    m = gamma.shape[0]
    out = np.zeros((m, m, m, m, m))
    for l in range(m):
        for i in range(m):
            for j in range(m):
                for k in range(m):
                    for a in range(m):
                        s = dT[l, i, j, k, a]
                        for p in range(m):
                            s += (gamma[l, a, p] * T[p, i, j, k] - gamma[p, a, i] * T[l, p, j, k]
                                  - gamma[p, a, j] * T[l, i, p, k] - gamma[p, a, k] * T[l, i, j, p])
                        out[l, i, j, k, a] = s
    return out


# --- maps ---------------------------------------------------------------------------

def tension_numpy(P, gamma_src, gamma_tgt, du, d2u):
    second = (d2u - np.einsum("lij,al->aij", gamma_src, du)
              + np.einsum("abc,bi,cj->aij", gamma_tgt, du, du))
    return np.einsum("ij,aij->a", P, second)


@maybe_njit
def tension_loops(P, gamma_src, gamma_tgt, du, d2u):
    n, m = du.shape
    out = np.zeros(n)
    for a in range(n):
        s = 0.0
        for i in range(m):
            for j in range(m):
                if P[i, j] == 0.0:
                    continue
                b_ij = d2u[a, i, j]
                for l in range(m):
                    b_ij -= gamma_src[l, i, j] * du[a, l]
                for b in range(n):
                    for c in range(n):
                        b_ij += gamma_tgt[a, b, c] * du[b, i] * du[c, j]
                s += P[i, j] * b_ij
        out[a] = s
    return out


def section_laplacian_numpy(P, gamma_src, gamma_tgt, dgamma_tgt, du, d2u, V, dV, d2V):
    W = dV + np.einsum("kab,ai,b->ki", gamma_tgt, du, V)
    dW = (d2V + np.einsum("kabc,cj,ai,b->kij", dgamma_tgt, du, du, V)
          + np.einsum("kab,aij,b->kij", gamma_tgt, d2u, V)
          + np.einsum("kab,ai,bj->kij", gamma_tgt, du, dV))
    second = dW + np.einsum("kab,aj,bi->kij", gamma_tgt, du, W)
    return np.einsum("ij,kij->k", P, second) - np.einsum("ij,lij,kl->k", P, gamma_src, W)


@maybe_njit
def section_laplacian_loops(P, gamma_src, gamma_tgt, dgamma_tgt, du, d2u, V, dV, d2V):
    n, m = du.shape
    W = np.zeros((n, m))
    for k in range(n):
        for i in range(m):
            s = dV[k, i]
            for a in range(n):
                for b in range(n):
                    s += gamma_tgt[k, a, b] * du[a, i] * V[b]
            W[k, i] = s
    out = np.zeros(n)
    for k in range(n):
        acc = 0.0
        for i in range(m):
            for j in range(m):
                if P[i, j] == 0.0:
                    continue
                s = d2V[k, i, j]
                for a in range(n):
                    for b in range(n):
                        g = gamma_tgt[k, a, b]
                        s += g * (d2u[a, i, j] * V[b] + du[a, i] * dV[b, j] + du[a, j] * W[b, i])
                        for c in range(n):
                            s += dgamma_tgt[k, a, b, c] * du[c, j] * du[a, i] * V[b]
                for l in range(m):
                    s -= gamma_src[l, i, j] * W[k, l]
                acc += P[i, j] * s
        out[k] = acc
    return out


KERNELS = ("christoffel", "christoffel_d1", "christoffel_d2", "riemann", "riemann_d1",
           "covd12", "covd13", "tension", "section_laplacian")

_ns = globals()
for _name in KERNELS:
    _ns[_name] = _ns[f"{_name}_loops"] if USING_NUMBA else _ns[f"{_name}_numpy"]
del _ns, _name
