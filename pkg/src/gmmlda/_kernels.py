"""Compiled Gibbs kernels.

State is passed as three tuples of arrays::

    C = (words, sent_ptr, doc_ptr)
    A = (u, z, upsilon, pi, pi0, b, t, fixed)
    F = (f0, f0_dot, f1, f1_dot, f1_doc, f1_doc_dot, fu, fb, nv)

and ``hp = [alpha0, beta0, theta0, lambda0, gamma0, c]``.  All ids are
0-based.  Sentence indices ``s`` and token indices ``n`` are global.
"""

import math

import numpy as np
from numba import njit

from .permutation import gmm_logpmf_n, inversion_to_perm_arr, slice_rho_n

ALPHA, BETA, THETA, LAMBDA, GAMMA, C_ENT = range(6)


@njit(cache=True)
def word_entropy_nb(n0, n1):
    total = n0 + n1
    h = 0.0
    if n0 > 0:
        p = n0 / total
        h -= p * math.log(p)
    if n1 > 0:
        p = n1 / total
        h -= p * math.log(p)
    return h


@njit(cache=True)
def sample_log(logw, m, rng):
    """Draw an index in ``[0, m)`` with probability proportional to ``exp(logw)``."""
    top = logw[0]
    for i in range(1, m):
        if logw[i] > top:
            top = logw[i]
    total = 0.0
    for i in range(m):
        total += math.exp(logw[i] - top)
    r = rng.random() * total
    acc = 0.0
    for i in range(m):
        acc += math.exp(logw[i] - top)
        if r < acc:
            return i
    return m - 1


@njit(cache=True)
def fill_z(ucount, pi_row, out):
    pos = 0
    for i in range(pi_row.shape[0]):
        lab = pi_row[i]
        for _ in range(ucount[lab]):
            out[pos] = lab
            pos += 1


@njit(cache=True)
def doc_intent_counts(d, zdoc, sign, C, A, F):
    """Add (``sign=1``) or remove (``sign=-1``) document ``d``'s intent words under ``zdoc``."""
    words, sent_ptr, doc_ptr = C
    b = A[5]
    f0 = F[0]
    f0_dot = F[1]
    s0 = doc_ptr[d]
    for s in range(s0, doc_ptr[d + 1]):
        k = zdoc[s - s0]
        for n in range(sent_ptr[s], sent_ptr[s + 1]):
            if b[n] == 0:
                f0[k, words[n]] += sign
                f0_dot[k] += sign


@njit(cache=True)
def doc_loglik(d, zdoc, C, A, F, alpha, v_alpha):
    """Log predictive of document ``d``'s intent words given ``zdoc``.

    Expects the document's own intent words to be absent from ``f0``; the
    sequential Polya-urn product equals the Gamma-function ratio.
    """
    words, sent_ptr, doc_ptr = C
    b = A[5]
    f0 = F[0]
    f0_dot = F[1]
    s0 = doc_ptr[d]
    total = 0.0
    for s in range(s0, doc_ptr[d + 1]):
        k = zdoc[s - s0]
        for n in range(sent_ptr[s], sent_ptr[s + 1]):
            if b[n] == 0:
                v = words[n]
                total += math.log(f0[k, v] + alpha) - math.log(f0_dot[k] + v_alpha)
                f0[k, v] += 1
                f0_dot[k] += 1
    doc_intent_counts(d, zdoc, -1, C, A, F)
    return total


@njit(cache=True)
def doc_bag(d, C, A, K):
    doc_ptr = C[2]
    u = A[0]
    ucount = np.zeros(K, dtype=np.int64)
    for s in range(doc_ptr[d], doc_ptr[d + 1]):
        ucount[u[s]] += 1
    return ucount


# -- u ----------------------------------------------------------------------

@njit(cache=True)
def u_scores(d, C, A, F, hp, ucount, out, zbuf):
    """Log weights for each candidate of one bag element.

    Expects document ``d`` removed from ``f0`` and the element being
    resampled removed from ``ucount`` and ``fu``.
    """
    pi = A[3]
    f0 = F[0]
    fu = F[6]
    K = fu.shape[0]
    alpha = hp[ALPHA]
    v_alpha = f0.shape[1] * alpha
    for x in range(K):
        ucount[x] += 1
        fill_z(ucount, pi[d], zbuf)
        out[x] = math.log(fu[x] + hp[LAMBDA]) + doc_loglik(d, zbuf, C, A, F, alpha, v_alpha)
        ucount[x] -= 1


@njit(cache=True)
def u_logweights(d, s, C, A, F, hp, out):
    doc_ptr = C[2]
    u, z = A[0], A[1]
    fu = F[6]
    K = fu.shape[0]
    s0, s1 = doc_ptr[d], doc_ptr[d + 1]
    ucount = doc_bag(d, C, A, K)
    old = u[s]
    ucount[old] -= 1
    fu[old] -= 1
    doc_intent_counts(d, z[s0:s1], -1, C, A, F)
    zbuf = np.empty(s1 - s0, dtype=np.int64)
    u_scores(d, C, A, F, hp, ucount, out, zbuf)
    doc_intent_counts(d, z[s0:s1], 1, C, A, F)
    fu[old] += 1


@njit(cache=True)
def u_doc_block(d, C, A, F, hp, rng, only_s):
    """Resample the bag elements of document ``d`` (all of them if ``only_s < 0``)."""
    doc_ptr = C[2]
    u, z, pi = A[0], A[1], A[3]
    fu = F[6]
    K = fu.shape[0]
    s0, s1 = doc_ptr[d], doc_ptr[d + 1]
    ucount = doc_bag(d, C, A, K)
    doc_intent_counts(d, z[s0:s1], -1, C, A, F)
    out = np.empty(K)
    zbuf = np.empty(s1 - s0, dtype=np.int64)
    lo, hi = (s0, s1) if only_s < 0 else (only_s, only_s + 1)
    for s in range(lo, hi):
        old = u[s]
        ucount[old] -= 1
        fu[old] -= 1
        u_scores(d, C, A, F, hp, ucount, out, zbuf)
        x = sample_log(out, K, rng)
        u[s] = x
        ucount[x] += 1
        fu[x] += 1
        fill_z(ucount, pi[d], z[s0:s1])
    doc_intent_counts(d, z[s0:s1], 1, C, A, F)


# -- upsilon ----------------------------------------------------------------

@njit(cache=True)
def ups_scores(d, k, C, A, F, hp, rho, ucount, out_prior, out, zbuf, vbuf, sig, pbuf):
    """Log weights for component ``k`` of document ``d``'s inversion vector.

    Expects document ``d`` removed from ``f0``.
    """
    ups, pi0 = A[2], A[4]
    f0 = F[0]
    K = pi0.shape[0]
    alpha = hp[ALPHA]
    v_alpha = f0.shape[1] * alpha
    n = K - k
    for i in range(K - 1):
        vbuf[i] = ups[d, i]
    for v in range(n):
        vbuf[k] = v
        inversion_to_perm_arr(vbuf, sig)
        for i in range(K):
            pbuf[i] = pi0[sig[i]]
        fill_z(ucount, pbuf, zbuf)
        out_prior[v] = gmm_logpmf_n(float(v), rho[k], n)
        out[v] = out_prior[v] + doc_loglik(d, zbuf, C, A, F, alpha, v_alpha)


@njit(cache=True)
def ups_logweights(d, k, C, A, F, hp, rho, out_prior, out):
    doc_ptr = C[2]
    z = A[1]
    K = A[4].shape[0]
    s0, s1 = doc_ptr[d], doc_ptr[d + 1]
    ucount = doc_bag(d, C, A, K)
    doc_intent_counts(d, z[s0:s1], -1, C, A, F)
    zbuf = np.empty(s1 - s0, dtype=np.int64)
    vbuf = np.empty(K - 1, dtype=np.int64)
    sig = np.empty(K, dtype=np.int64)
    pbuf = np.empty(K, dtype=np.int64)
    ups_scores(d, k, C, A, F, hp, rho, ucount, out_prior, out, zbuf, vbuf, sig, pbuf)
    doc_intent_counts(d, z[s0:s1], 1, C, A, F)


@njit(cache=True)
def ups_doc_block(d, C, A, F, hp, rho, rng, only_k):
    """Resample document ``d``'s inversion components (all if ``only_k < 0``)."""
    doc_ptr = C[2]
    z, ups, pi, pi0 = A[1], A[2], A[3], A[4]
    K = pi0.shape[0]
    s0, s1 = doc_ptr[d], doc_ptr[d + 1]
    ucount = doc_bag(d, C, A, K)
    doc_intent_counts(d, z[s0:s1], -1, C, A, F)
    out_prior = np.empty(K)
    out = np.empty(K)
    zbuf = np.empty(s1 - s0, dtype=np.int64)
    vbuf = np.empty(K - 1, dtype=np.int64)
    sig = np.empty(K, dtype=np.int64)
    lo, hi = (0, K - 1) if only_k < 0 else (only_k, only_k + 1)
    for k in range(lo, hi):
        ups_scores(d, k, C, A, F, hp, rho, ucount, out_prior, out, zbuf, vbuf, sig, pi[d])
        ups[d, k] = sample_log(out, K - k, rng)
        for i in range(K - 1):
            vbuf[i] = ups[d, i]
        inversion_to_perm_arr(vbuf, sig)
        for i in range(K):
            pi[d, i] = pi0[sig[i]]
    fill_z(ucount, pi[d], z[s0:s1])
    doc_intent_counts(d, z[s0:s1], 1, C, A, F)


# -- rho --------------------------------------------------------------------

@njit(cache=True)
def rho_block(A, rho, v_means, nu0, rng):
    ups = A[2]
    D = ups.shape[0]
    K = ups.shape[1] + 1
    for k in range(K - 1):
        total = 0.0
        for d in range(D):
            total += ups[d, k]
        nu = D + nu0
        rho[k] = slice_rho_n(rho[k], (total + v_means[k] * nu0) / nu, nu, K - k, rng)


# -- b, t -------------------------------------------------------------------

@njit(cache=True)
def token_counts(n, d, s, sign, C, A, F):
    words = C[0]
    z, b, t = A[1], A[5], A[6]
    f0, f0_dot, f1, f1_dot, f1_doc, f1_doc_dot, fu, fb, nv = F
    v = words[n]
    if b[n] == 0:
        f0[z[s], v] += sign
        f0_dot[z[s]] += sign
    else:
        tt = t[n]
        f1[tt, v] += sign
        f1_dot[tt] += sign
        f1_doc[d, tt] += sign
        f1_doc_dot[d] += sign
    fb[b[n]] += sign
    nv[v, b[n]] += sign


@njit(cache=True)
def bt_scores(n, d, s, C, A, F, hp, entropic, out):
    """Log weights over ``[intent, topic 0, ..., topic T-1]`` with token ``n`` removed."""
    words = C[0]
    z = A[1]
    f0, f0_dot, f1, f1_dot, f1_doc, f1_doc_dot, fu, fb, nv = F
    V = f0.shape[1]
    T = f1.shape[0]
    v = words[n]
    k = z[s]
    out[0] = (math.log(fb[0] + hp[GAMMA]) + math.log(f0[k, v] + hp[ALPHA])
              - math.log(f0_dot[k] + V * hp[ALPHA]))
    lt = math.log(fb[1] + hp[GAMMA]) - math.log(f1_doc_dot[d] + T * hp[THETA])
    for tt in range(T):
        out[1 + tt] = (lt + math.log(f1[tt, v] + hp[BETA]) - math.log(f1_dot[tt] + V * hp[BETA])
                       + math.log(f1_doc[d, tt] + hp[THETA]))
    if entropic:
        c = hp[C_ENT]
        n0, n1 = nv[v, 0], nv[v, 1]
        out[0] -= c * word_entropy_nb(n0 + 1, n1)
        h1 = c * word_entropy_nb(n0, n1 + 1)
        for tt in range(T):
            out[1 + tt] -= h1


@njit(cache=True)
def bt_logweights(n, d, s, C, A, F, hp, entropic, out):
    token_counts(n, d, s, -1, C, A, F)
    bt_scores(n, d, s, C, A, F, hp, entropic, out)
    token_counts(n, d, s, 1, C, A, F)


@njit(cache=True)
def bt_token(n, d, s, C, A, F, hp, entropic, rng, out):
    b, t = A[5], A[6]
    token_counts(n, d, s, -1, C, A, F)
    bt_scores(n, d, s, C, A, F, hp, entropic, out)
    j = sample_log(out, out.shape[0], rng)
    if j == 0:
        b[n] = 0
        t[n] = -1
    else:
        b[n] = 1
        t[n] = j - 1
    token_counts(n, d, s, 1, C, A, F)


@njit(cache=True)
def bt_block(C, A, F, hp, entropic, rng):
    sent_ptr, doc_ptr = C[1], C[2]
    T = F[2].shape[0]
    out = np.empty(T + 1)
    for d in range(doc_ptr.shape[0] - 1):
        for s in range(doc_ptr[d], doc_ptr[d + 1]):
            for n in range(sent_ptr[s], sent_ptr[s + 1]):
                bt_token(n, d, s, C, A, F, hp, entropic, rng, out)


# -- sweep ------------------------------------------------------------------

@njit(cache=True)
def sweep(C, A, F, hp, rho, v_means, nu0, sample_rho, sample_bt, entropic, rng):
    """One full scan in the fixed order u, rho, upsilon, (b, t)."""
    fixed = A[7]
    D = C[2].shape[0] - 1
    for d in range(D):
        if not fixed[d]:
            u_doc_block(d, C, A, F, hp, rng, -1)
    if sample_rho:
        rho_block(A, rho, v_means, nu0, rng)
    if rho.shape[0] > 0:
        for d in range(D):
            if not fixed[d]:
                ups_doc_block(d, C, A, F, hp, rho, rng, -1)
    if sample_bt:
        bt_block(C, A, F, hp, entropic, rng)
