"""Permutations, inversion vectors and the generalized Mallows model.

Public functions take and return 1-based intent ids as tuples.  The
``@njit`` helpers work on 0-based numpy arrays and are shared with the
sampler kernels.

For a permutation ``pi`` of ``1..K`` the inversion vector has ``K - 1``
components; component ``k`` counts the entries that precede ``k`` in ``pi``
and are larger than ``k``.  Under the Mallows model component ``k`` is
independent with pmf ``exp(-rho_k * v) / psi_k(rho_k)`` on ``0..K-k``.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from numba import njit

SLICE_WIDTH = 1.0
SLICE_MAX_DOUBLINGS = 64
_SLICE_MAX_SHRINK = 500


def _check_permutation(p: Sequence[int]) -> int:
    K = len(p)
    if sorted(p) != list(range(1, K + 1)):
        raise ValueError(f"not a permutation of 1..{K}: {tuple(p)}")
    return K


def permutation_to_inversion(p: Sequence[int]) -> tuple[int, ...]:
    K = _check_permutation(p)
    out = [0] * (K - 1)
    for i, x in enumerate(p):
        if x < K:
            out[x - 1] = sum(1 for y in p[:i] if y > x)
    return tuple(out)


def inversion_to_permutation(v: Sequence[int]) -> tuple[int, ...]:
    K = len(v) + 1
    for k, vk in enumerate(v, 1):
        if not 0 <= vk <= K - k:
            raise ValueError(f"inversion component {k} = {vk} outside [0, {K - k}]")
    out = [K]
    for k in range(K - 1, 0, -1):
        # every element already placed is larger than k
        out.insert(v[k - 1], k)
    return tuple(out)


def compute_z(u: Sequence[int], p: Sequence[int]) -> tuple[int, ...]:
    """Arrange the bag ``u`` in the order of ``p``, equal labels contiguous."""
    K = _check_permutation(p)
    pos = {x: i for i, x in enumerate(p)}
    for x in u:
        if not 1 <= x <= K:
            raise ValueError(f"intent {x} outside [1, {K}]")
    return tuple(sorted(u, key=pos.__getitem__))


def kendall_distance(a: Sequence, b: Sequence) -> int:
    """Minimum number of adjacent swaps turning ``a`` into ``b``.

    ``a`` and ``b`` may be any orderings of the same set of distinct items.
    """
    if len(a) != len(b):
        raise ValueError(f"size mismatch: {len(a)} vs {len(b)}")
    rank = {x: i + 1 for i, x in enumerate(b)}
    if len(rank) != len(b) or set(a) != set(rank):
        raise ValueError("kendall_distance needs two orderings of the same items")
    if len(a) < 2:
        return 0
    return sum(permutation_to_inversion([rank[x] for x in a]))


# -- numerics ---------------------------------------------------------------

@njit(cache=True)
def _log1mexp(x):
    # log(1 - exp(-x)) for x > 0
    if x < 0.6931471805599453:
        return math.log(-math.expm1(-x))
    return math.log1p(-math.exp(-x))


@njit(cache=True)
def log_psi(rho, n):
    """Log normalizer of a Mallows component with support ``0..n-1``.

    ``rho == 0`` gives the uniform limit ``log(n)``.
    """
    if n == 1:
        return 0.0
    if rho == 0.0:
        return math.log(n)
    return _log1mexp(n * rho) - _log1mexp(rho)


@njit(cache=True)
def gmm_logpmf_n(v, rho, n):
    return -rho * v - log_psi(rho, n)


@njit(cache=True)
def gmm0_logdens_n(rho, v_mean, nu, n):
    if not rho > 0.0:
        return -np.inf
    return -(rho * v_mean + log_psi(rho, n)) * nu


@njit(cache=True)
def _slice_accept(x0, x1, logy, L, R, w, v_mean, nu, n):
    # Neal (2003) acceptance test for the doubling procedure
    Lh, Rh = L, R
    differ = False
    while Rh - Lh > 1.1 * w:
        M = 0.5 * (Lh + Rh)
        if (x0 < M) != (x1 < M):
            differ = True
        if x1 < M:
            Rh = M
        else:
            Lh = M
        if differ and logy >= gmm0_logdens_n(Lh, v_mean, nu, n) \
                and logy >= gmm0_logdens_n(Rh, v_mean, nu, n):
            return False
    return True


@njit(cache=True)
def slice_rho_n(x0, v_mean, nu, n, rng):
    """One doubling slice-sampling transition for a dispersion parameter."""
    w = SLICE_WIDTH
    f0 = gmm0_logdens_n(x0, v_mean, nu, n)
    if not np.isfinite(f0):
        return x0
    logy = f0 + np.log(rng.random())

    L = x0 - w * rng.random()
    R = L + w
    fL = gmm0_logdens_n(L, v_mean, nu, n)
    fR = gmm0_logdens_n(R, v_mean, nu, n)
    budget = SLICE_MAX_DOUBLINGS
    while budget > 0 and (logy < fL or logy < fR):
        if rng.random() < 0.5:
            L -= R - L
            fL = gmm0_logdens_n(L, v_mean, nu, n)
        else:
            R += R - L
            fR = gmm0_logdens_n(R, v_mean, nu, n)
        budget -= 1

    lo, hi = L, R
    for _ in range(_SLICE_MAX_SHRINK):
        x1 = lo + rng.random() * (hi - lo)
        if logy < gmm0_logdens_n(x1, v_mean, nu, n) and \
                _slice_accept(x0, x1, logy, L, R, w, v_mean, nu, n):
            return x1
        if x1 < x0:
            lo = x1
        else:
            hi = x1
    return x0


@njit(cache=True)
def inversion_to_perm_arr(v, out):
    """0-based ``inversion_to_permutation`` writing into ``out`` (length K)."""
    K = out.shape[0]
    out[0] = K - 1
    size = 1
    for k in range(K - 2, -1, -1):
        pos = v[k]
        for i in range(size, pos, -1):
            out[i] = out[i - 1]
        out[pos] = k
        size += 1


@njit(cache=True)
def perm_to_inversion_arr(p, out):
    K = p.shape[0]
    for i in range(K):
        x = p[i]
        if x < K - 1:
            c = 0
            for j in range(i):
                if p[j] > x:
                    c += 1
            out[x] = c


# -- public Mallows API -----------------------------------------------------

def _support(k: int, K: int) -> int:
    if not 1 <= k <= K - 1:
        raise ValueError(f"component index {k} outside [1, {K - 1}]")
    return K - k + 1


def gmm_log_pmf(v_k: int, rho_k: float, k: int, K: int) -> float:
    """Log pmf of inversion component ``k`` (1-based) with dispersion ``rho_k``.

    ``rho_k == 0`` is the uniform limit used by the uniform-order variant.
    """
    n = _support(k, K)
    if not 0 <= v_k <= n - 1:
        raise ValueError(f"v_k = {v_k} outside support [0, {n - 1}]")
    if rho_k < 0:
        raise ValueError("rho_k must be >= 0")
    return gmm_logpmf_n(float(v_k), float(rho_k), n)


def gmm_mean(rho: float, n: int) -> float:
    """Mean inversion count of a component with support ``0..n-1``."""
    if rho == 0:
        return (n - 1) / 2.0
    return 1.0 / math.expm1(rho) - n / math.expm1(n * rho)


def prior_inversion_mean(rho0: float, k: int, K: int) -> float:
    """Prior mean inversion whose maximum-likelihood dispersion is ``rho0``."""
    if not rho0 > 0:
        raise ValueError("rho0 must be > 0")
    return gmm_mean(rho0, _support(k, K))


def gmm0_log_density(rho_k: float, v_mean: float, nu: float, k: int, K: int) -> float:
    """Unnormalized log density of the conjugate prior/posterior over ``rho_k``."""
    if not rho_k > 0:
        raise ValueError("rho_k must be > 0")
    return gmm0_logdens_n(float(rho_k), float(v_mean), float(nu), _support(k, K))


def slice_sample_rho(current: float, v_mean: float, nu: float, k: int, K: int,
                     rng: np.random.Generator) -> float:
    if not current > 0:
        raise ValueError("current must be > 0")
    return slice_rho_n(float(current), float(v_mean), float(nu), _support(k, K), rng)


def sample_gmm0(v_mean: float, nu: float, k: int, K: int, rng: np.random.Generator,
                grid_size: int = 20001) -> float:
    """Exact-up-to-grid draw from the conjugate density by inverse CDF."""
    n = _support(k, K)
    f = lambda r: gmm0_logdens_n(r, v_mean, nu, n)
    hi, peak = 1.0, f(1.0)
    while True:
        fh = f(hi)
        peak = max(peak, fh)
        if fh < peak - 40.0 and f(2 * hi) < fh:
            break
        hi *= 2.0
    grid = np.linspace(0.0, hi, grid_size)[1:]
    logd = np.array([f(r) for r in grid])
    dens = np.exp(logd - logd.max())
    cdf = np.cumsum(dens)
    cdf /= cdf[-1]
    i = int(np.searchsorted(cdf, rng.random()))
    return float(grid[min(i, len(grid) - 1)])


def sample_inversion(rho: Sequence[float], rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw inversion vectors with independent Mallows components.

    Returns shape ``(K-1,)`` or ``(size, K-1)``; ``rho_k == 0`` is uniform.
    """
    rho = np.asarray(rho, dtype=float)
    K = len(rho) + 1
    m = 1 if size is None else int(size)
    out = np.empty((m, K - 1), dtype=np.int64)
    for k in range(1, K):
        n = K - k + 1
        logp = np.array([gmm_logpmf_n(float(v), rho[k - 1], n) for v in range(n)])
        p = np.exp(logp - logp.max())
        out[:, k - 1] = rng.choice(n, size=m, p=p / p.sum())
    return out[0] if size is None else out
