"""Pure-Python sampling kernels: the fallback backend.

Bit-compatible twin of the compiled extension ``_step_kernel``.  Every
floating-point expression here is written with the exact operation order the
C code uses, and the pmf seed (1-p)^m is computed by binary exponentiation so
that the vectorized numpy paths (whose SIMD exp differs from libm by an ulp)
reproduce the scalar results bit for bit.

The binomial sampler is exact inverse-CDF sampling with the small-tail
complement trick, so the cost per draw is O(m * min(p, 1-p)); the tick
kernels satisfy m*p = O(1) by construction (rates enter as A/N).
"""

from __future__ import annotations

import math

import numpy as np

from . import rng
from .errors import DegenerateDenominator, NotStochastic

BACKEND_NAME = "python"

RATE_CONSTANT = 0
RATE_LOGISTIC = 1
MECH_AFFINE = 0
MECH_LUX3 = 1


def _powi(base: float, n: int) -> float:
    """base**n for integer n >= 1 by binary exponentiation."""
    result = 1.0
    b = base
    while True:
        if n & 1:
            result *= b
        n >>= 1
        if n == 0:
            break
        b *= b
    return result


def _binv(m: int, p: float, u: float) -> int:
    """Inverse-CDF binomial draw; caller guarantees 0 < p <= 0.5, m >= 1."""
    q = 1.0 - p
    s = p / q
    pf = _powi(q, m)
    if pf == 0.0:
        raise ValueError("binomial pmf underflow: m*min(p,1-p) too large for inversion")
    cdf = pf
    k = 0
    while u > cdf and k < m:
        k += 1
        pf *= s * (m - k + 1) / k
        cdf += pf
    return k


def binomial_from_u(m: int, p: float, u: float) -> int:
    """Map one uniform to an exact Binomial(m, p) variate."""
    if m <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return m
    if p <= 0.5:
        return _binv(m, p, u)
    return m - _binv(m, 1.0 - p, 1.0 - u)


def multinomial_into(out, n, probs, key):
    """Add a Multinomial(n, probs) draw into out, consuming stream `key`.

    Sequential conditional-binomial decomposition: component j is binomial
    with the remaining trials and success probability probs[j] / tail.
    """
    r = len(probs)
    rem = n
    tail = 1.0
    for j in range(r - 1):
        if rem == 0:
            break
        pj = probs[j]
        if tail <= 0.0:
            pc = 1.0
        else:
            pc = pj / tail
        if pc > 1.0:
            pc = 1.0
        elif pc < 0.0:
            pc = 0.0
        d = binomial_from_u(rem, pc, rng.uniform(key, j))
        out[j] += d
        rem -= d
        tail = tail - pj
    out[r - 1] += rem


def multinomial_draw(n, probs, seed, replica, step, lane):
    """Standalone multinomial sample as an int64 vector."""
    r = len(probs)
    out = [0] * r
    multinomial_into(out, int(n), [float(p) for p in probs], rng.stream_key(seed, replica, step, lane))
    return np.array(out, dtype=np.int64)


def step_counts_raw(counts, P, seed, replica, step):
    """One chain tick: each type's cohort transitions independently.

    counts: int sequence of length r; P: (r, r) row-stochastic matrix.
    Lane i of the (seed, replica, step) stream drives type i's multinomial.
    """
    r = len(counts)
    rows = [[float(P[i][j]) for j in range(r)] for i in range(r)]
    out = [0] * r
    for i in range(r):
        ni = int(counts[i])
        if ni == 0:
            continue
        multinomial_into(out, ni, rows[i], rng.stream_key(seed, replica, step, i))
    return np.array(out, dtype=np.int64)


# -- vectorized batch sampling (replicas replica0 .. replica0+n_samples-1) --


def _powi_vec(base: float, n: np.ndarray) -> np.ndarray:
    """Elementwise base**n with per-element exponents, matching _powi bitwise."""
    n = n.astype(np.int64, copy=True)
    result = np.ones(n.shape, dtype=np.float64)
    b = base
    while True:
        odd = (n & 1) == 1
        if odd.any():
            result[odd] *= b
        n >>= 1
        if not (n > 0).any():
            break
        b *= b
    return result


def _binv_vec(m: np.ndarray, p: float, u: np.ndarray) -> np.ndarray:
    q = 1.0 - p
    s = p / q
    pf = _powi_vec(q, m)
    if np.any((pf == 0.0) & (m > 0)):
        raise ValueError("binomial pmf underflow: m*min(p,1-p) too large for inversion")
    cdf = pf.copy()
    k = np.zeros(m.shape, dtype=np.int64)
    kk = 0
    active = (u > cdf) & (kk < m)
    while active.any():
        kk += 1
        pf[active] *= (s * (m[active] - kk + 1)) / kk
        cdf[active] += pf[active]
        k[active] = kk
        active = active & (u > cdf) & (kk < m)
    return k


def _binomial_vec(m: np.ndarray, p: float, u: np.ndarray) -> np.ndarray:
    if p <= 0.0:
        return np.zeros(m.shape, dtype=np.int64)
    if p >= 1.0:
        return m.astype(np.int64, copy=True)
    if p <= 0.5:
        return _binv_vec(m, p, u)
    return m - _binv_vec(m, 1.0 - p, 1.0 - u)


def sample_steps(counts, P, seed, step, n_samples, replica0):
    """n_samples independent one-tick transitions from a fixed (counts, P).

    Sample j uses replica index replica0 + j, so results agree bitwise with
    n_samples separate step_counts_raw calls.
    """
    counts = np.asarray(counts, dtype=np.int64)
    P = np.asarray(P, dtype=np.float64)
    r = counts.shape[0]
    out = np.zeros((n_samples, r), dtype=np.int64)
    reps = np.arange(replica0, replica0 + n_samples, dtype=np.uint64)
    for i in range(r):
        ni = int(counts[i])
        if ni == 0:
            continue
        key = rng.stream_key_vec(seed, reps, step, i)
        rem = np.full(n_samples, ni, dtype=np.int64)
        tail = 1.0
        for j in range(r - 1):
            pj = float(P[i, j])
            if tail <= 0.0:
                pc = 1.0
            else:
                pc = pj / tail
            if pc > 1.0:
                pc = 1.0
            elif pc < 0.0:
                pc = 0.0
            d = _binomial_vec(rem, pc, rng.uniform_vec(key, j))
            out[:, j] += d
            rem -= d
            tail = tail - pj
        out[:, r - 1] += rem
    return out


# -- full chain kernel --


def simulate_chain(
    counts0,
    q0,
    N,
    n_ticks,
    seed,
    replica,
    rate_mode,
    rate_a,
    rate_b,
    rate_qmid,
    rate_qscale,
    mech_mode,
    mech_phi,
    mech_psi,
    lux_alpha,
    lux_beta,
    lux_delta,
    lux_logf,
    b_lower,
):
    """Simulate the N-agent chain for n_ticks ticks of size 1/N.

    Tick k: build P = I + A(x_k, q_k)/N, draw the type transitions, then
    advance the log price with the drift evaluated at the new mix and the
    old price.  Coefficient tables are indexed by tick (entry k holds the
    value at time k/N).

    Returns (counts_path[n_ticks+1, r] int64, q_path[n_ticks+1] float64).
    """
    counts0 = [int(c) for c in counts0]
    r = len(counts0)
    a_const = [[float(rate_a[i][j]) for j in range(r)] for i in range(r)]
    a_hi = [[float(rate_b[i][j]) for j in range(r)] for i in range(r)] if rate_mode == RATE_LOGISTIC else a_const
    phi = [float(v) for v in mech_phi] if mech_mode == MECH_AFFINE else None
    psi = [float(v) for v in mech_psi] if mech_mode == MECH_AFFINE else None
    if mech_mode == MECH_LUX3:
        la = [[float(v) for v in lux_alpha[i]] for i in range(3)]
        lb = [[float(v) for v in lux_beta[i]] for i in range(3)]
        ld = [[float(v) for v in lux_delta[i]] for i in range(3)]
        lf = [float(v) for v in lux_logf]

    counts_path = np.empty((n_ticks + 1, r), dtype=np.int64)
    q_path = np.empty(n_ticks + 1, dtype=np.float64)
    counts = list(counts0)
    q = float(q0)
    counts_path[0] = counts
    q_path[0] = q
    nf = float(N)

    row = [0.0] * r
    for k in range(n_ticks):
        if rate_mode == RATE_LOGISTIC:
            sgm = 1.0 / (1.0 + math.exp(-(q - rate_qmid) / rate_qscale))
        new_counts = [0] * r
        for i in range(r):
            ni = counts[i]
            if ni == 0:
                continue
            for j in range(r):
                if rate_mode == RATE_LOGISTIC:
                    aij = a_const[i][j] + sgm * (a_hi[i][j] - a_const[i][j])
                else:
                    aij = a_const[i][j]
                pij = aij / nf
                if i == j:
                    pij = 1.0 + pij
                    if pij < 0.0:
                        raise NotStochastic(
                            f"tick {k}: diagonal entry 1 + a[{i}][{i}]/N = {pij} < 0"
                        )
                row[j] = pij
            multinomial_into(new_counts, ni, row, rng.stream_key(seed, replica, k, i))
        counts = new_counts

        # price update at tick k+1 with the new mix and the old price
        if mech_mode == MECH_AFFINE:
            g = phi[k + 1] * q + psi[k + 1]
        else:
            x1 = counts[0] / nf
            x2 = counts[1] / nf
            x3 = counts[2] / nf
            a1 = la[0][k + 1]
            b1 = lb[0][k + 1]
            h = x1 * a1 + x2 * la[1][k + 1] * (1.0 + lb[1][k + 1]) + x3 * la[2][k + 1] * (1.0 + lb[2][k + 1])
            if not abs(h) >= b_lower:
                raise DegenerateDenominator(
                    f"tick {k + 1}: market-clearing denominator {h} below bound {b_lower}"
                )
            g = (
                x1 * a1 * b1 * q
                + (x1 * ld[0][k + 1] + x2 * ld[1][k + 1] + x3 * ld[2][k + 1] - x1 * a1 * b1 * lf[k + 1])
            ) / h
        q = q + g / nf
        counts_path[k + 1] = counts
        q_path[k + 1] = q
    return counts_path, q_path
