# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernels: the fast backend.

Bit-compatible twin of _kernels_py: same counter-based stream, same
inverse-CDF binomial with binary-exponentiation pmf seed, same operation
order in every floating-point expression.  Inner loops run without the GIL
so replica-level threading scales.
"""

import numpy as np

from .errors import DegenerateDenominator, NotStochastic

from libc.math cimport exp, fabs

BACKEND_NAME = "cython"

RATE_CONSTANT = 0
RATE_LOGISTIC = 1
MECH_AFFINE = 0
MECH_LUX3 = 1

cdef enum:
    _RATE_LOGISTIC_C = 1
    _MECH_AFFINE_C = 0

ctypedef unsigned long long u64
ctypedef long long i64

cdef u64 _GOLDEN = <u64>0x9E3779B97F4A7C15
cdef u64 _C_SEED = <u64>0xA0761D6478BD642F
cdef u64 _C_STEP = <u64>0xC2B2AE3D27D4EB4F
cdef u64 _C_LANE = <u64>0x165667B19E3779F9
cdef double _INV53 = 1.0 / 9007199254740992.0


cdef inline u64 _mix64(u64 z) noexcept nogil:
    z ^= z >> 30
    z *= <u64>0xBF58476D1CE4E5B9
    z ^= z >> 27
    z *= <u64>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline u64 _stream_key(u64 seed, u64 replica, u64 step, u64 lane) noexcept nogil:
    cdef u64 h = _mix64(seed ^ _C_SEED)
    h = _mix64(h + replica * _GOLDEN)
    h = _mix64(h + step * _C_STEP)
    h = _mix64(h + lane * _C_LANE)
    return h


cdef inline double _uniform(u64 key, u64 draw) noexcept nogil:
    cdef u64 x = _mix64(key + (draw + 1) * _GOLDEN)
    return <double>(x >> 11) * _INV53


cdef double _powi(double base, i64 n) noexcept nogil:
    cdef double result = 1.0
    cdef double b = base
    while True:
        if n & 1:
            result *= b
        n >>= 1
        if n == 0:
            break
        b *= b
    return result


cdef i64 _binv(i64 m, double p, double u) noexcept nogil:
    # returns -1 on pmf underflow (outside the supported m*p regime)
    cdef double q = 1.0 - p
    cdef double s = p / q
    cdef double pf = _powi(q, m)
    cdef double cdf
    cdef i64 k = 0
    if pf == 0.0:
        return -1
    cdf = pf
    while u > cdf and k < m:
        k += 1
        pf *= s * <double>(m - k + 1) / <double>k
        cdf += pf
    return k


cdef i64 _binomial(i64 m, double p, double u) noexcept nogil:
    cdef i64 kc
    if m <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return m
    if p <= 0.5:
        return _binv(m, p, u)
    kc = _binv(m, 1.0 - p, 1.0 - u)
    if kc < 0:
        return -1
    return m - kc


cdef int _multinomial_into(i64 *out, i64 n, const double *probs, Py_ssize_t r, u64 key) noexcept nogil:
    cdef i64 rem = n
    cdef double tail = 1.0
    cdef double pj, pc
    cdef i64 d
    cdef Py_ssize_t j
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
        d = _binomial(rem, pc, _uniform(key, <u64>j))
        if d < 0:
            return -1
        out[j] += d
        rem -= d
        tail = tail - pj
    out[r - 1] += rem
    return 0


def multinomial_draw(n, probs, seed, replica, step, lane):
    """Standalone multinomial sample as an int64 vector."""
    cdef const double[::1] pv = np.ascontiguousarray(probs, dtype=np.float64)
    cdef Py_ssize_t r = pv.shape[0]
    out_arr = np.zeros(r, dtype=np.int64)
    cdef i64[::1] out = out_arr
    cdef int rc = _multinomial_into(
        &out[0], <i64>n, &pv[0], r,
        _stream_key(<u64>seed, <u64>replica, <u64>step, <u64>lane))
    if rc < 0:
        raise ValueError("binomial pmf underflow: m*min(p,1-p) too large for inversion")
    return out_arr


def step_counts_raw(counts, P, seed, replica, step):
    """One chain tick; lane i of the (seed, replica, step) stream drives type i."""
    cdef const i64[::1] cv = np.ascontiguousarray(counts, dtype=np.int64)
    cdef const double[:, ::1] pm = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t r = cv.shape[0]
    out_arr = np.zeros(r, dtype=np.int64)
    cdef i64[::1] out = out_arr
    cdef u64 sd = <u64>seed, rep = <u64>replica, st = <u64>step
    cdef Py_ssize_t i
    cdef int rc = 0
    with nogil:
        for i in range(r):
            if cv[i] == 0:
                continue
            rc = _multinomial_into(&out[0], cv[i], &pm[i, 0], r, _stream_key(sd, rep, st, <u64>i))
            if rc < 0:
                break
    if rc < 0:
        raise ValueError("binomial pmf underflow: m*min(p,1-p) too large for inversion")
    return out_arr


def sample_steps(counts, P, seed, step, n_samples, replica0):
    """n_samples one-tick transitions from a fixed (counts, P); sample j uses
    replica index replica0 + j."""
    cdef const i64[::1] cv = np.ascontiguousarray(counts, dtype=np.int64)
    cdef const double[:, ::1] pm = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t r = cv.shape[0]
    cdef Py_ssize_t ns = <Py_ssize_t>n_samples
    out_arr = np.zeros((ns, r), dtype=np.int64)
    cdef i64[:, ::1] out = out_arr
    cdef u64 sd = <u64>seed, st = <u64>step, rep0 = <u64>replica0
    cdef Py_ssize_t idx, i
    cdef int rc = 0
    with nogil:
        for idx in range(ns):
            for i in range(r):
                if cv[i] == 0:
                    continue
                rc = _multinomial_into(
                    &out[idx, 0], cv[i], &pm[i, 0], r,
                    _stream_key(sd, rep0 + <u64>idx, st, <u64>i))
                if rc < 0:
                    break
            if rc < 0:
                break
    if rc < 0:
        raise ValueError("binomial pmf underflow: m*min(p,1-p) too large for inversion")
    return out_arr


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

    Same contract as the pure-Python twin: tick k builds P = I + A(x_k, q_k)/N,
    draws the transitions, then advances the log price with the new mix and
    the old price.  Tables are indexed by tick.
    """
    cdef const i64[::1] c0 = np.ascontiguousarray(counts0, dtype=np.int64)
    cdef Py_ssize_t r = c0.shape[0]
    cdef Py_ssize_t K = <Py_ssize_t>n_ticks
    cdef const double[:, ::1] a_lo = np.ascontiguousarray(rate_a, dtype=np.float64)
    cdef const double[:, ::1] a_hi
    cdef int rmode = <int>rate_mode, mmode = <int>mech_mode
    if rmode == _RATE_LOGISTIC_C:
        a_hi = np.ascontiguousarray(rate_b, dtype=np.float64)
    else:
        a_hi = a_lo
    cdef double qmid = <double>rate_qmid, qscale = <double>rate_qscale
    cdef const double[::1] phi, psi, lf
    cdef const double[:, ::1] la, lb, ld
    if mmode == _MECH_AFFINE_C:
        phi = np.ascontiguousarray(mech_phi, dtype=np.float64)
        psi = np.ascontiguousarray(mech_psi, dtype=np.float64)
    else:
        la = np.ascontiguousarray(lux_alpha, dtype=np.float64)
        lb = np.ascontiguousarray(lux_beta, dtype=np.float64)
        ld = np.ascontiguousarray(lux_delta, dtype=np.float64)
        lf = np.ascontiguousarray(lux_logf, dtype=np.float64)
    cdef double blo = <double>b_lower

    counts_path = np.empty((K + 1, r), dtype=np.int64)
    q_path = np.empty(K + 1, dtype=np.float64)
    cdef i64[:, ::1] cp = counts_path
    cdef double[::1] qp = q_path
    row_buf = np.empty(r, dtype=np.float64)
    cdef double[::1] row = row_buf

    cdef u64 sd = <u64>seed, rep = <u64>replica
    cdef double nf = <double>N
    cdef double q = <double>q0
    cdef Py_ssize_t i, j, k
    cdef i64 ni
    cdef double sgm = 0.0, aij, pij, g, x1, x2, x3, a1, b1, h
    cdef int err = 0
    cdef Py_ssize_t err_tick = 0, err_i = 0
    cdef double err_val = 0.0

    for i in range(r):
        cp[0, i] = c0[i]
    qp[0] = q

    with nogil:
        for k in range(K):
            if rmode == _RATE_LOGISTIC_C:
                sgm = 1.0 / (1.0 + exp(-(q - qmid) / qscale))
            for i in range(r):
                cp[k + 1, i] = 0
            for i in range(r):
                ni = cp[k, i]
                if ni == 0:
                    continue
                for j in range(r):
                    if rmode == _RATE_LOGISTIC_C:
                        aij = a_lo[i, j] + sgm * (a_hi[i, j] - a_lo[i, j])
                    else:
                        aij = a_lo[i, j]
                    pij = aij / nf
                    if i == j:
                        pij = 1.0 + pij
                        if pij < 0.0:
                            err = 1
                            err_tick = k
                            err_i = i
                            err_val = pij
                            break
                    row[j] = pij
                if err:
                    break
                if _multinomial_into(&cp[k + 1, 0], ni, &row[0], r, _stream_key(sd, rep, <u64>k, <u64>i)) < 0:
                    err = 3
                    break
            if err:
                break

            if mmode == _MECH_AFFINE_C:
                g = phi[k + 1] * q + psi[k + 1]
            else:
                x1 = <double>cp[k + 1, 0] / nf
                x2 = <double>cp[k + 1, 1] / nf
                x3 = <double>cp[k + 1, 2] / nf
                a1 = la[0, k + 1]
                b1 = lb[0, k + 1]
                h = x1 * a1 + x2 * la[1, k + 1] * (1.0 + lb[1, k + 1]) + x3 * la[2, k + 1] * (1.0 + lb[2, k + 1])
                if not fabs(h) >= blo:
                    err = 2
                    err_tick = k + 1
                    err_val = h
                    break
                g = (
                    x1 * a1 * b1 * q
                    + (x1 * ld[0, k + 1] + x2 * ld[1, k + 1] + x3 * ld[2, k + 1] - x1 * a1 * b1 * lf[k + 1])
                ) / h
            q = q + g / nf
            qp[k + 1] = q

    if err == 1:
        raise NotStochastic(
            f"tick {err_tick}: diagonal entry 1 + a[{err_i}][{err_i}]/N = {err_val} < 0")
    if err == 2:
        raise DegenerateDenominator(
            f"tick {err_tick}: market-clearing denominator {err_val} below bound {blo}")
    if err == 3:
        raise ValueError("binomial pmf underflow: m*min(p,1-p) too large for inversion")
    return counts_path, q_path
