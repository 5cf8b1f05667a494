# cython: language_level=3
"""Compiled inner loops.

Every function here has a numpy twin in ``_fallback.py`` with the same
signature and semantics; ``_backend`` picks one at import.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, sqrt, ldexp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef double _R0_2 = 1.5
cdef double _R0_3 = 25.0 / 18.0
cdef double _R0_4 = 407.0 / 294.0


def fwht_rows(double[:, ::1] a):
    """Orthonormal Walsh-Hadamard transform of every row of ``a``, in place."""
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1]
    cdef Py_ssize_t r, h, i, j
    cdef double u, v
    cdef double s = 1.0 / sqrt(2.0)
    for r in range(m):
        h = 1
        while h < n:
            i = 0
            while i < n:
                for j in range(i, i + h):
                    u = a[r, j]
                    v = a[r, j + h]
                    a[r, j] = (u + v) * s
                    a[r, j + h] = (u - v) * s
                i += 2 * h
            h *= 2


def digital_net_ints(const uint64_t[:, ::1] cols, uint64_t i_start, uint64_t i_end):
    """Unshifted digital net integers for indices ``i_start <= i < i_end``.

    ``cols`` has shape (d, m). Uses the prefix-XOR update z_i = z_{i-1} ^ P_{tz(i)}
    where tz is the number of trailing zeros of i.
    """
    cdef Py_ssize_t d = cols.shape[0], m = cols.shape[1]
    cdef Py_ssize_t n = <Py_ssize_t>(i_end - i_start)
    out = np.zeros((n, d), dtype=np.uint64)
    cdef uint64_t[:, ::1] z = out
    if n == 0:
        return out
    prefix_arr = np.zeros((d, m), dtype=np.uint64)
    cdef uint64_t[:, ::1] pre = prefix_arr
    cdef Py_ssize_t j, p, k
    cdef uint64_t acc, i, bits
    for j in range(d):
        acc = 0
        for p in range(m):
            acc ^= cols[j, p]
            pre[j, p] = acc
    # first row directly
    for j in range(d):
        acc = 0
        bits = i_start
        p = 0
        while bits:
            if bits & 1:
                acc ^= cols[j, p]
            bits >>= 1
            p += 1
        z[0, j] = acc
    for k in range(1, n):
        i = i_start + k
        p = 0
        bits = i
        while (bits & 1) == 0:
            bits >>= 1
            p += 1
        for j in range(d):
            z[k, j] = z[k - 1, j] ^ pre[j, p]
    return out


cdef inline int _bit_length(uint64_t v) nogil:
    cdef int b = 0
    while v:
        v >>= 1
        b += 1
    return b


cdef inline double _dsi_one(uint64_t z, int t, int alpha) nogil:
    cdef int beta, a
    cdef double x, t1, t2, t3, s, w
    if z == 0:
        if alpha == 1:
            return 1.0
        elif alpha == 2:
            return _R0_2
        elif alpha == 3:
            return _R0_3
        return _R0_4
    beta = t + 1 - _bit_length(z)
    x = ldexp(<double>z, -t)
    t1 = ldexp(1.0, -beta)
    if alpha == 1:
        return 1.0 - 3.0 * t1
    if alpha == 2:
        return -1.0 - beta * x + 2.5 * (1.0 - t1)
    t2 = t1 * t1
    if alpha == 3:
        return -1.0 + beta * x * x - 5.0 * (1.0 - t1) * x + 43.0 / 18.0 * (1.0 - t2)
    t3 = t2 * t1
    s = 0.0
    w = 1.0
    for a in range(1, t + 1):
        if (z >> (t - a)) & 1:
            s += w
        w *= 0.125
    return (-1.0 - 2.0 / 3.0 * beta * x * x * x + 5.0 * (1.0 - t1) * x * x
            - 43.0 / 9.0 * (1.0 - t2) * x + 701.0 / 294.0 * (1.0 - t3)
            - beta / 24.0 * s)


def dsi_values(const uint64_t[:, ::1] z, int t, alphas):
    """Univariate DSI kernel values, shape (len(alphas), n, d)."""
    cdef Py_ssize_t n = z.shape[0], d = z.shape[1]
    cdef Py_ssize_t na = len(alphas)
    out = np.empty((na, n, d), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t q, i, j
    cdef int alpha
    for q in range(na):
        alpha = alphas[q]
        for i in range(n):
            for j in range(d):
                o[q, i, j] = _dsi_one(z[i, j], t, alpha)
    return out


def product_logcol(const double[:, :, ::1] rt, const double[::1] beta, const double[::1] eta):
    """log|prod_j (1 + eta_j sum_a beta_a rt[a,i,j])| and its sign, per row i."""
    cdef Py_ssize_t na = rt.shape[0], n = rt.shape[1], d = rt.shape[2]
    logabs_arr = np.empty(n, dtype=np.float64)
    sign_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] la = logabs_arr
    cdef double[::1] sg = sign_arr
    cdef Py_ssize_t i, j, q
    cdef double r, f, acc, s
    for i in range(n):
        acc = 0.0
        s = 1.0
        for j in range(d):
            r = 0.0
            for q in range(na):
                r += beta[q] * rt[q, i, j]
            f = 1.0 + eta[j] * r
            if f < 0:
                s = -s
                f = -f
            acc += log(f)
        la[i] = acc
        sg[i] = s
    return logabs_arr, sign_arr


def product_grad(const double[:, :, ::1] rt, const double[::1] beta, const double[::1] eta,
                 const double[::1] kcol, const double[::1] v):
    """Contract ``v`` with the derivatives of the normalised kernel column.

    ``kcol`` is the (possibly rescaled) column prod_j f_ij. Returns
    (g_rho, g_beta) with g_rho[j] = sum_i v_i dK_i/dlog(eta_j) and
    g_beta[a] = sum_i v_i dK_i/dbeta_a.
    """
    cdef Py_ssize_t na = rt.shape[0], n = rt.shape[1], d = rt.shape[2]
    g_rho_arr = np.zeros(d, dtype=np.float64)
    g_beta_arr = np.zeros(na, dtype=np.float64)
    cdef double[::1] g_rho = g_rho_arr
    cdef double[::1] g_beta = g_beta_arr
    cdef Py_ssize_t i, j, q
    cdef double r, f, c, vk
    for i in range(n):
        vk = v[i] * kcol[i]
        if vk == 0.0:
            continue
        for j in range(d):
            r = 0.0
            for q in range(na):
                r += beta[q] * rt[q, i, j]
            f = 1.0 + eta[j] * r
            if fabs(f) < 1e-300:
                f = 1e-300
            c = vk * eta[j] / f
            g_rho[j] += c * r
            for q in range(na):
                g_beta[q] += c * rt[q, i, j]
    return g_rho_arr, g_beta_arr


def thomas_rows(const double[:, ::1] lower, const double[:, ::1] diag, const double[:, ::1] upper,
                const double[:, ::1] rhs):
    """Solve one tridiagonal system per row; lower[:, 0] and upper[:, -1] unused."""
    cdef Py_ssize_t m = diag.shape[0], n = diag.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] x = out
    cp_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] cp = cp_arr
    cdef Py_ssize_t r, i
    cdef double den
    for r in range(m):
        den = diag[r, 0]
        if not den > 0:
            raise ArithmeticError("nonpositive pivot in tridiagonal solve")
        cp[0] = upper[r, 0] / den
        x[r, 0] = rhs[r, 0] / den
        for i in range(1, n):
            den = diag[r, i] - lower[r, i] * cp[i - 1]
            if not den > 0:
                raise ArithmeticError("nonpositive pivot in tridiagonal solve")
            cp[i] = upper[r, i] / den
            x[r, i] = (rhs[r, i] - lower[r, i] * x[r, i - 1]) / den
        for i in range(n - 2, -1, -1):
            x[r, i] -= cp[i] * x[r, i + 1]
    return out
