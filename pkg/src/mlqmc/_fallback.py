"""Pure numpy versions of the compiled kernels in ``_core.pyx``."""
import numpy as np

_R0 = {1: 1.0, 2: 1.5, 3: 25.0 / 18.0, 4: 407.0 / 294.0}


def fwht_rows(a):
    m, n = a.shape
    s = 1.0 / np.sqrt(2.0)
    h = 1
    while h < n:
        v = a.reshape(m, n // (2 * h), 2, h)
        u = v[:, :, 0, :].copy()
        w = v[:, :, 1, :]
        v[:, :, 0, :] = (u + w) * s
        v[:, :, 1, :] = (u - w) * s
        h *= 2


def digital_net_ints(cols, i_start, i_end):
    d, m = cols.shape
    idx = np.arange(i_start, i_end, dtype=np.uint64)
    out = np.zeros((idx.size, d), dtype=np.uint64)
    for p in range(m):
        bit = ((idx >> np.uint64(p)) & np.uint64(1)).astype(bool)
        if bit.any():
            out[bit] ^= cols[:, p]
    return out


def _bit_length(z):
    v = z.copy()
    bl = np.zeros(z.shape, dtype=np.int64)
    for s in (32, 16, 8, 4, 2, 1):
        big = (v >> np.uint64(s)) != 0
        bl[big] += s
        v[big] >>= np.uint64(s)
    bl += v != 0
    return bl


def _dsi_nonzero(z, t, alpha):
    beta = (t + 1 - _bit_length(z)).astype(np.float64)
    x = np.ldexp(z.astype(np.float64), -t)
    t1 = np.ldexp(1.0, -beta.astype(np.int64))
    if alpha == 1:
        return 1.0 - 3.0 * t1
    if alpha == 2:
        return -1.0 - beta * x + 2.5 * (1.0 - t1)
    t2 = t1 * t1
    if alpha == 3:
        return -1.0 + beta * x * x - 5.0 * (1.0 - t1) * x + 43.0 / 18.0 * (1.0 - t2)
    t3 = t2 * t1
    s = np.zeros(z.shape)
    w = 1.0
    for a in range(1, t + 1):
        bit = ((z >> np.uint64(t - a)) & np.uint64(1)).astype(bool)
        s[bit] += w
        w *= 0.125
    return (-1.0 - 2.0 / 3.0 * beta * x * x * x + 5.0 * (1.0 - t1) * x * x
            - 43.0 / 9.0 * (1.0 - t2) * x + 701.0 / 294.0 * (1.0 - t3)
            - beta / 24.0 * s)


def dsi_values(z, t, alphas):
    n, d = z.shape
    out = np.empty((len(alphas), n, d))
    nz = z != 0
    for q, alpha in enumerate(alphas):
        vals = np.full((n, d), _R0[alpha])
        if nz.any():
            vals[nz] = _dsi_nonzero(z[nz], t, alpha)
        out[q] = vals
    return out


def product_logcol(rt, beta, eta):
    f = 1.0 + eta * np.tensordot(beta, rt, axes=1)
    sign = np.where((f < 0).sum(axis=1) % 2 == 1, -1.0, 1.0)
    with np.errstate(divide="ignore"):
        logabs = np.log(np.abs(f)).sum(axis=1)
    return logabs, sign


def product_grad(rt, beta, eta, kcol, v):
    r = np.tensordot(beta, rt, axes=1)
    f = 1.0 + eta * r
    f = np.where(np.abs(f) < 1e-300, 1e-300, f)
    c = (v * kcol)[:, None] * eta / f
    g_rho = (c * r).sum(axis=0)
    g_beta = np.einsum("ij,qij->q", c, rt)
    return g_rho, g_beta


def thomas_rows(lower, diag, upper, rhs):
    m, n = diag.shape
    cp = np.empty((m, n))
    x = np.empty((m, n))
    den = diag[:, 0].copy()
    if not np.all(den > 0):
        raise ArithmeticError("nonpositive pivot in tridiagonal solve")
    cp[:, 0] = upper[:, 0] / den
    x[:, 0] = rhs[:, 0] / den
    for i in range(1, n):
        den = diag[:, i] - lower[:, i] * cp[:, i - 1]
        if not np.all(den > 0):
            raise ArithmeticError("nonpositive pivot in tridiagonal solve")
        cp[:, i] = upper[:, i] / den
        x[:, i] = (rhs[:, i] - lower[:, i] * x[:, i - 1]) / den
    for i in range(n - 2, -1, -1):
        x[:, i] -= cp[:, i] * x[:, i + 1]
    return x
