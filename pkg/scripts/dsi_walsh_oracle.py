"""Independent check of the DSI kernel closed forms against their Walsh series.

For alpha = 2, 3, 4 the closed forms equal R_alpha(x) = sum_{k >= 1}
2^(-mu_alpha(k)) wal_k(x), where mu_alpha(k) sums the (1-based) positions of
the alpha most significant set bits of k. For alpha = 1 the zero-mean form
1 - 3 t_1(x) has coefficients 2 * 4^(-mu_1(k)) (the same weights with exponent
2 mu_1 - 1); those decay fast enough for the series to converge at x = 0.
All coefficients are positive, so every kernel is positive semidefinite, and
the k = 0 coefficient is zero, so every kernel integrates to zero. The series is
truncated at k < 2^K and evaluated on the grid x = i / 2^K with one fast
Walsh-Hadamard transform. The truncation error is O(2^-K), so the printed
differences should shrink by about 2 for each extra bit of K.

Usage: python3 scripts/dsi_walsh_oracle.py [K ...]
"""
import sys

import numpy as np

from mlqmc.kernels import DSI_R0, dsi_univariate


def mu(alpha, K):
    k = np.arange(1 << K, dtype=np.int64)
    out = np.zeros(k.size)
    rest = k.copy()
    for _ in range(alpha):
        a = np.zeros(k.size, dtype=np.int64)
        nz = rest > 0
        a[nz] = np.floor(np.log2(rest[nz])).astype(np.int64) + 1
        out += a
        rest = np.where(nz, rest - (1 << np.maximum(a - 1, 0)), 0)
    return out


def walsh_series(alpha, K):
    """Series values at x = i / 2^K, i = 0 .. 2^K - 1 (index i, natural order)."""
    c = 2.0 ** (1 - 2 * mu(1, K)) if alpha == 1 else 2.0 ** -mu(alpha, K)
    c[0] = 0.0
    # wal_k(x) = (-1)^(sum_a k_{a-1} x_a): with x = i / 2^K the digit x_a is
    # bit K - a of i, so the series is an unnormalized Hadamard transform of c
    # indexed by the bit-reversed k.
    rev = np.array([int(format(j, f"0{K}b")[::-1], 2) for j in range(1 << K)])
    a = c[rev].copy()
    h = 1
    while h < a.size:
        a = a.reshape(-1, 2 * h)
        u, v = a[:, :h].copy(), a[:, h:].copy()
        a[:, :h], a[:, h:] = u + v, u - v
        a = a.reshape(-1)
        h *= 2
    return a


def main(Ks):
    for K in Ks:
        x = np.arange(1 << K, dtype=np.uint64)
        for alpha in (1, 2, 3, 4):
            s = walsh_series(alpha, K)
            r = dsi_univariate(alpha, x, t=K)
            print(f"K={K:2d} alpha={alpha}: max|closed form - series| = "
                  f"{np.max(np.abs(r - s)):.3e}   series(0) = {s[0]:.10f}   "
                  f"frozen R(0) = {DSI_R0[alpha]:.10f}   mean = {s.mean():+.2e}")


if __name__ == "__main__":
    main([int(a) for a in sys.argv[1:]] or [12, 14, 16])
