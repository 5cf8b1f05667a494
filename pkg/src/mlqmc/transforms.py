"""Orthonormal fast transforms that diagonalise Gram matrices on LD designs.

``fwht`` pairs with digital nets (XOR structure) and ``fftbr`` with rank-1
lattices in radical-inverse order. Both use the orthonormal scaling, so the
eigenvalues of a structured Gram matrix are ``sqrt(n) * transform(K[:, 0])``.
"""
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from ._backend import core


def _log2_exact(n):
    if n < 1 or n & (n - 1):
        raise ValueError(f"length must be a power of 2, got {n}")
    return n.bit_length() - 1


def fwht(a, out=None):
    """Orthonormal fast Walsh-Hadamard transform along the last axis.

    Parameters
    ----------
    a : array_like, shape (..., n)
        Real input with ``n`` a power of 2.
    out : ndarray, optional
        C-contiguous float64 buffer of the same shape; may be ``a`` itself for an
        in-place transform.

    Returns
    -------
    ndarray
        The transform. Applying it twice returns the input.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[-1]
    _log2_exact(n)
    if out is None:
        out = np.array(a, dtype=np.float64, order="C", copy=True)
    elif out is not a:
        if out.shape != a.shape or out.dtype != np.float64 or not out.flags.c_contiguous:
            raise ValueError("out must be a C-contiguous float64 array shaped like a")
        out[...] = a
    if not out.flags.c_contiguous:
        raise ValueError("in-place transform needs a C-contiguous buffer")
    if n > 1:
        core.fwht_rows(out.reshape(-1, n))
    return out


@lru_cache(maxsize=64)
def bit_reversal_permutation(n):
    """Indices ``rev(i)`` reversing the ``log2(n)`` low bits of each ``i < n``."""
    m = _log2_exact(n)
    idx = np.arange(n, dtype=np.int64)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(m):
        rev |= ((idx >> b) & 1) << (m - 1 - b)
    rev.flags.writeable = False
    return rev


def fftbr(a, out=None):
    """Orthonormal DFT of a vector given in bit-reversed (radical-inverse) order.

    The input is reordered to natural order and passed to scipy's FFT with
    ``norm="ortho"``; the output is in natural frequency order. For lattice
    points in radical-inverse order this is the map that diagonalises the
    shift-invariant Gram matrix.
    """
    a = np.asarray(a)
    n = a.shape[-1]
    rev = bit_reversal_permutation(n)
    res = sfft.fft(a[..., rev], axis=-1, norm="ortho")
    if out is not None:
        out[...] = res
        return out
    return res


def ifftbr(b, out=None):
    """Inverse of :func:`fftbr`: ``ifftbr(fftbr(a)) == a``."""
    b = np.asarray(b)
    n = b.shape[-1]
    rev = bit_reversal_permutation(n)
    res = np.empty(b.shape, dtype=np.complex128)
    res[..., rev] = sfft.ifft(b, axis=-1, norm="ortho")
    if out is not None:
        out[...] = res
        return out
    return res


def fftbr_adjoint(w):
    """Apply the transpose (not conjugate transpose) of the ``fftbr`` matrix."""
    w = np.asarray(w)
    n = w.shape[-1]
    rev = bit_reversal_permutation(n)
    return sfft.fft(w, axis=-1, norm="ortho")[..., rev]


def dense_matrix(kind, n):
    """Explicit transform matrix ``Ebar`` so that ``transform(a) == Ebar @ a``.

    Built entry by entry from the definitions; intended for tests on small n.
    """
    _log2_exact(n)
    if kind == "fwht":
        i = np.arange(n)
        pc = np.vectorize(lambda v: bin(v).count("1"))(i[:, None] & i[None, :])
        return (-1.0) ** pc / np.sqrt(n)
    if kind == "fftbr":
        rev = bit_reversal_permutation(n)
        k = np.arange(n)
        return np.exp(-2j * np.pi * np.outer(k, rev) / n) / np.sqrt(n)
    raise ValueError(f"unknown transform kind {kind!r}")
