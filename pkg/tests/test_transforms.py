import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlqmc import transforms as tr


def test_fwht_examples():
    np.testing.assert_allclose(tr.fwht([1.0, 1.0]), [np.sqrt(2), 0.0], atol=1e-15)
    np.testing.assert_allclose(tr.fwht(np.ones(8)), [np.sqrt(8)] + [0] * 7, atol=1e-14)


def test_fftbr_constant_vector():
    n = 16
    np.testing.assert_allclose(tr.fftbr(np.ones(n)), [np.sqrt(n)] + [0] * (n - 1), atol=1e-14)


def test_fftbr_hand_matrix_n4(rng):
    # rows k, columns in bit-reversed order (0, 2, 1, 3), entries exp(-2 pi i k rev(c) / 4) / 2
    E = 0.5 * np.array([[1, 1, 1, 1],
                        [1, -1, -1j, 1j],
                        [1, 1, -1, -1],
                        [1, -1, 1j, -1j]])
    a = rng.normal(size=4) + 1j * rng.normal(size=4)
    np.testing.assert_allclose(tr.fftbr(a), E @ a, atol=1e-14)
    np.testing.assert_allclose(tr.dense_matrix("fftbr", 4), E, atol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16, 32, 64])
def test_dense_equivalence(n, rng):
    a = rng.normal(size=n)
    np.testing.assert_allclose(tr.fwht(a), tr.dense_matrix("fwht", n) @ a, atol=1e-12)
    c = a + 1j * rng.normal(size=n)
    np.testing.assert_allclose(tr.fftbr(c), tr.dense_matrix("fftbr", n) @ c, atol=1e-12)
    np.testing.assert_allclose(tr.fftbr_adjoint(c), tr.dense_matrix("fftbr", n).T @ c, atol=1e-12)


@given(m=st.integers(0, 16), seed=st.integers(0, 2 ** 32))
def test_parseval_and_inverse(m, seed):
    r = np.random.default_rng(seed)
    n = 2 ** m
    a = r.normal(size=n)
    c = a + 1j * r.normal(size=n)
    fa = tr.fwht(a)
    assert np.isclose(np.linalg.norm(fa), np.linalg.norm(a), rtol=1e-12)
    assert np.isclose(np.linalg.norm(tr.fftbr(c)), np.linalg.norm(c), rtol=1e-12)
    np.testing.assert_allclose(tr.fwht(fa), a, atol=1e-12 * max(1.0, np.abs(a).max()))
    np.testing.assert_allclose(tr.ifftbr(tr.fftbr(c)), c, atol=1e-12 * max(1.0, np.abs(c).max()))


def test_round_trip_n64(rng):
    c = rng.normal(size=64) + 1j * rng.normal(size=64)
    assert np.max(np.abs(tr.ifftbr(tr.fftbr(c)) - c)) <= 1e-12


def test_inplace_buffers(rng):
    a = rng.normal(size=(3, 32))
    ref = tr.fwht(a)
    buf = a.copy()
    assert tr.fwht(buf, out=buf) is buf
    np.testing.assert_allclose(buf, ref)
    out = np.empty_like(a)
    tr.fwht(a, out=out)
    np.testing.assert_allclose(out, ref)
    with pytest.raises(ValueError):
        tr.fwht(a, out=np.empty((3, 16)))
    cbuf = np.empty(32, dtype=complex)
    tr.fftbr(a[0], out=cbuf)
    np.testing.assert_allclose(cbuf, tr.fftbr(a[0]))


@pytest.mark.parametrize("f", [tr.fwht, tr.fftbr, tr.ifftbr])
def test_rejects_non_power_of_two(f):
    with pytest.raises(ValueError):
        f(np.ones(12))


@pytest.mark.parametrize("f", [tr.fwht, tr.fftbr])
def test_runtime_subquadratic(f, rng):
    # Doubling n must cost at most 3x for n >= 2^14. Sizes are interleaved and
    # the best of many repetitions kept so that a busy machine cannot fake a
    # superlinear trend; the fitted log-log slope is what is checked.
    ms = np.arange(14, 18)
    data = [rng.normal(size=2 ** m) for m in ms]
    best = np.full(ms.size, np.inf)
    for _ in range(25):
        for k, a in enumerate(data):
            t0 = time.perf_counter()
            f(a)
            best[k] = min(best[k], time.perf_counter() - t0)
    slope = np.polyfit(ms, np.log2(best), 1)[0]
    assert slope <= np.log2(3.0)
