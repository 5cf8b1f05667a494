from math import pi

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlqmc import kernels as K
from mlqmc import sequences as seq
from mlqmc.kernels import KernelParams


def test_bernoulli_examples():
    assert K.bernoulli_poly(2, 0.0) == pytest.approx(1 / 6)
    assert K.bernoulli_poly(2, 0.5) == pytest.approx(-1 / 12)
    assert K.bernoulli_poly(4, 0.0) == pytest.approx(-1 / 30)
    assert K.bernoulli_poly(6, 0.0) == pytest.approx(1 / 42)
    assert K.bernoulli_poly(8, 0.0) == pytest.approx(-1 / 30)
    with pytest.raises(ValueError):
        K.bernoulli_poly(3, 0.0)


def test_si_examples():
    assert K.si_univariate(1, 0.0) == pytest.approx(pi ** 2 / 3)
    assert K.si_univariate(1, 0.5) == pytest.approx(-pi ** 2 / 6)


@pytest.mark.parametrize("alpha", [1, 2, 3, 4])
def test_si_integrates_to_zero(alpha):
    x = np.linspace(0.0, 1.0, 200_001)
    assert abs(np.trapezoid(K.si_univariate(alpha, x), x)) <= 1e-8


# --- DSI kernels against an independent Walsh-series oracle ----------------

def _mu(alpha, k):
    s = 0
    for _ in range(alpha):
        if not k:
            break
        a = k.bit_length()
        s += a
        k -= 1 << (a - 1)
    return s


def _walsh_series(alpha, bits):
    """R_alpha(i / 2^bits) for all i from the truncated Walsh expansion."""
    n = 1 << bits
    coef = np.zeros(n)
    for k in range(1, n):
        m = _mu(alpha, k)
        coef[k] = 2.0 ** (1 - 2 * m) if alpha == 1 else 2.0 ** -m
    out = np.zeros(n)
    x = np.arange(n)
    for k in range(1, n):
        # wal_k(x) = (-1)^(sum_a k_{a-1} x_a), digit x_a = bit (bits - a) of i
        par = np.zeros(n, dtype=np.int64)
        for a in range(1, bits + 1):
            if k >> (a - 1) & 1:
                par ^= (x >> (bits - a)) & 1
        out += coef[k] * (1 - 2 * par)
    return out


@pytest.mark.parametrize("alpha", [1, 2, 3, 4])
def test_dsi_matches_walsh_series(alpha):
    errs = []
    for bits in (8, 9):
        s = _walsh_series(alpha, bits)
        r = K.dsi_univariate(alpha, np.arange(1 << bits, dtype=np.uint64), t=bits)
        errs.append(np.max(np.abs(r - s)))
    # truncation error of the series is O(2^-bits): small and halving with each bit
    assert errs[1] <= 8 * 2.0 ** -9
    assert errs[1] <= 0.6 * errs[0]


def test_dsi_examples():
    # zero-mean alpha = 1 form: 1 - 3 t1, t1 = 1/2 at x = 1/2
    assert K.dsi_univariate(1, 0.5) == pytest.approx(-0.5)
    assert K.dsi_univariate(2, 0.5) == pytest.approx(-0.25)
    for alpha, r0 in K.DSI_R0.items():
        assert K.dsi_univariate(alpha, 0.0) == r0
    assert K.DSI_R0 == {1: 1.0, 2: 1.5, 3: 25 / 18, 4: 407 / 294}


def test_dsi_alpha1_limit_at_zero():
    tiny = np.uint64(1)
    assert K.dsi_univariate(1, tiny, t=52) == pytest.approx(K.DSI_R0[1], abs=1e-14)


def test_dsi_input_validation():
    with pytest.raises(ValueError):
        K.dsi_univariate(5, 0.5)
    with pytest.raises(ValueError):
        K.dsi_univariate(1, 1.0 / 3.0, t=10)
    with pytest.raises(ValueError):
        K.dsi_weighted([0, 0, 0, 0], 0.5)
    with pytest.raises(ValueError):
        K.dsi_weighted([1, -1, 0, 0], 0.5)


def test_dsi_weighted_examples():
    assert K.dsi_weighted([1, 0, 0, 0], 0.5) == pytest.approx(K.dsi_univariate(1, 0.5))


@given(b1=st.lists(st.floats(0, 10), min_size=4, max_size=4),
       b2=st.lists(st.floats(0, 10), min_size=4, max_size=4),
       x=st.integers(0, 2 ** 52 - 1))
def test_dsi_weighted_linear(b1, b2, x):
    if sum(b1) <= 0 or sum(b2) <= 0:
        return
    z = np.uint64(x)
    lhs = K.dsi_weighted(np.add(b1, b2), z)
    rhs = K.dsi_weighted(b1, z) + K.dsi_weighted(b2, z)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("kind", ["lattice", "net"])
def test_unit_integral(kind):
    gen = seq.default_generator(kind, 1)
    z = seq.points_ints(gen, None, 0, 2 ** 16)
    if kind == "lattice":
        vals = [K.si_univariate(1, seq.ints_to_floats(z, gen.t))]
    else:
        vals = K.core.dsi_values(z, gen.t, [1, 2, 3, 4])
    for v in vals:
        assert abs(np.mean(v)) <= 1e-3


# --- product kernel ---------------------------------------------------------

def _random_params(kind, d, r, alpha=1):
    eta = np.exp(r.uniform(-2, 1, size=d))
    gamma = float(np.exp(r.uniform(-1, 1)))
    if kind == "lattice":
        return KernelParams("si", gamma, eta, alpha=alpha)
    beta = r.uniform(0, 1, size=4)
    return KernelParams("dsi", gamma, eta, beta=beta)


def _design(kind, d, n, seed):
    gen = seq.default_generator(kind, d)
    r = np.random.default_rng(seed)
    if kind == "net":
        gen = seq.lms_scramble(gen, r)
    sh = seq.Shift.random(d, gen.t, r)
    return gen, seq.points_ints(gen, sh, 0, n), seq.points_ints(gen, None, 0, n)


@given(kind=st.sampled_from(["lattice", "net"]), d=st.integers(1, 4),
       m=st.integers(3, 6), seed=st.integers(0, 2 ** 32))
def test_gram_psd_and_symmetric(kind, d, m, seed):
    r = np.random.default_rng(seed)
    p = _random_params(kind, d, r)
    gen, x, _ = _design(kind, d, 2 ** m, seed)
    G = K.kernel_dense(p, x, x, kind, gen.t)
    np.testing.assert_array_equal(G, G.T)
    assert np.linalg.eigvalsh(G).min() >= -1e-8 * np.abs(G).max()


@pytest.mark.parametrize("alpha", [1, 2, 3, 4])
def test_gram_psd_each_dsi_order(alpha):
    beta = np.eye(4)[alpha - 1]
    p = KernelParams("dsi", 1.0, np.ones(3), beta=beta)
    gen, x, _ = _design("net", 3, 64, alpha)
    G = K.kernel_dense(p, x, x, "net", gen.t)
    assert np.linalg.eigvalsh(G).min() >= -1e-8 * np.abs(G).max()


@given(kind=st.sampled_from(["lattice", "net"]), seed=st.integers(0, 2 ** 32))
def test_shift_invariance_bit_exact(kind, seed):
    r = np.random.default_rng(seed)
    p = _random_params(kind, 3, r)
    gen, x, z = _design(kind, 3, 16, seed)
    np.testing.assert_array_equal(K.kernel_dense(p, x, x, kind, gen.t),
                                  K.kernel_dense(p, z, z, kind, gen.t))


@pytest.mark.parametrize("kind", ["lattice", "net"])
def test_kernel_column_against_dense(kind, rng):
    p = _random_params(kind, 2, rng)
    gen, x, z = _design(kind, 2, 8, 7)
    col = K.kernel_column(p, x, kind, gen.t)
    dense = K.kernel_dense(p, x, x[:1], kind, gen.t)[:, 0]
    np.testing.assert_allclose(col, dense, rtol=1e-14)
    np.testing.assert_array_equal(col, K.kernel_column(p, z, kind, gen.t))


@pytest.mark.parametrize("kind", ["lattice", "net"])
def test_kernel_column_limits(kind, rng):
    p = _random_params(kind, 2, rng)
    gen, x, _ = _design(kind, 2, 8, 3)
    r0 = K.si_univariate(1, 0.0) if kind == "lattice" else float(K.dsi_weighted(p.beta, 0.0))
    diag = K.kernel_column(p, x[:1], kind, gen.t)
    assert diag[0] == pytest.approx(p.gamma * np.prod(1 + p.eta * r0))
    flat = p.with_(eta=np.full(2, 1e-12))
    np.testing.assert_allclose(K.kernel_column(flat, x, kind, gen.t), p.gamma, rtol=1e-10)


def test_pairing_and_param_validation():
    p = KernelParams("si", 1.0, np.ones(2))
    z = np.zeros((2, 2), dtype=np.uint64)
    with pytest.raises(ValueError):
        K.kernel_column(p, z, "net", 52)
    with pytest.raises(ValueError):
        KernelParams("si", 0.0, np.ones(2))
    with pytest.raises(ValueError):
        KernelParams("si", 1.0, np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        KernelParams("dsi", 1.0, np.ones(2), beta=np.zeros(4))
    with pytest.raises(ValueError):
        KernelParams("si", 1.0, np.ones(2), alpha=5)
    with pytest.raises(ValueError):
        KernelParams("matern", 1.0, np.ones(2))
