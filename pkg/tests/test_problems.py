import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from mlqmc import problems as P
from mlqmc import sequences as seq


def test_inv_normal_cdf_examples():
    assert P.inv_normal_cdf(0.5) == 0.0
    assert P.inv_normal_cdf(0.975) == pytest.approx(1.959964, abs=5e-7)
    for bad in (0.0, 1.0, -0.1, 1.5, np.nan):
        with pytest.raises(ValueError):
            P.inv_normal_cdf(bad)


def test_inv_normal_cdf_against_mpmath():
    mp.mp.dps = 30
    ps = np.concatenate([np.logspace(-12, -1, 23), np.linspace(0.1, 0.9, 17),
                         1 - np.logspace(-1, -12, 23)])
    ref = np.array([float(mp.sqrt(2) * mp.erfinv(2 * mp.mpf(p) - 1)) for p in ps])
    assert np.max(np.abs(P.inv_normal_cdf(ps) - ref)) <= 1e-9


@given(st.floats(1e-12, 1 - 1e-12))
def test_inv_normal_cdf_round_trip(p):
    assert P.normal_cdf(P.inv_normal_cdf(p)) == pytest.approx(p, abs=1e-8)


def test_sumxex_examples():
    assert P.sumxex(np.zeros((1, 5)))[0] == -5
    assert P.sumxex(np.ones((1, 5)))[0] == pytest.approx(-5 + 5 * np.e)


def test_ridge_weights():
    for kind in ("sparse", "equal"):
        assert np.sum(P.ridge_weights(32, kind) ** 2) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        P.ridge_weights(4, "dense")


def test_pl_constant_below_kink():
    phi1 = float(mp.npdf(1))
    below = P.pl_payoff(np.array([-3.0, 0.0, 1.0]))
    np.testing.assert_allclose(below, -phi1 + float(mp.ncdf(-1)), rtol=1e-14)


def test_pl_and_jsu_means_by_quadrature():
    mp.mp.dps = 30
    pl = mp.quad(lambda u: (max(u - 1, 0) - mp.npdf(1) + mp.ncdf(-1)) * mp.npdf(u), [-mp.inf, 1, mp.inf])
    assert abs(pl) < 1e-20
    jsu_mean = mp.quad(lambda u: mp.sinh(u - 1) * mp.npdf(u), [-mp.inf, mp.inf])
    assert P.JSU_MEAN == pytest.approx(float(jsu_mean), rel=1e-14)


def test_genz_examples():
    assert P.genz_corner_peak2(np.zeros((1, 7)))[0] == 1.0
    c = P.genz_coefficients(2)
    dense, _ = integrate.dblquad(lambda y, x: (1 + c[0] * x + c[1] * y) ** -3, 0, 1, 0, 1,
                                 epsabs=1e-13, epsrel=1e-13)
    assert P.genz_inclusion_exclusion(c) == pytest.approx(dense, rel=1e-12)
    assert P.genz_integral(2) == pytest.approx(dense, rel=1e-12)
    assert P.genz_integral(32) == pytest.approx(P.GENZ32_REFERENCE, rel=1e-12)


def _rqmc_mean(f, d, m, R, seed=0):
    gen = seq.default_net(d)
    vals = []
    for r in range(R):
        rng = np.random.default_rng([seed, r])
        g = seq.lms_scramble(gen, rng)
        sh = seq.Shift.random(d, g.t, rng)
        tot = 0.0
        for a in range(0, 2 ** m, 2 ** 15):
            tot += np.sum(f(seq.points(g, sh, a, min(a + 2 ** 15, 2 ** m))))
        vals.append(tot / 2 ** m)
    return np.mean(vals), np.std(vals, ddof=1) / np.sqrt(R)


@pytest.mark.parametrize("name", sorted(P.SINGLE_LEVEL))
def test_single_level_means(name):
    prob = P.single_level(name)
    est, se = _rqmc_mean(lambda x: prob.evaluate(1, x), 32, 17, 8)
    assert abs(est - prob.reference) <= 3 * se + 1e-12


def test_brownian_factor():
    np.testing.assert_allclose(P.brownian_factor(1), [[1.0]])
    A = P.brownian_factor(8)
    t = np.arange(1, 9) / 8
    np.testing.assert_allclose(A @ A.T, np.minimum.outer(t, t), atol=1e-8)
    norms = np.linalg.norm(A, axis=0)
    assert np.all(np.diff(norms) <= 1e-12)
    assert np.all(A[0] > 0)


def test_asian_zero_volatility():
    spec = P.OptionSpec(sigma=0.0)
    x = np.random.default_rng(0).random((5, 16))
    got = P.option_level("asian", 2, x, spec)
    d = 16
    expect = max(100 * np.exp(0.05 * (d + 1) / (2 * d)) - 100, 0) * np.exp(-0.05)
    np.testing.assert_allclose(got, expect, rtol=1e-12)


def test_geometric_asian_closed_form():
    d = 16
    est, se = _rqmc_mean(lambda x: P.option_level("asian", 2, x), d, 14, 8)
    assert abs(est - P.geometric_asian_price(d)) <= 4 * se


@pytest.mark.parametrize("kind", ["asian", "lookback"])
@pytest.mark.parametrize("coupling", ["fine", "subset"])
def test_option_difference_deterministic(kind, coupling):
    x = np.random.default_rng(1).random((10, 64))
    a = P.option_difference(kind, 4, x, coupling=coupling)
    b = P.option_difference(kind, 4, x.copy(), coupling=coupling)
    np.testing.assert_array_equal(a, b)
    # level 1 has no coarse term
    np.testing.assert_array_equal(P.option_difference(kind, 1, x), P.option_level(kind, 1, x))


def test_option_problem_uses_leading_coordinates():
    prob = P.option_problem("lookback", L=3)
    x = np.random.default_rng(2).random((6, prob.d))
    np.testing.assert_array_equal(prob.evaluate(1, x), prob.evaluate(1, x[:, :prob.dims[0]]))
    assert prob.costs[-1] == 1.0
    np.testing.assert_allclose(prob.costs, [0.25, 0.5, 1.0])
    with pytest.raises(ValueError):
        P.option_difference("asian", 2, x, coupling="bridge")


def test_elliptic_zero_coefficient():
    x = np.full((1, 8), 0.5)
    for lv in range(1, 6):
        assert P.elliptic_level(lv, x)[0] == pytest.approx(0.125, abs=1e-14)


def test_elliptic_second_order_convergence():
    z = np.array([[0.7, -1.2, 0.4, 0.9, -0.3, 0.2, -0.8, 0.5]])
    ref = P._elliptic_q(z, 2 ** 14)[0]
    # meshes from 32 cells on, past the pre-asymptotic range
    errs = [abs(P._elliptic_q(z, 2 ** k)[0] - ref) for k in range(5, 10)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - 2) < 0.2)


def test_elliptic_levels_decay():
    prob = P.elliptic_problem()
    mu, sd = P.level_statistics(prob, n=2 ** 12)
    assert np.all(np.diff(sd) < 0)
    assert prob.costs.tolist() == [0.125, 0.25, 0.5, 1.0]


def test_thomas_rejects_bad_pivot():
    with pytest.raises(ArithmeticError):
        P.core.thomas_rows(np.zeros((1, 3)), np.array([[1.0, -1.0, 1.0]]), np.zeros((1, 3)),
                           np.ones((1, 3)))


def test_get_problem():
    assert P.get_problem("constant", value=3.0).reference == 3.0
    assert P.get_problem("asian").L == 8
    assert P.get_problem("elliptic").L == 4
    with pytest.raises(ValueError):
        P.get_problem("darcy")
