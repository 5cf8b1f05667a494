"""Recompute the frozen reference values in ``mlqmc.problems``.

Usage: python3 scripts/reference_values.py [--quick]

* Genz corner peak (d = 32): 1-D quadrature of the Laplace representation,
  cross-checked against inclusion-exclusion for d = 2 and against RQMC.
* Lookback option (L = 8, d = 1024) and elliptic PDE (L = 4): randomized QMC on
  the finest level with independent scrambles; the printed standard error is
  what the frozen ``*_SE`` constants record.
* Johnson SU mean: closed form checked against plain Monte Carlo.
"""
import argparse
import sys

import numpy as np

from mlqmc import problems as P
from mlqmc import sequences as S


def rqmc(fn, d, m, R, seed, chunk=2 ** 12):
    rng = np.random.default_rng(seed)
    base = S.default_net(d)
    means = []
    for _ in range(R):
        gen = S.lms_scramble(base, rng)
        shift = S.Shift.random(d, gen.t, rng)
        tot = 0.0
        for a in range(0, 2 ** m, chunk):
            tot += float(np.sum(fn(S.digital_net_points(gen, shift, a, min(2 ** m, a + chunk)))))
        means.append(tot / 2 ** m)
    means = np.array(means)
    return means.mean(), means.std(ddof=1) / np.sqrt(R)


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args(argv)
    q = args.quick

    c = P.genz_coefficients(2)
    print("genz d=2 quad %.15g  incl-excl %.15g" % (P.genz_integral(2), P.genz_inclusion_exclusion(c)))
    g32 = P.genz_integral(32)
    print("GENZ32_REFERENCE = %.16g" % g32)
    print("  rqmc check: %.12g +- %.2g" % rqmc(P.genz_corner_peak2, 32, 12 if q else 16, 16, 1))

    rng = np.random.default_rng(2)
    u = rng.standard_normal(10 ** 6 if q else 10 ** 8 // 10)
    print("JSU_MEAN = %.16g   mc check %.5f" % (P.JSU_MEAN, np.mean(np.sinh(u - 1.0))))

    m_e = 14 if q else 18
    print("ELLIPTIC_L4_REFERENCE = %.10g +- %.2g" % rqmc(lambda x: P.elliptic_level(4, x), 8, m_e, 16, 3))

    m_l = 10 if q else 14
    print("LOOKBACK_L8_REFERENCE = %.8g +- %.2g" % rqmc(
        lambda x: P.option_level("lookback", 8, x), 1024, m_l, 16, 4, chunk=2 ** 10))
    print("asian L8 closed form %.10g  rqmc %.8g +- %.2g" % (
        (P.geometric_asian_price(1024),) + rqmc(lambda x: P.option_level("asian", 8, x), 1024,
                                                   m_l, 16, 5, chunk=2 ** 10)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
