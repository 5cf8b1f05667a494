"""Test integrands: single-level functions, option pricing and a 1-D elliptic PDE.

Every evaluator takes an ``(n, k)`` array of uniforms with ``k >= d_level`` and
uses the leading ``d_level`` columns.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from math import e, factorial, sinh, sqrt

import numpy as np
from scipy import integrate, special

from ._backend import core

# Frozen reference values; scripts/reference_values.py recomputes them.
JSU_MEAN = -sqrt(e) * sinh(1.0)
GENZ32_REFERENCE = 0.04876581000892841
LOOKBACK_L8_REFERENCE = 16.910731
LOOKBACK_L8_REFERENCE_SE = 0.00094
ELLIPTIC_L4_REFERENCE = 0.1510320081
ELLIPTIC_L4_REFERENCE_SE = 6.8e-07


def inv_normal_cdf(p):
    """Standard normal quantile.

    Uses the Cephes rational approximations behind ``scipy.special.ndtri``.
    Raises for arguments outside (0, 1).
    """
    p = np.asarray(p, dtype=np.float64)
    if np.any(~((p > 0) & (p < 1))):
        raise ValueError("inv_normal_cdf needs arguments strictly inside (0, 1)")
    return special.ndtri(p)


def normal_cdf(x):
    return special.ndtr(x)


def _uniforms(x, d):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] < d:
        raise ValueError(f"need at least {d} coordinates, got {x.shape[1]}")
    return x[:, :d]


def _safe_normals(x):
    # LD points can hit exactly 0; nudge onto the open interval before inverting
    tiny = np.ldexp(1.0, -53)
    return special.ndtri(np.clip(x, tiny, 1.0 - tiny))


@dataclass
class MlProblem:
    """A fixed-L multilevel problem ``nu = sum_l E[Y_l]``.

    ``evaluators[l]`` maps an ``(n, >= dims[l])`` uniform array to ``n`` values of
    ``Y_{l+1}``. ``costs`` are normalised so the finest level costs 1.
    """

    name: str
    evaluators: list
    costs: np.ndarray
    dims: list
    reference: float = None
    reference_se: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.costs = np.asarray(self.costs, dtype=np.float64)
        if len(self.evaluators) != len(self.costs) or len(self.dims) != len(self.costs):
            raise ValueError("evaluators, costs and dims must have one entry per level")
        if np.any(~(self.costs > 0)):
            raise ValueError("costs must be positive")
        if any(a > b for a, b in zip(self.dims, self.dims[1:])):
            raise ValueError("dims must be nondecreasing")

    @property
    def L(self):
        return len(self.evaluators)

    @property
    def d(self):
        return max(self.dims)

    def evaluate(self, level, x):
        """Evaluate ``Y_level`` (1-based) on uniforms ``x``."""
        return np.asarray(self.evaluators[level - 1](x), dtype=np.float64)


# ---------------------------------------------------------------- single level

def sumxex(x):
    """``-d + sum_j x_j exp(x_j)``; integrates to 0."""
    x = np.asarray(x, dtype=np.float64)
    return -x.shape[-1] + np.sum(x * np.exp(x), axis=-1)


def ridge_weights(d, kind="sparse"):
    if kind == "sparse":
        w = 2.0 ** -np.arange(1, d + 1)
        return w / np.sqrt(np.sum(w ** 2))
    if kind == "equal":
        return np.full(d, d ** -0.5)
    raise ValueError(f"unknown ridge weights {kind!r}")


def ridge_u(x, weights):
    x = _uniforms(x, weights.size)
    return _safe_normals(x) @ weights


def pl_payoff(u):
    """``max(u - 1, 0) - phi(1) + Phi(-1)``; zero mean for standard normal u."""
    phi1 = np.exp(-0.5) / np.sqrt(2.0 * np.pi)
    return np.maximum(u - 1.0, 0.0) - phi1 + normal_cdf(-1.0)


def jsu_payoff(u):
    """Centred Johnson SU quantile transform (gamma = delta = lambda = 1, xi = 0)."""
    return np.sinh(u - 1.0) - JSU_MEAN


def ridge_pl(x, kind="sparse"):
    x = np.asarray(x, dtype=np.float64)
    return pl_payoff(ridge_u(x, ridge_weights(np.atleast_2d(x).shape[1], kind)))


def ridge_jsu(x, kind="sparse"):
    x = np.asarray(x, dtype=np.float64)
    return jsu_payoff(ridge_u(x, ridge_weights(np.atleast_2d(x).shape[1], kind)))


def genz_coefficients(d):
    j = np.arange(1, d + 1, dtype=np.float64)
    return j ** -2 / (4.0 * np.sum(j ** -2))


def genz_corner_peak2(x):
    """``(1 + sum_j c_j x_j)^-(d+1)`` with second-kind coefficients."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    d = x.shape[1]
    return (1.0 + x @ genz_coefficients(d)) ** (-(d + 1))


def genz_integral(d):
    """Exact integral of :func:`genz_corner_peak2` by a 1-D Laplace-type quadrature.

    Uses ``(1 + c.x)^-(d+1) = (1/d!) int_0^inf t^d exp(-t (1 + c.x)) dt`` and
    integrates over x in closed form.
    """
    c = genz_coefficients(d)

    def f(t):
        if t == 0.0:
            return 0.0
        ct = c * t
        return np.exp(-t + d * np.log(t) + np.sum(np.log(-np.expm1(-ct) / ct)))

    val, _ = integrate.quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=400)
    return val / factorial(d)


def genz_inclusion_exclusion(c):
    """Closed form of the Genz corner-peak integral, ``2^d`` terms (small d only)."""
    c = np.asarray(c, dtype=np.float64)
    d = c.size
    total = 0.0
    for mask in range(1 << d):
        sel = [(mask >> j) & 1 for j in range(d)]
        total += (-1) ** sum(sel) / (1.0 + float(np.dot(sel, c)))
    return total / (factorial(d) * float(np.prod(c)))


SINGLE_LEVEL = {
    "sumxex": (sumxex, 0.0),
    "ridge_pl": (ridge_pl, 0.0),
    "ridge_jsu": (ridge_jsu, 0.0),
    "genz": (genz_corner_peak2, GENZ32_REFERENCE),
}


def single_level(name, d=32):
    try:
        fn, ref = SINGLE_LEVEL[name]
    except KeyError:
        raise ValueError(f"unknown single-level problem {name!r}") from None
    if name == "genz" and d != 32:
        ref = genz_integral(d)

    def ev(x, fn=fn, d=d):
        return fn(_uniforms(x, d))

    return MlProblem(name, [ev], [1.0], [d], reference=ref)


def constant_problem(value=1.0, L=1, d=1):
    def ev(x):
        return np.full(np.atleast_2d(x).shape[0], float(value))
    costs = 2.0 ** (np.arange(1, L + 1) - L)
    return MlProblem("constant", [ev] + [lambda x: np.zeros(np.atleast_2d(x).shape[0])] * (L - 1),
                     costs, [d] * L, reference=float(value))


# ---------------------------------------------------------------- options

@lru_cache(maxsize=16)
def brownian_factor(d):
    """PCA factor ``A`` with ``A A^T = (min(j, j') / d)``.

    Columns follow decreasing eigenvalue; each eigenvector is signed so its first
    entry is positive, which makes the factor deterministic.
    """
    t = np.arange(1, d + 1) / d
    sigma = np.minimum.outer(t, t)
    w, v = np.linalg.eigh(sigma)
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    v = v * np.where(v[0] < 0, -1.0, 1.0)
    a = v * np.sqrt(np.maximum(w, 0.0))
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class OptionSpec:
    S0: float = 100.0
    K: float = 100.0
    r: float = 0.05
    sigma: float = 0.2
    L: int = 8

    def dim(self, level):
        return 2 ** (2 + level)


def option_paths(x, level, spec):
    """Monitored asset prices ``S(j/d_l)``, shape (n, d_l)."""
    d = spec.dim(level)
    z = _safe_normals(_uniforms(x, d))
    return _prices(z @ brownian_factor(d).T, spec)


def _prices(b, spec):
    d = b.shape[1]
    t = np.arange(1, d + 1) / d
    return spec.S0 * np.exp((spec.r - 0.5 * spec.sigma ** 2) * t + spec.sigma * b)


def _asian_payoff(s, spec):
    # geometric average: exponent 1/d_l on the product
    g = np.exp(np.mean(np.log(s), axis=1))
    return np.maximum(g - spec.K, 0.0) * np.exp(-spec.r)


def _lookback_payoff(s, spec):
    return (s[:, -1] - np.min(s, axis=1)) * np.exp(-spec.r)


_PAYOFFS = {"asian": _asian_payoff, "lookback": _lookback_payoff}


def option_level(kind, level, x, spec=OptionSpec()):
    """``Q_level`` for the Asian or lookback option."""
    return _PAYOFFS[kind](option_paths(x, level, spec), spec)


def option_difference(kind, level, x, spec=OptionSpec(), coupling="fine"):
    """``Y_level = Q_level - Q_{level-1}`` on a shared uniform point.

    ``coupling="fine"`` evaluates the coarse payoff on every second monitoring
    time of the fine path. ``coupling="subset"`` builds the coarse path from the
    leading ``d_{level-1}`` coordinates with its own PCA factor.
    """
    payoff = _PAYOFFS[kind]
    d = spec.dim(level)
    z = _safe_normals(_uniforms(x, d))
    b = z @ brownian_factor(d).T
    fine = payoff(_prices(b, spec), spec)
    if level == 1:
        return fine
    if coupling == "fine":
        coarse = payoff(_prices(b[:, 1::2], spec), spec)
    elif coupling == "subset":
        dc = spec.dim(level - 1)
        coarse = payoff(_prices(z[:, :dc] @ brownian_factor(dc).T, spec), spec)
    else:
        raise ValueError(f"unknown coupling {coupling!r}")
    return fine - coarse


def geometric_asian_price(d, spec=OptionSpec()):
    """Closed-form price of the discretely monitored geometric-average Asian call."""
    r, s0, sig = spec.r, spec.S0, spec.sigma
    m = np.log(s0) + (r - 0.5 * sig ** 2) * (d + 1) / (2 * d)
    v = sig ** 2 * (d + 1) * (2 * d + 1) / (6 * d ** 2)
    sd = np.sqrt(v)
    d2 = (m - np.log(spec.K)) / sd
    d1 = d2 + sd
    return float(np.exp(-r) * (np.exp(m + 0.5 * v) * normal_cdf(d1) - spec.K * normal_cdf(d2)))


def option_problem(kind, L=8, coupling="fine", spec=None):
    spec = spec or OptionSpec(L=L)
    evs = [lambda x, lv=lv: option_difference(kind, lv, x, spec, coupling) for lv in range(1, L + 1)]
    costs = 2.0 ** (np.arange(1, L + 1) - L)
    dims = [spec.dim(lv) for lv in range(1, L + 1)]
    if kind == "asian":
        ref, se = geometric_asian_price(spec.dim(L), spec), 0.0
    elif kind == "lookback" and L == 8 and spec == OptionSpec(L=8):
        ref, se = LOOKBACK_L8_REFERENCE, LOOKBACK_L8_REFERENCE_SE
    else:
        ref, se = None, 0.0
    return MlProblem(kind, evs, costs, dims, reference=ref, reference_se=se,
                     meta={"coupling": coupling})


# ---------------------------------------------------------------- elliptic PDE

@dataclass(frozen=True)
class EllipticSpec:
    d: int = 8
    L: int = 4

    def mesh(self, level):
        return 2 ** (1 + level)


def log_coefficient(z, u):
    """``a(u) = sum_j z_j sin(pi j u) / j`` for normals ``z`` (n, d) at nodes ``u``."""
    j = np.arange(1, z.shape[1] + 1)
    return z @ (np.sin(np.pi * np.outer(j, u)) / j[:, None])


def elliptic_solve(a_mid, h):
    """Solve ``-(k q')' = 1`` with ``q(0) = q(1) = 0`` given ``k = exp(a)`` at cell midpoints.

    ``a_mid`` has shape (n, m); returns interior nodal values, shape (n, m - 1).
    """
    k = np.exp(a_mid)
    diag = np.ascontiguousarray(k[:, :-1] + k[:, 1:])
    lower = np.ascontiguousarray(-k[:, :-1])
    upper = np.ascontiguousarray(-k[:, 1:])
    rhs = np.full(diag.shape, h * h)
    return core.thomas_rows(lower, diag, upper, rhs)


def elliptic_level(level, x, spec=EllipticSpec()):
    """``Q_level = q_level(1/2)`` with ``2^(1+level)`` mesh cells."""
    z = _safe_normals(_uniforms(x, spec.d))
    return _elliptic_q(z, spec.mesh(level))


def _elliptic_q(z, m):
    h = 1.0 / m
    mid = (np.arange(m) + 0.5) * h
    q = elliptic_solve(log_coefficient(z, mid), h)
    return q[:, m // 2 - 1]


def elliptic_difference(level, x, spec=EllipticSpec()):
    z = _safe_normals(_uniforms(x, spec.d))
    fine = _elliptic_q(z, spec.mesh(level))
    if level == 1:
        return fine
    return fine - _elliptic_q(z, spec.mesh(level - 1))


def elliptic_problem(spec=EllipticSpec()):
    L = spec.L
    evs = [lambda x, lv=lv: elliptic_difference(lv, x, spec) for lv in range(1, L + 1)]
    costs = 2.0 ** (np.arange(1, L + 1) - L)
    ref = ELLIPTIC_L4_REFERENCE if spec == EllipticSpec() else None
    return MlProblem("elliptic", evs, costs, [spec.d] * L, reference=ref,
                     reference_se=ELLIPTIC_L4_REFERENCE_SE if ref is not None else 0.0)


def get_problem(name, **kw):
    """Build a problem by id: sumxex, ridge_pl, ridge_jsu, genz, asian, lookback, elliptic, constant."""
    if name in SINGLE_LEVEL:
        return single_level(name, kw.get("d", 32))
    if name in ("asian", "lookback"):
        return option_problem(name, L=kw.get("L", 8), coupling=kw.get("coupling", "fine"))
    if name == "elliptic":
        return elliptic_problem()
    if name == "constant":
        return constant_problem(kw.get("value", 1.0), kw.get("L", 1), kw.get("d", 1))
    raise ValueError(f"unknown problem {name!r}")


def level_statistics(problem, n=2 ** 16, rng=None, chunk=2 ** 12):
    """IID means and standard deviations of every ``Y_l`` (one row of the decay table).

    Each level draws its own ``n`` points of width ``d_l``, in chunks.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    means, sds = [], []
    for lv in range(1, problem.L + 1):
        d = problem.dims[lv - 1]
        y = np.concatenate([problem.evaluate(lv, rng.random((min(chunk, n - a), d)))
                            for a in range(0, n, chunk)])
        means.append(float(np.mean(y)))
        sds.append(float(np.std(y, ddof=1)))
    return np.array(means), np.array(sds)
