"""Shift-invariant and digitally-shift-invariant product kernels.

Univariate pieces:

* SI (lattices): ``R(x) = (-1)^(alpha+1) (2 pi)^(2 alpha) / (2 alpha)! * B_{2 alpha}(x)``
  evaluated at the mod-1 difference of two points.
* DSI (digital nets): closed forms of the Walsh series
  ``sum_{k>=1} 2^(-mu_alpha(k)) wal_k(x)`` for alpha = 1..4, evaluated at the
  XOR of two points held as t-bit integers.

Both integrate to zero over [0, 1), so the product kernel
``gamma * prod_j (1 + eta_j R(x_j (-) x'_j))`` satisfies ``int K(x, x') dx' = gamma``.
"""
from dataclasses import dataclass, field, replace
from math import factorial, pi

import numpy as np

from ._backend import core
from .sequences import LATTICE_BITS

# Diagonal values R_alpha(0) of the DSI kernels: the Walsh series summed at x = 0,
# equal to the x -> 0 limit of the closed forms. Reproduced by scripts/dsi_walsh_oracle.py.
DSI_R0 = {1: 1.0, 2: 3.0 / 2.0, 3: 25.0 / 18.0, 4: 407.0 / 294.0}
DSI_ALPHAS = (1, 2, 3, 4)

_BERNOULLI = {
    2: (1.0 / 6.0, -1.0, 1.0),
    4: (-1.0 / 30.0, 0.0, 1.0, -2.0, 1.0),
    6: (1.0 / 42.0, 0.0, -0.5, 0.0, 2.5, -3.0, 1.0),
    8: (-1.0 / 30.0, 0.0, 2.0 / 3.0, 0.0, -7.0 / 3.0, 0.0, 14.0 / 3.0, -4.0, 1.0),
}


def bernoulli_poly(p, x):
    """Bernoulli polynomial ``B_p(x)`` for p in {2, 4, 6, 8}."""
    try:
        coef = _BERNOULLI[p]
    except KeyError:
        raise ValueError(f"Bernoulli polynomial of order {p} is not supported") from None
    return np.polynomial.polynomial.polyval(np.asarray(x, dtype=np.float64), coef)


def si_univariate(alpha, x):
    """Univariate shift-invariant kernel of order ``alpha`` at ``x`` in [0, 1)."""
    if alpha not in (1, 2, 3, 4):
        raise ValueError("SI kernel order must be 1, 2, 3 or 4")
    c = (-1) ** (alpha + 1) * (2 * pi) ** (2 * alpha) / factorial(2 * alpha)
    return c * bernoulli_poly(2 * alpha, x)


def _as_dyadic(x, t):
    """Return ``x * 2**t`` as uint64, requiring the product to be an integer."""
    x = np.asarray(x)
    if x.dtype.kind == "u":
        return x.astype(np.uint64)
    xs = np.ldexp(np.asarray(x, dtype=np.float64), t)
    zi = np.floor(xs)
    if np.any(zi != xs) or np.any((x < 0) | (x >= 1)):
        raise ValueError(f"inputs must be dyadic rationals in [0, 1) with at most {t} bits")
    return zi.astype(np.uint64)


def dsi_univariate(alpha, x, t=LATTICE_BITS):
    """Univariate DSI kernel of order ``alpha``.

    ``x`` is either uint64 integers on the 2^-t grid or floats that are exact
    dyadic rationals with at most ``t`` bits.
    """
    if alpha not in DSI_ALPHAS:
        raise ValueError("DSI kernel order must be 1, 2, 3 or 4")
    z = _as_dyadic(x, t)
    shp = z.shape
    out = core.dsi_values(np.ascontiguousarray(z.reshape(-1, 1)), t, [alpha])
    return out.reshape(shp) if shp else float(out.reshape(()))


def _check_beta(beta):
    b = np.asarray(beta, dtype=np.float64).reshape(-1)
    if b.size != 4 or np.any(b < 0) or not np.sum(b) > 0:
        raise ValueError("DSI weights must be 4 nonnegative reals, not all zero")
    return b


def dsi_weighted(beta, x, t=LATTICE_BITS):
    """Weighted sum ``sum_alpha beta_alpha R_alpha(x)`` of the DSI kernels."""
    b = _check_beta(beta)
    z = _as_dyadic(x, t)
    shp = z.shape
    vals = core.dsi_values(np.ascontiguousarray(z.reshape(-1, 1)), t, list(DSI_ALPHAS))
    out = np.tensordot(b, vals[:, :, 0], axes=1)
    return out.reshape(shp) if shp else float(out.reshape(()))


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters of a product kernel.

    ``family`` is ``"si"`` (lattices, order ``alpha``) or ``"dsi"`` (digital
    nets, weighted sum with weights ``beta``).
    """

    family: str
    gamma: float
    eta: np.ndarray
    tau: float = 0.0
    beta: np.ndarray = field(default_factory=lambda: np.ones(4))
    alpha: int = 1

    def __post_init__(self):
        if self.family not in ("si", "dsi"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        eta = np.array(self.eta, dtype=np.float64).reshape(-1)
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if np.any(~(eta > 0)):
            raise ValueError("lengthscales eta must be positive")
        object.__setattr__(self, "eta", eta)
        if self.family == "dsi":
            object.__setattr__(self, "beta", _check_beta(self.beta))
        elif self.alpha not in (1, 2, 3, 4):
            raise ValueError("SI kernel order must be 1, 2, 3 or 4")

    @property
    def d(self):
        return self.eta.size

    @property
    def seq_kind(self):
        return "lattice" if self.family == "si" else "net"

    def with_(self, **kw):
        return replace(self, **kw)

    @classmethod
    def initial(cls, family, d, alpha=1):
        """Defaults used before any fitting: eta = 1, beta = 1, gamma = 1, tau = 0."""
        return cls(family=family, gamma=1.0, eta=np.ones(d), tau=0.0,
                   beta=np.ones(4), alpha=alpha)


def univariate_table(params, z, t):
    """Univariate kernel values at the unshifted points, shape (A, n, d).

    For SI A = 1; for DSI A = 4 (one slice per order). Combined with the weights
    of :func:`table_weights` this is everything the product kernel needs.
    """
    z = np.ascontiguousarray(z, dtype=np.uint64)
    if params.family == "si":
        if t != LATTICE_BITS:
            raise ValueError("SI kernels pair with lattice points")
        return si_univariate(params.alpha, np.ldexp(z.astype(np.float64), -t))[None]
    return core.dsi_values(z, t, list(DSI_ALPHAS))


def table_weights(params):
    return np.ones(1) if params.family == "si" else params.beta


def log_product_column(params, table):
    """``log|prod_j (1 + eta_j R_ij)|`` and its sign for each row of a table."""
    return core.product_logcol(table, np.ascontiguousarray(table_weights(params)),
                               np.ascontiguousarray(params.eta))


def _check_pairing(params, seq_kind):
    if params.seq_kind != seq_kind:
        raise ValueError(f"{params.family.upper()} kernels cannot be used with {seq_kind} points")


def kernel_column(params, x_ints, seq_kind, t):
    """First Gram-matrix column ``K(x_i, x_0)`` for points given as integers.

    The shift cancels, so the result equals the column for the unshifted
    sequence: ``gamma * prod_j (1 + eta_j R(z_ij))``.
    """
    _check_pairing(params, seq_kind)
    x_ints = np.asarray(x_ints, dtype=np.uint64)
    z = difference(x_ints, x_ints[:1], seq_kind, t)
    la, sg = log_product_column(params, univariate_table(params, z, t))
    return params.gamma * sg * np.exp(la)


def difference(a, b, seq_kind, t):
    """The group difference ``a (-) b`` on integer-coded points."""
    if seq_kind == "net":
        return a ^ b
    mask = np.uint64((1 << t) - 1)
    return (a - b) & mask


def kernel_dense(params, x_ints, y_ints, seq_kind, t):
    """Dense Gram block ``K(x_i, y_k)``, built pairwise for testing and small n."""
    _check_pairing(params, seq_kind)
    x_ints = np.asarray(x_ints, dtype=np.uint64)
    y_ints = np.asarray(y_ints, dtype=np.uint64)
    n, m = x_ints.shape[0], y_ints.shape[0]
    diff = difference(x_ints[:, None, :], y_ints[None, :, :], seq_kind, t)
    la, sg = log_product_column(params, univariate_table(params, diff.reshape(n * m, -1), t))
    return (params.gamma * sg * np.exp(la)).reshape(n, m)
