"""Gaussian-process algebra on lattice / digital-net designs in O(n log n).

With a matching kernel/sequence pair the Gram matrix is ``K = E diag(lam) Ebar``
where ``Ebar`` is the orthonormal FFTBR (lattices) or FWHT (nets) and
``lam = sqrt(n) * Ebar @ K[:, 0]``. Everything below is built on that identity.

Scale handling: the kernel is ``gamma * Kn`` with ``Kn = prod_j (1 + eta_j R)``.
``Kn`` can overflow in high dimension, so its first column is kept as
``exp(logdiag) * col`` where ``logdiag = log Kn(x0, x0)`` and ``|col| <= 1``.
The gamma-profiled NMLL does not depend on that factor.
"""
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from . import sequences as seq
from . import transforms as tr
from ._backend import core
from .kernels import (DSI_ALPHAS, DSI_R0, KernelParams, log_product_column, si_univariate,
                      univariate_table)

log = logging.getLogger(__name__)

ILL_CONDITIONED_RTOL = 1e-14
IMAG_RTOL = 1e-8
_CHUNK = 1 << 15
# Finite stand-in for a rejected iterate so the line search backtracks instead of aborting.
_REJECT = 1e100
_MAX_ETA_DOUBLINGS = 80


class IllConditionedError(ArithmeticError):
    """Raised when the Gram matrix has a (numerically) zero eigenvalue."""


def _transform(a, seq_kind):
    if seq_kind == "net":
        return tr.fwht(np.real(a))
    if seq_kind == "lattice":
        return tr.fftbr(a)
    raise ValueError(f"unknown sequence kind {seq_kind!r}")


def _inverse(a, seq_kind):
    return tr.fwht(np.real(a)) if seq_kind == "net" else tr.ifftbr(a)


def _adjoint(w, seq_kind):
    return tr.fwht(w) if seq_kind == "net" else np.real(tr.fftbr_adjoint(w))


def _check_conditioning(lam):
    mags = np.abs(lam)
    if not np.all(np.isfinite(mags)) or np.any(mags < ILL_CONDITIONED_RTOL * mags.max()):
        raise IllConditionedError("Gram matrix is numerically singular")


def eigenvalues(kernel_column, seq_kind, check=True):
    """Gram eigenvalues ``sqrt(n) * Ebar @ K[:, 0]``.

    Lattice eigenvalues are complex, net eigenvalues real.
    """
    kc = np.asarray(kernel_column)
    n = kc.shape[-1]
    lam = np.sqrt(n) * _transform(kc, seq_kind)
    if check:
        _check_conditioning(lam)
    return lam


def solve(lam, a, seq_kind):
    """``K^{-1} a`` via transform, divide, inverse transform."""
    lam = np.asarray(lam)
    _check_conditioning(lam)
    out = _inverse(_transform(a, seq_kind) / lam, seq_kind)
    if seq_kind == "lattice" and np.isrealobj(a):
        return np.real(out)
    return out


def _real_spectrum(lam):
    lam = np.asarray(lam)
    if np.iscomplexobj(lam):
        scale = np.abs(lam).max()
        if np.abs(lam.imag).max() > IMAG_RTOL * max(scale, np.finfo(float).tiny):
            raise ArithmeticError("lattice Gram spectrum has a non-negligible imaginary part")
        lam = lam.real
    return lam


def quadratic_form(lam, y_tilde):
    """``(Y - tau)^T K^{-1} (Y - tau)`` from transformed data."""
    q = np.sum(np.abs(y_tilde) ** 2 / np.abs(_real_spectrum(lam)))
    if q < -1e-10:
        raise ArithmeticError("negative quadratic form")
    return max(float(q), 0.0)


def nmll_value(lam, y_tilde):
    """``sum log|lam| + quadratic form``."""
    return float(np.sum(np.log(np.abs(_real_spectrum(lam))))) + quadratic_form(lam, y_tilde)


@dataclass
class CubatureResult:
    mu_hat: float
    v_hat: float


@dataclass
class OptimizeOptions:
    """Knobs for the hyperparameter search."""

    maxiter: int = 40
    ftol: float = 1e-5
    optimize_eta: bool = True
    optimize_beta: bool = True
    log_eta_bounds: tuple = (-25.0, 15.0)
    b_bounds: tuple = (-30.0, 30.0)


def _softplus(b):
    return np.logaddexp(0.0, b)


def _softplus_inv(beta):
    beta = np.asarray(beta, dtype=np.float64)
    return np.where(beta > 30, beta, np.log(np.expm1(np.maximum(beta, 1e-300))))


class _Profile:
    """Kernel-dependent quantities for one value of (eta, beta)."""

    __slots__ = ("logdiag", "col", "lam", "q", "nmll")

    def __init__(self, table, params, y_tilde, seq_kind, check=True):
        n = table.shape[1]
        la, sg = log_product_column(params, table)
        self.logdiag = float(la[0])
        self.col = sg * np.exp(la - la[0])
        lam = eigenvalues(self.col, seq_kind, check=check)
        self.lam = _real_spectrum(lam)
        self.q = quadratic_form(self.lam, y_tilde)
        if self.q > 0:
            self.nmll = (n * np.log(self.q / n) + float(np.sum(np.log(np.abs(self.lam)))) + n)
        else:
            self.nmll = -np.inf


@dataclass
class GpLevelState:
    """Fitted GP for the samples collected on one level.

    ``z`` holds the unshifted integer-coded points (the Gram matrix only sees
    these), ``y`` the integrand values at the shifted points.
    """

    seq_kind: str
    gen: object
    params: KernelParams
    z: np.ndarray = None
    y: np.ndarray = None
    table: np.ndarray = None
    lam: np.ndarray = None
    y_tilde: np.ndarray = None
    logdiag: float = 0.0
    q_scaled: float = 0.0
    _ksum: dict = field(default_factory=dict)
    _vcache: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.params.seq_kind != self.seq_kind:
            raise ValueError("kernel family does not match the sequence kind")
        if self.z is None:
            self.z = np.zeros((0, self.params.d), dtype=np.uint64)
            self.y = np.zeros(0)

    @property
    def n(self):
        return self.y.size

    @property
    def t(self):
        return self.gen.t

    def extend(self, y_new):
        """Append values at the next indices ``n .. n + len(y_new) - 1``."""
        y_new = np.asarray(y_new, dtype=np.float64).reshape(-1)
        n0 = self.n
        n1 = n0 + y_new.size
        if n1 & (n1 - 1):
            raise ValueError("sample count must stay a power of 2")
        z_new = seq.points_ints(self.gen, None, n0, n1)
        tab_new = univariate_table(self.params, z_new, self.t)
        self.z = np.concatenate([self.z, z_new])
        self.y = np.concatenate([self.y, y_new])
        if self.table is None or n0 == 0:
            self.table = np.ascontiguousarray(tab_new)
        else:
            self.table = np.ascontiguousarray(np.concatenate([self.table, tab_new], axis=1))
        self._refresh()

    def _refresh(self):
        n = self.n
        self.params = self.params.with_(tau=float(np.mean(self.y)))
        self.y_tilde = _transform(self.y - self.params.tau, self.seq_kind)
        prof = self._conditioned_profile()
        self.logdiag = prof.logdiag
        self.q_scaled = prof.q
        if prof.q > 0:
            gamma = np.exp(np.log(prof.q / n) - prof.logdiag)
            gamma = float(np.clip(gamma, np.finfo(float).tiny, np.finfo(float).max))
        else:
            gamma = float(np.finfo(float).tiny)
        self.params = self.params.with_(gamma=gamma)
        self.lam = prof.lam * (prof.q / n if prof.q > 0 else gamma * np.exp(prof.logdiag))
        self._ksum = {}
        self._vcache = {}
        self._ksum_scaled_init(prof.col)

    def _conditioned_profile(self):
        # Parameters fitted on n points can be singular on 2n points (smooth
        # kernels have fast-decaying spectra). Doubling eta moves towards the
        # diagonal, which always restores conditioning.
        for attempt in range(_MAX_ETA_DOUBLINGS + 1):
            try:
                return _Profile(self.table, self.params, self.y_tilde, self.seq_kind)
            except IllConditionedError:
                if attempt == _MAX_ETA_DOUBLINGS:
                    raise
                self.params = self.params.with_(eta=2.0 * self.params.eta)
        raise AssertionError("unreachable")

    def _ksum_scaled_init(self, col):
        n = col.size
        p = 0
        while (1 << p) <= n:
            self._ksum[p] = float(np.sum(col[: 1 << p]))
            p += 1

    def set_params(self, params):
        """Install new kernel parameters (gamma and tau are re-profiled)."""
        if params.family != self.params.family:
            raise ValueError("cannot change kernel family of a fitted state")
        self.params = params
        if self.n:
            self._refresh()

    def nmll(self):
        """``sum_i log|lam_i| + sum_i |y~_i|^2 / |lam_i|`` at the current parameters."""
        return nmll_value(self.lam, self.y_tilde)

    def kernel_sum_scaled(self, p):
        """``sum_{i < 2^p} Kn(x_i, x_0) / Kn(x_0, x_0)`` for the frozen parameters."""
        if p in self._ksum:
            return self._ksum[p]
        if p > self.gen.m_max:
            raise ValueError(f"sequence holds only 2^{self.gen.m_max} points")
        have = max(k for k in self._ksum) if self._ksum else -1
        total = self._ksum[have] if have >= 0 else 0.0
        start = 1 << have if have >= 0 else 0
        while have < p:
            have += 1
            stop = 1 << have
            for a in range(start, stop, _CHUNK):
                b = min(stop, a + _CHUNK)
                zc = seq.points_ints(self.gen, None, a, b)
                la, sg = log_product_column(self.params, univariate_table(self.params, zc, self.t))
                total += float(np.sum(sg * np.exp(la - self.logdiag)))
            self._ksum[have] = total
            start = stop
        return self._ksum[p]

    def variance_at(self, p):
        """Posterior cubature variance with ``2^p`` points and the current parameters."""
        if p in self._vcache:
            return self._vcache[p]
        if self.q_scaled <= 0:
            v = 0.0
        else:
            m_scaled = self.kernel_sum_scaled(p) / (1 << p)
            v = _variance(self.params.gamma, self.logdiag, m_scaled)
        self._vcache[p] = v
        return v


def _variance(gamma, logdiag, mean_scaled):
    if not mean_scaled > 0:
        warnings.warn("nonpositive kernel mean; posterior variance clamped to 0", RuntimeWarning)
        return 0.0
    logm = logdiag + np.log(mean_scaled)
    if logm < 0:
        log.warning("kernel mean below 1 (log=%g); posterior variance clamped to 0", logm)
        return 0.0
    return float(gamma * -np.expm1(-logm))


def initial_eta(family, d, alpha=1, beta=None):
    """Starting lengthscales with ``prod_j (1 + eta_j R(0)) = e``.

    With eta = 1 the product kernel's diagonal grows like ``(1 + R(0))^d`` and in
    d = 32 the Gram matrix is numerically the identity, so the NMLL is flat and
    gradient steps never leave the start.
    """
    if family == "si":
        r0 = float(si_univariate(alpha, 0.0))
    else:
        b = np.ones(4) if beta is None else np.asarray(beta, dtype=np.float64)
        r0 = float(sum(bi * DSI_R0[a] for bi, a in zip(b, DSI_ALPHAS)))
    return np.full(d, np.expm1(1.0 / d) / r0)


def new_state(seq_kind, gen, d, family=None, alpha=1, init_eta="auto"):
    """Empty level state with starting parameters.

    ``init_eta`` is ``"auto"`` (see :func:`initial_eta`) or a positive number
    used for every coordinate.
    """
    family = family or ("si" if seq_kind == "lattice" else "dsi")
    params = KernelParams.initial(family, d, alpha)
    if init_eta == "auto":
        params = params.with_(eta=initial_eta(family, d, alpha, params.beta))
    else:
        params = params.with_(eta=np.full(d, float(init_eta)))
    return GpLevelState(seq_kind, gen, params)


def nmll(state):
    return state.nmll()


def posterior_cubature(state):
    """Posterior mean (the sample mean) and variance ``gamma [1 - 1/mean(Kn)]``."""
    n = state.n
    if n == 0:
        raise ValueError("no samples")
    if n & (n - 1):
        raise ValueError("sample count must be a power of 2")
    return CubatureResult(float(np.mean(state.y)), state.variance_at(n.bit_length() - 1))


def projected_variance(state, n_hat):
    """Posterior variance projected to ``n_hat`` points with frozen parameters.

    Powers of 2 are computed exactly from kernel sums over the extended
    sequence; other sizes use log-log interpolation between the surrounding
    powers of 2.
    """
    if not n_hat >= 1:
        raise ValueError("n_hat must be at least 1")
    p = int(np.floor(np.log2(n_hat)))
    if (1 << p) > n_hat:
        p -= 1
    elif (1 << (p + 1)) <= n_hat:
        p += 1
    if n_hat == (1 << p):
        return _variance_capped(state, p)
    v0 = _variance_capped(state, p)
    v1 = _variance_capped(state, p + 1)
    return loglog_interp(n_hat, p, v0, v1)


def _variance_capped(state, p):
    m = state.gen.m_max
    if p <= m:
        return state.variance_at(p)
    # beyond the generator: continue the last log-log segment
    return loglog_interp(2.0 ** p, m - 1, state.variance_at(m - 1), state.variance_at(m))


def loglog_interp(n_hat, p, v0, v1):
    """Line through ``(2^p, v0)`` and ``(2^(p+1), v1)`` in log-log coordinates."""
    if v0 <= 0 or v1 <= 0:
        if v1 <= 0:
            return 0.0 if n_hat > 2 ** p else v0
        return v0
    slope = np.log2(v1 / v0)
    return float(v0 * 2.0 ** (slope * (np.log2(n_hat) - p)))


def _objective(u, state, opts, family, d):
    params = _unpack(u, state.params, opts, family, d)
    try:
        prof = _Profile(state.table, params, state.y_tilde, state.seq_kind)
    except (IllConditionedError, ArithmeticError, FloatingPointError):
        return _REJECT, np.zeros_like(u)
    if not np.isfinite(prof.nmll):
        return _REJECT, np.zeros_like(u)
    n = state.n
    lam = prof.lam
    w = 1.0 / lam - (n / prof.q) * np.abs(state.y_tilde) ** 2 * np.sign(lam) / lam ** 2
    v = np.sqrt(n) * _adjoint(w, state.seq_kind)
    g_rho, g_beta = core.product_grad(state.table, np.ascontiguousarray(_beta_of(params)),
                                      params.eta, np.ascontiguousarray(prof.col),
                                      np.ascontiguousarray(v))
    grad = []
    if opts.optimize_eta:
        grad.append(g_rho)
    if family == "dsi" and opts.optimize_beta:
        b = u[-4:]
        grad.append(g_beta * expit(b))
    return prof.nmll, np.concatenate(grad) if grad else np.zeros(0)


def _beta_of(params):
    return np.ones(1) if params.family == "si" else params.beta


def _pack(params, opts):
    parts = []
    if opts.optimize_eta:
        parts.append(np.log(params.eta))
    if params.family == "dsi" and opts.optimize_beta:
        parts.append(_softplus_inv(params.beta))
    return np.concatenate(parts) if parts else np.zeros(0)


def _unpack(u, base, opts, family, d):
    kw = {}
    k = 0
    if opts.optimize_eta:
        kw["eta"] = np.exp(u[:d])
        k = d
    if family == "dsi" and opts.optimize_beta:
        beta = _softplus(u[k:k + 4])
        if not np.sum(beta) > 0:
            beta = beta + np.finfo(float).tiny
        kw["beta"] = beta
    return base.with_(**kw)


def profiled_nmll(state, params):
    """Gamma-profiled NMLL ``n log(q/n) + sum log|lam| + n`` at ``params``."""
    return _Profile(state.table, params, state.y_tilde, state.seq_kind).nmll


def nmll_gradient(state, params, opts=None):
    """Gradient of the profiled NMLL w.r.t. (log eta, softplus^-1 beta)."""
    opts = opts or OptimizeOptions()
    u = _pack(params, opts)
    return _objective(u, state, opts, params.family, params.d)[1]


def optimize_hyperparameters(state, opts=None):
    """Fit (eta, beta) by L-BFGS-B on the profiled NMLL, warm-started at the
    current parameters; tau and gamma follow in closed form.

    Returns the installed :class:`KernelParams`.
    """
    opts = opts or OptimizeOptions()
    if state.n < 2:
        raise ValueError("need at least 2 samples to fit hyperparameters")
    if state.q_scaled <= 0:
        return state.params
    family, d = state.params.family, state.params.d
    u0 = _pack(state.params, opts)
    if u0.size == 0:
        return state.params
    best = {"f": np.inf, "u": u0}

    lo = [opts.log_eta_bounds[0]] * (d if opts.optimize_eta else 0)
    hi = [opts.log_eta_bounds[1]] * (d if opts.optimize_eta else 0)
    if family == "dsi" and opts.optimize_beta:
        lo += [opts.b_bounds[0]] * 4
        hi += [opts.b_bounds[1]] * 4
    lo, hi = np.array(lo), np.array(hi)

    def fun(u):
        # the box is enforced by clamping: passing it to L-BFGS-B makes the first
        # projected step jump to a corner where the Gram matrix is singular
        uc = np.clip(u, lo, hi)
        f, g = _objective(uc, state, opts, family, d)
        g = np.where((u < lo) | (u > hi), 0.0, g)
        if f < best["f"]:
            best["f"], best["u"] = f, uc.copy()
        return f, g

    u0 = np.clip(u0, lo, hi)
    f0, _ = fun(u0)
    if f0 < _REJECT:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            minimize(fun, u0, jac=True, method="L-BFGS-B",
                     options={"maxiter": opts.maxiter, "ftol": opts.ftol})
    if not best["f"] < _REJECT:
        raise IllConditionedError("no finite NMLL iterate found")
    state.set_params(_unpack(best["u"], state.params, opts, family, d))
    return state.params
