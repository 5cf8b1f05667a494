"""Multilevel estimators: IID Monte Carlo, replicated QMC and Bayesian QMC.

All three share the same greedy loop: evaluate the pending samples, then double
the sample size on the most useful level that still fits in the budget. They
differ in how samples are drawn and how utility is measured.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import fastgp as fg
from . import sequences as seq
from .rng import Streams

log = logging.getLogger(__name__)

DEFAULT_INIT = 2 ** 6
_EVAL_CHUNK = 2 ** 12


@dataclass
class MlEstimate:
    """Result of one multilevel run.

    ``n_per_level`` counts every evaluation (R times the per-randomization size
    for replicated QMC). ``trace`` records the state after every pass of the
    loop as ``(cost, nu_hat, std_err, n_per_level)``.
    """

    nu_hat: float
    std_err: float
    n_per_level: list
    cost: float
    mu_hat: list
    var_hat: list
    trace: list = field(default_factory=list)
    params: list = None

    def at_budget(self, budget):
        """The estimate an identical run with a smaller budget would have returned.

        Exact for single-level problems, where the sequence of states does not
        depend on the budget.
        """
        hits = [tr for tr in self.trace if tr[0] <= budget]
        if not hits:
            raise ValueError(f"budget {budget} is below the initial cost")
        last = hits[-1]
        return last


def _init_sizes(problem, init):
    if init is None:
        return [DEFAULT_INIT] * problem.L
    if np.isscalar(init):
        return [int(init)] * problem.L
    init = [int(v) for v in init]
    if len(init) != problem.L:
        raise ValueError("need one initial size per level")
    return init


def _check_pow2(sizes):
    for v in sizes:
        if v < 1 or v & (v - 1):
            raise ValueError("initial sizes must be powers of 2")


def _feasible(costs, n, budget, factor=1.0):
    spent = factor * float(np.dot(costs, n))
    return [lv for lv in range(len(costs)) if spent + factor * costs[lv] * n[lv] <= budget]


def _evaluate(problem, level, x):
    """Evaluate ``Y_level`` in chunks to bound memory."""
    out = np.empty(x.shape[0])
    for a in range(0, x.shape[0], _EVAL_CHUNK):
        b = min(x.shape[0], a + _EVAL_CHUNK)
        out[a:b] = problem.evaluate(level, x[a:b])
    return out


def tent(x):
    """Periodizing map ``x -> 1 - |2x - 1|``."""
    return 1.0 - np.abs(2.0 * x - 1.0)


def _argmax_lowest(values, candidates):
    best = candidates[0]
    for lv in candidates[1:]:
        if values[lv] > values[best]:
            best = lv
    return best


# ------------------------------------------------------------------ IID Monte Carlo

def run_mc(problem, budget, init_sizes=None, streams=None):
    """Multilevel Monte Carlo with IID points and greedy doubling."""
    streams = streams or Streams(0)
    L = problem.L
    costs = problem.costs
    n_next = _init_sizes(problem, init_sizes)
    if float(np.dot(costs, n_next)) > budget:
        raise ValueError("initial sample sizes exceed the budget")
    gens = [streams.get(lv + 1, "iid") for lv in range(L)]
    ys = [np.zeros(0) for _ in range(L)]
    n = [0] * L
    mu, var = [0.0] * L, [0.0] * L
    update = list(range(L))
    trace = []
    while True:
        for lv in update:
            k = n_next[lv] - n[lv]
            x = gens[lv].random((k, problem.dims[lv]))
            ys[lv] = np.concatenate([ys[lv], _evaluate(problem, lv + 1, x)])
            n[lv] = n_next[lv]
            mu[lv] = float(np.mean(ys[lv]))
            var[lv] = float(np.var(ys[lv], ddof=1)) if n[lv] > 1 else 0.0
        trace.append(_trace_row(costs, n, mu, [v / m for v, m in zip(var, n)]))
        feas = _feasible(costs, n, budget)
        if not feas:
            break
        util = [var[lv] / (n[lv] * costs[lv]) for lv in range(L)]
        star = _argmax_lowest(util, feas)
        n_next[star] = 2 * n[star]
        update = [star]
    return _finish(costs, n, mu, [v / m for v, m in zip(var, n)], budget, trace, factor=1)


def _trace_row(costs, n_eval, mu, vhat):
    return (float(np.dot(costs, n_eval)), float(np.sum(mu)), float(np.sqrt(max(np.sum(vhat), 0.0))),
            list(n_eval))


def _finish(costs, n, mu, vhat, budget, trace, factor=1, n_report=None, params=None):
    n_report = n_report if n_report is not None else n
    cost = factor * float(np.dot(costs, n))
    assert cost <= budget, "budget exceeded"
    return MlEstimate(float(np.sum(mu)), float(np.sqrt(max(np.sum(vhat), 0.0))), list(n_report),
                      cost, list(mu), list(vhat), trace, params)


# ------------------------------------------------------------------ replicated QMC

def _randomized_generator(kind, d, stream):
    """Independent randomization: LMS + digital shift for nets, shift for lattices."""
    base = seq.default_generator(kind, d)
    if kind == "net":
        base = seq.lms_scramble(base, stream)
    return base, seq.Shift.random(d, base.t, stream)


def _qmc_inputs(kind, gen, shift, i0, i1):
    x = seq.points(gen, shift, i0, i1)
    return tent(x) if kind == "lattice" else x


def run_rqmc(problem, budget, R=8, kind="net", init_sizes=None, streams=None):
    """Multilevel QMC with ``R`` independent randomizations per level."""
    streams = streams or Streams(0)
    L = problem.L
    costs = problem.costs
    n_next = _init_sizes(problem, init_sizes)
    _check_pow2(n_next)
    if R < 2:
        raise ValueError("replicated QMC needs R >= 2")
    if R * float(np.dot(costs, n_next)) > budget:
        raise ValueError("budget too small for R replications of the initial sizes")
    rand = [[_randomized_generator(kind, problem.dims[lv], streams.get(lv + 1, r, "rqmc"))
             for r in range(R)] for lv in range(L)]
    sums = np.zeros((L, R))
    n = [0] * L
    mu, var = [0.0] * L, [0.0] * L
    update = list(range(L))
    trace = []
    while True:
        for lv in update:
            for r, (gen, shift) in enumerate(rand[lv]):
                x = _qmc_inputs(kind, gen, shift, n[lv], n_next[lv])
                sums[lv, r] += float(np.sum(_evaluate(problem, lv + 1, x)))
            n[lv] = n_next[lv]
            mt = sums[lv] / n[lv]
            mu[lv] = float(np.mean(mt))
            var[lv] = float(np.var(mt, ddof=1))
        trace.append(_trace_row(costs, [R * v for v in n], mu, [v / R for v in var]))
        feas = _feasible(costs, n, budget, factor=R)
        if not feas:
            break
        util = [var[lv] / (R * n[lv] * costs[lv]) for lv in range(L)]
        star = _argmax_lowest(util, feas)
        n_next[star] = 2 * n[star]
        update = [star]
    return _finish(costs, n, mu, [v / R for v in var], budget, trace, factor=R,
                   n_report=[R * v for v in n])


# ------------------------------------------------------------------ Bayesian QMC

def level_select_bqmc(feasible, costs, n, variance):
    """Bayesian level selection.

    ``variance(level, n_hat)`` returns the (projected) posterior variance of a
    level at sample size ``n_hat``. Levels are compared in order of
    non-increasing doubling cost ``n C`` (ties: lower index first); a challenger
    wins when its variance drop for the same spend is at least the champion's.
    """
    if not feasible:
        raise ValueError("feasible set is empty")
    order = sorted(feasible, key=lambda lv: (-n[lv] * costs[lv], lv))
    best = order[0]
    for ch in order[1:]:
        n_hat = n[best] * costs[best] / costs[ch] + n[ch]
        gain_ch = variance(ch, n[ch]) - variance(ch, n_hat)
        gain_best = variance(best, n[best]) - variance(best, 2 * n[best])
        if gain_ch >= gain_best:
            best = ch
    return best


def table_variance(tables):
    """``variance`` callback from tables ``{level: {n: V}}`` with log-log interpolation."""

    def variance(lv, n_hat):
        tab = tables[lv]
        if n_hat in tab:
            return tab[n_hat]
        p = int(np.floor(np.log2(n_hat)))
        return fg.loglog_interp(n_hat, p, tab[2 ** p], tab[2 ** (p + 1)])

    return variance


def run_bqmc(problem, budget, kind="net", init_sizes=None, streams=None, opt=None,
             family=None, alpha=1):
    """Fast Bayesian multilevel QMC with one randomized sequence per level."""
    streams = streams or Streams(0)
    opt = opt or fg.OptimizeOptions()
    L = problem.L
    costs = problem.costs
    n_next = _init_sizes(problem, init_sizes)
    _check_pow2(n_next)
    if float(np.dot(costs, n_next)) > budget:
        raise ValueError("initial sample sizes exceed the budget")
    base = seq.default_generator(kind, problem.d)
    if kind == "net":
        # one scramble shared by every level; levels differ only in their digital shift
        base = seq.lms_scramble(base, streams.get("lms"))
    states, shifts = [], []
    for lv in range(L):
        gen = base.head(problem.dims[lv])
        states.append(fg.new_state(kind, gen, problem.dims[lv], family=family, alpha=alpha))
        shifts.append(seq.Shift.random(gen.d, gen.t, streams.get(lv + 1, "shift")))
    n = [0] * L
    mu, vhat = [0.0] * L, [0.0] * L
    update = list(range(L))
    trace = []
    while True:
        for lv in update:
            st = states[lv]
            x = _qmc_inputs(kind, st.gen, shifts[lv], n[lv], n_next[lv])
            st.extend(_evaluate(problem, lv + 1, x))
            fg.optimize_hyperparameters(st, opt)
            n[lv] = n_next[lv]
            res = fg.posterior_cubature(st)
            mu[lv], vhat[lv] = res.mu_hat, res.v_hat
        trace.append(_trace_row(costs, n, mu, vhat))
        feas = _feasible(costs, n, budget)
        if not feas:
            break

        def variance(lv, n_hat):
            if n_hat == n[lv]:
                return vhat[lv]
            return fg.projected_variance(states[lv], n_hat)

        star = level_select_bqmc(feas, costs, n, variance)
        n_next[star] = 2 * n[star]
        update = [star]
    return _finish(costs, n, mu, vhat, budget, trace, params=[s.params for s in states])


def run_method(method, problem, budget, kind="net", R=8, init_sizes=None, streams=None, **kw):
    if method == "mc":
        return run_mc(problem, budget, init_sizes, streams)
    if method == "rqmc":
        return run_rqmc(problem, budget, R, kind, init_sizes, streams)
    if method == "bqmc":
        return run_bqmc(problem, budget, kind, init_sizes, streams, **kw)
    raise ValueError(f"unknown method {method!r}")
