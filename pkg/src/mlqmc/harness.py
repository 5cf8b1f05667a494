"""Configuration-driven experiment runner.

An experiment is one problem run by a set of methods over a list of budgets and
``trials`` independent repetitions. Every (method, trial) pair draws from its
own counter-keyed random stream, so a trial's records do not change when other
trials are added or removed, and the output is a pure function of the config.

Records go to ``records.csv``; wall times go to a separate ``timings.csv`` so
the records file is byte-identical across re-runs. Per-cell summaries and
fitted slopes go to ``summary.json``.
"""
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import estimators as est
from .problems import get_problem
from .rng import Streams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

METHODS = ("mc", "rqmc", "bqmc")
SEQUENCES = ("net", "lattice")
RECORD_COLUMNS = ("problem", "method", "sequence", "budget", "trial", "nu_hat", "std_err",
                  "error", "cost", "n_per_level")
COVERAGE_MULTIPLE = 2.0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Check:
    """One pass/fail assertion on the summary.

    ``metric`` is ``slope``, ``coverage``, ``median_error`` or
    ``median_stderr``. Per-budget metrics are tested at every budget
    ``>= min_budget`` (``at = "all"``) or only at the largest one
    (``at = "max"``). With ``relative_to`` the metric is divided by the same
    metric of another method before comparing.
    """

    method: str
    metric: str
    op: str
    value: float
    min_budget: float = 0
    at: str = "all"
    relative_to: str = None

    def __post_init__(self):
        if self.metric not in ("slope", "coverage", "median_error", "median_stderr"):
            raise ConfigError(f"unknown check metric {self.metric!r}")
        if self.op not in ("<=", ">="):
            raise ConfigError(f"check op must be '<=' or '>=', got {self.op!r}")
        if self.at not in ("all", "max"):
            raise ConfigError("check 'at' must be 'all' or 'max'")


@dataclass
class ExperimentConfig:
    problem: str
    budgets: tuple
    methods: tuple = METHODS
    sequence: str = "net"
    trials: int = 250
    R: int = 8
    seed: int = 0
    init_sizes: dict = field(default_factory=dict)
    family: str = None
    alpha: int = 1
    output: str = None
    problem_options: dict = field(default_factory=dict)
    workers: int = 1
    checks: tuple = ()

    def __post_init__(self):
        self.budgets = tuple(sorted({float(b) for b in self.budgets}))
        self.methods = tuple(self.methods)
        if not self.budgets or any(not b > 0 for b in self.budgets):
            raise ConfigError("budgets must be a nonempty list of positive numbers")
        if int(self.trials) < 1:
            raise ConfigError("trials must be at least 1")
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
        if self.sequence not in SEQUENCES:
            raise ConfigError(f"unknown sequence kind {self.sequence!r}")
        if int(self.workers) < 1:
            raise ConfigError("workers must be at least 1")
        self.trials = int(self.trials)
        self.checks = tuple(c if isinstance(c, Check) else Check(**c) for c in self.checks)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        rng = data.pop("budget_range", None)
        if rng is not None:
            if "budgets" in data:
                raise ConfigError("give either budgets or budget_range, not both")
            lo, hi = rng
            data["budgets"] = [2.0 ** k for k in range(int(lo), int(hi) + 1)]
        if "budgets" not in data or "problem" not in data:
            raise ConfigError("config needs 'problem' and 'budgets' (or 'budget_range')")
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    def init_for(self, method):
        return self.init_sizes.get(method, self.init_sizes.get("default"))

    def sequence_label(self, method):
        return "iid" if method == "mc" else self.sequence


def load_config(path):
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return ExperimentConfig.from_dict(data)


@dataclass
class TrialRecord:
    problem: str
    method: str
    sequence: str
    budget: float
    trial: int
    nu_hat: float
    std_err: float
    error: float
    cost: float
    n_per_level: list
    wall_time: float = 0.0


_PROBLEMS = {}


def _problem(cfg):
    key = (cfg.problem, tuple(sorted(cfg.problem_options.items())))
    if key not in _PROBLEMS:
        _PROBLEMS[key] = get_problem(cfg.problem, **cfg.problem_options)
    return _PROBLEMS[key]


def trial_streams(cfg, method, trial):
    return Streams(cfg.seed).child(cfg.problem, method, cfg.sequence_label(method), trial)


def _run(cfg, problem, method, budget, streams):
    kw = dict(init_sizes=cfg.init_for(method), streams=streams)
    if method == "mc":
        return est.run_mc(problem, budget, **kw)
    if method == "rqmc":
        return est.run_rqmc(problem, budget, R=cfg.R, kind=cfg.sequence, **kw)
    return est.run_bqmc(problem, budget, kind=cfg.sequence, family=cfg.family,
                        alpha=cfg.alpha, **kw)


def run_trial(cfg, method, trial):
    """All records of one (method, trial) pair, one per budget.

    Single-level problems run once at the largest budget and read the smaller
    budgets off the trace, which is exactly what separate runs would return.
    Multilevel problems run once per budget.
    """
    problem = _problem(cfg)
    ref = problem.reference
    label = cfg.sequence_label(method)

    def record(budget, nu, se, cost, n, wall):
        err = float(nu - ref) if ref is not None else float("nan")
        return TrialRecord(cfg.problem, method, label, budget, trial, float(nu), float(se), err,
                           float(cost), [int(v) for v in n], wall)

    out = []
    if problem.L == 1:
        t0 = time.perf_counter()
        res = _run(cfg, problem, method, cfg.budgets[-1], trial_streams(cfg, method, trial))
        wall = time.perf_counter() - t0
        for b in cfg.budgets:
            cost, nu, se, n = res.at_budget(b)
            out.append(record(b, nu, se, cost, n, wall))
        return out
    for b in cfg.budgets:
        t0 = time.perf_counter()
        res = _run(cfg, problem, method, b, trial_streams(cfg, method, trial))
        out.append(record(b, res.nu_hat, res.std_err, res.cost, res.n_per_level,
                          time.perf_counter() - t0))
    return out


def _run_trial_args(args):
    return run_trial(*args)


def run_experiment(cfg, progress=None):
    """Run every (method, trial) cell; returns ``(records, summary)``."""
    problem = _problem(cfg)
    # fail fast on infeasible initial sizes instead of inside a worker
    for m in cfg.methods:
        factor = cfg.R if m == "rqmc" else 1
        init = est._init_sizes(problem, cfg.init_for(m))
        if factor * float(np.dot(problem.costs, init)) > cfg.budgets[0]:
            raise ConfigError(f"budget {cfg.budgets[0]:g} is infeasible for the initial sizes of {m}")
    jobs = [(cfg, m, k) for m in cfg.methods for k in range(cfg.trials)]
    records = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            for i, recs in enumerate(pool.map(_run_trial_args, jobs)):
                records.extend(recs)
                if progress:
                    progress(i + 1, len(jobs))
    else:
        for i, job in enumerate(jobs):
            records.extend(run_trial(*job))
            if progress:
                progress(i + 1, len(jobs))
    summary = summarize(records)
    if cfg.checks:
        summary["checks"] = [asdict(r) for r in evaluate_checks(cfg, summary)]
    return records, summary


# ------------------------------------------------------------------ summaries

def fit_slope(x, y):
    """Least-squares slope of ``log2 y`` against ``log2 x``; NaN with < 2 usable points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ok = (x > 0) & (y > 0) & np.isfinite(y)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log2(x[ok]), np.log2(y[ok]), 1)[0])


def coverage(errors, stderrs, multiple=COVERAGE_MULTIPLE):
    """Fraction of ``|err| <= multiple * stderr``."""
    e = np.abs(np.asarray(errors, dtype=np.float64))
    s = np.asarray(stderrs, dtype=np.float64)
    if e.size == 0 or np.any(np.isnan(e)):
        return float("nan")
    return float(np.mean(e <= multiple * s))


def cell_key(problem, method, sequence, budget=None):
    parts = [problem, method, sequence] + ([f"{budget:g}"] if budget is not None else [])
    return "|".join(parts)


def summarize(records):
    """Per-cell medians and coverage plus per-(problem, method, sequence) slopes."""
    if not records:
        raise ValueError("no records to summarize")
    groups = {}
    for r in records:
        groups.setdefault((r.problem, r.method, r.sequence, r.budget), []).append(r)
    cells = {}
    for (p, m, s, b), rs in sorted(groups.items()):
        err = np.array([r.error for r in rs])
        se = np.array([r.std_err for r in rs])
        cells[cell_key(p, m, s, b)] = {
            "problem": p, "method": m, "sequence": s, "budget": b, "trials": len(rs),
            "median_error": float(np.median(np.abs(err))),
            "median_stderr": float(np.median(se)),
            "coverage": coverage(err, se),
            "mean_nu_hat": float(np.mean([r.nu_hat for r in rs])),
            "median_cost": float(np.median([r.cost for r in rs])),
        }
    slopes = {}
    for key in sorted({(c["problem"], c["method"], c["sequence"]) for c in cells.values()}):
        cs = [c for c in cells.values() if (c["problem"], c["method"], c["sequence"]) == key]
        slopes[cell_key(*key)] = fit_slope([c["budget"] for c in cs], [c["median_error"] for c in cs])
    return {"cells": cells, "slopes": slopes}


@dataclass(frozen=True)
class CheckResult:
    description: str
    value: float
    passed: bool


def _metric_values(cfg, summary, method, chk):
    seq = cfg.sequence_label(method)
    if chk.metric == "slope":
        cs = [c for c in summary["cells"].values()
              if c["method"] == method and c["sequence"] == seq and c["budget"] >= chk.min_budget]
        cs.sort(key=lambda c: c["budget"])
        return {"slope": fit_slope([c["budget"] for c in cs], [c["median_error"] for c in cs])}
    budgets = [b for b in cfg.budgets if b >= chk.min_budget]
    if chk.at == "max":
        budgets = budgets[-1:]
    return {b: summary["cells"][cell_key(cfg.problem, method, seq, b)][chk.metric] for b in budgets}


def evaluate_checks(cfg, summary):
    results = []
    for chk in cfg.checks:
        vals = _metric_values(cfg, summary, chk.method, chk)
        if chk.relative_to:
            base = _metric_values(cfg, summary, chk.relative_to, chk)
            vals = {k: v / base[k] if base[k] else float("inf") for k, v in vals.items()}
        rel = f"/{chk.relative_to}" if chk.relative_to else ""
        for where, v in vals.items():
            ok = (v <= chk.value) if chk.op == "<=" else (v >= chk.value)
            ok = bool(ok) and not math.isnan(v)
            at = "" if where == "slope" else f" @ {where:g}"
            results.append(CheckResult(f"{cfg.problem} {chk.method}{rel} {chk.metric}{at} "
                                       f"{chk.op} {chk.value:g}", float(v), ok))
    return results


# ------------------------------------------------------------------ output

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ";".join(str(x) for x in v)
    return str(v)


def emit_csv(records, path):
    """Write records with the stable column order :data:`RECORD_COLUMNS`."""
    if not records:
        raise ValueError("no records to write")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in RECORD_COLUMNS])


def emit_timings(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("problem", "method", "sequence", "budget", "trial", "wall_time"))
        for r in records:
            w.writerow([r.problem, r.method, r.sequence, _fmt(r.budget), r.trial, f"{r.wall_time:.4f}"])


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def emit_json(summary, path):
    with open(path, "w") as fh:
        json.dump(_json_safe(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_outputs(cfg, records, summary, output=None):
    out = output or cfg.output
    if not out:
        return None
    os.makedirs(out, exist_ok=True)
    emit_csv(records, os.path.join(out, "records.csv"))
    emit_timings(records, os.path.join(out, "timings.csv"))
    summary = dict(summary, config=_json_safe(asdict(cfg)))
    emit_json(summary, os.path.join(out, "summary.json"))
    return out
