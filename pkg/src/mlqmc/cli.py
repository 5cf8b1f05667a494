"""Command line entry point: ``mlqmc run | points | table1``."""
import argparse
import logging
import sys

import numpy as np

from . import harness
from . import sequences as seq
from .problems import get_problem, level_statistics


def _cmd_run(args):
    cfg = harness.load_config(args.config)
    if args.trials is not None:
        cfg.trials = args.trials
    if args.workers is not None:
        cfg.workers = args.workers
    if args.output is not None:
        cfg.output = args.output

    def progress(i, total):
        if args.verbose:
            print(f"  {i}/{total} trial batches done", file=sys.stderr)

    records, summary = harness.run_experiment(cfg, progress)
    out = harness.write_outputs(cfg, records, summary)
    for key, s in summary["slopes"].items():
        print(f"slope {key}: {s:.3f}")
    for key, c in summary["cells"].items():
        print(f"{key}: median err {c['median_error']:.3e}  median se {c['median_stderr']:.3e}  "
              f"coverage {c['coverage']:.2f}")
    if out:
        print(f"wrote {out}/records.csv, summary.json, timings.csv")
    failed = 0
    if args.check:
        if not cfg.checks:
            print("no checks configured", file=sys.stderr)
        for r in harness.evaluate_checks(cfg, summary):
            print(f"{'PASS' if r.passed else 'FAIL'} {r.description} (value {r.value:.4g})")
            failed += not r.passed
    return 1 if failed else 0


def _cmd_points(args):
    if args.generator:
        gen = seq.parse_ld_data(args.generator, args.d)
        if (args.kind == "net") != isinstance(gen, seq.DigitalNetGen):
            raise ValueError(f"{args.generator} is not a {args.kind} generator file")
    else:
        gen = seq.default_generator(args.kind, args.d)
    shift = None
    if args.shift_seed is not None:
        rng = np.random.default_rng(args.shift_seed)
        if args.kind == "net" and args.scramble:
            gen = seq.lms_scramble(gen, rng)
        shift = seq.Shift.random(args.d, gen.t, rng)
    x = seq.points(gen, shift, 0, args.n)
    np.savetxt(sys.stdout, x, fmt="%.17g")
    return 0


def _cmd_table1(args):
    kw = {"coupling": args.coupling} if args.problem != "elliptic" else {}
    prob = get_problem(args.problem, **kw)
    mu, sd = level_statistics(prob, n=args.n, rng=np.random.default_rng(args.seed))
    print(f"{'level':>5} {'dim':>5} {'cost':>9} {'mean':>12} {'std':>12}")
    for lv in range(prob.L):
        print(f"{lv + 1:>5} {prob.dims[lv]:>5} {prob.costs[lv]:>9.4g} {mu[lv]:>12.4e} {sd[lv]:>12.4e}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="mlqmc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a TOML config")
    r.add_argument("--config", required=True)
    r.add_argument("--check", action="store_true", help="evaluate the config's checks; exit 1 on failure")
    r.add_argument("--trials", type=int, help="override the configured trial count")
    r.add_argument("--workers", type=int)
    r.add_argument("--output", help="output directory (overrides the config)")
    r.set_defaults(func=_cmd_run)

    q = sub.add_parser("points", help="print low-discrepancy points, one per line")
    q.add_argument("--kind", choices=("lattice", "net"), required=True)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--d", type=int, required=True)
    q.add_argument("--shift-seed", type=int, help="randomize with a (digital) shift from this seed")
    q.add_argument("--generator", help="generator file (default: the embedded one for --kind)")
    q.add_argument("--scramble", action="store_true", help="nets: also apply LMS (needs --shift-seed)")
    q.set_defaults(func=_cmd_points)

    t = sub.add_parser("table1", help="IID level means and standard deviations")
    t.add_argument("--problem", choices=("asian", "lookback", "elliptic"), required=True)
    t.add_argument("--n", type=int, default=2 ** 16)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--coupling", choices=("fine", "subset"), default="fine")
    t.set_defaults(func=_cmd_table1)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (harness.ConfigError, seq.LdDataError, ValueError, OSError) as exc:
        print(f"mlqmc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
