"""Command line entry point: ``cubicqn run|compare <config>`` and ``cubicqn check``.

Exit codes: 0 success, 1 solver error (or failed self-check), 2 config error.
"""

import argparse
import sys

import numpy as np

from .config import ConfigError, load_config
from .runner import run_experiment


def _self_checks(seed):
    """Yield ``(label, passed, detail)`` for the quick build self-test."""
    from ..cubic_step import EstimatingSequenceState, estseq_minimize, solve_dense, solve_low_rank
    from ..dataio import synth_logistic
    from ..hessian_models import PairBuffer, build_history_model
    from ..oracle import check_derivatives

    rng = np.random.default_rng(seed)
    P = synth_logistic(200, 20, seed=seed, flip=0.1)
    x = rng.standard_normal(20)
    rep = check_derivatives(P, x, trials=20, seed=seed)
    yield "derivatives (gradient, HVP vs finite differences)", rep.passed(1e-6), \
        f"grad {rep.grad_rel_err:.1e}, hvp {rep.hvp_rel_err:.1e}"

    buf = PairBuffer(10)
    xs = [rng.standard_normal(20) for _ in range(12)]
    for a, b in zip(xs, xs[1:]):
        buf.push(b - a, P.grad(b) - P.grad(a))
    B = build_history_model(buf, "lbfgs", dim=20)
    s, y = buf.pairs[-1]
    sec = np.linalg.norm(B.matvec(s) - y) / np.linalg.norm(y)
    lam_min = np.linalg.eigvalsh(B.dense())[0]
    yield "L-BFGS secant and PSD", sec <= 1e-9 and lam_min >= -1e-9 * np.abs(B.dense()).max(), \
        f"secant {sec:.1e}, min eig {lam_min:.1e}"

    g = P.grad(x)
    M = 2 * P.lipschitz_estimates()[1]
    a = solve_low_rank(g, B, M, 1e-3)
    b = solve_dense(g, B.dense(), M, 1e-3)
    err = np.linalg.norm(a.h - b.h) / max(np.linalg.norm(b.h), 1e-300)
    yield "cubic step low-rank vs dense", err <= 1e-8, f"rel diff {err:.1e}"

    st = EstimatingSequenceState.start(x, 0.5, 2.0).add_linearization(1.0, xs[0], 0.0, g)
    ystar = estseq_minimize(st)
    best = min(st.psi(ystar + 1e-4 * rng.standard_normal(20)) for _ in range(50))
    yield "estimating-sequence minimizer", st.psi(ystar) <= best, f"psi* {st.psi(ystar):.6g}"


def _cmd_check(args):
    ok = True
    for label, passed, detail in _self_checks(args.seed or 0):
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
    return 0 if ok else 1


def _cmd_run(args, write):
    try:
        cfg = load_config(args.config).with_overrides(args.seed, args.out_dir, args.max_iters)
        summary = run_experiment(cfg, write=write)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if write:
        for path in summary.files:
            print(path)
    else:
        print(summary.table())
    for r in summary.results:
        if not r.ok:
            print(f"solver error in {r.name}: {r.error}", file=sys.stderr)
    return 0 if summary.ok else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="cubicqn", description="Cubic-regularized quasi-Newton benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the global seed")
    common.add_argument("--out-dir", default=None, help="override the output directory")
    common.add_argument("--max-iters", type=int, default=None, help="override the iteration cap of every method")
    p = sub.add_parser("run", parents=[common], help="run an experiment and write CSV/SVG outputs")
    p.add_argument("config")
    p = sub.add_parser("compare", parents=[common], help="run an experiment and print a summary table")
    p.add_argument("config")
    sub.add_parser("check", parents=[common], help="derivative and invariant self-test")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which matches the config-error code
        return exc.code
    if args.command == "check":
        return _cmd_check(args)
    return _cmd_run(args, write=args.command == "run")


if __name__ == "__main__":
    sys.exit(main())
