"""Run every configured method on a shared problem and write traces and plots."""

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import solvers
from ..dataio import LibsvmFormatError, load_libsvm, synth_logistic
from ..oracle import QuadraticProblem
from .config import ConfigError
from .emit import emit_plot_svg, emit_trace_csv

_CUBIC_KINDS = {
    "cubic": solvers.adaptive_inexact_crn,
    "accelerated": solvers.adaptive_accelerated_crn,
    "alt-cubic": solvers.alt_adaptive_cubic,
    "exact-crn": solvers.baseline_exact_crn,
}


@dataclass
class MethodResult:
    name: str
    kind: str
    trace: solvers.SolverTrace
    error: str = None
    wall_s: float = 0.0

    @property
    def ok(self):
        return self.error is None

    @property
    def iterations(self):
        return self.trace.iterations if self.trace else 0

    @property
    def hvp_equiv(self):
        return self.trace.records[-1].hvp_equiv if self.trace and self.trace.records else 0

    @property
    def grad_evals(self):
        return self.trace.records[-1].grad_evals if self.trace and self.trace.records else 0

    @property
    def final_f(self):
        return self.trace.records[-1].f if self.trace and self.trace.records else float("nan")


@dataclass
class RunSummary:
    """Per-method outcomes plus the ``f*`` proxy (best value seen minus slack)."""

    fstar: float
    results: list = field(default_factory=list)
    files: list = field(default_factory=list)

    def gap(self, name):
        return self[name].final_f - self.fstar

    def iterations_to(self, name, threshold):
        """First record index with gap proxy at most ``threshold`` (``None`` if never)."""
        tr = self[name].trace
        if tr is None:
            return None
        hits = np.flatnonzero(tr.f - self.fstar <= threshold)
        return int(tr.records[hits[0]].t) if len(hits) else None

    def __getitem__(self, name):
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def ok(self):
        return all(r.ok for r in self.results)

    def table(self, threshold=1e-6):
        head = f"{'method':<24} {'kind':<14} {'iters':>6} {'final gap':>12} {'hvp_equiv':>10} " \
               f"{'to ' + format(threshold, 'g'):>8} {'time[s]':>8}  status"
        lines = [f"f* proxy = {float(self.fstar)!r}", head, "-" * len(head)]
        for r in self.results:
            hit = self.iterations_to(r.name, threshold)
            lines.append(
                f"{r.name:<24} {r.kind:<14} {r.iterations:>6} {r.final_f - self.fstar:>12.3e} "
                f"{r.hvp_equiv:>10} {'-' if hit is None else hit:>8} {r.wall_s:>8.2f}  "
                f"{'ok' if r.ok else 'error: ' + r.error}"
            )
        return "\n".join(lines)


def build_problem(cfg):
    p = cfg.problem
    if p.source == "synth":
        seed = cfg.seed if p.data_seed is None else p.data_seed
        return synth_logistic(p.n, p.d, seed=seed, flip=p.flip, mu=p.mu)
    if p.source == "quadratic":
        return QuadraticProblem(np.diag(p.diag), np.array(p.b))
    try:
        ds = load_libsvm(p.path, dim=p.dim or None, zero_one=p.zero_one, normalize=p.normalize)
    except (OSError, LibsvmFormatError, ValueError) as exc:
        raise ConfigError(f"cannot load {p.path}: {exc}") from exc
    return ds.problem(p.mu)


def starting_point(cfg, dim):
    return np.zeros(dim) if cfg.start_kind == "zeros" else cfg.start_scale * np.ones(dim)


def _solver_config(spec, cfg):
    keys = ("M", "delta0", "gamma_inc", "gamma_dec", "hessian", "upsilon", "base_scale",
            "memory", "sample_memory", "max_inner", "rollback_cap")
    kwargs = {k: spec.params[k] for k in keys if k in spec.params}
    try:
        return solvers.SolverConfig(
            max_iters=cfg.max_iters if spec.max_iters is None else spec.max_iters,
            gtol=cfg.gtol if spec.gtol is None else spec.gtol,
            seed=cfg.seed,
            record_timing=cfg.record_timing,
            **kwargs,
        )
    except ValueError as exc:
        raise ConfigError(f"method {spec.name!r}: {exc}") from exc


def _stop(spec, cfg):
    return solvers.StopCriteria(
        max_iters=cfg.max_iters if spec.max_iters is None else spec.max_iters,
        gtol=cfg.gtol if spec.gtol is None else spec.gtol,
        record_timing=cfg.record_timing,
    )


def _run_method(spec, problem, x0, cfg):
    oracle = problem.fresh()
    p = spec.params
    if spec.kind in _CUBIC_KINDS:
        return _CUBIC_KINDS[spec.kind](oracle, _solver_config(spec, cfg), x0, name=spec.name)[1]
    stop = _stop(spec, cfg)
    if spec.kind == "gd":
        return solvers.baseline_gd(oracle, p.get("lr"), x0, stop, name=spec.name)[1]
    if spec.kind == "damped-newton":
        return solvers.baseline_damped_newton(oracle, p.get("damping", 1.0), x0, stop, name=spec.name)[1]
    lr = p.get("lr", 1.0 / oracle.lipschitz_estimates()[0])
    fn = solvers.baseline_classical_lbfgs if spec.kind == "lbfgs" else solvers.baseline_classical_lsr1
    return fn(oracle, lr, int(p.get("memory", 10)), x0, stop, name=spec.name)[1]


def run_experiment(cfg, write=True):
    """Run every method from the shared start; solver failures are recorded, not raised.

    With ``write=True`` emits ``<name>.csv`` per method, ``summary.csv`` and one
    SVG per configured plot axis into ``cfg.out_dir``.
    """
    problem = build_problem(cfg)
    x0 = starting_point(cfg, problem.dim)
    for spec in cfg.methods:
        if spec.kind in _CUBIC_KINDS:
            try:
                _solver_config(spec, cfg).resolve_M(problem)
            except ValueError as exc:
                raise ConfigError(f"method {spec.name!r}: {exc}") from exc
        elif spec.params.get("lr", 1.0) <= 0:
            raise ConfigError(f"method {spec.name!r}: lr must be positive")
    results = []
    for spec in cfg.methods:
        t0 = time.perf_counter()
        try:
            trace, err = _run_method(spec, problem, x0, cfg), None
        except solvers.SolverError as exc:
            trace, err = exc.trace, str(exc)
        results.append(MethodResult(spec.name, spec.kind, trace, err, time.perf_counter() - t0))
    finals = [r.trace.f.min() for r in results if r.trace is not None and r.trace.records]
    fstar = float(min(finals) if finals else 0.0) - cfg.fstar_slack
    summary = RunSummary(fstar, results)
    if write:
        _write_outputs(cfg, summary)
    return summary


def _write_outputs(cfg, summary):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traces = {}
    for r in summary.results:
        if r.trace is None:
            continue
        path = out / f"{r.name}.csv"
        emit_trace_csv(r.trace, path)
        summary.files.append(path)
        traces[r.name] = r.trace
    path = out / "summary.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["method", "kind", "status", "iterations", "final_f", "gap_proxy", "grad_evals", "hvp_equiv"])
        for r in summary.results:
            w.writerow([r.name, r.kind, "ok" if r.ok else r.error, r.iterations, repr(r.final_f),
                        repr(r.final_f - summary.fstar), r.grad_evals, r.hvp_equiv])
    summary.files.append(path)
    for axis in cfg.plot_axes:
        path = out / f"gap_vs_{axis}.svg"
        emit_plot_svg(traces, axis, path, summary.fstar)
        summary.files.append(path)
