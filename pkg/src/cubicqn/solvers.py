"""Outer optimization loops.

* :func:`adaptive_inexact_crn` - adaptive inexact cubic Newton with a
  quasi-Newton (or exact) Hessian model; the regularization slack ``delta``
  is raised until the step passes the gradient-progress certificate.
* :func:`adaptive_accelerated_crn` - the accelerated variant built on an
  estimating sequence, including the rollback safeguard.
* :func:`alt_adaptive_cubic` - variant that certifies steps by function
  decrease and may shrink ``delta`` after each accepted step.
* baselines: gradient descent, exact cubic Newton, damped Newton, and
  fixed-step L-BFGS / L-SR1.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cubic_step import EstimatingSequenceState, estseq_minimize, solve_step
from .hessian_models import (
    PairBuffer,
    build_history_model,
    build_sampling_model,
    identity_model,
)
from .linalg import as_vector

HESSIAN_POLICIES = (
    "exact",
    "lbfgs-history",
    "lbfgs-history-damped",
    "lsr1-history",
    "broyden-sampling",
    "combined",
)

_HISTORY_KIND = {
    "lbfgs-history": "lbfgs",
    "lbfgs-history-damped": "lbfgs-damped",
    "lsr1-history": "lsr1",
    "combined": "lbfgs",
}


class SolverError(RuntimeError):
    """Raised when the adaptive loop cannot certify a step; carries the partial trace."""

    def __init__(self, message, trace=None, **diagnostics):
        super().__init__(message)
        self.trace = trace
        self.diagnostics = diagnostics


@dataclass
class SolverConfig:
    """Hyperparameters shared by the cubic methods.

    ``M=None`` means ``2 * L2`` from the oracle's ``lipschitz_estimates``.
    ``sample_memory`` is the number of sampled directions for the
    ``combined`` policy (defaults to ``memory``).
    """

    M: float = None
    delta0: float = 1e-8
    gamma_inc: float = 2.0
    gamma_dec: float = 1.0
    memory: int = 10
    hessian: str = "lbfgs-history"
    upsilon: float = 0.0
    base_scale: float = 0.0
    sample_memory: int = None
    max_iters: int = 200
    gtol: float = 1e-10
    max_inner: int = 60
    rollback_cap: int = 30
    seed: int = 0
    keep_iterates: bool = False
    record_timing: bool = False

    def __post_init__(self):
        if self.M is not None and not self.M > 0:
            raise ValueError("M must be positive")
        if not self.gamma_inc > 1:
            raise ValueError("gamma_inc must exceed 1")
        if not 0 < self.gamma_dec <= 1:
            raise ValueError("gamma_dec must lie in (0, 1]")
        if self.delta0 < 0:
            raise ValueError("delta0 must be nonnegative")
        if self.memory < 1:
            raise ValueError("memory must be at least 1")
        if self.hessian not in HESSIAN_POLICIES:
            raise ValueError(f"unknown hessian policy {self.hessian!r}")
        if not 0 <= self.upsilon <= 1:
            raise ValueError("upsilon must lie in [0, 1]")
        if self.base_scale < 0:
            raise ValueError("base_scale must be nonnegative")

    def resolve_M(self, oracle):
        if self.M is not None:
            return float(self.M)
        _, L2 = oracle.lipschitz_estimates()
        if L2 <= 0:
            raise ValueError("oracle reports L2 = 0; set M explicitly")
        return 2.0 * L2


@dataclass
class IterationRecord:
    t: int
    f: float
    gnorm: float
    delta: float
    inner_repeats: int
    step_norm: float
    grad_evals: int
    hvp_equiv: int
    wall_ns: int
    x: np.ndarray = None
    ref: np.ndarray = None


@dataclass
class SolverTrace:
    method: str
    dim: int
    records: list = field(default_factory=list)
    rollbacks: int = 0
    notes: list = field(default_factory=list)

    @property
    def f(self):
        return np.array([r.f for r in self.records])

    @property
    def iterations(self):
        return self.records[-1].t if self.records else 0

    @property
    def delta_increases(self):
        return sum(r.inner_repeats for r in self.records)


class _Recorder:
    def __init__(self, oracle, trace, config):
        self.oracle = oracle
        self.trace = trace
        self.keep = config.keep_iterates
        self.timing = config.record_timing
        self.t0 = time.perf_counter_ns()

    def __call__(self, t, f, g, delta, repeats, step_norm, x=None, ref=None):
        c = self.oracle.counters
        self.trace.records.append(IterationRecord(
            t=t,
            f=float(f),
            gnorm=float(np.linalg.norm(g)),
            delta=float(delta),
            inner_repeats=int(repeats),
            step_norm=float(step_norm),
            grad_evals=c.n_grad,
            hvp_equiv=c.hvp_equiv(self.oracle.dim),
            wall_ns=time.perf_counter_ns() - self.t0 if self.timing else 0,
            x=None if x is None or not self.keep else np.array(x),
            ref=None if ref is None or not self.keep else np.array(ref),
        ))


def progress_certificate(g_new, ref, x_new, delta, M):
    """Return ``(lhs, rhs)`` of the gradient-progress test ``<g+, ref - x+> >= min(...)``."""
    gn = float(np.linalg.norm(g_new))
    lhs = float(g_new @ (ref - x_new))
    first = np.inf if delta == 0 else gn**2 / (4.0 * delta)
    rhs = min(first, gn**1.5 / np.sqrt(3.0 * M))
    return lhs, rhs


_STAGNATION_NOTE = "step {t}: trial point equals the reference point in floating point; stopped"
_DECREASE_FLOOR_NOTE = "step {t}: required decrease is below the resolution of f; stopped"
# a decrease test asking for less than this many ulps of f is decided by rounding
DECREASE_FLOOR_ULPS = 16


class _Stagnation(Exception):
    """The trial point equals the reference point in floating point."""

    note = _STAGNATION_NOTE


def _raise_delta(delta, gamma, floor):
    # an increase never lands below the starting level, so a delta that decayed
    # towards zero is not stuck doubling from a denormal
    return max(delta * gamma, floor)


class _ModelSource:
    """Builds ``B_t`` at a point according to the configured policy."""

    def __init__(self, oracle, config):
        self.oracle = oracle
        self.config = config
        self.policy = config.hessian
        self.buffer = PairBuffer(config.memory) if self.policy in _HISTORY_KIND else None

    def model_at(self, x, t):
        cfg = self.config
        if self.policy == "exact":
            return self.oracle.hessian(x)
        if self.policy == "broyden-sampling":
            return build_sampling_model(self.oracle, x, cfg.memory, (cfg.seed, t), cfg.upsilon)
        c = cfg.base_scale
        if len(self.buffer):
            model = build_history_model(self.buffer, _HISTORY_KIND[self.policy], c, dim=self.oracle.dim)
        else:
            model = identity_model(self.oracle.dim, c, memory=cfg.memory)
        if self.policy == "combined":
            m_s = cfg.sample_memory or cfg.memory
            model = build_sampling_model(self.oracle, x, m_s, (cfg.seed, t), cfg.upsilon, base=model)
        return model

    def observe(self, x_old, g_old, x_new, g_new):
        if self.buffer is not None:
            self.buffer.push(x_new - x_old, g_new - g_old)


def _cubic_trial_loop(oracle, B, x_ref, g_ref, delta, M, config, accept, trace, t):
    """Solve from ``x_ref``, raising delta until ``accept`` holds. Returns step data."""
    repeats = 0
    while True:
        step = solve_step(g_ref, B, M, delta)
        x_new = x_ref + step.h
        if np.array_equal(x_new, x_ref):
            raise _Stagnation
        f_new, g_new = oracle.value_grad(x_new)
        if accept(x_new, f_new, g_new, step, delta):
            return x_new, f_new, g_new, step, delta, repeats
        repeats += 1
        if repeats > config.max_inner:
            raise SolverError(
                f"step {t}: delta could not certify the step after {config.max_inner} increases "
                "(is M below 2 L2?)",
                trace=trace, t=t, delta=delta, M=M,
            )
        delta = _raise_delta(delta, config.gamma_inc, config.delta0 or 1e-8)


def adaptive_inexact_crn(oracle, config, x0, name="adaptive-crn"):
    """Adaptive inexact cubic-regularized Newton method.

    Each step solves the cubic model with slack ``delta_t`` around the current
    iterate. The step is retried with ``delta_t * gamma_inc`` while
    ``<grad f(x+), x - x+> < min(||grad f(x+)||^2 / (4 delta), ||grad f(x+)||^1.5 / sqrt(3M))``;
    the final ``delta_t`` is carried to the next iteration.

    Returns ``(x_T, trace)``.
    """
    x = as_vector(x0, "x0").copy()
    M = config.resolve_M(oracle)
    trace = SolverTrace(name, oracle.dim)
    record = _Recorder(oracle, trace, config)
    source = _ModelSource(oracle, config)
    f, g = oracle.value_grad(x)
    delta = config.delta0
    record(0, f, g, delta, 0, 0.0, x=x)

    def accept(x_new, f_new, g_new, step, delta_):
        lhs, rhs = progress_certificate(g_new, x, x_new, delta_, M)
        return lhs >= rhs

    for t in range(config.max_iters):
        gnorm = np.linalg.norm(g)
        if gnorm == 0 or gnorm <= config.gtol:
            break
        B = source.model_at(x, t)
        try:
            x_new, f_new, g_new, step, delta, repeats = _cubic_trial_loop(
                oracle, B, x, g, delta, M, config, accept, trace, t)
        except _Stagnation as exc:
            trace.notes.append(exc.note.format(t=t))
            break
        source.observe(x, g, x_new, g_new)
        ref = x
        x, f, g = x_new, f_new, g_new
        record(t + 1, f, g, delta, repeats, step.r, x=x, ref=ref)
    return x, trace


def accel_coefficients(t):
    """``(alpha_t, A_t)`` with ``alpha_t = 3/(t+3)`` and ``A_t = 6/((t+1)(t+2)(t+3))``."""
    return 3.0 / (t + 3), 6.0 / ((t + 1) * (t + 2) * (t + 3))


@dataclass
class _AccelStep:
    t: int
    x: np.ndarray
    y: np.ndarray
    state: EstimatingSequenceState
    buffer: object
    n_records: int
    v: np.ndarray = None
    x_next: np.ndarray = None
    f_next: float = None
    g_next: np.ndarray = None
    delta: float = None
    repeats: int = 0
    step_norm: float = 0.0


def adaptive_accelerated_crn(oracle, config, x0, name="accelerated-crn"):
    """Adaptive accelerated inexact cubic Newton with estimating sequences.

    Per step: ``v = (1 - alpha) x + alpha y``, an adaptive cubic step from
    ``v`` (same certificate as :func:`adaptive_inexact_crn`, reference ``v``),
    then ``kappa2 = 4 delta alpha^2 / A``, ``kappa3 = (8M/3) alpha_{t+1}^3 / A_{t+1}``,
    the linearization at the new point enters ``psi`` with weight ``alpha/A``
    and ``y`` moves to the minimizer of ``psi``.

    The safeguard accepts ``y_{t+1}`` when ``||y_{t+1} - y_t|| <= ||y_{t+1} - x0||``
    or ``kappa2_t >= 2 delta_t alpha_t^2 / A_t``. Otherwise the previous step
    is reopened with the raised ``delta`` (recomputing its ``kappa2`` and
    ``y``) and the current step is redone. A rollback is only attempted when it
    changes the previous step's ``delta``; an unresolvable violation is noted
    in ``trace.notes`` and the step is kept.

    Returns ``(x_T, trace)``; the iterates are not monotone in ``f``.
    """
    x0 = as_vector(x0, "x0").copy()
    M = config.resolve_M(oracle)
    trace = SolverTrace(name, oracle.dim)
    record = _Recorder(oracle, trace, config)
    source = _ModelSource(oracle, config)
    f0, g0 = oracle.value_grad(x0)
    record(0, f0, g0, config.delta0, 0, 0.0, x=x0)

    alpha0, A0 = accel_coefficients(0)
    state = EstimatingSequenceState.start(x0, 0.0, 8.0 * M / 3.0 * alpha0**3 / A0)
    x, y, f, g = x0, x0.copy(), f0, g0
    delta = config.delta0
    committed = []
    rollbacks_at = {}

    def finalize(step):
        """Lines after the inner loop: new kappas, psi update, y update, safeguard."""
        alpha, A = accel_coefficients(step.t)
        alpha1, A1 = accel_coefficients(step.t + 1)
        new_state = step.state.with_kappas(
            4.0 * step.delta * alpha**2 / A, 8.0 * M / 3.0 * alpha1**3 / A1
        ).add_linearization(alpha / A, step.x_next, step.f_next, step.g_next)
        y_next = estseq_minimize(new_state)
        ok = (np.linalg.norm(y_next - step.y) <= np.linalg.norm(y_next - x0)
              or step.state.kappa2 >= 2.0 * step.delta * alpha**2 / A)
        return ok, new_state, y_next

    def commit(step, new_state, y_next):
        del trace.records[step.n_records:]
        committed.append(step)
        record(step.t + 1, step.f_next, step.g_next, step.delta, step.repeats, step.step_norm,
               x=step.x_next, ref=step.v)
        return step.x_next, y_next, new_state, step.f_next, step.g_next

    t = 0
    while t < config.max_iters:
        gnorm = np.linalg.norm(g)
        if gnorm == 0 or gnorm <= config.gtol:
            break
        alpha, _ = accel_coefficients(t)
        v = (1.0 - alpha) * x + alpha * y
        f_v, g_v = (f, g) if np.array_equal(v, x) else oracle.value_grad(v)
        step = _AccelStep(t, x, y, state, source.buffer.copy() if source.buffer else None,
                          len(trace.records), v=v)
        if np.linalg.norm(g_v) == 0:
            x_next, f_next, g_next, h_norm, repeats = v, f_v, g_v, 0.0, 0
        else:
            B = source.model_at(v, t)

            def accept(x_new, f_new, g_new, st, delta_, ref=v):
                lhs, rhs = progress_certificate(g_new, ref, x_new, delta_, M)
                return lhs >= rhs

            try:
                x_next, f_next, g_next, st, delta, repeats = _cubic_trial_loop(
                    oracle, B, v, g_v, delta, M, config, accept, trace, t)
            except _Stagnation:
                trace.notes.append(_STAGNATION_NOTE.format(t=t))
                break
            h_norm = st.r
            source.observe(v, g_v, x_next, g_next)
        step.x_next, step.f_next, step.g_next = x_next, f_next, g_next
        step.delta, step.repeats, step.step_norm = delta, repeats, h_norm

        ok, new_state, y_next = finalize(step)
        while not ok:
            if not committed or committed[-1].delta >= step.delta:
                trace.notes.append(f"step {step.t}: safeguard violated, rollback cannot change delta")
                break
            rollbacks_at[step.t] = rollbacks_at.get(step.t, 0) + 1
            if rollbacks_at[step.t] > config.rollback_cap:
                raise SolverError(f"step {step.t}: rollback cap exceeded", trace=trace, t=step.t,
                                  delta=step.delta)
            trace.rollbacks += 1
            prev = committed.pop()
            prev.delta = step.delta
            if source.buffer is not None:
                # pairs gathered after prev stay valid only up to prev's own pair
                source.buffer = step.buffer
            step = prev
            ok, new_state, y_next = finalize(step)
        x, y, state, f, g = commit(step, new_state, y_next)
        delta = step.delta
        t = step.t + 1
    return x, trace


def _decrease_trial_loop(oracle, B, x, f, g, delta, M, config, trace, t):
    repeats = 0
    while True:
        step = solve_step(g, B, M, delta)
        x_new = x + step.h
        if np.array_equal(x_new, x):
            raise _Stagnation
        f_new = oracle.value(x_new)
        required = M / 12.0 * step.r**3 - 0.5 * float(g @ step.h)
        if f_new <= f - required:
            return x_new, f_new, step, delta, repeats
        if required <= DECREASE_FLOOR_ULPS * np.spacing(abs(f)):
            exc = _Stagnation()
            exc.note = _DECREASE_FLOOR_NOTE
            raise exc
        repeats += 1
        if repeats > config.max_inner:
            raise SolverError(f"step {t}: decrease test failed {config.max_inner} times",
                              trace=trace, t=t, delta=delta, M=M)
        delta = _raise_delta(delta, config.gamma_inc, config.delta0 or 1e-8)


def alt_adaptive_cubic(oracle, config, x0, name="alt-adaptive-cubic"):
    """Adaptive inexact cubic Newton certified by function decrease.

    A step ``h`` from ``x`` is accepted when
    ``f(x + h) <= f(x) + <grad f(x), h>/2 - (M/12) ||h||^3``; otherwise
    ``delta <- gamma_inc * delta`` and the step is recomputed. After each
    accepted step ``delta <- gamma_dec * delta``.
    """
    x = as_vector(x0, "x0").copy()
    M = config.resolve_M(oracle)
    trace = SolverTrace(name, oracle.dim)
    record = _Recorder(oracle, trace, config)
    source = _ModelSource(oracle, config)
    f, g = oracle.value_grad(x)
    delta = config.delta0
    record(0, f, g, delta, 0, 0.0, x=x)
    for t in range(config.max_iters):
        gnorm = np.linalg.norm(g)
        if gnorm == 0 or gnorm <= config.gtol:
            break
        B = source.model_at(x, t)
        try:
            x_new, f_new, step, delta, repeats = _decrease_trial_loop(
                oracle, B, x, f, g, delta, M, config, trace, t)
        except _Stagnation as exc:
            trace.notes.append(exc.note.format(t=t))
            break
        g_new = oracle.grad(x_new)
        source.observe(x, g, x_new, g_new)
        ref = x
        x, f, g = x_new, f_new, g_new
        record(t + 1, f, g, delta, repeats, step.r, x=x, ref=ref)
        delta *= config.gamma_dec
    return x, trace


def baseline_exact_crn(oracle, config, x0, name="exact-crn"):
    """Cubic Newton with the exact Hessian (each Hessian charged as ``d`` HVPs)."""
    return adaptive_inexact_crn(oracle, replace(config, hessian="exact"), x0, name=name)


@dataclass
class StopCriteria:
    max_iters: int = 200
    gtol: float = 1e-10
    keep_iterates: bool = False
    record_timing: bool = False


def _first_order_loop(oracle, x0, stop, name, direction):
    x = as_vector(x0, "x0").copy()
    trace = SolverTrace(name, oracle.dim)
    record = _Recorder(oracle, trace, stop)
    f, g = oracle.value_grad(x)
    record(0, f, g, 0.0, 0, 0.0, x=x)
    for t in range(stop.max_iters):
        gnorm = np.linalg.norm(g)
        if gnorm == 0 or gnorm <= stop.gtol:
            break
        d = direction(x, g)
        x_new = x + d
        f_new, g_new = oracle.value_grad(x_new)
        if not np.isfinite(f_new):
            raise SolverError(f"step {t}: objective became non-finite", trace=trace, t=t)
        ref = x
        if hasattr(direction, "observe"):
            direction.observe(x, g, x_new, g_new)
        x, f, g = x_new, f_new, g_new
        record(t + 1, f, g, 0.0, 0, np.linalg.norm(d), x=x, ref=ref)
    return x, trace


def baseline_gd(oracle, lr, x0, stop=None, name="gd"):
    """Gradient descent ``x <- x - lr grad f(x)``; ``lr=None`` means ``1/L1``."""
    stop = stop or StopCriteria()
    if lr is None:
        lr = 1.0 / oracle.lipschitz_estimates()[0]
    if not lr > 0:
        raise ValueError("lr must be positive")
    return _first_order_loop(oracle, x0, stop, name, lambda x, g: -lr * g)


def baseline_damped_newton(oracle, damping, x0, stop=None, jitter=1e-12, name="damped-newton"):
    """``x <- x - damping (hess f(x) + jitter I)^{-1} grad f(x)``."""
    stop = stop or StopCriteria()

    def direction(x, g):
        H = oracle.hessian(x)
        try:
            return -damping * np.linalg.solve(H + jitter * np.eye(H.shape[0]), g)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular Newton system: {exc}") from exc

    return _first_order_loop(oracle, x0, stop, name, direction)


class _InverseQN:
    """Fixed-step inverse quasi-Newton direction ``-lr H g`` from a FIFO of pairs."""

    def __init__(self, lr, m, kind):
        if not lr > 0:
            raise ValueError("lr must be positive")
        self.lr = lr
        self.buffer = PairBuffer(m)
        self.kind = kind

    def observe(self, x, g, x_new, g_new):
        self.buffer.push(x_new - x, g_new - g)

    def _gamma(self):
        s, y = self.buffer.pairs[-1]
        return float(s @ y) / float(y @ y)

    def __call__(self, x, g):
        if not len(self.buffer):
            return -self.lr * g
        if self.kind == "lbfgs":
            return -self.lr * self._two_loop(g)
        return -self.lr * self._sr1_apply(g)

    def _two_loop(self, g):
        q = g.copy()
        alphas = []
        for s, y in reversed(self.buffer.pairs):
            rho = 1.0 / float(y @ s)
            a = rho * float(s @ q)
            alphas.append((a, rho, s, y))
            q -= a * y
        r = self._gamma() * q
        for a, rho, s, y in reversed(alphas):
            b = rho * float(y @ r)
            r += (a - b) * s
        return r

    def _sr1_apply(self, g):
        gamma = self._gamma()
        coefs, vecs = [], []

        def H(v):
            out = gamma * v
            for a, w in zip(coefs, vecs):
                out = out + a * float(w @ v) * w
            return out

        for s, y in self.buffer:
            u = s - H(y)
            uy = float(u @ y)
            if np.any(u) and abs(uy) > 1e-8 * np.linalg.norm(u) * np.linalg.norm(y):
                coefs.append(1.0 / uy)
                vecs.append(u)
        return H(g)


def baseline_classical_lbfgs(oracle, lr, m, x0, stop=None, name="lbfgs"):
    """Fixed-step L-BFGS: ``x <- x - lr H_t grad f(x)`` via the two-loop recursion."""
    return _first_order_loop(oracle, x0, stop or StopCriteria(), name, _InverseQN(lr, m, "lbfgs"))


def baseline_classical_lsr1(oracle, lr, m, x0, stop=None, name="lsr1"):
    """Fixed-step L-SR1 with the inverse SR1 update folded over the stored pairs."""
    return _first_order_loop(oracle, x0, stop or StopCriteria(), name, _InverseQN(lr, m, "lsr1"))
