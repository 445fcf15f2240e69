"""Cubic-regularized subproblem solvers and the estimating-sequence minimizer.

The subproblem is

    min_h  <g, h> + 1/2 <B h, h> + (M/6) ||h||^3 + (delta/2) ||h||^2,

whose minimizer satisfies ``h = -(B + (delta + M r / 2) I)^{-1} g`` with
``r = ||h||``. Both solvers diagonalize ``B`` once (spectral form of the low-rank
model, or a dense eigendecomposition) and then find ``r`` by a safeguarded
Newton iteration on the scalar secular equation.
"""

from dataclasses import dataclass, replace

import numpy as np

from .hessian_models import LowRankHessianModel
from .linalg import as_vector, sym_eig

RAY_TOL = 1e-10
_MAX_RAY_ITERS = 200


@dataclass
class CubicStepResult:
    h: np.ndarray
    r: float
    model_decrease: float
    iterations: int
    delta: float


def _matvec(B, v):
    if isinstance(B, LowRankHessianModel):
        return B.matvec(v)
    if callable(B):
        return B(v)
    return np.asarray(B) @ v


def model_value(g, B, M, delta, h):
    """Cubic model value at ``h`` with the constant ``f(x)`` dropped."""
    h = np.asarray(h, dtype=float)
    r = float(np.linalg.norm(h))
    return float(g @ h + 0.5 * h @ _matvec(B, h) + M / 6.0 * r**3 + 0.5 * delta * r**2)


def _ray_search(w2, lam, M, gnorm, tol):
    """Root ``r`` of ``sqrt(sum w2 / (lam + M r/2)^2) = r``.

    ``lam`` already includes the constant shift. Returns ``(r, iterations,
    hard_case)``; ``hard_case`` is set when the root lies at the pole of a
    component with zero weight (only possible for indefinite models).
    """
    lam_min = float(np.min(lam))
    r_lo = max(0.0, -2.0 * lam_min / M)
    # at the root (M/2) r^2 + lam_min r <= ||g||
    r_hi = (-lam_min + np.sqrt(lam_min**2 + 2.0 * M * gnorm)) / M
    r_hi = max(r_hi, r_lo) * (1.0 + 1e-12) + 1e-300

    def hnorm_and_slope(r):
        sig = lam + 0.5 * M * r
        with np.errstate(divide="ignore", invalid="ignore"):
            q = w2 / sig**2
            n2 = float(np.sum(q))
            dn2 = -M * float(np.sum(q / sig))
        return np.sqrt(n2), dn2

    pole = np.abs(lam + 0.5 * M * r_lo) <= 1e-14 * max(1.0, np.max(np.abs(lam)))
    if r_lo > 0 and not np.any(w2[pole] > 0):
        with np.errstate(divide="ignore", invalid="ignore"):
            n_lo = np.sqrt(float(np.sum(np.where(pole, 0.0, w2 / (lam + 0.5 * M * r_lo) ** 2))))
        if n_lo <= r_lo:
            return r_lo, 0, True

    lo, hi = r_lo, r_hi
    r = hi
    it = 0
    for it in range(1, _MAX_RAY_ITERS + 1):
        n, dn2 = hnorm_and_slope(r)
        if not np.isfinite(n) or n > r:
            lo = r
        else:
            hi = r
        if hi - lo <= tol * hi:
            break
        # Newton on 1/||h(r)|| - 1/r, which is close to linear in r
        step = None
        if np.isfinite(n) and n > 0 and r > 0:
            psi = 1.0 / n - 1.0 / r
            dpsi = -0.5 * dn2 / n**3 + 1.0 / r**2
            if dpsi > 0:
                step = r - psi / dpsi
        if step is not None and lo < step < hi and abs(step - r) <= tol * r:
            r = step
            break
        if step is None or not lo < step < hi:
            step = 0.5 * (lo + hi)
        if step == r:
            break
        r = step
    return r, it, False


def _assemble(g, basis, lam_shifted, perp, M, r, hard):
    k = basis.shape[1]
    sig = lam_shifted + 0.5 * M * r
    q = basis.T @ g
    sig_b = sig[:k]
    if hard:
        pole = np.abs(sig_b) <= 1e-14 * max(1.0, np.max(np.abs(lam_shifted)))
        coef = np.where(pole, 0.0, -q / np.where(pole, 1.0, sig_b))
    else:
        coef = -q / sig_b
    h = basis @ coef
    if perp is not None:
        h = h - perp / sig[-1]
    if hard:
        # fill the remaining length along the smallest eigenvector
        j = int(np.argmin(lam_shifted[:k]))
        extra = r**2 - float(h @ h)
        if extra > 0:
            h = h + np.sqrt(extra) * basis[:, j]
    return h


def _finish(g, B, M, delta, h, it):
    return CubicStepResult(h, float(np.linalg.norm(h)), model_value(g, B, M, delta, h), it, delta)


def _validate(g, M, delta):
    g = as_vector(g, "g")
    if not M > 0 or not np.isfinite(M):
        raise ValueError("M must be positive and finite")
    if not delta >= 0 or not np.isfinite(delta):
        raise ValueError("delta must be nonnegative and finite")
    return g


def solve_low_rank(g, model, M, delta, tol=RAY_TOL):
    """Cubic step for a :class:`LowRankHessianModel` in ``O(k^2 d + k log(1/tol))``."""
    g = _validate(g, M, delta)
    if g.shape[0] != model.dim:
        raise ValueError("gradient and model dimensions differ")
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0:
        return CubicStepResult(np.zeros_like(g), 0.0, 0.0, 0, delta)
    sf = model.spectral
    Q = sf.basis
    shift = model.c + delta
    q = Q.T @ g
    w2 = q**2
    lam = sf.eigvals + shift
    perp = None
    if Q.shape[1] < model.dim:
        perp = g - Q @ q
        w2 = np.append(w2, float(perp @ perp))
        lam = np.append(lam, shift)
    r, it, hard = _ray_search(w2, lam, M, gnorm, tol)
    h = _assemble(g, Q, lam, perp, M, r, hard)
    return _finish(g, model, M, delta, h, it)


def solve_dense(g, H, M, delta, tol=RAY_TOL):
    """Cubic step with an explicit symmetric Hessian: one eigendecomposition, ``O(d^3)``."""
    g = _validate(g, M, delta)
    H = np.asarray(H, dtype=float)
    if H.shape != (g.shape[0], g.shape[0]):
        raise ValueError("Hessian shape does not match the gradient")
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0:
        return CubicStepResult(np.zeros_like(g), 0.0, 0.0, 0, delta)
    V, lam = sym_eig(H, tol=1e-9)
    lam = lam + delta
    w2 = (V.T @ g) ** 2
    r, it, hard = _ray_search(w2, lam, M, gnorm, tol)
    h = _assemble(g, V, lam, None, M, r, hard)
    return _finish(g, H, M, delta, h, it)


def solve_step(g, B, M, delta, tol=RAY_TOL):
    if isinstance(B, LowRankHessianModel):
        return solve_low_rank(g, B, M, delta, tol)
    return solve_dense(g, B, M, delta, tol)


def stationarity_residual(g, B, M, delta, h):
    r = float(np.linalg.norm(h))
    return float(np.linalg.norm(g + _matvec(B, h) + (delta + 0.5 * M * r) * h))


@dataclass(frozen=True)
class EstimatingSequenceState:
    """Aggregated lower model

        psi(x) = kappa2/2 ||x - x0||^2 + kappa3/3 ||x - x0||^3 + <g_agg, x - x0> + const

    where ``g_agg`` and ``const`` accumulate the weighted linearizations
    ``w_j (f_j + <g_j, x - x_j>)``.
    """

    x0: np.ndarray
    g_agg: np.ndarray
    kappa2: float = 0.0
    kappa3: float = 0.0
    const: float = 0.0

    @classmethod
    def start(cls, x0, kappa2=0.0, kappa3=0.0):
        x0 = as_vector(x0, "x0")
        return cls(x0, np.zeros_like(x0), float(kappa2), float(kappa3), 0.0)

    def with_kappas(self, kappa2, kappa3):
        return replace(self, kappa2=float(kappa2), kappa3=float(kappa3))

    def add_linearization(self, weight, x, f, g):
        return replace(
            self,
            g_agg=self.g_agg + weight * g,
            const=self.const + weight * (f + float(g @ (self.x0 - x))),
        )

    def psi(self, x):
        dx = np.asarray(x, dtype=float) - self.x0
        r = float(np.linalg.norm(dx))
        return self.kappa2 / 2 * r**2 + self.kappa3 / 3 * r**3 + float(self.g_agg @ dx) + self.const


def estseq_minimize(state):
    """Closed-form minimizer ``x0 - g_agg / (kappa2 + kappa3 r)`` of ``psi``.

    ``r >= 0`` is the positive root of ``kappa2 r + kappa3 r^2 = ||g_agg||``,
    written in the cancellation-free form ``2 G / (kappa2 + sqrt(kappa2^2 + 4 kappa3 G))``.
    """
    G = float(np.linalg.norm(state.g_agg))
    if G == 0:
        return state.x0.copy()
    k2, k3 = state.kappa2, state.kappa3
    if k2 <= 0 and k3 <= 0:
        raise ValueError("psi is unbounded below: both kappa coefficients are zero")
    r = 2.0 * G / (k2 + np.sqrt(k2 * k2 + 4.0 * k3 * G))
    return state.x0 - state.g_agg * (r / G)
