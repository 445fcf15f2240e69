"""Objective oracles with evaluation counters.

Two problem families are provided: l2-regularized logistic regression over
normalized rows and convex quadratics. Every public evaluation bumps the
oracle's :class:`OracleCounters`, which is what the benchmark cost axis is
built from (a full Hessian is charged as ``d`` Hessian-vector products).
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import as_vector

FULL_HESSIAN_MAX_DIM = 10_000


@dataclass
class OracleCounters:
    n_f: int = 0
    n_grad: int = 0
    n_hvp: int = 0
    n_full_hessian: int = 0

    def hvp_equiv(self, dim):
        """HVP-equivalent cost with each full Hessian counted as ``dim`` products."""
        return self.n_hvp + dim * self.n_full_hessian

    def snapshot(self):
        return OracleCounters(self.n_f, self.n_grad, self.n_hvp, self.n_full_hessian)


def sigmoid(t):
    """Logistic sigmoid, safe for arguments of any magnitude."""
    t = np.asarray(t, dtype=float)
    # exponent clamped so that exp never overflows
    return 1.0 / (1.0 + np.exp(-np.clip(t, -700.0, 700.0)))


class Oracle:
    """Shared counting wrappers; subclasses provide the ``_value``/``_grad``/... kernels."""

    dim: int

    def __init__(self):
        self.counters = OracleCounters()

    def _check(self, x, name="x"):
        x = as_vector(x, name)
        if x.shape[0] != self.dim:
            raise ValueError(f"{name} has dimension {x.shape[0]}, expected {self.dim}")
        return x

    def value(self, x):
        x = self._check(x)
        self.counters.n_f += 1
        return self._value(x)

    def grad(self, x):
        x = self._check(x)
        self.counters.n_grad += 1
        return self._value_grad(x)[1]

    def value_grad(self, x):
        x = self._check(x)
        self.counters.n_f += 1
        self.counters.n_grad += 1
        return self._value_grad(x)

    def hvp(self, x, v):
        x = self._check(x)
        v = self._check(v, "v")
        self.counters.n_hvp += 1
        return self._hvp(x, v)

    def hessian(self, x):
        if self.dim > FULL_HESSIAN_MAX_DIM:
            raise ValueError(f"refusing to materialize a {self.dim}x{self.dim} Hessian")
        x = self._check(x)
        self.counters.n_full_hessian += 1
        return self._hessian(x)

    def hvp_equiv(self):
        return self.counters.hvp_equiv(self.dim)

    def fresh(self):
        """Same problem data with zeroed counters (one per solver run)."""
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.counters = OracleCounters()
        return clone

    def _value(self, x):
        return self._value_grad(x)[0]


class LogisticProblem(Oracle):
    r"""f(x) = (1/n) sum_i log(1 + exp(-b_i a_i^T x)) + (mu/2) ||x||^2.

    Parameters
    ----------
    features : (n, d) array
        Rows ``a_i``. Use :func:`cubicqn.dataio.normalize_rows` beforehand to get
        unit rows, which the Lipschitz estimates assume.
    labels : (n,) array of +-1
    mu : float
        l2 regularization weight, ``mu >= 0``.
    """

    def __init__(self, features, labels, mu=0.0, meta=None):
        super().__init__()
        A = np.array(features, dtype=float, ndmin=2)
        b = np.array(labels, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError("features and labels disagree on the number of rows")
        if b.size and not np.all(np.isin(b, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if mu < 0:
            raise ValueError("mu must be nonnegative")
        A.setflags(write=False)
        b.setflags(write=False)
        self.A = A
        self.b = b
        self.mu = float(mu)
        self.n, self.dim = A.shape
        self.meta = dict(meta or {})

    def _margins(self, x):
        return self.b * (self.A @ x)

    def _value_grad(self, x):
        mu = self.mu
        f = 0.5 * mu * float(x @ x)
        g = mu * x
        if self.n:
            z = self._margins(x)
            f += float(np.mean(np.logaddexp(0.0, -z)))
            g = g + self.A.T @ (-self.b * sigmoid(-z)) / self.n
        return f, g

    def _curvature_weights(self, x):
        s = sigmoid(self._margins(x))
        return s * (1.0 - s)

    def _hvp(self, x, v):
        out = self.mu * v
        if self.n:
            w = self._curvature_weights(x)
            out = out + self.A.T @ (w * (self.A @ v)) / self.n
        return out

    def _hessian(self, x):
        H = self.mu * np.eye(self.dim)
        if self.n:
            w = self._curvature_weights(x)
            H = H + (self.A.T * w) @ self.A / self.n
        return 0.5 * (H + H.T)

    def lipschitz_estimates(self):
        """Analytic bounds ``(L1, L2)`` for the gradient and Hessian Lipschitz constants.

        The scalar loss ``log(1 + e^-t)`` has second derivative at most 1/4 and
        third derivative at most ``1/(6 sqrt 3)`` in absolute value.
        """
        if self.n == 0:
            raise ValueError("empty dataset")
        rmax = float(np.max(np.linalg.norm(self.A, axis=1)))
        return 0.25 * rmax**2 + self.mu, rmax**3 / (6.0 * np.sqrt(3.0))


class QuadraticProblem(Oracle):
    """f(x) = 1/2 x^T A x - b^T x with symmetric PSD ``A``."""

    def __init__(self, A, b=None):
        super().__init__()
        A = np.array(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.linalg.norm(A))):
            raise ValueError("A must be symmetric")
        A = 0.5 * (A + A.T)
        if np.linalg.eigvalsh(A)[0] < -1e-10:
            raise ValueError("A must be positive semidefinite")
        self.dim = A.shape[0]
        b = np.zeros(self.dim) if b is None else as_vector(b, "b")
        if b.shape[0] != self.dim:
            raise ValueError("b has the wrong dimension")
        A.setflags(write=False)
        b.setflags(write=False)
        self.A = A
        self.b = b

    def _value_grad(self, x):
        Ax = self.A @ x
        return 0.5 * float(x @ Ax) - float(self.b @ x), Ax - self.b

    def _hvp(self, x, v):
        return self.A @ v

    def _hessian(self, x):
        return self.A.copy()

    def lipschitz_estimates(self):
        return float(np.linalg.eigvalsh(self.A)[-1]), 0.0


@dataclass
class DerivativeReport:
    grad_rel_err: float
    hvp_rel_err: float
    trials: int
    eps: float
    details: list = field(default_factory=list)

    def passed(self, tol):
        return self.grad_rel_err <= tol and self.hvp_rel_err <= tol


def check_derivatives(problem, x, trials=10, seed=0):
    """Compare the analytic gradient and HVP with central differences.

    Directions are random unit vectors; the step is ``1e-5 * (1 + ||x||)``.
    Gradient errors are measured on directional derivatives relative to
    ``||g||``, HVP errors on the full vector relative to ``||H v||``.
    """
    x = as_vector(x)
    rng = np.random.default_rng(seed)
    eps = 1e-5 * (1.0 + np.linalg.norm(x))
    g = problem.grad(x)
    gscale = max(np.linalg.norm(g), 1e-12)
    grad_err = hvp_err = 0.0
    details = []
    for _ in range(trials):
        u = rng.standard_normal(x.shape[0])
        u /= np.linalg.norm(u)
        fd = (problem.value(x + eps * u) - problem.value(x - eps * u)) / (2 * eps)
        ge = abs(fd - float(g @ u)) / gscale
        hv = problem.hvp(x, u)
        fd_h = (problem.grad(x + eps * u) - problem.grad(x - eps * u)) / (2 * eps)
        he = np.linalg.norm(fd_h - hv) / max(np.linalg.norm(hv), 1e-12)
        details.append((ge, he))
        grad_err = max(grad_err, ge)
        hvp_err = max(hvp_err, he)
    return DerivativeReport(grad_err, hvp_err, trials, eps, details)
