"""Low-rank quasi-Newton Hessian models.

A model is ``B = c I + sum_i coef_i w_i w_i^T``. L-BFGS contributes the pair of
terms ``(1/y^T s, y)`` and ``(-1/s^T B s, B s)`` per curvature pair, L-SR1 a
single term, and convex-Broyden updates (BFGS/DFP blends driven by exact
Hessian-vector products) a rank-two correction in ``span{B s, A s}``.

Models are immutable; every update returns a new model together with a flag
telling whether the pair was accepted.
"""

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .linalg import as_vector, sym_eig, thin_qr

CURVATURE_TOL = 1e-12
SR1_TOL = 1e-8
DENSE_MAX_DIM = 1000

UPDATE_KINDS = ("lbfgs", "lbfgs-damped", "lsr1")


@dataclass(frozen=True)
class SpectralFactor:
    """``sum_i coef_i w_i w_i^T = basis @ diag(eigvals) @ basis.T`` with orthonormal basis."""

    basis: np.ndarray
    eigvals: np.ndarray

    @property
    def rank(self):
        return self.eigvals.shape[0]


@dataclass(frozen=True)
class LowRankHessianModel:
    dim: int
    c: float = 0.0
    coefs: tuple = ()
    vecs: tuple = ()
    memory: int = 10

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("base scale c must be nonnegative")
        if len(self.coefs) != len(self.vecs):
            raise ValueError("coefs and vecs must have equal length")

    @property
    def n_terms(self):
        return len(self.coefs)

    def with_terms(self, coefs, vecs):
        return LowRankHessianModel(
            self.dim, self.c, self.coefs + tuple(coefs), self.vecs + tuple(vecs), self.memory
        )

    def matvec(self, v):
        out = self.c * v
        for a, w in zip(self.coefs, self.vecs):
            out = out + (a * float(w @ v)) * w
        return out

    @cached_property
    def spectral(self):
        if not self.coefs:
            return SpectralFactor(np.zeros((self.dim, 0)), np.zeros(0))
        W = np.column_stack(self.vecs)
        P, R = thin_qr(W)
        S = (R * np.asarray(self.coefs)) @ R.T
        U, lam = sym_eig(0.5 * (S + S.T))
        return SpectralFactor(P @ U, lam)

    def dense(self):
        return materialize_dense(self)


def identity_model(dim, c=0.0, memory=10):
    return LowRankHessianModel(dim, float(c), memory=memory)


def materialize_dense(model):
    """Explicit ``d x d`` matrix of a low-rank model (test oracle only)."""
    if model.dim > DENSE_MAX_DIM:
        raise ValueError(f"refusing to materialize a {model.dim}x{model.dim} model")
    B = model.c * np.eye(model.dim)
    for a, w in zip(model.coefs, model.vecs):
        B += a * np.outer(w, w)
    return 0.5 * (B + B.T)


def lbfgs_apply_pair(model, s, y, damped=False, m=None):
    """One (optionally damped) BFGS update of ``model`` with the pair ``(s, y)``.

    The damped form divides only the ``y y^T / y^T s`` coefficient by the
    memory ``m`` (defaults to ``model.memory``). Pairs with nonpositive
    curvature ``y^T s`` are rejected. When ``s^T B s`` vanishes, ``B s`` is zero
    for a PSD model and the removal term is simply omitted.

    Returns ``(new_model, accepted)``.
    """
    s = as_vector(s, "s")
    y = as_vector(y, "y")
    ns, ny = np.linalg.norm(s), np.linalg.norm(y)
    if ns == 0:
        raise ValueError("s must be nonzero")
    ys = float(y @ s)
    if ys <= CURVATURE_TOL * ns * ny:
        return model, False
    xi = 1.0 / ys
    if damped:
        xi /= m if m is not None else model.memory
    Bs = model.matvec(s)
    sBs = float(s @ Bs)
    if sBs <= CURVATURE_TOL * ns**2:
        return model.with_terms((xi,), (y.copy(),)), True
    return model.with_terms((xi, -1.0 / sBs), (y.copy(), Bs)), True


def lsr1_apply_pair(model, s, y):
    """Symmetric rank-one update; returns ``(new_model, accepted)``."""
    s = as_vector(s, "s")
    y = as_vector(y, "y")
    ns = np.linalg.norm(s)
    if ns == 0:
        raise ValueError("s must be nonzero")
    u = y - model.matvec(s)
    us = float(u @ s)
    if not np.any(u) or abs(us) <= SR1_TOL * np.linalg.norm(u) * ns:
        return model, False
    return model.with_terms((1.0 / us,), (u,)), True


def _rank2_terms(a, b, C):
    """Split the correction ``[a b] C [a b]^T`` into at most two rank-one terms."""
    E, R = thin_qr(np.column_stack((a, b)))
    U, lam = sym_eig(R @ C @ R.T, tol=1e-8)
    keep = np.abs(lam) > 1e-14 * max(np.max(np.abs(lam)), 1e-300)
    return tuple(lam[keep]), tuple((E @ U[:, keep]).T)


def broyden_apply_pair(model, hvp_source, s, upsilon=0.0):
    """Convex Broyden update ``upsilon * DFP + (1 - upsilon) * BFGS`` along ``s``.

    ``hvp_source`` maps a vector ``v`` to ``A v`` (one HVP per call). Both
    updates differ from the current model only on ``span{B s, A s}``, so the
    correction is stored as two rank-one terms.
    """
    if not 0.0 <= upsilon <= 1.0:
        raise ValueError("upsilon must lie in [0, 1]")
    s = as_vector(s, "s")
    ns = np.linalg.norm(s)
    if ns == 0:
        raise ValueError("s must be nonzero")
    a = np.asarray(hvp_source(s), dtype=float)
    rho = float(a @ s)
    if rho <= 0:
        raise ValueError("<A s, s> must be positive for a convex update")
    b = model.matvec(s)
    sb = float(s @ b)
    if sb <= CURVATURE_TOL * ns**2:
        # B s = 0: BFGS and DFP coincide
        return model.with_terms((1.0 / rho,), (a,)), True
    # coefficients of the correction in the basis [a, b]
    C = np.array([
        [upsilon * (sb / rho**2 + 1.0 / rho) + (1.0 - upsilon) / rho, -upsilon / rho],
        [-upsilon / rho, -(1.0 - upsilon) / sb],
    ])
    coefs, vecs = _rank2_terms(a, b, C)
    return model.with_terms(coefs, vecs), True


@dataclass
class PairBuffer:
    """FIFO of curvature pairs with capacity ``m``; the oldest pair is evicted first."""

    m: int
    policy: str = "history"
    pairs: deque = field(default=None)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("memory must be at least 1")
        if self.policy not in ("history", "sampling"):
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.pairs is None:
            self.pairs = deque(maxlen=self.m)

    def push(self, s, y):
        """Store ``(s, y)`` if ``s != 0`` and ``y^T s > 0``; returns whether it was kept."""
        s = np.array(s, dtype=float)
        y = np.array(y, dtype=float)
        ns, ny = np.linalg.norm(s), np.linalg.norm(y)
        if ns == 0 or float(y @ s) <= CURVATURE_TOL * ns * ny:
            return False
        self.pairs.append((s, y))
        return True

    def copy(self):
        return PairBuffer(self.m, self.policy, deque(self.pairs, maxlen=self.m))

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def build_history_model(buffer, update_kind="lbfgs", c=0.0, dim=None):
    """Fold the buffered pairs, oldest first, into a model with ``B0 = c I``."""
    if update_kind not in UPDATE_KINDS:
        raise ValueError(f"unknown update kind {update_kind!r}")
    if dim is None:
        if not len(buffer):
            raise ValueError("dim is required for an empty buffer")
        dim = buffer.pairs[0][0].shape[0]
    model = identity_model(dim, c, memory=buffer.m)
    for s, y in buffer:
        if update_kind == "lsr1":
            model, _ = lsr1_apply_pair(model, s, y)
        else:
            model, _ = lbfgs_apply_pair(model, s, y, damped=update_kind == "lbfgs-damped", m=buffer.m)
    return model


def sample_directions(dim, m, rng_seed):
    """``m`` unit vectors drawn uniformly from the sphere (Gaussian then normalize)."""
    rng = np.random.default_rng(rng_seed)
    S = rng.standard_normal((m, dim))
    return S / np.linalg.norm(S, axis=1, keepdims=True)


def build_sampling_model(oracle, x, m, rng_seed, upsilon=0.0, base=None, directions=None):
    """Convex Broyden model from ``m`` sampled HVPs at ``x`` (``m`` HVP charges).

    Starts from ``B0 = 0`` unless ``base`` is given (used by the combined
    history-plus-sampling policy).
    """
    x = as_vector(x)
    if m < 1:
        raise ValueError("m must be at least 1")
    if directions is None:
        directions = sample_directions(x.shape[0], m, rng_seed)
    model = base if base is not None else identity_model(x.shape[0], 0.0, memory=m)
    for s in directions:
        model, _ = broyden_apply_pair(model, lambda v: oracle.hvp(x, v), s, upsilon)
    return model


def directional_inexactness(model, oracle, x, h):
    """``||(hess f(x) - B) h|| / ||h||`` using one HVP."""
    h = as_vector(h, "h")
    nh = np.linalg.norm(h)
    if nh == 0:
        raise ValueError("h must be nonzero")
    Bh = model.matvec(h) if isinstance(model, LowRankHessianModel) else np.asarray(model) @ h
    return float(np.linalg.norm(oracle.hvp(x, h) - Bh) / nh)
