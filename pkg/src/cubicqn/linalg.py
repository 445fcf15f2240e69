"""Small dense linear-algebra kernels shared by the Hessian models and step solvers.

Matrices here are tiny (at most ``2m`` columns for the low-rank models), so the
heavy lifting is delegated to LAPACK through numpy; these wrappers only pin the
contracts the rest of the package relies on (orthonormal factors, ascending
eigenvalues, symmetry checks, length checks).
"""

import numpy as np

SYM_TOL = 1e-12


def as_vector(x, name="x"):
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def _check_same_length(a, b):
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")


def dot(a, b):
    a, b = as_vector(a, "a"), as_vector(b, "b")
    _check_same_length(a, b)
    return float(a @ b)


def norm(a):
    return float(np.linalg.norm(as_vector(a, "a")))


def axpy(alpha, x, y):
    """Return ``alpha * x + y`` as a new array."""
    x, y = as_vector(x, "x"), as_vector(y, "y")
    _check_same_length(x, y)
    return alpha * x + y


def scale(alpha, x):
    return alpha * as_vector(x, "x")


def thin_qr(M):
    """Householder (LAPACK) thin QR of a ``d x k`` matrix.

    Returns ``Q`` with ``min(d, k)`` orthonormal columns and upper-triangular
    ``R``. Rank-deficient input is allowed; ``R`` then has (near-)zero diagonal
    entries but ``Q`` stays orthonormal.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("thin_qr expects a 2-D array")
    if not np.all(np.isfinite(M)):
        raise ValueError("thin_qr input contains non-finite entries")
    if M.shape[1] == 0:
        return np.zeros((M.shape[0], 0)), np.zeros((0, 0))
    Q, R = np.linalg.qr(M, mode="reduced")
    # fix signs so that diag(R) >= 0; makes the factorization unique for full-rank input
    sign = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * sign, R * sign[:, None]


def is_symmetric(S, tol=SYM_TOL):
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        return False
    scale_ = max(np.linalg.norm(S), 1.0)
    return float(np.max(np.abs(S - S.T), initial=0.0)) <= tol * scale_


def sym_eig(S, tol=1e-10):
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending.

    Raises ``ValueError`` when ``S`` is not symmetric within ``tol`` relative to
    its Frobenius norm.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("sym_eig expects a square matrix")
    if not is_symmetric(S, tol):
        raise ValueError("sym_eig input is not symmetric")
    lam, U = np.linalg.eigh(0.5 * (S + S.T))
    return U, lam
