"""LIBSVM text I/O, row normalization and synthetic logistic instances."""

import gzip
import io
import warnings
from dataclasses import dataclass, field

import numpy as np

from .oracle import LogisticProblem


class LibsvmFormatError(ValueError):
    """Malformed LIBSVM input; ``lineno`` is 1-based."""

    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class RawDataset:
    """Sparse rows as ``(indices, values)`` with 1-based strictly increasing indices."""

    rows: tuple
    labels: np.ndarray
    dim: int

    def __len__(self):
        return len(self.rows)

    def to_dense(self, dim=None):
        dim = self.dim if dim is None else dim
        if dim < self.dim:
            raise ValueError(f"dim {dim} is below the inferred dimension {self.dim}")
        A = np.zeros((len(self.rows), dim))
        for i, (idx, vals) in enumerate(self.rows):
            A[i, np.asarray(idx, dtype=int) - 1] = vals
        return Dataset(A, np.array(self.labels, dtype=float))


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix ``A`` (n x d) and labels in {-1, +1}."""

    features: np.ndarray
    labels: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        A = np.array(self.features, dtype=float)
        b = np.array(self.labels, dtype=float)
        if A.ndim != 2 or b.shape != (A.shape[0],):
            raise ValueError("features must be n x d and labels length n")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "features", A)
        object.__setattr__(self, "labels", b)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def problem(self, mu=0.0):
        return LogisticProblem(self.features, self.labels, mu=mu, meta=dict(self.meta))


def _parse_label(token, lineno, zero_one):
    try:
        v = float(token)
    except ValueError:
        raise LibsvmFormatError(lineno, f"bad label {token!r}") from None
    if not np.isfinite(v):
        raise LibsvmFormatError(lineno, f"non-finite label {token!r}")
    if zero_one:
        if v not in (0.0, 1.0):
            raise LibsvmFormatError(lineno, f"label {token!r} is not 0 or 1")
        return 1.0 if v == 1.0 else -1.0
    if v == 0:
        raise LibsvmFormatError(lineno, "label 0 has no sign (use zero_one=True for 0/1 files)")
    return 1.0 if v > 0 else -1.0


def parse_libsvm(stream, zero_one=False):
    """Parse LIBSVM text (``label idx:val ...`` per line).

    Blank lines are skipped, ``#`` starts a comment. Labels are mapped to
    -1/+1 by sign; ``zero_one=True`` maps 0 -> -1 and 1 -> +1 instead.
    ``stream`` may be a text stream, an iterable of lines or a string.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    rows, labels = [], []
    dim = 0
    for lineno, line in enumerate(stream, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        labels.append(_parse_label(tokens[0], lineno, zero_one))
        idx, vals = [], []
        last = 0
        for tok in tokens[1:]:
            key, sep, val = tok.partition(":")
            if not sep:
                raise LibsvmFormatError(lineno, f"token {tok!r} is not index:value")
            try:
                j = int(key)
                v = float(val)
            except ValueError:
                raise LibsvmFormatError(lineno, f"malformed token {tok!r}") from None
            if j < 1:
                raise LibsvmFormatError(lineno, f"index {j} must be >= 1")
            if j <= last:
                raise LibsvmFormatError(lineno, f"index {j} does not increase (after {last})")
            if not np.isfinite(v):
                raise LibsvmFormatError(lineno, f"non-finite value in {tok!r}")
            idx.append(j)
            vals.append(v)
            last = j
        dim = max(dim, last)
        rows.append((np.array(idx, dtype=np.int64), np.array(vals, dtype=float)))
    return RawDataset(tuple(rows), np.array(labels, dtype=float), dim)


def write_libsvm(dataset, stream):
    """Write a :class:`RawDataset` or :class:`Dataset`; values use shortest round-trip repr."""
    if isinstance(dataset, Dataset):
        rows = []
        for a in dataset.features:
            nz = np.flatnonzero(a)
            rows.append((nz + 1, a[nz]))
        labels = dataset.labels
    else:
        rows, labels = dataset.rows, dataset.labels
    for lab, (idx, vals) in zip(labels, rows):
        parts = ["+1" if lab > 0 else "-1"]
        parts += [f"{int(j)}:{float(v)!r}" for j, v in zip(idx, vals)]
        stream.write(" ".join(parts) + "\n")


def _open_text(path):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, encoding="utf-8")


def load_libsvm(path, dim=None, zero_one=False, normalize=True):
    """Read a (possibly ``.gz``) LIBSVM file into a dense :class:`Dataset`."""
    with _open_text(path) as fh:
        raw = parse_libsvm(fh, zero_one=zero_one)
    ds = raw.to_dense(dim)
    ds = Dataset(ds.features, ds.labels, {"source": str(path)})
    return normalize_rows(ds) if normalize else ds


def normalize_rows(dataset):
    """Scale every row to unit Euclidean norm; all-zero rows are dropped with a warning."""
    A = dataset.features
    norms = np.linalg.norm(A, axis=1)
    keep = norms > 0
    if not np.all(keep):
        warnings.warn(f"dropping {int(np.sum(~keep))} all-zero rows", stacklevel=2)
    A = A[keep]
    norms = norms[keep]
    # rows already at unit norm are left bit-identical so normalization is idempotent
    unit = np.abs(norms - 1.0) <= 1e-15
    A = np.where(unit[:, None], A, A / np.where(unit, 1.0, norms)[:, None])
    return Dataset(A, dataset.labels[keep], dict(dataset.meta))


def synth_logistic(n, d, seed=0, flip=0.0, mu=0.0):
    """Planted-hyperplane logistic instance with normalized Gaussian features.

    Labels are ``sign(<w*, a_i>)`` with a fraction ``flip`` of them flipped at
    random. ``flip=0`` gives separable data (infimum 0 not attained when
    ``mu=0``). Deterministic in ``seed``.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be at least 1")
    if not 0.0 <= flip <= 0.5:
        raise ValueError("flip must lie in [0, 0.5]")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d))
    w = rng.standard_normal(d)
    b = np.where(A @ w >= 0, 1.0, -1.0)
    flips = rng.random(n) < flip
    b[flips] *= -1
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    meta = {"source": "synth", "n": n, "d": d, "seed": seed, "flip": flip, "planted_normal": w}
    ds = Dataset(A, b, meta)
    return ds.problem(mu)
