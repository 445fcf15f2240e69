"""Reading and writing LIBSVM files.

Feature indices are 1-based and sparse; labels may be +1/-1 or 0/1.
Rows are normalized to unit length when loading, and problems are built
straight from a dataset.
"""

import io
import tempfile
from pathlib import Path

import numpy as np

from cubicqn import load_libsvm, parse_libsvm
from cubicqn.dataio import LibsvmFormatError, write_libsvm

text = """\
# two features, three samples
+1 1:0.5 2:1.5
-1 2:-2.0
+1 1:3
"""
raw = parse_libsvm(text)
ds = raw.to_dense(2)
print("features:\n", ds.features)
print("labels:", ds.labels)

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "tiny.svm"
    with open(path, "w") as fh:
        write_libsvm(ds, fh)
    loaded = load_libsvm(path, normalize=True)
    print("normalized rows:\n", loaded.features)
    problem = loaded.problem(mu=0.01)
    print(f"problem: n={problem.n}, d={problem.dim}, f(0)={problem.value(np.zeros(problem.dim)):.6f}")

try:
    parse_libsvm("+1 1:1\n-1 2:oops\n")
except LibsvmFormatError as exc:
    print("rejected:", exc)

buf = io.StringIO()
write_libsvm(ds, buf)
print("written back:\n" + buf.getvalue())
