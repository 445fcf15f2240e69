"""The cubic subproblem with a low-rank model.

For B = c I + (low rank) the minimizer of
    <g, h> + 1/2 <B h, h> + delta/2 |h|^2 + M/6 |h|^3
is found in the eigenbasis of the low-rank part, without forming B. Here we
compare it with the dense solver and check stationarity.
"""

import numpy as np

from cubicqn import PairBuffer, build_history_model, solve_dense, solve_low_rank
from cubicqn.cubic_step import model_value, stationarity_residual

rng = np.random.default_rng(0)
d = 200
A = rng.standard_normal((d, d))
A = A @ A.T / d

buf = PairBuffer(8)
for _ in range(8):
    s = rng.standard_normal(d)
    buf.push(s, A @ s)
B = build_history_model(buf, "lbfgs", c=0.1)
print(f"model: c={B.c}, {B.n_terms} rank-one terms, spectral rank {B.spectral.rank}")

g = rng.standard_normal(d)
M, delta = 1.0, 0.01
low = solve_low_rank(g, B, M, delta)
dense = solve_dense(g, B.dense(), M, delta)

print(f"|h| = {low.r:.6f}, model decrease {low.model_decrease:.6f}")
print(f"low-rank vs dense step: {np.linalg.norm(low.h - dense.h) / np.linalg.norm(dense.h):.1e}")
print(f"stationarity residual: {stationarity_residual(g, B, M, delta, low.h):.1e}")
print(f"model value at h: {model_value(g, B, M, delta, low.h):.6f}")
