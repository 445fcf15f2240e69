"""How close are the quasi-Newton models to the true Hessian?

History models (L-BFGS from past iterates) and sampling models (Broyden
updates from fresh Hessian-vector products) approximate the Hessian in
different ways. The sampled model from B0 = 0 never exceeds the Hessian.
"""

import numpy as np

from cubicqn import PairBuffer, build_history_model, build_sampling_model, synth_logistic

problem = synth_logistic(n=300, d=20, seed=1, flip=0.1)
L1 = problem.lipschitz_estimates()[0]
rng = np.random.default_rng(1)

xs = np.cumsum(0.3 * rng.standard_normal((9, problem.dim)), axis=0)
buf = PairBuffer(8)
for a, b in zip(xs, xs[1:]):
    buf.push(b - a, problem.grad(b) - problem.grad(a))
x = xs[-1]
H = problem.hessian(x)

models = {
    "lbfgs history": build_history_model(buf, "lbfgs"),
    "damped lbfgs": build_history_model(buf, "lbfgs-damped"),
    "bfgs sampling (m=8)": build_sampling_model(problem, x, 8, rng_seed=0, upsilon=0.0),
    "dfp sampling (m=20)": build_sampling_model(problem, x, 20, rng_seed=0, upsilon=1.0),
}
print(f"L1 = {L1:.4f}")
for name, B in models.items():
    lam = np.linalg.eigvalsh(B.dense() - H)
    print(f"{name:22s} eig(B - H) in [{lam[0] / L1:+.3f}, {lam[-1] / L1:+.3f}] * L1")

# random directions leave an error; sampling along the Hessian's own
# eigenvectors (orthonormal and conjugate) recovers it exactly
V = np.linalg.eigh(H)[1]
B = build_sampling_model(problem, x, problem.dim, rng_seed=0, directions=V.T)
print(f"eigenbasis sampling, m=d: |B - H| = {np.linalg.norm(B.dense() - H):.1e}")
