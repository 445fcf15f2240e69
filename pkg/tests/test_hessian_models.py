import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cubicqn import QuadraticProblem, synth_logistic
from cubicqn.hessian_models import (
    LowRankHessianModel,
    PairBuffer,
    broyden_apply_pair,
    build_history_model,
    build_sampling_model,
    directional_inexactness,
    identity_model,
    lbfgs_apply_pair,
    lsr1_apply_pair,
    materialize_dense,
    sample_directions,
)

E1 = np.array([1.0, 0.0])


def random_spd(rng, d, scale=1.0):
    A = rng.standard_normal((d, d))
    return scale * (A @ A.T / d + 0.1 * np.eye(d))


def test_lbfgs_example():
    B, ok = lbfgs_apply_pair(identity_model(2, 1.0), E1, 2 * E1)
    assert ok
    np.testing.assert_allclose(B.dense(), np.eye(2) + np.outer(E1, E1), atol=1e-15)
    np.testing.assert_allclose(B.matvec(E1), 2 * E1)


def test_lbfgs_rejects_zero_curvature():
    B0 = identity_model(2, 1.0)
    B, ok = lbfgs_apply_pair(B0, E1, np.array([0.0, 1.0]))
    assert not ok and B is B0


def test_lbfgs_from_zero_base_omits_removal_term():
    B, ok = lbfgs_apply_pair(identity_model(3, 0.0), np.array([1.0, 0, 0]), np.array([2.0, 1.0, 0]))
    assert ok and B.n_terms == 1
    np.testing.assert_allclose(B.matvec(np.array([1.0, 0, 0])), [2.0, 1.0, 0])


def test_damped_divides_only_y_coefficient():
    B, _ = lbfgs_apply_pair(identity_model(2, 1.0), E1, 2 * E1, damped=True, m=4)
    assert B.coefs[0] == pytest.approx(1 / 8)
    assert B.coefs[1] == pytest.approx(-1.0)


def test_lsr1_examples():
    B, ok = lsr1_apply_pair(identity_model(2, 0.0), E1, 3 * E1)
    assert ok
    np.testing.assert_allclose(B.dense(), 3 * np.outer(E1, E1))
    B2, ok = lsr1_apply_pair(B, E1, 3 * E1)
    assert not ok and B2 is B


def test_broyden_endpoints(rng):
    d = 4
    A = random_spd(rng, d)
    s = rng.standard_normal(d)
    B0, _ = lbfgs_apply_pair(identity_model(d, 0.5), rng.standard_normal(d) * 0 + 1, np.ones(d) * 2)
    # upsilon = 0 is the BFGS update with y = A s
    Bb, _ = broyden_apply_pair(B0, lambda v: A @ v, s, 0.0)
    Bl, _ = lbfgs_apply_pair(B0, s, A @ s)
    np.testing.assert_allclose(Bb.dense(), Bl.dense(), atol=1e-12)
    # upsilon = 1 from B = 0 is As (As)^T / <As, s>
    Bd, _ = broyden_apply_pair(identity_model(d, 0.0), lambda v: A @ v, s, 1.0)
    a = A @ s
    np.testing.assert_allclose(Bd.dense(), np.outer(a, a) / (a @ s), atol=1e-12)
    # A = I from B = 0 gives s s^T for unit s
    u = s / np.linalg.norm(s)
    for ups in (0.0, 0.3, 1.0):
        Bi, _ = broyden_apply_pair(identity_model(d, 0.0), lambda v: v, u, ups)
        np.testing.assert_allclose(Bi.dense(), np.outer(u, u), atol=1e-12)


def dense_dfp(B, A, s):
    a = A @ s
    rho = a @ s
    P = np.eye(len(s)) - np.outer(a, s) / rho
    return P @ B @ P.T + np.outer(a, a) / rho


def dense_bfgs(B, A, s):
    a, b = A @ s, B @ s
    return B + np.outer(a, a) / (a @ s) - np.outer(b, b) / (s @ b)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 8), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_broyden_matches_dense_formula(d, ups, seed):
    rng = np.random.default_rng(seed)
    A = random_spd(rng, d)
    model = identity_model(d, 0.2)
    for _ in range(2):
        s = rng.standard_normal(d)
        Bd = model.dense()
        model, ok = broyden_apply_pair(model, lambda v: A @ v, s, ups)
        assert ok
        ref = ups * dense_dfp(Bd, A, s) + (1 - ups) * dense_bfgs(Bd, A, s)
        np.testing.assert_allclose(model.dense(), ref, atol=1e-9 * np.abs(ref).max())
        np.testing.assert_allclose(model.matvec(s), A @ s, rtol=1e-9, atol=1e-12)


def test_broyden_rejects_nonconvex_direction():
    with pytest.raises(ValueError):
        broyden_apply_pair(identity_model(2), lambda v: -v, E1, 0.5)


def test_materialize_examples():
    np.testing.assert_array_equal(identity_model(3, 2.0).dense(), 2 * np.eye(3))
    B = LowRankHessianModel(3, 0.5, (3.0,), (np.array([1.0, 0, 0]),))
    np.testing.assert_allclose(materialize_dense(B), np.diag([3.5, 0.5, 0.5]))
    with pytest.raises(ValueError):
        materialize_dense(identity_model(2000))


def test_spectral_matches_dense(rng):
    d = 30
    terms = [(rng.standard_normal(), rng.standard_normal(d)) for _ in range(8)]
    B = LowRankHessianModel(d, 0.3, tuple(a for a, _ in terms), tuple(w for _, w in terms))
    sf = B.spectral
    assert np.linalg.norm(sf.basis.T @ sf.basis - np.eye(sf.basis.shape[1])) <= 1e-10
    assert np.all(np.diff(sf.eigvals) >= 0)
    D = B.dense()
    for _ in range(20):
        v = rng.standard_normal(d)
        spec = B.c * v + sf.basis @ (sf.eigvals * (sf.basis.T @ v))
        np.testing.assert_allclose(spec, D @ v, atol=1e-10 * np.linalg.norm(D @ v))
        np.testing.assert_allclose(B.matvec(v), D @ v, atol=1e-10 * np.linalg.norm(D @ v))


def test_pair_buffer_fifo_and_filter():
    buf = PairBuffer(2)
    assert not buf.push(np.zeros(2), E1)
    assert not buf.push(E1, -E1)
    for k in range(3):
        assert buf.push((k + 1) * E1, E1)
    assert len(buf) == 2
    assert [s[0] for s, _ in buf] == [2.0, 3.0]
    cp = buf.copy()
    cp.push(E1, E1)
    assert len(buf) == 2 and [s[0] for s, _ in buf] == [2.0, 3.0]
    with pytest.raises(ValueError):
        PairBuffer(0)


def test_build_history_examples(rng):
    buf = PairBuffer(5)
    B = build_history_model(buf, "lbfgs", c=1.0, dim=3)
    np.testing.assert_array_equal(B.dense(), np.eye(3))
    s, y = rng.standard_normal(3), None
    y = s + 0.1 * rng.standard_normal(3)
    buf.push(s, y)
    single, _ = lbfgs_apply_pair(identity_model(3, 1.0, memory=5), s, y)
    np.testing.assert_allclose(build_history_model(buf, "lbfgs", c=1.0).dense(), single.dense())


def test_history_on_quadratic_lemma_bound(rng):
    d, m = 8, 5
    A = random_spd(rng, d)
    L1 = np.linalg.eigvalsh(A)[-1]
    buf = PairBuffer(m)
    for _ in range(m):
        s = rng.standard_normal(d)
        buf.push(s, A @ s)
    B = build_history_model(buf, "lbfgs", c=0.0)
    assert np.linalg.norm(B.dense() - A, 2) <= m * L1


def test_sampling_examples(rng):
    d = 6
    A = random_spd(rng, d)
    Q = QuadraticProblem(A)
    # orthonormal and A-conjugate directions (the eigenbasis) recover A exactly
    V = np.linalg.eigh(A)[1]
    B = build_sampling_model(Q, np.zeros(d), d, 0, directions=V.T)
    np.testing.assert_allclose(B.dense(), A, atol=1e-10)
    B1 = build_sampling_model(Q, np.zeros(d), 1, 0, directions=np.eye(d)[:1])
    np.testing.assert_allclose(B1.matvec(np.eye(d)[0]), A[:, 0], atol=1e-12)
    assert Q.counters.n_hvp == d + 1


def test_bfgs_from_zero_keeps_rank_one(rng):
    # B - B s s^T B / s^T B s annihilates a rank-one B, so pure BFGS sampling from
    # B0 = 0 only retains the newest direction; DFP accumulates
    d = 6
    A = random_spd(rng, d)
    Q = QuadraticProblem(A)
    B = build_sampling_model(Q, np.zeros(d), d, 0, upsilon=0.0, directions=np.eye(d))
    assert np.linalg.matrix_rank(B.dense(), 1e-10) == 1
    a = A[:, -1]
    np.testing.assert_allclose(B.dense(), np.outer(a, a) / a[-1], atol=1e-12)
    B = build_sampling_model(Q, np.zeros(d), d, 0, upsilon=1.0, directions=np.eye(d))
    assert np.linalg.matrix_rank(B.dense(), 1e-10) == d


def test_sampling_determinism_and_unit_norm():
    S1 = sample_directions(7, 4, (3, 11))
    S2 = sample_directions(7, 4, (3, 11))
    np.testing.assert_array_equal(S1, S2)
    np.testing.assert_allclose(np.linalg.norm(S1, axis=1), 1.0)
    assert not np.array_equal(S1, sample_directions(7, 4, (3, 12)))


def test_sampled_model_between_zero_and_hessian(rng):
    P = synth_logistic(80, 12, seed=5, flip=0.1)
    x = rng.standard_normal(12)
    H = P.hessian(x)
    B = build_sampling_model(P, x, 6, (0, 0), upsilon=0.4)
    lam = np.linalg.eigvalsh(H - B.dense())
    assert lam[0] >= -1e-9 and lam[-1] <= P.lipschitz_estimates()[0] + 1e-9
    assert np.linalg.eigvalsh(B.dense())[0] >= -1e-9


def test_directional_inexactness(rng):
    d = 5
    A = random_spd(rng, d)
    Q = QuadraticProblem(A)
    h = rng.standard_normal(d)
    assert directional_inexactness(A, Q, np.zeros(d), h) == pytest.approx(0, abs=1e-12)
    assert directional_inexactness(identity_model(d), Q, np.zeros(d), h) == pytest.approx(
        np.linalg.norm(A @ h) / np.linalg.norm(h))
    with pytest.raises(ValueError):
        directional_inexactness(A, Q, np.zeros(d), np.zeros(d))
    P = synth_logistic(60, d, seed=9)
    buf = PairBuffer(4)
    xs = rng.standard_normal((5, d))
    for a, b in zip(xs, xs[1:]):
        buf.push(b - a, P.grad(b) - P.grad(a))
    B = build_history_model(buf, "lbfgs")
    x = xs[-1]
    bound = np.linalg.norm(P.hessian(x) - B.dense(), 2)
    for _ in range(20):
        assert directional_inexactness(B, P, x, rng.standard_normal(d)) <= bound + 1e-9
