import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatload.ksvr import (
    Hyperparams,
    Scaler,
    SvrError,
    SvrModel,
    dual_objective,
    gram_matrix,
    rbf_kernel,
    slacks,
    solve_dual,
    train,
)
from oracles import svr_dual_brute_force


def random_instance(seed, m=None):
    rng = np.random.default_rng(seed)
    m = m or int(rng.integers(3, 7))
    X = rng.normal(size=(m, 2))
    y = rng.normal(size=m)
    C = float(10 ** rng.uniform(-1, 1.5))
    gamma = float(10 ** rng.uniform(-1, 0.5))
    eps = float(rng.uniform(0, 0.3))
    return X, y, C, gamma, eps


# -- kernel ---------------------------------------------------------------

def test_rbf_examples():
    assert rbf_kernel([0, 0], [0, 0], 3.0) == 1.0
    assert rbf_kernel([0, 0], [1, 0], 1.0) == pytest.approx(0.367879441, abs=1e-9)
    assert rbf_kernel([1, 2], [3, 1], 0.5) == pytest.approx(np.exp(-2.5), rel=1e-12)
    assert rbf_kernel([1, 2], [3, 1], 0.5) == pytest.approx(0.082085, abs=1e-6)


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.floats(1e-3, 1e2))
def test_rbf_symmetric_and_bounded(v, gamma):
    a, b = v[:2], v[2:]
    k = rbf_kernel(a, b, gamma)
    assert 0.0 <= k <= 1.0
    assert k == rbf_kernel(b, a, gamma)


def test_gram_matches_pointwise_kernel():
    rng = np.random.default_rng(3)
    X, Z = rng.normal(size=(7, 2)), rng.normal(size=(5, 2))
    G = gram_matrix(X, Z, 0.7)
    ref = np.array([[rbf_kernel(x, z, 0.7) for z in Z] for x in X])
    np.testing.assert_allclose(G, ref, rtol=1e-12, atol=1e-15)


@settings(max_examples=50)
@given(st.integers(1, 20), st.floats(1e-3, 1e3), st.integers(0, 2**32 - 1))
def test_gram_symmetric_psd(n, gamma, seed):
    X = np.random.default_rng(seed).normal(size=(n, 2)) * 3
    K = gram_matrix(X, X, gamma)
    np.testing.assert_allclose(K, K.T, atol=0)
    assert np.linalg.eigvalsh(K).min() >= -1e-8
    # Cholesky-with-shift probe as a second route
    np.linalg.cholesky(K + 1e-8 * np.eye(n))


# -- dual solver ----------------------------------------------------------

@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("polish", [True, False])
def test_dual_matches_brute_force(seed, polish):
    X, y, C, gamma, eps = random_instance(seed)
    K = gram_matrix(X, X, gamma)
    sol = solve_dual(K, y, C, eps, tol=1e-9, polish=polish)
    best, _ = svr_dual_brute_force(K, y, C, eps)
    assert sol.converged
    assert dual_objective(K, y, sol.beta, eps) == pytest.approx(best, abs=1e-6)


def test_five_points_example():
    rng = np.random.default_rng(11)
    X, y = rng.normal(size=(5, 2)), rng.normal(size=5)
    K = gram_matrix(X, X, 1.0)
    sol = solve_dual(K, y, 10.0, 0.01, tol=1e-9)
    best, _ = svr_dual_brute_force(K, y, 10.0, 0.01)
    assert abs(dual_objective(K, y, sol.beta, 0.01) - best) <= 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 40))
def test_dual_feasibility(seed, m):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(m, 2)), rng.normal(size=m)
    C = float(10 ** rng.uniform(-2, 3))
    K = gram_matrix(X, X, float(10 ** rng.uniform(-2, 1)))
    sol = solve_dual(K, y, C, float(rng.uniform(0, 0.5)), max_iter=5000)
    assert np.all(np.abs(sol.beta) <= C + 1e-9)
    assert abs(sol.beta.sum()) <= 1e-6 * C * m


@pytest.mark.parametrize("polish", [True, False])
def test_objective_monotone(polish):
    rng = np.random.default_rng(5)
    X, y = rng.normal(size=(40, 2)), np.sin(rng.normal(size=40))
    K = gram_matrix(X, X, 0.5)
    sol = solve_dual(K, y, 100.0, 0.01, tol=1e-6, record=True, polish=polish)
    h = sol.objective_history
    assert h[0] == 0.0
    assert len(h) >= sol.n_iter + 1
    assert np.all(np.diff(h) >= -1e-10 * max(1.0, abs(h).max()))
    assert h[-1] == pytest.approx(dual_objective(K, y, sol.beta, 0.01), rel=1e-9, abs=1e-12)


def test_newton_steps_help_in_the_smooth_large_c_regime():
    # counter-like data, smooth kernel, huge box: most coefficients end up
    # free at the optimum, which plain SMO approaches very slowly
    t = np.arange(201)
    theta = np.sin(2 * np.pi * t / 24)
    h = np.cumsum(2 + 0.3 * (1 - theta))
    X = np.column_stack([h[:-1], theta[:-1]])
    fs, ts = Scaler.fit(X), Scaler.fit(h[1:, None])
    Xs, ys = fs.transform(X), ts.transform(h[1:, None]).ravel()
    K = gram_matrix(Xs, Xs, 0.01)
    fast = solve_dual(K, ys, 1e5, 1e-8, tol=1e-6, max_iter=20000)
    plain = solve_dual(K, ys, 1e5, 1e-8, tol=1e-6, max_iter=20000, polish=False)
    assert dual_objective(K, ys, fast.beta, 1e-8) > 2 * dual_objective(K, ys, plain.beta, 1e-8)
    assert np.all(np.abs(fast.beta) <= 1e5) and abs(fast.beta.sum()) <= 1e-6 * 1e5 * len(ys)


def test_kkt_at_convergence():
    rng = np.random.default_rng(8)
    X = rng.uniform(-2, 2, size=(60, 2))
    y = np.sin(X[:, 0]) + 0.1 * rng.normal(size=60)
    hp = Hyperparams(C=5.0, gamma=0.5, epsilon=0.1)
    tol = 1e-6
    model = train(X, y, hp, tol=tol)
    assert model.converged
    K = gram_matrix(X, X, hp.gamma)
    sol = solve_dual(K, y, hp.C, hp.epsilon, tol=tol)
    resid = y - (K @ sol.beta + sol.bias)
    inside = np.abs(resid) < hp.epsilon - tol
    assert np.all(np.abs(sol.beta[inside]) <= tol * hp.C)
    # outside the tube the coefficient sits at the bound
    outside = np.abs(resid) > hp.epsilon + tol
    np.testing.assert_allclose(np.abs(sol.beta[outside]), hp.C, rtol=1e-9)


def test_iteration_cap_is_not_an_error():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(50, 2)), rng.normal(size=50)
    model = train(X, y, Hyperparams(1e4, 0.01, 1e-6), max_passes=3)
    assert not model.converged
    assert model.n_iter == 3
    assert np.all(np.isfinite(model.predict(X)))


# -- training and prediction ---------------------------------------------

@pytest.mark.parametrize("eps", [0.0, 0.1])
def test_constant_target_gives_constant_model(eps):
    X = np.random.default_rng(0).normal(size=(10, 2))
    y = np.full(10, 3.5)
    model = train(X, y, Hyperparams(10.0, 1.0, eps))
    assert np.all(model.dual_coefs == 0) and len(model.dual_coefs) == 0
    assert model.bias == pytest.approx(3.5)
    assert model.predict([100.0, -7.0]) == pytest.approx(3.5)


def test_single_support_vector_prediction():
    hp = Hyperparams(1.0, 2.0, 0.0)
    model = SvrModel(np.array([[0.3, -0.2]]), np.array([0.7]), 0.25, hp,
                     Scaler.identity(2), Scaler.identity(1))
    assert model.predict([0.3, -0.2]) == pytest.approx(0.95)


def test_sine_fit_within_tube():
    x1 = np.linspace(0, 2 * np.pi, 50)
    X = np.column_stack([x1, np.zeros(50)])
    y = np.sin(x1)
    hp = Hyperparams(C=100.0, gamma=0.5, epsilon=0.01)
    model = train(X, y, hp, tol=1e-6)
    rmse = np.sqrt(np.mean((model.predict(X) - y) ** 2))
    assert rmse <= hp.epsilon + 0.01


def test_predictions_at_support_vectors_within_tube_plus_slack():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(30, 2))
    y = X[:, 0] ** 2 + 0.3 * rng.normal(size=30)
    fs, ts = Scaler.fit(X), Scaler.fit(y[:, None])
    hp = Hyperparams(2.0, 0.8, 0.05)
    model = train(X, y, hp, tol=1e-7, feature_scaler=fs, target_scaler=ts)
    zeta, zeta_star = slacks(model, X, y)
    ys = ts.transform(y[:, None]).ravel()
    f = model.decision(fs.transform(X))
    assert np.all(np.abs(f - ys) <= hp.epsilon + np.maximum(zeta, zeta_star) + 1e-9)
    assert np.all(np.abs(model.dual_coefs) <= hp.C + 1e-9)
    assert abs(model.dual_coefs.sum()) <= 1e-6 * hp.C * len(y)


def test_scalers_are_inverted_in_predict():
    rng = np.random.default_rng(2)
    X = rng.normal(loc=1000, scale=50, size=(40, 2))
    y = 0.01 * X[:, 0] + 3
    fs, ts = Scaler.fit(X), Scaler.fit(y[:, None])
    model = train(X, y, Hyperparams(100.0, 0.1, 0.001), tol=1e-6, feature_scaler=fs, target_scaler=ts)
    manual = ts.inverse(model.decision(fs.transform(X))[:, None]).ravel()
    np.testing.assert_allclose(model.predict(X), manual, rtol=1e-12)
    # a smooth linear target is fitted closely in original units
    assert np.sqrt(np.mean((model.predict(X) - y) ** 2)) < 0.05 * y.std()


def test_deterministic_training():
    rng = np.random.default_rng(9)
    X, y = rng.normal(size=(30, 2)), rng.normal(size=30)
    a = train(X, y, Hyperparams(3.0, 0.4, 0.02))
    b = train(X, y, Hyperparams(3.0, 0.4, 0.02))
    assert a.to_dict() == b.to_dict()


def test_model_json_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    X, y = rng.normal(size=(20, 2)), rng.normal(size=20)
    model = train(X, y, Hyperparams(1.0, 0.5, 0.1), feature_scaler=Scaler.fit(X),
                  target_scaler=Scaler.fit(y[:, None]))
    path = tmp_path / "m.json"
    model.save(path)
    back = SvrModel.load(path)
    np.testing.assert_array_equal(back.predict(X), model.predict(X))
    assert back.hyper == model.hyper


def test_model_format_checked():
    with pytest.raises(SvrError):
        SvrModel.from_dict({"format": "something-else"})


@pytest.mark.parametrize("bad", [
    dict(C=0.0, gamma=1.0, epsilon=0.1),
    dict(C=1.0, gamma=-1.0, epsilon=0.1),
    dict(C=1.0, gamma=1.0, epsilon=-0.1),
    dict(C=np.nan, gamma=1.0, epsilon=0.1),
])
def test_invalid_hyperparams(bad):
    with pytest.raises(SvrError):
        Hyperparams(**bad)


def test_non_finite_training_data_rejected():
    X = np.array([[0.0, 1.0], [np.nan, 2.0]])
    with pytest.raises(SvrError):
        train(X, np.array([1.0, 2.0]), Hyperparams(1.0, 1.0, 0.1))
    with pytest.raises(SvrError):
        train(np.zeros((1, 2)), np.zeros(1), Hyperparams(1.0, 1.0, 0.1))
