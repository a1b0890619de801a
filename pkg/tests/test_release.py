import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from linrecon.boolfunc import AND, XOR, BooleanFunction
from linrecon.release import (Database, FitError, NoiseSpec, RowCapExceeded,
                              apply_noise, fit_linear_regression,
                              fit_linear_regression_block, fit_logistic_regression,
                              fit_mestimator_1d, get_loss, is_small, read_release,
                              release_counts, release_estimators, sigma_f,
                              variance_condition, write_release)


def test_database_validates():
    with pytest.raises(ValueError):
        Database(np.zeros((2, 2)), [0, 2])
    with pytest.raises(ValueError):
        Database(np.zeros((2, 2)), [0, 1, 1])
    U = np.zeros((2, 2))
    db = Database(U, [0, 1])
    assert U.flags.writeable and not db.U.flags.writeable


def test_sigma_f_examples():
    db = Database(np.array([[1, 0], [0, 1]]), [1, 0])
    assert sigma_f(db, AND(2)).tolist() == [1, 0]
    one = BooleanFunction(3, (1,) * 8)
    db = Database(np.random.default_rng(0).integers(0, 2, (7, 3)), np.ones(7))
    assert (sigma_f(db, one) == 7).all()
    db0 = Database(db.U, np.zeros(7))
    assert (sigma_f(db0, AND(2)) == 0).all()


def test_sigma_f_matches_loop_oracle():
    rng = np.random.default_rng(2)
    for _ in range(30):
        n, d, k = int(rng.integers(1, 9)), int(rng.integers(1, 5)), int(rng.integers(1, 4))
        f = BooleanFunction(k + 1, tuple(rng.integers(0, 2, 1 << (k + 1))))
        U, s = rng.integers(0, 2, (n, d)), rng.integers(0, 2, n)
        got = sigma_f(Database(U, s), f)
        assert got.dtype.kind == "i"
        assert np.array_equal(got, oracles.sigma_f(U, s, f))
        assert ((0 <= got) & (got <= n)).all()


def test_sigma_f_errors():
    with pytest.raises(ValueError):
        sigma_f(Database(np.full((2, 2), 0.5), [0, 1]), AND(2))
    with pytest.raises(RowCapExceeded):
        sigma_f(Database(np.zeros((2, 10), int), [0, 1]), AND(4), row_cap=999)


def test_noise_examples():
    y = np.arange(100.0)
    out, err = apply_noise(y, NoiseSpec())
    assert np.array_equal(out, y) and not err.any()
    out, err = apply_noise(y, NoiseSpec("bounded-uniform", beta=0.3, seed=4))
    assert np.abs(err).max() <= 0.3 and np.allclose(out - y, err)
    out, err = apply_noise(y, NoiseSpec("gross-plus-bounded", 0.5, 0.1, 100.0, seed=1))
    assert np.count_nonzero(np.abs(err) == 100.0) == 10
    a, b = apply_noise(y, NoiseSpec("bounded-uniform", beta=1, seed=9))
    c, d = apply_noise(y, NoiseSpec("bounded-uniform", beta=1, seed=9))
    assert np.array_equal(a, c)
    with pytest.raises(ValueError):
        NoiseSpec("bounded-uniform", beta=-1)
    with pytest.raises(ValueError):
        NoiseSpec("gross-plus-bounded", gamma=1.0)


@settings(max_examples=50)
@given(st.integers(1, 300), st.floats(0, 0.99), st.floats(0, 2), st.integers(0, 2 ** 32))
def test_gross_noise_is_small(m, gamma, beta, seed):
    spec = NoiseSpec("gross-plus-bounded", beta, gamma, 1e6, seed)
    _, err = apply_noise(np.zeros(m), spec)
    assert is_small(err, gamma, beta)
    assert np.count_nonzero(np.abs(err) > beta) == math.floor(gamma * m)


def test_linear_regression_examples():
    s = np.array([1, 0, 1, 1])
    assert math.isclose(fit_linear_regression(np.ones(4), s), 0.75)
    assert math.isclose(fit_linear_regression(s.astype(float), s), 1.0)
    assert math.isclose(fit_linear_regression([1, 2], [1, 0]), 0.2)
    with pytest.raises(FitError, match="degenerate regressor"):
        fit_linear_regression(np.zeros(3), [0, 1, 1])


def test_block_regression_matches_lstsq():
    rng = np.random.default_rng(0)
    X, s = rng.uniform(-1, 1, (30, 3)), rng.integers(0, 2, 30)
    assert np.allclose(fit_linear_regression_block(X, s), np.linalg.lstsq(X, s, rcond=None)[0])


def test_logistic_examples():
    assert abs(fit_logistic_regression([1, 1], [1, 0]).theta) < 1e-12
    fit = fit_logistic_regression([1, -1], [1, 0])
    assert fit.separated and fit.theta == 50.0
    assert abs(fit_logistic_regression([1, 1, -1, -1], [1, 0, 1, 0]).theta) < 1e-12
    with pytest.raises(FitError):
        fit_logistic_regression([0, 0], [0, 1])


def test_logistic_stationary():
    rng = np.random.default_rng(5)
    x, s = rng.uniform(-1, 1, 200), rng.integers(0, 2, 200)
    fit = fit_logistic_regression(x, s, tol=1e-10)
    zeta = 1 / (1 + np.exp(-fit.theta * x))
    assert abs(x @ (s - zeta)) <= 1e-10 and not fit.separated


def test_logistic_nonconvergence_reports_iterate():
    rng = np.random.default_rng(5)
    x, s = rng.uniform(-1, 1, 200), rng.integers(0, 2, 200)
    with pytest.raises(FitError) as info:
        fit_logistic_regression(x, s, max_iter=1, tol=1e-15)
    assert info.value.theta is not None and info.value.grad > 0


def test_mestimator_agrees_with_closed_forms():
    rng = np.random.default_rng(1)
    for _ in range(10):
        x, s = rng.uniform(-1, 1, 80), rng.integers(0, 2, 80)
        sq = fit_mestimator_1d(get_loss("squared"), x, s)
        assert abs(sq.theta - fit_linear_regression(x, s)) <= 1e-8
        lg = fit_mestimator_1d(get_loss("logistic"), x, s)
        assert abs(lg.theta - fit_logistic_regression(x, s).theta) <= 1e-6
    assert fit_mestimator_1d(get_loss("squared"), x, np.zeros(80)).theta == 0.0


def test_mestimator_no_root():
    with pytest.raises(FitError, match="no stationary point in range"):
        fit_mestimator_1d(get_loss("logistic"), [1.0, 1.0], [1, 1], theta_cap=2.0)


@pytest.mark.parametrize("name", ["squared", "logistic", "huber"])
def test_loss_decomposition_and_gradient(name):
    loss = get_loss(name)
    rng = np.random.default_rng(0)
    for _ in range(200):
        t, x = rng.uniform(-3, 3), rng.uniform(-1, 1)
        for y in (0, 1):
            assert loss.gradient(t, x, y) == loss.ell0(t, x) + loss.ell2(t, x) * y
            h = 1e-6
            fd = (loss.value(t + h, x, y) - loss.value(t - h, x, y)) / (2 * h)
            assert abs(fd - loss.gradient(t, x, y)) <= 1e-5


def test_logistic_lipschitz_probe():
    loss = get_loss("logistic")
    rng = np.random.default_rng(8)
    for _ in range(1000):
        x = rng.uniform(-1, 1, 10)
        s = rng.integers(0, 2, 10)
        t1, t2 = rng.uniform(-5, 5, 2)
        g1 = np.sum(loss.gradient(t1, x, s))
        g2 = np.sum(loss.gradient(t2, x, s))
        assert abs(g1 - g2) <= x @ x * abs(t1 - t2) + 1e-12


def test_variance_condition_warns():
    assert variance_condition(get_loss("squared"), 0.0) > 1.0
    with pytest.warns(UserWarning):
        variance_condition(get_loss("squared"), 0.0, floor=100.0)


def test_release_estimator_examples():
    rng = np.random.default_rng(3)
    s = rng.integers(0, 2, 20)
    U = rng.uniform(-1, 1, (20, 4))
    U[:, 2] = s
    rel = release_estimators(Database(U, s), "linear", NoiseSpec())
    assert math.isclose(rel.values[2], 1.0)
    U = np.tile(rng.uniform(-1, 1, (20, 1)), (1, 3))
    rel = release_estimators(Database(U, s), "linear", NoiseSpec())
    assert np.all(rel.values == rel.values[0])
    rel = release_estimators(Database(U, s), "logistic",
                             NoiseSpec("bounded-uniform", beta=0.1, seed=2))
    assert np.abs(rel.values - rel.exact).max() <= 0.1
    assert len(rel.values) == 3


def test_release_marks_failures_and_separation():
    U = np.array([[0.0, 1.0], [0.0, -1.0]])
    rel = release_estimators(Database(U, [1, 0]), "logistic", NoiseSpec())
    assert rel.metadata["failed"] == [0] and rel.metadata["separated"] == [1]
    assert np.isnan(rel.values[0]) and rel.values[1] == 50.0
    assert rel.missing.tolist() == [True, True]


def test_release_counts_and_serialization(tmp_path):
    rng = np.random.default_rng(0)
    db = Database(rng.integers(0, 2, (10, 3)), rng.integers(0, 2, 10))
    rel = release_counts(db, XOR(3), NoiseSpec("bounded-uniform", beta=0.5, seed=1),
                         normalize=True)
    assert len(rel.values) == 9 and rel.normalized
    assert np.allclose(rel.values - rel.error, rel.exact / 10)
    write_release(rel, tmp_path / "r.csv", tmp_path / "r.meta")
    values, meta = read_release(tmp_path / "r.csv", tmp_path / "r.meta")
    assert np.array_equal(values, rel.values)
    assert meta["f"] == XOR(3).serialize() and meta["normalized"] == "True"
    assert meta["k"] == "2" and meta["noise"] == "bounded-uniform"
