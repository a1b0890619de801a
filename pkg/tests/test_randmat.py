import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from linrecon.boolfunc import (AND, OR, PLUS_MINUS, XOR, MultilinearPoly,
                               SignedFunction, decompose_last_variable, pm_parts,
                               signed_functions, to_multilinear)
from linrecon.randmat import (TauRandomSpec, check_derivative_identity,
                              check_pm_identity,
                              distinct_sorted_rows, euclidean_ratio_probe, gen_matrix,
                              l1_ratio_probe, least_singular_value, operator_norm,
                              perturbed_matrix, perturbed_sigma_probe,
                              read_matrix_csv, row_function_matrix, row_product,
                              spectral_report, write_matrix_csv)

BERN = TauRandomSpec("bernoulli01")
RAD = TauRandomSpec("rademacher")
UNI = TauRandomSpec("uniform-symmetric", 1.0)


def test_tau_spec():
    assert RAD.tau == 1.0 and RAD.is_tau_random
    assert math.isclose(UNI.tau, 1 / math.sqrt(3))
    assert not BERN.is_tau_random
    assert TauRandomSpec.parse("uniform-symmetric(0.5)").width == 0.5
    with pytest.raises(ValueError):
        TauRandomSpec("uniform-symmetric", 2.0)
    with pytest.raises(ValueError):
        TauRandomSpec("gaussian")


def test_gen_matrix_deterministic_and_supported():
    assert np.array_equal(gen_matrix(BERN, 3, 3, 11), gen_matrix(BERN, 3, 3, 11))
    assert abs(gen_matrix(RAD, 1000, 1, 3).mean()) <= 0.1
    U = gen_matrix(UNI, 50, 40, 2)
    assert np.abs(U).max() <= 1
    assert set(np.unique(gen_matrix(BERN, 20, 20, 1))) <= {0, 1}


def test_row_product_examples():
    I2 = np.eye(2, dtype=int)
    assert row_product(I2, I2).tolist() == [[1, 0], [0, 0], [0, 0], [0, 1]]
    M = np.arange(6).reshape(2, 3)
    assert np.array_equal(row_product(M), M)
    assert np.array_equal(row_product(np.ones((3, 2)), np.ones((3, 2))), np.ones((9, 2)))
    with pytest.raises(ValueError):
        row_product(np.ones((2, 2)), np.ones((2, 3)))


def test_row_function_examples():
    T = gen_matrix(BERN, 4, 3, 0)
    ident = SignedFunction(1, (0, 1))
    assert np.array_equal(row_function_matrix(ident, T), T)
    assert np.array_equal(row_function_matrix(AND(2), T, T), row_product(T, T))
    _, _, f2 = decompose_last_variable(XOR(2))
    assert row_function_matrix(f2, np.array([[0, 1]])).tolist() == [[1, -1]]


def test_row_function_domain_checked():
    with pytest.raises(ValueError):
        row_function_matrix(AND(2), np.array([[0, 2]]), np.array([[0, 1]]))
    with pytest.raises(ValueError):
        row_function_matrix(SignedFunction(1, (0, 1), PLUS_MINUS), np.array([[0, 1]]))


def test_row_function_matches_loop_oracle():
    rng = np.random.default_rng(4)
    for _ in range(20):
        k = int(rng.integers(1, 4))
        h = SignedFunction(k, tuple(rng.integers(-1, 2, 1 << k)))
        mats = [rng.integers(0, 2, (int(rng.integers(1, 4)), 3)) for _ in range(k)]
        assert np.array_equal(row_function_matrix(h, *mats), oracles.row_function(h, mats))


def test_product_polynomial_equals_row_product():
    rng = np.random.default_rng(0)
    for k in (1, 2, 3):
        top = MultilinearPoly(k, "zero-one", tuple([0] * ((1 << k) - 1) + [1]))
        for d in range(1, 6):
            for n in range(1, 6):
                mats = [rng.uniform(-1, 1, (d, n)) for _ in range(k)]
                assert np.array_equal(row_function_matrix(top, *mats), row_product(*mats))


def test_polynomial_path_matches_table_on_cube():
    T = gen_matrix(BERN, 3, 4, 9)
    _, _, f2 = decompose_last_variable(OR(3))
    poly = to_multilinear(f2)
    assert np.array_equal(row_function_matrix(poly, T, T), row_function_matrix(f2, T, T))


def test_distinct_sorted_mode():
    T = gen_matrix(BERN, 5, 3, 1)
    full = row_function_matrix(AND(2), T, T)
    part = row_function_matrix(AND(2), T, T, mode="distinct-sorted")
    assert part.shape == (10, 3)
    assert np.array_equal(part, full[distinct_sorted_rows(5, 2)])
    assert np.array_equal(part[0], T[0] * T[1])


def test_least_singular_value_examples(thresholds):
    assert math.isclose(least_singular_value(np.eye(3)), 1.0)
    M = np.vstack([np.diag([3.0, 2.0]), np.zeros((1, 2))])
    assert math.isclose(least_singular_value(M), 2.0)
    lo = math.sqrt(200) * (1 - math.sqrt(50 / 200)) * 0.5
    hi = math.sqrt(200) * (1 + math.sqrt(50 / 200)) * 1.5
    vals = [least_singular_value(gen_matrix(RAD, 200, 50, s)) for s in range(20)]
    assert lo <= min(vals) and max(vals) <= hi
    with pytest.raises(ValueError):
        least_singular_value(np.array([[np.nan, 1.0]]))


def test_singular_values_against_eigenvalues():
    M = gen_matrix(UNI, 30, 8, 5)
    ev = np.linalg.eigvalsh(M.T @ M)
    assert math.isclose(least_singular_value(M), math.sqrt(ev[0]), rel_tol=1e-8)
    assert math.isclose(operator_norm(M), math.sqrt(ev[-1]), rel_tol=1e-8)


def test_euclidean_ratio_examples(thresholds):
    assert math.isclose(euclidean_ratio_probe(np.array([[3.0, -1.0]]), 5, 0).ratio, 1.0)
    assert euclidean_ratio_probe(np.eye(2), 10, 0).ratio <= 1 / math.sqrt(2) + 1e-9
    lo, hi = thresholds["rademacher_euclid_400x20"]["threshold"]
    for s in range(5):
        r = euclidean_ratio_probe(gen_matrix(RAD, 400, 20, s), 100, s).ratio
        assert lo <= r <= hi


def test_euclidean_ratio_flags_rank_deficiency():
    M = np.array([[1.0, 1.0], [2.0, 2.0], [0.5, 0.5]])
    probe = euclidean_ratio_probe(M, 10, 0)
    assert probe.ratio == 0.0 and probe.rank_deficient


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(1, 5), st.integers(0, 2 ** 32))
def test_euclidean_ratio_at_most_one(m, n, seed):
    M = np.random.default_rng(seed).normal(size=(m, n))
    assert euclidean_ratio_probe(M, 20, seed).ratio <= 1 + 1e-12


def test_spectral_report_invariants():
    rep = spectral_report(gen_matrix(RAD, 40, 10, 3), 50, 3)
    assert rep.sigma_min <= rep.op_norm
    assert 0 < rep.euclid_ratio_min <= 1
    assert rep.probes_used == 50 + 10 + 1


def test_perturbed_probe(thresholds):
    base = perturbed_sigma_probe(60, 20, 0.0, [1, 2])
    assert base == [least_singular_value(gen_matrix(RAD, 60, 20, s)) for s in (1, 2)]
    col = perturbed_matrix(10, 1, 3.0, 4)
    assert math.isclose(perturbed_sigma_probe(10, 1, 3.0, [4])[0], np.linalg.norm(col))
    d, n = 200, 50
    vals = perturbed_sigma_probe(d, n, math.sqrt(d), range(20))
    assert min(vals) >= thresholds["perturbed_sigma_d200_n50"]["threshold_min_over_sqrt_d"] * math.sqrt(d)
    with pytest.raises(ValueError):
        perturbed_sigma_probe(10, 6, 1.0, [0])


def test_scaling_and_l1_probes(thresholds):
    f2 = decompose_last_variable(AND(3))[2]
    g2, _ = pm_parts(AND(3))
    means = []
    for d in (10, 15, 20):
        ratios = []
        for s in range(10):
            T = gen_matrix(BERN, d, d, s)
            M = row_function_matrix(f2, T, T)
            ratios.append(least_singular_value(M) / d)
            assert l1_ratio_probe(M, 1000, s) >= thresholds["rowfunc_l1_probe"]["threshold_min"]
            P = row_function_matrix(g2, 2 * T - 1, 2 * T - 1)
            assert operator_norm(P) <= thresholds["pm_op_norm"]["threshold_factor"] * (d + math.sqrt(d))
        means.append(np.mean(ratios))
    assert max(means) / min(means) < thresholds["rowfunc_sigma_scaling"]["threshold_max_spread"]


@pytest.mark.parametrize("h", [SignedFunction(1, (0, 1)), AND(2), XOR(2)])
def test_derivative_identity_examples(h):
    assert check_derivative_identity(h, 20, 0)


def test_derivative_identity_all_nondegenerate_k2():
    for h in signed_functions(2):
        if to_multilinear(h).top_coeff != 0:
            assert check_derivative_identity(h, 5, 1, exhaustive=True)


def test_derivative_identity_rejects_degenerate():
    with pytest.raises(ValueError, match="c_h undefined"):
        check_derivative_identity(SignedFunction(2, (0, 1, 0, 1)), 5, 0)


@pytest.mark.parametrize("h", [
    SignedFunction(1, (-1, 1), PLUS_MINUS),
    SignedFunction(2, (1, -1, -1, 1), PLUS_MINUS),
    pm_parts(OR(3))[0],
])
def test_pm_identity_examples(h):
    assert check_pm_identity(h, 20, 0)


def test_pm_identity_random_k3():
    rng = np.random.default_rng(3)
    done = 0
    while done < 5:
        h = SignedFunction(3, tuple(rng.integers(-1, 2, 8)), PLUS_MINUS)
        if to_multilinear(h).top_coeff == 0:
            continue
        assert check_pm_identity(h, 50, done)
        done += 1


def test_matrix_csv_roundtrip(tmp_path):
    M = gen_matrix(UNI, 4, 3, 0)
    p = tmp_path / "m.csv"
    write_matrix_csv(p, M)
    assert p.read_text().splitlines()[0] == "4,3"
    assert np.array_equal(read_matrix_csv(p), M)
    B = gen_matrix(BERN, 3, 5, 0)
    write_matrix_csv(p, B)
    back = read_matrix_csv(p)
    assert back.dtype.kind == "i" and np.array_equal(back, B)
    p.write_text("2,2\n1,2\n")
    with pytest.raises(ValueError):
        read_matrix_csv(p)
