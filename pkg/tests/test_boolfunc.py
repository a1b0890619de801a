import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from linrecon.boolfunc import (AND, MAJORITY, OR, PLUS_MINUS, XOR, BooleanFunction,
                               SignedFunction, all_functions, decompose_last_variable,
                               decompose_pm, index_point, is_nondegenerate_by_degree,
                               is_nondegenerate_by_sign_sum, named_function,
                               nondegenerate_count, parse_function, pm_parts,
                               point_index, to_multilinear, to_pm_function)


def tables(p):
    return st.lists(st.integers(0, 1), min_size=1 << p, max_size=1 << p)


boolean_functions = st.integers(1, 4).flatmap(
    lambda p: tables(p).map(lambda t: BooleanFunction(p, tuple(t))))


def test_encoding_first_variable_is_low_bit():
    assert point_index((1, 0, 0)) == 1
    assert point_index((0, 0, 1)) == 4
    assert index_point(6, 3) == (0, 1, 1)
    assert index_point(1, 2, PLUS_MINUS) == (1, -1)


def test_table_length_checked():
    with pytest.raises(ValueError):
        BooleanFunction(2, (0, 1, 1))
    with pytest.raises(ValueError):
        BooleanFunction(17, (0,) * 4)


def test_signed_values_restricted():
    with pytest.raises(ValueError):
        SignedFunction(1, (0, 2))


def test_serialize_roundtrip():
    f = MAJORITY(3)
    assert f.serialize() == "p=3;table=00010111"
    assert BooleanFunction.parse(f.serialize()) == f
    assert parse_function("XOR", 2) == XOR(2)
    assert parse_function("PARITY:1,3", 3)(1, 1, 0) == 1
    with pytest.raises(ValueError):
        parse_function("p=2;table=0101", 3)
    with pytest.raises(ValueError):
        named_function("FOO", 2)


@pytest.mark.parametrize("f, expected", [
    (AND(2), {(): 0, (1,): 0, (2,): 0, (1, 2): 1}),
    (OR(2), {(): 0, (1,): 1, (2,): 1, (1, 2): -1}),
    (XOR(2), {(): 0, (1,): 1, (2,): 1, (1, 2): -2}),
])
def test_multilinear_examples(f, expected):
    poly = to_multilinear(f)
    for subset, c in expected.items():
        assert poly.coeff(subset) == c
        assert isinstance(poly.coeff(subset), int)


def test_multilinear_matches_interpolation_oracle():
    for p in (1, 2, 3):
        for f in all_functions(p):
            want = oracles.multilinear_coeffs(lambda x: f(*x), p)
            assert to_multilinear(f).as_dict() == want


def test_pm_multilinear_matches_interpolation_oracle():
    g = to_pm_function(MAJORITY(3))
    want = oracles.multilinear_coeffs(lambda x: g(*x), 3, pm=True)
    got = to_multilinear(g).as_dict()
    assert got == want
    assert got[frozenset({1, 2, 3})] == Fraction(-1, 2)


def test_multilinear_reproduces_every_function_up_to_arity_4():
    for p in (1, 2, 3):
        for f in all_functions(p):
            poly = to_multilinear(f)
            assert all(poly(*x) == f(*x) for x in f.points())
    # arity 4 in bulk: integer monomial matrix times coefficient rows
    pts = list(oracles.cube(4))
    mono = np.array([[int(all(x[i] for i in range(4) if (m >> i) & 1)) for m in range(16)]
                     for x in pts], dtype=np.int64)
    fs = list(all_functions(4))
    coeffs = np.array([to_multilinear(f).coeffs for f in fs], dtype=np.int64)
    tables = np.array([[f(*x) for x in pts] for f in fs], dtype=np.int64)
    assert np.array_equal(coeffs @ mono.T, tables)


@given(boolean_functions)
def test_degree_bounded_by_arity(f):
    poly = to_multilinear(f)
    assert poly.degree <= f.arity
    nz = [len(S) for S, c in poly.as_dict().items() if c != 0]
    assert poly.degree == (max(nz) if nz else 0)


def test_nondegenerate_examples():
    assert is_nondegenerate_by_degree(AND(2))
    assert not is_nondegenerate_by_degree(BooleanFunction.from_callable(2, lambda a, b: a))
    assert is_nondegenerate_by_degree(MAJORITY(3))
    assert is_nondegenerate_by_sign_sum(AND(2))
    assert not is_nondegenerate_by_sign_sum(BooleanFunction(2, (0, 0, 0, 0)))
    assert is_nondegenerate_by_sign_sum(XOR(2))


def test_nondegeneracy_tests_agree_exhaustively():
    for p in (1, 2, 3, 4):
        for f in all_functions(p):
            assert is_nondegenerate_by_degree(f) == is_nondegenerate_by_sign_sum(f)


@pytest.mark.parametrize("p, count", [(2, 10), (3, 186)])
def test_nondegenerate_counts(p, count):
    assert nondegenerate_count(p) == count
    assert count == 2 ** 2 ** p - math.comb(2 ** p, 2 ** (p - 1))


def test_decompose_examples():
    f0, f1, f2 = decompose_last_variable(AND(2))
    assert f0.table == (0, 0) and f2.table == (0, 1) and f1.table == (0, 1)
    f0, _, f2 = decompose_last_variable(XOR(2))
    assert f0.table == (0, 1) and f2.table == (1, -1)
    f0, _, f2 = decompose_last_variable(OR(2))
    assert f0.table == (0, 1) and f2.table == (1, 0)


def test_pm_examples():
    g = to_pm_function(AND(2))
    assert [g(*x) for x in [(-1, -1), (1, -1), (-1, 1), (1, 1)]] == [-1, -1, -1, 1]
    assert set(to_pm_function(BooleanFunction(2, (1, 1, 1, 1))).table) == {1}
    g = to_pm_function(XOR(2))
    assert all(g(a, b) == -a * b for a in (-1, 1) for b in (-1, 1))
    g2, g3 = pm_parts(AND(2))
    assert g2(-1) == 0 and g2(1) == 1
    g = SignedFunction(2, (-1, -1, 1, 1), PLUS_MINUS)  # g = phi2
    g2, g3 = decompose_pm(g)
    assert g2.table == (1, 1) and g3.table == (0, 0)
    g = SignedFunction(2, (-1, 1, -1, 1), PLUS_MINUS)  # g = phi1
    g2, g3 = decompose_pm(g)
    assert g2.table == (0, 0) and g3.table == (-1, 1)


def test_decompositions_exhaustive():
    for p in (2, 3, 4):
        for f in all_functions(p):
            f0, _, f2 = decompose_last_variable(f)
            g2, g3 = pm_parts(f)
            for x in f.points():
                head, last = x[:-1], x[-1]
                assert f(*x) == f0(*head) + f2(*head) * last
                phi = tuple(2 * v - 1 for v in x)
                # f0 + f2*delta = (g3 + g2*phi + 1) / 2
                assert 2 * (f0(*head) + f2(*head) * last) == \
                    g3(*phi[:-1]) + g2(*phi[:-1]) * phi[-1] + 1


@settings(max_examples=200)
@given(boolean_functions.filter(lambda f: f.arity >= 2))
def test_nondegenerate_f_has_full_degree_f2(f):
    if is_nondegenerate_by_degree(f):
        _, _, f2 = decompose_last_variable(f)
        assert to_multilinear(f2).degree == f.arity - 1


def test_decompose_needs_arity_two():
    with pytest.raises(ValueError):
        decompose_last_variable(BooleanFunction(1, (0, 1)))
