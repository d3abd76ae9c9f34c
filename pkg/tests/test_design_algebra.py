from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from macstbc.design_algebra import (
    ComplexLinearDesign,
    DesignError,
    build_design,
    build_square_cod,
    design_case,
    evaluate,
    from_pattern,
    is_square_cod,
    make_alamouti_block,
    named_design,
    rate,
)
from oracles import eval_pattern


def test_alamouti_block_m0():
    assert make_alamouti_block(0).pattern() == [["x1", "-x2*"], ["x2", "x1*"]]


def test_alamouti_block_m1_uses_x3_x4():
    d = make_alamouti_block(1)
    assert d.k == 4
    assert d.pattern() == [["x3", "-x4*"], ["x4", "x3*"]]


def test_alamouti_at_unit_vector_is_identity():
    X = evaluate(make_alamouti_block(0), [1, 0]).entries
    np.testing.assert_array_equal(X, np.eye(2))


def test_alamouti_block_rejects_negative():
    with pytest.raises(DesignError):
        make_alamouti_block(-1)


@pytest.mark.parametrize("nt,k,T", [(2, 2, 2), (2, 3, 4), (4, 2, 4), (3, 2, 4), (4, 3, 8), (5, 2, 6), (6, 4, 12)])
def test_build_design_dimensions(nt, k, T):
    d = build_design(nt, k)
    assert (d.T, d.Nt, d.k) == (T, nt, k)


def test_build_design_2_2_is_alamouti():
    assert build_design(2, 2).pattern() == [["x1", "-x2*"], ["x2", "x1*"]]


def test_build_design_2_3_appends_scaled_identity():
    assert build_design(2, 3).pattern() == [
        ["x1", "-x2*"],
        ["x2", "x1*"],
        ["x3", "0"],
        ["0", "x3"],
    ]


def test_build_design_4_2_is_alamouti_kron_identity():
    assert build_design(4, 2).pattern() == [
        ["x1", "0", "-x2*", "0"],
        ["0", "x1", "0", "-x2*"],
        ["x2", "0", "x1*", "0"],
        ["0", "x2", "0", "x1*"],
    ]


def test_build_design_3_2_drops_last_column_of_4_2():
    four = build_design(4, 2).pattern()
    assert build_design(3, 2).pattern() == [row[:3] for row in four]


def test_build_design_odd_k_odd_nt():
    four = build_design(4, 3).pattern()
    assert build_design(3, 3).pattern() == [row[:3] for row in four]


@pytest.mark.parametrize("nt,k", [(1, 2), (2, 1), (0, 0)])
def test_build_design_rejects_small(nt, k):
    with pytest.raises(DesignError):
        build_design(nt, k)


def test_design_case_dispatch():
    assert [design_case(*p) for p in [(2, 2), (2, 3), (3, 2), (3, 3)]] == [1, 2, 3, 4]


def test_cod_a1_is_alamouti():
    np.testing.assert_array_equal(build_square_cod(1).coeffs, build_design(2, 2).coeffs)


def test_cod_a2_shape_and_rate():
    d = build_square_cod(2)
    assert (d.T, d.Nt, d.k) == (4, 4, 3)
    assert rate(d) == Fraction(3, 4)


def test_cod_rejects_zero():
    with pytest.raises(DesignError):
        build_square_cod(0)


@pytest.mark.parametrize("a", [1, 2, 3])
def test_cod_symbolic_orthogonality(a):
    assert is_square_cod(build_square_cod(a))


def test_symbolic_check_rejects_non_orthogonal():
    assert not is_square_cod(from_pattern([["x1", "x2"], ["x2", "x1"]]))
    assert not is_square_cod(from_pattern([["x1", "x3"], ["x2", "x4"]]))


@pytest.mark.parametrize("a", [1, 2, 3])
def test_cod_numeric_orthogonality(a, rng):
    d = build_square_cod(a)
    x = rng.standard_normal(d.k) + 1j * rng.standard_normal(d.k)
    X = evaluate(d, x).entries
    np.testing.assert_allclose(X.conj().T @ X, np.sum(np.abs(x) ** 2) * np.eye(d.Nt), atol=1e-12)


def test_evaluate_alamouti_at_1_j():
    X = evaluate(build_design(2, 2), [1, 1j]).entries
    np.testing.assert_array_equal(X, [[1, 1j], [1j, 1]])


def test_evaluate_matches_independent_substitution(rng):
    for d in [build_design(4, 3), build_design(5, 2), build_square_cod(3)]:
        x = rng.standard_normal(d.k) + 1j * rng.standard_normal(d.k)
        np.testing.assert_allclose(evaluate(d, x).entries, eval_pattern(d.pattern(), x), atol=1e-14)


def test_evaluate_zero_vector():
    d = build_design(4, 3)
    assert not evaluate(d, np.zeros(3)).entries.any()


def test_case2_only_appended_block_active():
    X = evaluate(build_design(2, 3), [0, 0, 1]).entries
    np.testing.assert_array_equal(X, np.vstack([np.zeros((2, 2)), np.eye(2)]))


def test_evaluate_dimension_mismatch():
    with pytest.raises(DesignError):
        evaluate(build_design(2, 2), [1, 2, 3])


@pytest.mark.parametrize("nt,k,expected", [(2, 2, Fraction(1)), (4, 2, Fraction(1, 2)), (2, 3, Fraction(3, 4))])
def test_rate(nt, k, expected):
    assert rate(build_design(nt, k)) == expected


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 9), st.integers(2, 9))
def test_rate_bound(nt, k):
    d = build_design(nt, k)
    assert d.rate <= Fraction(2, nt)
    assert d.is_monomial


@settings(max_examples=40, deadline=None)
@given(
    st.integers(2, 6), st.integers(2, 5),
    st.floats(-3, 3), st.floats(-3, 3),
    st.lists(st.floats(-2, 2), min_size=20, max_size=20),
)
def test_evaluate_real_linear(nt, k, alpha, beta, vals):
    d = build_design(nt, k)
    v = np.array(vals[: 4 * k])
    x = v[:k] + 1j * v[k : 2 * k]
    y = v[2 * k : 3 * k] + 1j * v[3 * k :]
    lhs = evaluate(d, alpha * x + beta * y).entries
    rhs = alpha * evaluate(d, x).entries + beta * evaluate(d, y).entries
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_designs_are_immutable():
    d = build_design(2, 2)
    with pytest.raises(ValueError):
        d.coeffs[0, 0, 0] = 5
    with pytest.raises(AttributeError):
        d.name = "other"


def test_representation_matrices_alamouti():
    d = build_design(2, 2)
    np.testing.assert_array_equal(d.A[0], np.eye(2))
    np.testing.assert_array_equal(d.B[0], np.zeros((2, 2)))
    np.testing.assert_array_equal(d.A[1], np.zeros((2, 2)))
    np.testing.assert_array_equal(d.B[1], [[0, -1], [1, 0]])


def test_from_representation_roundtrip():
    d = build_square_cod(2)
    again = ComplexLinearDesign.from_representation(d.A, d.B)
    np.testing.assert_array_equal(again.coeffs, d.coeffs)


def test_json_roundtrip_exact_integers():
    d = build_square_cod(2)
    doc = d.to_dict()
    assert set(doc) >= {"T", "Nt", "k", "A", "B"}
    flat = np.asarray(doc["A"]).ravel().tolist() + np.asarray(doc["B"]).ravel().tolist()
    assert all(isinstance(v, int) for v in flat)
    again = ComplexLinearDesign.from_json(d.to_json())
    np.testing.assert_array_equal(again.coeffs, d.coeffs)


def test_json_rejects_shape_mismatch():
    doc = build_design(2, 2).to_dict()
    doc["T"] = 3
    with pytest.raises(DesignError):
        ComplexLinearDesign.from_dict(doc)


def test_pattern_parser_roundtrip():
    rows = [["x1", "-jx2*", "0"], ["x3*", "x1", "-x2"]]
    assert from_pattern(rows).pattern() == rows


def test_non_monomial_flag():
    F = np.zeros((1, 1, 4), dtype=complex)
    F[0, 0, 0] = 1
    F[0, 0, 1] = 1
    d = ComplexLinearDesign(F)
    assert not d.is_monomial
    assert d.monomial_violation() == (0, 0)


def test_named_design_validation():
    assert named_design("cod", 8).k == 4
    with pytest.raises(DesignError):
        named_design("cod", 6)
    with pytest.raises(DesignError):
        named_design("case1", 3, 2)
    with pytest.raises(DesignError):
        named_design("nope")
