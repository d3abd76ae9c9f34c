import numpy as np
import pytest

from macstbc.design_algebra import DesignError, build_design, evaluate, from_pattern
from macstbc.lattice import (
    ChannelRealization,
    build_lattice_generator,
    build_user_matrix,
    check_rc_monomial,
    extract_coefficient_matrices,
    receive_antennas,
    stack_received,
)
from macstbc.simulation import sample_channel
from conftest import ASDC_PARAMS
from oracles import complex_stack, received_signal

# Im(x1) column of Alamouti seen through h = (1, 0) ... worked by hand:
# X(x1 = j) = diag(j, -j), so X h = (j h1, -j h2).
ALAMOUTI_C3_BLOCK = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]])


def _rand_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_user_matrix_alamouti_h10_identity(alamouti):
    np.testing.assert_array_equal(build_user_matrix(alamouti, [1, 0]), np.eye(4))


def test_user_matrix_zero_channel(alamouti):
    assert not build_user_matrix(alamouti, [0, 0]).any()


def test_user_matrix_alamouti_hj0(alamouti):
    # X h = j [x1; x2]: Re rows pick -Im x, Im rows pick +Re x
    expected = np.array([[0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0]])
    np.testing.assert_array_equal(build_user_matrix(alamouti, [1j, 0]), expected)


def test_user_matrix_matches_finite_difference_of_evaluate(rng):
    d = build_design(4, 3)
    h = _rand_complex(rng, d.Nt)
    H = build_user_matrix(d, h)
    x0 = _rand_complex(rng, d.k)
    eps = 1e-6
    for col in range(2 * d.k):
        dx = np.zeros(2 * d.k)
        dx[col] = eps
        step = dx[: d.k] + 1j * dx[d.k :]
        diff = (evaluate(d, x0 + step).entries @ h - evaluate(d, x0).entries @ h) / eps
        np.testing.assert_allclose(H[:, col], complex_stack(diff), atol=1e-8)


def test_user_matrix_dimension_mismatch(alamouti):
    with pytest.raises(ValueError):
        build_user_matrix(alamouti, [1, 2, 3])


def test_alamouti_generator_is_8x8(alamouti, rng):
    ch = sample_channel(2, receive_antennas(alamouti), rng)
    assert build_lattice_generator(alamouti, ch).M.shape == (8, 8)


@pytest.mark.parametrize("params", ASDC_PARAMS + [(4, 4)])
def test_vec_identity(params, rng):
    d = build_design(*params)
    Nr = receive_antennas(d)
    for _ in range(100):
        ch = sample_channel(d.Nt, Nr, rng)
        x1, x2 = _rand_complex(rng, d.k), _rand_complex(rng, d.k)
        z = np.concatenate([complex_stack(x1), complex_stack(x2)])
        M = build_lattice_generator(d, ch).M
        direct = received_signal(evaluate(d, x1).entries, evaluate(d, x2).entries, ch.H1, ch.H2)
        np.testing.assert_allclose(M @ z, direct, atol=1e-12)


def test_identical_users_cancel(alamouti, rng):
    H = _rand_complex(rng, 2, 2)
    M = build_lattice_generator(alamouti, ChannelRealization(H, H)).M
    x = complex_stack(_rand_complex(rng, 2))
    np.testing.assert_allclose(M @ np.concatenate([x, -x]), 0, atol=1e-14)


def test_generator_rejects_wrong_nr(alamouti, rng):
    with pytest.raises(ValueError):
        build_lattice_generator(alamouti, sample_channel(2, 1, rng))


def test_stack_received_order():
    Y = np.array([[1 + 2j, 5 + 6j], [3 + 4j, 7 + 8j]])
    np.testing.assert_array_equal(stack_received(Y), [1, 3, 2, 4, 5, 7, 6, 8])


def test_generator_is_linear_in_channel(rng):
    d = build_design(4, 3)
    ch = sample_channel(d.Nt, receive_antennas(d), rng)
    M = build_lattice_generator(d, ch).M
    np.testing.assert_allclose(build_lattice_generator(d, ch.scaled(-2.5)).M, -2.5 * M, atol=1e-13)


def test_alamouti_coefficient_matrices(alamouti):
    cset = extract_coefficient_matrices(alamouti)
    assert cset.C.shape == (4, 8, 8)
    assert set(np.unique(cset.C)) <= {-1, 0, 1}
    np.testing.assert_array_equal(cset[0], np.eye(8, dtype=int))
    np.testing.assert_array_equal(cset[2][:4, :4], ALAMOUTI_C3_BLOCK)
    np.testing.assert_array_equal(cset[2][4:, 4:], ALAMOUTI_C3_BLOCK)


@pytest.mark.parametrize("params", ASDC_PARAMS)
def test_coefficients_reproduce_generator(params, rng):
    d = build_design(*params)
    cset = extract_coefficient_matrices(d)
    for _ in range(100):
        ch = sample_channel(d.Nt, cset.Nr, rng)
        np.testing.assert_allclose(cset.generator(ch), build_lattice_generator(d, ch).M, atol=1e-14)


def test_coefficients_reproduce_cod_generator(cod4, cod8, rng):
    for d in (cod4, cod8):
        cset = extract_coefficient_matrices(d)
        ch = sample_channel(d.Nt, cset.Nr, rng)
        np.testing.assert_allclose(cset.generator(ch), build_lattice_generator(d, ch).M, atol=1e-14)


def test_zero_design_gives_zero_set():
    d = from_pattern([["0", "0"], ["0", "0"]], k=2)
    cset = extract_coefficient_matrices(d)
    assert cset.is_zero
    report = check_rc_monomial(cset)
    assert not report.p3


def test_extraction_names_non_monomial_entry():
    F = np.zeros((2, 2, 4), dtype=complex)
    F[1, 0, 0] = 1
    F[1, 0, 1] = 1
    from macstbc.design_algebra import ComplexLinearDesign

    with pytest.raises(DesignError, match=r"row 2, column 1"):
        extract_coefficient_matrices(ComplexLinearDesign(F))


def test_rc_monomial_alamouti(alamouti):
    r = check_rc_monomial(extract_coefficient_matrices(alamouti))
    assert r.rc_monomial and r.p1 and r.p2 and r.p3 and not r.violations


def test_rc_monomial_cod(cod4, cod8):
    for d in (cod4, cod8):
        assert check_rc_monomial(extract_coefficient_matrices(d)).rc_monomial


def test_repeated_variable_breaks_rc_monomial():
    d = from_pattern([["x1", "x1"], ["x2", "x2"]])
    r = check_rc_monomial(extract_coefficient_matrices(d))
    assert not r.rc_monomial
    assert not r.row_monomial
    assert (1, "row", 1) in r.violations


@pytest.mark.parametrize("params", ASDC_PARAMS)
def test_equal_column_norms(params, rng):
    d = build_design(*params)
    k = d.k
    for _ in range(20):
        M = build_lattice_generator(d, sample_channel(d.Nt, receive_antennas(d), rng)).M
        norms = np.linalg.norm(M, axis=0)
        np.testing.assert_allclose(norms[:2 * k], norms[0], rtol=1e-13)
        np.testing.assert_allclose(norms[2 * k:], norms[2 * k], rtol=1e-13)


def test_spatial_multiplexing_needs_four_antennas(spatial):
    assert receive_antennas(spatial) == 4
    assert not check_rc_monomial(extract_coefficient_matrices(spatial)).p3
