import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from soliplasmon.fock import (
    MatrixExponentialError,
    TwoModeSpace,
    annihilation,
    creation,
    diag_sqrt,
    is_anti_hermitian,
    is_hermitian,
    kron,
    matrix_exponential,
    number,
)


def test_annihilation_small_cutoffs():
    np.testing.assert_array_equal(annihilation(2), [[0, 1], [0, 0]])
    a3 = annihilation(3)
    expected = np.zeros((3, 3))
    expected[0, 1] = 1.0
    expected[1, 2] = np.sqrt(2.0)
    np.testing.assert_array_equal(a3, expected)
    assert a3.dtype == complex


@pytest.mark.parametrize("cutoff", [1, 2, 5, 9])
def test_number_operator_is_diagonal_range(cutoff):
    np.testing.assert_array_equal(number(cutoff), np.diag(np.arange(cutoff)))
    a = annihilation(cutoff)
    np.testing.assert_allclose(a.conj().T @ a, number(cutoff), atol=1e-14)


@pytest.mark.parametrize("bad", [0, -1, 2.5, True])
def test_annihilation_rejects_bad_cutoff(bad):
    with pytest.raises(ValueError):
        annihilation(bad)


@pytest.mark.parametrize("d", [1, 2, 3, 6])
def test_truncated_commutator(d):
    a, ad = annihilation(d), creation(d)
    top = np.zeros((d, d))
    top[-1, -1] = 1.0
    # exact up to the rounding of sqrt(n)**2
    np.testing.assert_allclose(a @ ad - ad @ a, np.eye(d) - d * top, rtol=0, atol=4 * d * np.finfo(float).eps)


def test_creation_is_exact_adjoint():
    for d in (2, 4, 7):
        np.testing.assert_array_equal(creation(d), annihilation(d).conj().T)
        assert is_hermitian(number(d), 0.0)


def test_kron_identity_and_layout():
    np.testing.assert_array_equal(kron(np.eye(2), np.eye(3)), np.eye(6))
    np.testing.assert_array_equal(kron(np.diag([0, 1]), np.eye(2)), np.diag([0, 0, 1, 1]))


def _kron_loops(a, b):
    # independent index-by-index construction, mode a as slow index
    m, n = a.shape[0], b.shape[0]
    out = np.zeros((m * n, m * n), dtype=complex)
    for i in range(m):
        for j in range(m):
            for k in range(n):
                for l in range(n):
                    out[i * n + k, j * n + l] = a[i, j] * b[k, l]
    return out


def test_kron_matches_loop_oracle_and_mixed_product(rng):
    for _ in range(5):
        a, b, c, d = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(4))
        np.testing.assert_allclose(kron(a, b), _kron_loops(a, b), atol=1e-15)
        np.testing.assert_allclose(kron(a, b) @ kron(c, d), _kron_loops(a @ c, b @ d), atol=1e-12)


def test_kron_associative(rng):
    a, b, c = (rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k)) for k in (2, 3, 2))
    np.testing.assert_allclose(kron(kron(a, b), c), kron(a, kron(b, c)), atol=1e-12)


def test_kron_dimension_guard():
    with pytest.raises(ValueError, match="exceeds"):
        kron(np.eye(70), np.eye(70))
    assert kron(np.eye(3), np.eye(3), max_dim=9).shape == (9, 9)


def test_two_mode_index_bijection():
    space = TwoModeSpace(3, 5)
    seen = {space.index(i, j) for i in range(3) for j in range(5)}
    assert seen == set(range(space.total_dim))
    assert space.index(2, 1) == 11
    assert space.levels(11) == (2, 1)
    with pytest.raises(IndexError):
        space.index(3, 0)
    with pytest.raises(ValueError):
        TwoModeSpace(0, 2)


def test_mode_a_is_left_factor():
    space = TwoModeSpace(3, 2)
    n_a = kron(number(3), np.eye(2))
    for idx in range(space.total_dim):
        assert n_a[idx, idx] == space.levels(idx)[0]


def test_diag_sqrt():
    np.testing.assert_allclose(diag_sqrt(np.diag([0.0, 1.0, 2.0])), np.diag([0, 1, np.sqrt(2)]))
    n = number(5)
    np.testing.assert_allclose(diag_sqrt(n) @ diag_sqrt(n), n, atol=1e-14)


def test_diag_sqrt_on_two_mode_basis_vector():
    space = TwoModeSpace(3, 2)
    root = diag_sqrt(kron(number(3), np.eye(2)))
    ket = np.zeros(space.total_dim)
    ket[space.index(2, 1)] = 1.0
    np.testing.assert_allclose(root @ ket, np.sqrt(2) * ket)


def test_diag_sqrt_rejects_bad_input():
    with pytest.raises(ValueError):
        diag_sqrt(annihilation(3))
    with pytest.raises(ValueError):
        diag_sqrt(np.diag([1.0, -1.0]))


def test_hermiticity_predicates():
    a = annihilation(3)
    assert not is_hermitian(a)
    assert is_hermitian(a + a.conj().T)
    assert is_anti_hermitian(a - a.conj().T)
    assert not is_anti_hermitian(np.eye(2))


def test_expm_trivial_cases():
    np.testing.assert_allclose(matrix_exponential(np.zeros((4, 4))), np.eye(4), rtol=0, atol=1e-15)
    d = np.array([-3.0, 0.5, 2.0 + 1j])
    np.testing.assert_allclose(matrix_exponential(np.diag(d)), np.diag(np.exp(d)), rtol=1e-13)


def test_expm_pauli_rotation_closed_form():
    theta = 0.3
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    expected = np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * sx
    np.testing.assert_allclose(matrix_exponential(-1j * theta * sx), expected, atol=1e-15)


def _random_with_norm(seed, dim, norm):
    r = np.random.default_rng(seed)
    m = r.normal(size=(dim, dim)) + 1j * r.normal(size=(dim, dim))
    return m * (norm / np.linalg.norm(m, 2))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 8), norm=st.floats(0.0, 5.0))
def test_expm_inverse_property(seed, dim, norm):
    m = _random_with_norm(seed, dim, norm)
    np.testing.assert_allclose(matrix_exponential(m) @ matrix_exponential(-m), np.eye(dim), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 10), norm=st.floats(0.0, 10.0))
def test_expm_relative_accuracy_against_scipy(seed, dim, norm):
    m = _random_with_norm(seed, dim, norm)
    ref = scipy.linalg.expm(m)
    err = np.linalg.norm(matrix_exponential(m) - ref) / np.linalg.norm(ref)
    assert err <= 1e-10


def test_expm_hermitian_generator_is_unitary(rng):
    h = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    h = h + h.conj().T
    u = matrix_exponential(-1j * 2.0 * h)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(6), atol=1e-12)


def test_expm_reports_failures():
    with pytest.raises(MatrixExponentialError):
        matrix_exponential(np.array([[np.nan]]))
    with pytest.raises(MatrixExponentialError):
        matrix_exponential(np.array([[1e30]]))
    with pytest.raises(MatrixExponentialError), np.errstate(over="ignore"):
        matrix_exponential(np.array([[800.0]]))  # overflows
