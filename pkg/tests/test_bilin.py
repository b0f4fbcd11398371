import numpy as np
import pytest

from src.core import bilin
from src.core.bilin import BipartiteDims, DensityMatrix, PositiveOperator, PureState
from src.core.exceptions import ValidationError


def test_dims_convention():
    with pytest.raises(ValidationError):
        BipartiteDims(3, 2)
    dims = BipartiteDims.ordered(3, 2)
    assert (dims.m, dims.n, dims.swapped) == (2, 3, True)
    assert BipartiteDims(2, 3).total == 6


def test_partial_transpose_known_matrix():
    """partial transpose of a 2 x 2 index pattern"""
    dims = BipartiteDims(2, 2)
    rho = np.arange(16).reshape(4, 4)

    expected_a = np.array([[0, 1, 8, 9],
                           [4, 5, 12, 13],
                           [2, 3, 10, 11],
                           [6, 7, 14, 15]])
    expected_b = np.array([[0, 4, 2, 6],
                           [1, 5, 3, 7],
                           [8, 12, 10, 14],
                           [9, 13, 11, 15]])
    np.testing.assert_array_equal(bilin.partial_transpose(rho, 'A', dims), expected_a)
    np.testing.assert_array_equal(bilin.partial_transpose(rho, 'B', dims), expected_b)

    with pytest.raises(ValidationError):
        bilin.partial_transpose(rho, 'C', dims)


def test_partial_transpose_involution(rng):
    for _ in range(200):
        m = int(rng.integers(2, 4))
        n = int(rng.integers(m, 5))
        dims = BipartiteDims(m, n)
        matrix = bilin.complex_gaussian(rng, dims.total, dims.total)
        for side in ('A', 'B'):
            twice = bilin.partial_transpose(bilin.partial_transpose(matrix, side, dims), side, dims)
            assert np.array_equal(twice, matrix)


def test_swap_partial_transpose_is_scaled_projector():
    for m in (2, 3, 4):
        dims = BipartiteDims(m, m)
        expected = m * bilin.maximally_entangled(m).projector()
        np.testing.assert_allclose(bilin.partial_transpose(bilin.swap_operator(m), 'A', dims), expected,
                                   atol=1e-12)


def test_schmidt_coefficients_local_unitary_invariance(rng):
    for _ in range(200):
        dims = BipartiteDims(int(rng.integers(2, 4)), 4)
        psi = bilin.random_pure_state(dims, rng)
        rotated = bilin.random_local_unitary(dims, rng) @ psi.amplitudes
        np.testing.assert_allclose(bilin.schmidt_coefficients(rotated, dims),
                                   bilin.schmidt_coefficients(psi.amplitudes, dims), atol=1e-10)


def test_schmidt_decompose_reconstructs(rng):
    dims = BipartiteDims(3, 4)
    psi = bilin.random_pure_state(dims, rng)
    decomposition = bilin.schmidt_decompose(psi)
    assert decomposition.rank == 3
    assert np.all(np.diff(decomposition.coeffs) <= 0)
    np.testing.assert_allclose(decomposition.reconstruct(), psi.amplitudes, atol=1e-12)


def test_schmidt_ranks():
    dims = BipartiteDims(3, 3)
    product = bilin.product_state([1, 1j, 0], [0, 1, 1], dims)
    assert bilin.schmidt_rank(product.amplitudes, dims) == 1
    assert bilin.tail_rank(product.amplitudes, dims) == 1
    assert bilin.schmidt_tail(product.amplitudes, dims, 1) == pytest.approx(0.0, abs=1e-14)

    psi_plus = bilin.maximally_entangled(3)
    assert bilin.schmidt_rank(psi_plus.amplitudes, dims) == 3
    assert bilin.schmidt_tail(psi_plus.amplitudes, dims, 2) == pytest.approx(1 / 3)


def test_pure_state_validation():
    dims = BipartiteDims(2, 2)
    with pytest.raises(ValidationError):
        PureState([1, 1, 0, 0], dims)
    with pytest.raises(ValidationError):
        PureState([1, 0, 0], dims)
    with pytest.raises(ValidationError):
        PureState.from_vector(np.zeros(4), dims)
    assert PureState.from_vector([1, 1, 0, 0], dims).overlap([1, 0, 0, 0]) == pytest.approx(0.5)


def test_density_matrix_validation():
    dims = BipartiteDims(2, 2)
    with pytest.raises(ValidationError):
        DensityMatrix(np.eye(4), dims)
    with pytest.raises(ValidationError):
        DensityMatrix(np.diag([1.5, -0.5, 0, 0]), dims)
    skew = np.eye(4, dtype=complex) / 4
    skew[0, 1] = 0.1
    with pytest.raises(ValidationError):
        DensityMatrix(skew, dims)

    operator = PositiveOperator(2 * np.eye(4), dims)
    assert operator.trace == pytest.approx(8.0)
    np.testing.assert_allclose(operator.normalized().entries, np.eye(4) / 4)


def test_is_ppt_and_ranks(psi_plus_state):
    ppt, min_eigenvalue = bilin.is_ppt(psi_plus_state)
    assert not ppt
    assert min_eigenvalue == pytest.approx(-1 / 3)
    assert bilin.pt_ranks(psi_plus_state) == (1, 9)

    mixed = DensityMatrix(np.eye(9) / 9, psi_plus_state.dims)
    assert bilin.is_ppt(mixed)[0]


def test_pt_ranks_of_raw_matrix(psi_plus_state):
    dims = psi_plus_state.dims
    assert bilin.pt_ranks(psi_plus_state.entries, dims=dims) == (1, 9)
    with pytest.raises(ValidationError):
        bilin.pt_ranks(psi_plus_state.entries)


def test_spectral_data(rng):
    dims = BipartiteDims(2, 3)
    rho = bilin.random_density_matrix(dims, rng, rank=3)
    data = bilin.spectral(rho)
    assert data.rank == 3
    assert data.kernel_dim == 3
    assert np.all(np.diff(data.eigenvalues) <= 1e-15)
    np.testing.assert_allclose(data.range_projector() + data.kernel_projector(), np.eye(6), atol=1e-12)
    pinv = data.pseudo_inverse()
    np.testing.assert_allclose(rho.entries @ pinv @ rho.entries, rho.entries, atol=1e-12)
    assert data.restricted_min > 0

    with pytest.raises(ValidationError):
        bilin.spectral(np.array([[0, 1], [0, 0]]))


def test_swap_subsystems():
    e, f = np.array([1, 2j]), np.array([0.5, 0, 1])
    np.testing.assert_allclose(bilin.swap_subsystems(np.kron(e, f), 2, 3), np.kron(f, e))
    a, b = np.diag([1.0, 2.0]), np.arange(9).reshape(3, 3)
    np.testing.assert_allclose(bilin.swap_subsystems(np.kron(a, b), 2, 3), np.kron(b, a))


def test_orthonormal_complement():
    vectors = np.array([[1, 0, 0], [0, 1, 1]]).T / np.array([1, np.sqrt(2)])
    complement = bilin.orthonormal_complement(vectors, 3)
    assert complement.shape == (3, 1)
    np.testing.assert_allclose(vectors.conj().T @ complement, 0, atol=1e-12)


def test_random_separable_state_is_ppt(rng):
    rho = bilin.random_separable_state(BipartiteDims(3, 3), rng, terms=5)
    assert bilin.is_ppt(rho)[0]
    assert bilin.spectral(rho).rank == 5
