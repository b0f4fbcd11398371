import numpy as np
import pytest

from src.core import bilin, catalog, edge
from src.core.bilin import BipartiteDims, DensityMatrix, PureState
from src.core.exceptions import NumericalError, ValidationError


def rotated_product_mixture(rng, weights=(0.5, 0.3, 0.2)):
    """sum_i w_i |ii><ii| under a random local unitary."""
    dims = BipartiteDims(3, 3)
    u = bilin.random_local_unitary(dims, rng)
    diagonal = np.zeros(9)
    diagonal[[0, 4, 8]] = weights
    return DensityMatrix(u @ np.diag(diagonal) @ u.conj().T, dims)


def test_lemma4_count():
    assert edge.lemma4_count(7, 6) == 8
    assert edge.lemma4_count(4, 4) == 15
    assert (7, 6) in edge.admissible_rank_pairs()
    assert (4, 4) not in edge.admissible_rank_pairs()


def test_subtract_pure_keeps_positivity(rng):
    for _ in range(200):
        dims = BipartiteDims(int(rng.integers(2, 4)), 3)
        rank = int(rng.integers(2, dims.total + 1))
        rho = bilin.random_density_matrix(dims, rng, rank=rank)
        data = bilin.spectral(rho)
        psi = data.range_basis @ bilin.complex_gaussian(rng, data.rank)

        subtraction = edge.subtract_pure(rho, psi)
        assert subtraction.lam > 0
        assert np.linalg.eigvalsh(subtraction.remainder.entries)[0] >= -1e-10
        assert subtraction.rank_after == subtraction.rank_before - 1


def test_subtract_pure_outside_range():
    dims = BipartiteDims(2, 2)
    rho = DensityMatrix.from_pure(bilin.basis_state(0, 0, dims))
    with pytest.raises(ValidationError):
        edge.subtract_pure(rho, bilin.basis_state(1, 1, dims))

    subtraction = edge.subtract_pure(rho, bilin.basis_state(0, 0, dims))
    assert subtraction.lam == pytest.approx(1.0)
    assert subtraction.remainder.trace == pytest.approx(0.0, abs=1e-12)


def test_is_edge_state(tiles, rng, cfg):
    assert edge.is_edge_state(tiles, 2, cfg) == (True, None)

    edge_like, vector = edge.is_edge_state(rotated_product_mixture(rng), 2, cfg)
    assert not edge_like
    assert bilin.tail_rank(vector.amplitudes, vector.dims) == 1

    with pytest.raises(ValidationError):
        edge.is_edge_state(tiles, 1, cfg)


def test_edge_decompose_tiles(tiles, cfg):
    decomposition = edge.edge_decompose(tiles, 2, cfg)
    assert decomposition.p == pytest.approx(1.0)
    assert decomposition.components == []
    assert not decomposition.fully_decomposed
    assert decomposition.telemetry['stopped_on_edge']
    np.testing.assert_allclose(decomposition.edge_state.entries, tiles.entries, atol=1e-12)


def test_edge_decompose_separable(rng, cfg):
    rho = rotated_product_mixture(rng)
    decomposition = edge.edge_decompose(rho, 2, cfg)
    assert decomposition.fully_decomposed
    assert decomposition.p == 0.0
    assert decomposition.edge_state is None
    assert decomposition.reconstruction_error <= 1e-8
    assert sorted(w for w, _, _ in decomposition.components) == pytest.approx([0.2, 0.3, 0.5], abs=1e-8)
    assert all(rank == 1 for _, _, rank in decomposition.components)
    np.testing.assert_allclose(decomposition.reconstruct(), rho.entries, atol=1e-8)


def test_edge_decompose_tiles_with_separable_part(tiles, rng, cfg):
    rho = DensityMatrix(0.5 * rotated_product_mixture(rng).entries + 0.5 * tiles.entries, tiles.dims)
    decomposition = edge.edge_decompose(rho, 2, cfg)
    assert decomposition.reconstruction_error <= 1e-8
    assert decomposition.components
    assert decomposition.p < 1
    assert sum(w for w, _, _ in decomposition.components) + decomposition.p == pytest.approx(1.0)
    assert all(rank == 1 for _, _, rank in decomposition.components)
    assert decomposition.fully_decomposed or edge.is_edge_state(decomposition.edge_state, 2, cfg)[0]


def test_extract_ppt_edge(tiles, rng, cfg, psi_plus_state):
    decomposition = edge.extract_ppt_edge(tiles, cfg)
    assert decomposition.p == pytest.approx(1.0)
    assert decomposition.components == []

    separable = edge.extract_ppt_edge(rotated_product_mixture(rng), cfg)
    assert separable.fully_decomposed
    assert len(separable.components) == 3

    with pytest.raises(ValidationError):
        edge.extract_ppt_edge(psi_plus_state, cfg)


@pytest.mark.parametrize('name', ['tiles', 'chessboard'])
def test_rank4_schmidt2(name, cfg):
    state = catalog.build_entry(name).state
    certificate = edge.rank4_schmidt2(state, cfg)
    assert certificate.reconstruction_error <= 1e-8
    assert sum(w for w, _ in certificate.components) == pytest.approx(1.0)
    for weight, psi in certificate.components:
        assert weight > 0
        assert bilin.tail_rank(psi.amplitudes, psi.dims) <= 2
    assert certificate.telemetry['ranks'][0] == 4


def test_rank4_schmidt2_preconditions(psi_plus_state, rng, cfg):
    with pytest.raises(ValidationError):
        edge.rank4_schmidt2(psi_plus_state, cfg)
    with pytest.raises(ValidationError):
        edge.rank4_schmidt2(bilin.random_density_matrix(BipartiteDims(2, 2), rng, rank=4), cfg)
    npt = bilin.random_density_matrix(BipartiteDims(3, 3), rng, rank=4)
    if not bilin.is_ppt(npt)[0]:
        with pytest.raises(ValidationError):
            edge.rank4_schmidt2(npt, cfg)


def test_schmidt2_certificate_validation():
    dims = BipartiteDims(3, 3)
    product = bilin.basis_state(0, 0, dims)
    with pytest.raises(NumericalError):
        edge.Schmidt2Certificate(components=[(1.2, product), (-0.2, product)], reconstruction_error=0.0)
    with pytest.raises(NumericalError):
        edge.Schmidt2Certificate(components=[(0.5, product)], reconstruction_error=0.0)
    with pytest.raises(NumericalError):
        edge.Schmidt2Certificate(components=[(1.0, bilin.maximally_entangled(3))], reconstruction_error=0.0)
    with pytest.raises(NumericalError):
        edge.Schmidt2Certificate(components=[(1.0, product)], reconstruction_error=1e-3)


@pytest.mark.parametrize('name, params', [('alpha', {'alpha': 4.0}), ('horodecki', {'a': 0.5})])
def test_lemma4_search_on_edge_states(name, params, cfg):
    delta = edge.extract_ppt_edge(catalog.build_entry(name, **params).state, cfg).edge_state
    result = edge.lemma4_search(delta, cfg)
    assert result.found
    assert isinstance(result.psi, PureState)
    assert bilin.tail_rank(result.psi.amplitudes, result.psi.dims) <= 2
    assert result.value <= edge.LEMMA4_VALUE
    assert max(result.residuals.values()) <= edge.LEMMA4_RESIDUAL
    assert result.ranks == bilin.pt_ranks(delta)
    assert result.l_count == edge.lemma4_count(*result.ranks)
    assert len(result.restart_losses) == cfg.restarts
    assert set(result.to_dict()) >= {'found', 'value', 'ranks', 'l_count'}


def test_lemma4_search_takes_raw_matrices(light_cfg):
    state = catalog.horodecki_alpha_state(4.0).state
    result = edge.lemma4_search(state, light_cfg)
    assert result.ranks == (7, 6)
    assert result.admissible
    assert result.l_count == 8


def test_perturb_ranks(tiles, light_cfg):
    perturbation = edge.perturb_ranks(tiles, target=(8, 8), cfg=light_cfg, restarts=16)
    r, r_t = perturbation.ranks
    assert perturbation.original_ranks == (4, 4)
    assert len(perturbation.added) == 4
    assert r >= 7 and r_t >= 7 and r + r_t < 16
    assert bilin.is_ppt(perturbation.state, tol=1e-8)[0]


def test_perturb_ranks_edge_cases(tiles, light_cfg):
    unchanged = edge.perturb_ranks(tiles, cfg=light_cfg, eta=0.0)
    np.testing.assert_array_equal(unchanged.state.entries, tiles.entries)
    assert unchanged.ranks == unchanged.original_ranks

    with pytest.raises(ValidationError):
        edge.perturb_ranks(tiles, cfg=light_cfg, eta=-1e-3)
    with pytest.raises(ValidationError):
        edge.perturb_ranks(DensityMatrix(np.eye(9) / 9, BipartiteDims(3, 3)), cfg=light_cfg)
