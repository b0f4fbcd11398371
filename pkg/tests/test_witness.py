import numpy as np
import pytest

from src.core import bilin, catalog, edge, rankopt, witness
from src.core.bilin import BipartiteDims, DensityMatrix
from src.core.exceptions import CertificationError, ValidationError
from src.core.rankopt import Certification
from src.core.witness import Witness


def test_isotropic_witness_spectrum():
    w = witness.isotropic_witness(3, 3)
    np.testing.assert_allclose(w.eigenvalues, [-0.5] + [1.0] * 8, atol=1e-12)
    assert w.provenance == 'isotropic'
    assert w.certification.certified
    assert w.certification.min_value == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize('m', [2, 3, 4])
def test_isotropic_witness_on_psi_plus(m):
    rho = DensityMatrix.from_pure(bilin.maximally_entangled(m))
    for k in range(2, m + 1):
        assert witness.evaluate(witness.isotropic_witness(m, k), rho) == pytest.approx(1 - m / (k - 1))


def test_isotropic_witness_range():
    with pytest.raises(ValidationError):
        witness.isotropic_witness(3, 4)
    with pytest.raises(ValidationError):
        witness.isotropic_witness(1, 2)


def test_isotropic_witness_certified(light_cfg):
    w = witness.isotropic_witness(3, 2, light_cfg)
    assert w.certification.certified
    assert w.certification.restarts == light_cfg.restarts


def test_isotropic_detection_threshold():
    """Tr(W rho_p) changes sign at p = 1 / (m + 1)."""
    w = witness.isotropic_witness(3, 2)
    assert witness.evaluate(w, catalog.isotropic_state(3, 0.25)) == pytest.approx(0.0, abs=1e-12)
    assert witness.evaluate(w, catalog.isotropic_state(3, 0.3)) < 0
    assert witness.evaluate(w, catalog.isotropic_state(3, 0.2)) > 0


@pytest.mark.parametrize('m', [2, 3, 4])
def test_antisymmetric_decomposition(m):
    for k in range(2, m + 1):
        decomposition = witness.antisymmetric_decomposition(m, k)
        assert decomposition.residual <= 1e-12


def test_witness_validation():
    dims = BipartiteDims(2, 2)
    with pytest.raises(ValidationError):
        Witness(np.eye(4), 2, dims)
    with pytest.raises(ValidationError):
        Witness(np.eye(3) - 2 * np.diag([1, 0, 0]), 2, dims)
    skew = np.eye(4, dtype=complex) - 2 * np.diag([1, 0, 0, 0])
    skew[0, 1] = 1j
    with pytest.raises(ValidationError):
        Witness(skew, 2, dims)
    matrix = witness.isotropic_witness(2, 2).matrix
    with pytest.raises(ValidationError):
        Witness(matrix, 3, dims)
    with pytest.raises(ValidationError):
        Witness(matrix, 2, dims, provenance='guess')


def test_failing_certification_raises():
    dims = BipartiteDims(2, 2)
    failing = Certification(min_value=-0.5, restarts=4, seed=0)
    with pytest.raises(CertificationError) as info:
        Witness(witness.isotropic_witness(2, 2).matrix, 2, dims, certification=failing)
    assert info.value.value == pytest.approx(-0.5)


def test_evaluate_checks_dims(psi_plus_state):
    with pytest.raises(ValidationError):
        witness.evaluate(witness.isotropic_witness(2, 2), psi_plus_state)


def test_certify_rejects_non_witness(light_cfg):
    dims = BipartiteDims(2, 2)
    product = bilin.basis_state(1, 1, dims).projector()
    w = Witness(np.eye(4) - 3 * product, 2, dims)
    with pytest.raises(CertificationError):
        witness.certify(w, light_cfg)
    assert witness.certify(witness.isotropic_witness(2, 2), light_cfg).certification.certified


def test_canonical_form(light_cfg):
    w = witness.isotropic_witness(3, 2)
    form = witness.canonical_form(w, light_cfg)
    assert form.epsilon == pytest.approx(2.0)
    assert np.linalg.eigvalsh(form.w_tilde)[0] == pytest.approx(0.0, abs=1e-12)
    assert form.kernel_basis.shape == (9, 1)
    assert abs(np.vdot(form.kernel_basis[:, 0], bilin.maximally_entangled(3).amplitudes)) == pytest.approx(1.0)
    assert form.overlap_min >= form.epsilon - 1e-6


def test_canonical_form_of_perturbed_witnesses(rng, light_cfg):
    dims = BipartiteDims(3, 3)
    base = witness.isotropic_witness(3, 2).matrix
    for _ in range(20):
        g = bilin.complex_gaussian(rng, 9, 9)
        w = witness.certify(Witness(base + 0.05 * g @ g.conj().T, 2, dims), light_cfg)
        form = witness.canonical_form(w, light_cfg)
        assert form.epsilon > 0
        assert np.linalg.eigvalsh(form.w_tilde)[0] == pytest.approx(0.0, abs=1e-10)
        np.testing.assert_allclose(form.w_tilde - form.epsilon * np.eye(9), w.matrix, atol=1e-12)
        assert not rankopt.find_rank_r_vector(form.kernel_basis, dims, 1, light_cfg).found


def test_witness_from_edge_detects_tiles(tiles, cfg):
    w = witness.witness_from_edge(tiles, 2, cfg=cfg)
    assert w.provenance == 'from_edge'
    assert w.certification.certified
    assert witness.evaluate(w, tiles) < -1e-4
    assert w.telemetry['epsilon'] > 0


def test_witness_from_edge_detects_chessboard(chessboard, cfg):
    w = witness.witness_from_edge(chessboard, 2, cfg=cfg)
    assert w.certification.certified
    assert witness.evaluate(w, chessboard) == pytest.approx(-w.telemetry['epsilon'], abs=1e-10)
    assert witness.evaluate(w, chessboard) < 0


def test_alpha_edge_state_takes_the_ppt_witness(cfg):
    delta = edge.extract_ppt_edge(catalog.horodecki_alpha_state(4.0).state, cfg).edge_state
    # ranges of dimension >= 5 in 3 x 3 always hold a product vector
    assert bilin.pt_ranks(delta)[0] >= 5
    with pytest.raises(CertificationError):
        witness.witness_from_edge(delta, 2, cfg=cfg)

    w = witness.ppt_edge_witness(delta, cfg)
    assert w.certification.certified
    assert witness.evaluate(w, delta) < 0


def test_witness_from_edge_rejects_separable_range(rng, cfg, light_cfg):
    rho = bilin.random_separable_state(BipartiteDims(3, 3), rng, terms=3)
    with pytest.raises(CertificationError):
        witness.witness_from_edge(rho, 2, cfg=cfg)
    with pytest.raises(ValidationError):
        witness.witness_from_edge(DensityMatrix(np.eye(9) / 9, BipartiteDims(3, 3)), 2, cfg=light_cfg)


def test_ppt_edge_witness(tiles, cfg):
    w = witness.ppt_edge_witness(tiles, cfg)
    assert w.provenance == 'ppt_edge'
    assert w.certification.certified
    assert witness.evaluate(w, tiles) == pytest.approx(-w.telemetry['epsilon'], abs=1e-10)


def test_fidelity_witness():
    psi = bilin.maximally_entangled(3)
    w = witness.fidelity_witness(psi, 2)
    np.testing.assert_allclose(w.matrix, witness.isotropic_witness(3, 2).matrix, atol=1e-12)
    assert w.telemetry['overlap'] == pytest.approx(1 / 3)
    assert w.certification.certified
    assert witness.evaluate(w, DensityMatrix.from_pure(psi)) == pytest.approx(-2.0)

    with pytest.raises(ValidationError):
        witness.fidelity_witness(bilin.basis_state(0, 0, psi.dims), 2)
    with pytest.raises(ValidationError):
        witness.fidelity_witness(psi, 4)


def test_partial_transpose_witness(psi_plus_state, tiles):
    w = witness.partial_transpose_witness(psi_plus_state)
    assert w.k == 2
    assert w.certification.certified
    assert witness.evaluate(w, psi_plus_state) == pytest.approx(-1 / 3)
    with pytest.raises(ValidationError):
        witness.partial_transpose_witness(tiles)


def test_lemma2_check():
    q = np.eye(9) - bilin.maximally_entangled(3).projector()
    result = witness.lemma2_check(q, 0.5)
    assert result.decomposable
    assert result.ratio == pytest.approx(1.0)
    assert result.bound == pytest.approx(2.0)
    assert result.strict_condition
    assert result.strict_margin == pytest.approx(1 / 6)
    np.testing.assert_allclose(result.coefficients, [3 ** -0.5] * 3)

    with pytest.raises(ValidationError):
        witness.lemma2_check(np.eye(9), 0.5)
    with pytest.raises(ValidationError):
        witness.lemma2_check(np.eye(4) - np.diag([1, 0, 0, 0]), 0.5, BipartiteDims(2, 2))
