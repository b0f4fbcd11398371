from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional

import numpy as np

from src.core import bilin, rankopt
from src.core.bilin import BipartiteDims
from src.core.exceptions import CertificationError, ValidationError
from src.core.rankopt import CERTIFICATION_TOL, Certification
from src.utils.util import log

PROVENANCES = ('isotropic', 'fidelity', 'partial_transpose', 'from_edge', 'canonical', 'optimized', 'user',
               'ppt_edge')


@dataclass(frozen=True, eq=False)
class Witness:
    """Hermitian W of Schmidt class k: <psi|W|psi> >= 0 whenever rank(psi) < k."""
    matrix: np.ndarray
    k: int
    dims: BipartiteDims
    provenance: str = 'user'
    certification: Optional[Certification] = None
    telemetry: Optional[dict] = None

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        d = self.dims.total
        if matrix.shape != (d, d):
            raise ValidationError('witness has shape {}, dims need ({}, {})'.format(matrix.shape, d, d))
        asym = bilin.max_abs(matrix - matrix.conj().T)
        if asym > bilin.HERMITIAN_TOL * max(1.0, bilin.max_abs(matrix)):
            raise ValidationError('witness is not Hermitian (max |W - W^dag| = {:.3e})'.format(asym))
        if int(self.k) != self.k or not 2 <= self.k <= self.dims.m:
            raise ValidationError('k must lie in [2, {}], got {}'.format(self.dims.m, self.k))
        if self.provenance not in PROVENANCES:
            raise ValidationError('unknown provenance {}'.format(self.provenance))

        object.__setattr__(self, 'matrix', bilin._frozen((matrix + matrix.conj().T) / 2))
        object.__setattr__(self, 'k', int(self.k))
        if self.min_eigenvalue >= 0:
            raise ValidationError('witness has no negative eigenvalue (min {:.3e})'.format(self.min_eigenvalue))
        if self.certification is not None and not self.certification.certified:
            log.error('Class-{} contract fails: value {:.3e} on a rank-{} vector'.format(
                self.k, self.certification.min_value, self.k - 1))
            raise CertificationError(
                'witness is not class {} (min value {:.3e})'.format(self.k, self.certification.min_value),
                vector=self.certification.argvector, value=self.certification.min_value)

    @cached_property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)

    @property
    def min_eigenvalue(self):
        return float(self.eigenvalues[0])


@dataclass(frozen=True, eq=False)
class DecomposabilityCertificate:
    """W = p_part + q_part^{T_A} with both parts positive."""
    p_part: np.ndarray
    q_part: np.ndarray
    residual: float

    def __post_init__(self):
        for name in ('p_part', 'q_part'):
            part = getattr(self, name)
            min_eigenvalue = float(np.linalg.eigvalsh(part)[0])
            if min_eigenvalue < -bilin.PSD_TOL:
                raise ValidationError('{} is not positive (min eigenvalue {:.3e})'.format(name, min_eigenvalue))


@dataclass(frozen=True, eq=False)
class CanonicalForm:
    w_tilde: np.ndarray
    epsilon: float
    kernel_basis: np.ndarray
    overlap_min: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Lemma2Result:
    decomposable: bool
    ratio: float
    bound: float
    lambda_min: float
    lambda_max: float
    coefficients: np.ndarray
    strict_condition: bool
    strict_margin: float

    def to_dict(self):
        return {
            'decomposable': bool(self.decomposable),
            'ratio': float(self.ratio),
            'bound': float(self.bound),
            'lambda_min': float(self.lambda_min),
            'lambda_max': float(self.lambda_max),
            'coefficients': [float(a) for a in self.coefficients],
            'strict_condition': bool(self.strict_condition),
            'strict_margin': float(self.strict_margin),
        }


def evaluate(w, rho):
    """Tr(W rho)."""
    rho_matrix, rho_dims = bilin.operator_entries(rho)
    if (rho_dims.m, rho_dims.n) != (w.dims.m, w.dims.n):
        raise ValidationError('witness dims {} do not match state dims {}'.format(
            w.dims.as_list(), rho_dims.as_list()))
    value = np.einsum('ij,ji->', w.matrix, rho_matrix)
    if abs(value.imag) > 1e-10:
        log.warning('Tr(W rho) has imaginary residue {:.3e}'.format(value.imag))
    return float(value.real)


def isotropic_witness(m, k, cfg=None):
    """1 - (m / (k - 1)) |Psi_+><Psi_+| on m x m.

    The see-saw lands on the zero set of this witness in one sweep, so the
    certification run costs little.
    """
    if int(m) != m or m < 2:
        raise ValidationError('m must be an integer >= 2, got {}'.format(m))
    if int(k) != k or not 2 <= k <= m:
        raise ValidationError('k must lie in [2, {}], got {}'.format(m, k))
    dims = BipartiteDims(m, m)
    matrix = np.eye(m * m, dtype=complex) - (m / (k - 1)) * bilin.maximally_entangled(m).projector()
    certification = rankopt.certify(matrix, dims, k, cfg or rankopt.OptimizerConfig())
    return Witness(matrix, k, dims, 'isotropic', certification)


def fidelity_witness(psi, k, cfg=None):
    """1 - |psi><psi| / s, s the largest overlap of psi with a rank-(k-1) vector.

    s is the sum of the k-1 largest squared Schmidt coefficients. For |Psi_+>
    this is the isotropic witness up to scale.
    """
    if int(k) != k or not 2 <= k <= psi.dims.m:
        raise ValidationError('k must lie in [2, {}], got {}'.format(psi.dims.m, k))
    weights = bilin.schmidt_coefficients(psi.amplitudes, psi.dims) ** 2
    s = float(np.sum(weights[:k - 1]) / np.sum(weights))
    if s >= 1 - bilin.RANK_TOL:
        raise ValidationError('psi has Schmidt rank below {}, it gives no class-{} witness'.format(k, k))
    matrix = np.eye(psi.dims.total, dtype=complex) - psi.projector() / s
    certification = rankopt.certify(matrix, psi.dims, k, cfg or rankopt.OptimizerConfig())
    return Witness(matrix, k, psi.dims, 'fidelity', certification, telemetry={'overlap': s})


def partial_transpose_witness(rho, cfg=None):
    """|v><v|^{T_A} for the most negative eigenvector v of rho^{T_A}; detects NPPT states."""
    matrix, dims = bilin.operator_entries(rho)
    values, vectors = np.linalg.eigh(bilin.partial_transpose(matrix, 'A', dims))
    if values[0] >= -bilin.PSD_TOL:
        raise ValidationError('state is PPT (min PT eigenvalue {:.3e})'.format(values[0]))
    w_matrix = bilin.partial_transpose(bilin.projector(vectors[:, 0]), 'A', dims)
    certification = rankopt.certify(w_matrix, dims, 2, cfg or rankopt.OptimizerConfig())
    return Witness(w_matrix, 2, dims, 'partial_transpose', certification,
                   telemetry={'min_pt_eigenvalue': float(values[0])})


def antisymmetric_decomposition(m, k):
    """Isotropic witness as (1 - 1/(k-1)) 1 + (2/(k-1)) P_a^{T_A}.

    Relies on SWAP^{T_A} = m |Psi_+><Psi_+|, hence P_a^{T_A} = (1 - m P) / 2.
    """
    w = isotropic_witness(m, k)
    p_part = (1 - 1 / (k - 1)) * np.eye(m * m, dtype=complex)
    q_part = (2 / (k - 1)) * bilin.antisymmetric_projector(m)
    reconstructed = p_part + bilin.partial_transpose(q_part, 'A', w.dims)
    residual = bilin.max_abs(w.matrix - reconstructed)
    return DecomposabilityCertificate(p_part=p_part, q_part=q_part, residual=residual)


def canonical_form(w, cfg=None, tol=CERTIFICATION_TOL):
    """W = W_tilde - epsilon 1 with W_tilde positive and singular.

    With `cfg`, checks min over rank-(k-1) vectors of <psi|W_tilde|psi> >= epsilon - tol.
    """
    if w.min_eigenvalue >= 0:
        raise ValidationError('operator is positive, it has no canonical witness form')
    epsilon = -w.min_eigenvalue
    w_tilde = w.matrix + epsilon * np.eye(w.dims.total)
    kernel_basis = bilin.spectral(w_tilde).kernel_basis

    overlap_min = None
    if cfg is not None:
        result = rankopt.extremal_overlap(w_tilde, w.dims, w.k - 1, 'min', cfg)
        overlap_min = result.value
        if overlap_min < epsilon - tol:
            raise CertificationError('W_tilde gives {:.3e} < epsilon = {:.3e} on a rank-{} vector'.format(
                overlap_min, epsilon, w.k - 1), vector=result.argvector, value=overlap_min)
    return CanonicalForm(w_tilde=w_tilde, epsilon=epsilon, kernel_basis=kernel_basis,
                         overlap_min=overlap_min)


def witness_from_edge(delta, k, c_operator=None, cfg=None):
    """W = P - (epsilon / c) C with P the projector on the kernel of delta.

    epsilon is the smallest overlap of P with rank-(k-1) vectors and c the
    largest eigenvalue of C. W detects delta since Tr(W delta) = -(epsilon/c) Tr(C delta).
    """
    cfg = cfg or rankopt.OptimizerConfig()
    matrix, dims = bilin.operator_entries(delta)
    data = bilin.spectral(matrix)
    if data.kernel_dim == 0:
        raise ValidationError('delta has full rank, its kernel is empty')
    p = data.kernel_projector()

    if c_operator is None:
        c_operator = np.eye(dims.total, dtype=complex)
    c_operator, _ = bilin.operator_entries(c_operator, dims)
    c_values = np.linalg.eigvalsh(c_operator)
    if c_values[0] < -bilin.PSD_TOL:
        raise ValidationError('C is not positive (min eigenvalue {:.3e})'.format(c_values[0]))
    if np.einsum('ij,ji->', matrix, c_operator).real <= 0:
        raise ValidationError('Tr(delta C) must be positive')
    c = float(c_values[-1])

    overlap = rankopt.extremal_overlap(p, dims, k - 1, 'min', cfg)
    epsilon = overlap.value
    if epsilon <= CERTIFICATION_TOL:
        log.error('Range of delta holds a rank-{} vector (overlap {:.3e})'.format(k - 1, epsilon))
        raise CertificationError('delta is not a {}-edge state: epsilon = {:.3e}'.format(k, epsilon),
                                 vector=overlap.argvector, value=epsilon)

    w_matrix = p - (epsilon / c) * c_operator
    certification = rankopt.certify(w_matrix, dims, k, cfg)
    telemetry = {'epsilon': epsilon, 'c': c, 'overlap': overlap.telemetry()}
    w = Witness(w_matrix, k, dims, 'from_edge', certification, telemetry)
    log.infov('Edge witness: epsilon={:.6f}, Tr(W delta)={:.6f}'.format(epsilon, evaluate(w, delta)))
    return w


def ppt_edge_witness(delta, cfg=None):
    """W = P + Q^{T_A} - epsilon 1 for a PPT edge state.

    P and Q project on the kernels of delta and delta^{T_A}; epsilon is the
    smallest product-vector value of P + Q^{T_A}.
    """
    cfg = cfg or rankopt.OptimizerConfig()
    matrix, dims = bilin.operator_entries(delta)
    p = bilin.spectral(matrix).kernel_projector()
    q = bilin.spectral(bilin.partial_transpose(matrix, 'A', dims)).kernel_projector()
    h = p + bilin.partial_transpose(q, 'A', dims)

    overlap = rankopt.extremal_overlap(h, dims, 1, 'min', cfg)
    epsilon = overlap.value
    if epsilon <= CERTIFICATION_TOL:
        raise CertificationError('delta is not a PPT edge state: epsilon = {:.3e}'.format(epsilon),
                                 vector=overlap.argvector, value=epsilon)

    w_matrix = h - epsilon * np.eye(dims.total)
    certification = rankopt.certify(w_matrix, dims, 2, cfg)
    return Witness(w_matrix, 2, dims, 'ppt_edge', certification,
                   {'epsilon': epsilon, 'overlap': overlap.telemetry()})


def certify(w, cfg=None):
    """Re-run the class-k contract; raises CertificationError when it fails."""
    return replace(w, certification=rankopt.certify(w.matrix, w.dims, w.k, cfg))


def lemma2_check(q, epsilon, dims=None):
    """Decomposability test for W = Q - epsilon 1 on 3 x 3 with rank(Q) = 8.

    `decomposable` is the ratio condition lambda_max / lambda_min <= 1 + a_2^2 / a_3^2;
    the stronger lambda_min (1 - a_1^2) >= epsilon is reported as `strict_condition`.
    """
    matrix, dims = bilin.operator_entries(q, dims or BipartiteDims(3, 3))
    if (dims.m, dims.n) != (3, 3):
        raise ValidationError('lemma2_check applies to 3 x 3 systems only')
    data = bilin.spectral(matrix)
    if data.rank != 8:
        raise ValidationError('Q must have rank 8, got {}'.format(data.rank))

    kernel_vector = data.kernel_basis[:, 0]
    if bilin.schmidt_rank(kernel_vector, dims) < 3:
        raise ValidationError('kernel vector of Q has Schmidt rank < 3')
    coefficients = bilin.schmidt_coefficients(kernel_vector, dims)
    coefficients = coefficients / np.linalg.norm(coefficients)
    a1, a2, a3 = coefficients

    lambda_min, lambda_max = data.restricted_min, data.restricted_max
    ratio = lambda_max / lambda_min
    bound = 1 + a2 ** 2 / a3 ** 2
    margin = lambda_min * (1 - a1 ** 2) - epsilon
    return Lemma2Result(decomposable=bool(ratio <= bound * (1 + 1e-12)), ratio=float(ratio),
                        bound=float(bound), lambda_min=lambda_min, lambda_max=lambda_max,
                        coefficients=coefficients, strict_condition=bool(margin >= 0),
                        strict_margin=float(margin))
