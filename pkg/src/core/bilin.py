"""Bipartite linear algebra shared by every other module.

Composite index convention: |a, b> sits at position a * n + b (A-major),
so a pure state reshapes to an m x n amplitude matrix and an operator to an
(m, n, m, n) tensor.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as la
from scipy.stats import unitary_group

from src.core.exceptions import ValidationError

RANK_TOL = 1e-7
NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
REMAINDER_PSD_TOL = 1e-9
SPECTRAL_HERMITIAN_TOL = 1e-10


def _frozen(array):
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


def max_abs(matrix):
    matrix = np.asarray(matrix)
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(matrix)))


# Domain types
# ============

@dataclass(frozen=True)
class BipartiteDims:
    m: int
    n: int
    swapped: bool = False

    def __post_init__(self):
        for name in ('m', 'n'):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValidationError('{} must be a positive integer, got {}'.format(name, value))
            object.__setattr__(self, name, int(value))
        if self.m > self.n:
            raise ValidationError(
                'dims ({}, {}) break the m <= n convention, use BipartiteDims.ordered'.format(self.m, self.n))

    @classmethod
    def ordered(cls, m, n):
        if m <= n:
            return cls(m, n)
        return cls(n, m, swapped=True)

    @property
    def total(self):
        return self.m * self.n

    def as_list(self):
        return [self.m, self.n]


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray
    dims: BipartiteDims

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size != self.dims.total:
            raise ValidationError('pure state has {} amplitudes, dims need {}'.format(
                amplitudes.size, self.dims.total))
        norm = np.linalg.norm(amplitudes)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError('pure state is not normalized (norm {:.3e})'.format(norm))
        object.__setattr__(self, 'amplitudes', _frozen(amplitudes))

    @classmethod
    def from_vector(cls, vector, dims):
        vector = np.asarray(vector, dtype=complex).reshape(-1)
        norm = np.linalg.norm(vector)
        if norm == 0:
            raise ValidationError('cannot normalize the zero vector')
        return cls(vector / norm, dims)

    @property
    def matrix(self):
        return self.amplitudes.reshape(self.dims.m, self.dims.n)

    def projector(self):
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def overlap(self, other):
        other = other.amplitudes if isinstance(other, PureState) else np.asarray(other)
        return float(abs(np.vdot(self.amplitudes, other)) ** 2)


@dataclass(frozen=True, eq=False)
class PositiveOperator:
    """Unnormalized positive operator; the trace is recorded, not imposed."""
    entries: np.ndarray
    dims: BipartiteDims

    psd_tol = REMAINDER_PSD_TOL

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        d = self.dims.total
        if entries.shape != (d, d):
            raise ValidationError('operator has shape {}, dims need ({}, {})'.format(entries.shape, d, d))
        scale = max(1.0, max_abs(entries))
        asym = max_abs(entries - entries.conj().T)
        if asym > HERMITIAN_TOL * scale:
            raise ValidationError('operator is not Hermitian (max |A - A^dag| = {:.3e})'.format(asym))
        entries = (entries + entries.conj().T) / 2
        object.__setattr__(self, 'entries', _frozen(entries))
        self._validate()

    def _validate(self):
        scale = max(1.0, abs(self.trace))
        if self.min_eigenvalue < -self.psd_tol * scale:
            raise ValidationError('operator is not positive (min eigenvalue {:.3e})'.format(self.min_eigenvalue))

    @cached_property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.entries)

    @property
    def min_eigenvalue(self):
        return float(self.eigenvalues[0])

    @property
    def trace(self):
        return float(np.trace(self.entries).real)

    def normalized(self):
        if self.trace <= 0:
            raise ValidationError('cannot normalize an operator with trace {:.3e}'.format(self.trace))
        return DensityMatrix(self.entries / self.trace, self.dims)

    def scaled(self, factor):
        return PositiveOperator(self.entries * factor, self.dims)

    def as_operator(self):
        return PositiveOperator(self.entries, self.dims)


@dataclass(frozen=True, eq=False)
class DensityMatrix(PositiveOperator):
    psd_tol = PSD_TOL

    def _validate(self):
        if abs(self.trace - 1.0) > TRACE_TOL:
            raise ValidationError('density matrix trace is {:.12f}, expected 1'.format(self.trace))
        if self.min_eigenvalue < -self.psd_tol:
            raise ValidationError(
                'density matrix is not positive (min eigenvalue {:.3e})'.format(self.min_eigenvalue))

    @classmethod
    def from_pure(cls, psi):
        return cls(psi.projector(), psi.dims)

    @classmethod
    def from_unnormalized(cls, matrix, dims):
        matrix = np.asarray(matrix, dtype=complex)
        return cls(matrix / np.trace(matrix).real, dims)


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    coeffs: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    dims: BipartiteDims

    @property
    def rank(self):
        return int(len(self.coeffs))

    def reconstruct(self):
        vector = np.zeros(self.dims.total, dtype=complex)
        for a, e, f in zip(self.coeffs, self.left_vectors, self.right_vectors):
            vector += a * np.kron(e, f)
        return vector


@dataclass(frozen=True, eq=False)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    rank: int
    range_basis: np.ndarray
    kernel_basis: np.ndarray
    tol: float = RANK_TOL

    @property
    def kernel_dim(self):
        return int(self.kernel_basis.shape[1])

    @property
    def range_mask(self):
        scale = np.max(np.abs(self.eigenvalues)) if self.eigenvalues.size else 0.0
        return np.abs(self.eigenvalues) > self.tol * scale

    def range_projector(self):
        return self.range_basis @ self.range_basis.conj().T

    def kernel_projector(self):
        return self.kernel_basis @ self.kernel_basis.conj().T

    def pseudo_inverse(self):
        mask = self.range_mask
        vectors = self.eigenvectors[:, mask]
        return (vectors / self.eigenvalues[mask]) @ vectors.conj().T

    @property
    def restricted_min(self):
        """Smallest eigenvalue on the range."""
        return float(np.min(self.eigenvalues[self.range_mask]))

    @property
    def restricted_max(self):
        return float(np.max(self.eigenvalues[self.range_mask]))


# Operations
# ==========

def operator_entries(op, dims=None):
    """Return (matrix, dims) for an operator object or a raw matrix."""
    if isinstance(op, PositiveOperator):
        return np.asarray(op.entries), op.dims
    if hasattr(op, 'matrix') and hasattr(op, 'dims'):
        return np.asarray(op.matrix), op.dims
    if dims is None:
        raise ValidationError('dims are required for a raw matrix')
    matrix = np.asarray(op, dtype=complex)
    if matrix.shape != (dims.total, dims.total):
        raise ValidationError('matrix has shape {}, dims need {}'.format(matrix.shape, (dims.total,) * 2))
    return matrix, dims


def schmidt_decompose(psi, tol=RANK_TOL):
    if not 0 < tol < 1:
        raise ValidationError('tol must lie in (0, 1), got {}'.format(tol))
    if not isinstance(psi, PureState):
        raise ValidationError('schmidt_decompose expects a PureState')

    u, s, vh = la.svd(psi.matrix, full_matrices=False)
    keep = s > tol * s[0]
    coeffs = s[keep]
    left = u[:, keep].T.copy()
    right = vh[keep].copy()

    # fix the phase of each left vector's first nonzero amplitude
    for i in range(len(coeffs)):
        idx = int(np.argmax(np.abs(left[i]) > NORM_TOL))
        phase = left[i, idx] / abs(left[i, idx])
        left[i] *= phase.conjugate()
        right[i] *= phase
    return SchmidtDecomposition(coeffs, left, right, psi.dims)


def schmidt_coefficients(vector, dims):
    vector = np.asarray(vector, dtype=complex).reshape(dims.m, dims.n)
    return la.svdvals(vector)


def schmidt_tail(vector, dims, r):
    """Weight of the Schmidt coefficients beyond the r largest, Σ_{i>r} a_i^2."""
    s = schmidt_coefficients(vector, dims)
    weights = s ** 2
    total = np.sum(weights)
    if total == 0:
        return 0.0
    return float(np.sum(weights[r:]) / total)


def schmidt_rank(vector, dims, tol=RANK_TOL):
    s = schmidt_coefficients(vector, dims)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def tail_rank(vector, dims, tol=RANK_TOL):
    """Smallest r whose Schmidt tail is at most `tol`."""
    weights = schmidt_coefficients(vector, dims) ** 2
    total = np.sum(weights)
    if total == 0:
        return 0
    tails = (total - np.cumsum(weights)) / total
    return int(np.argmax(tails <= tol)) + 1


def partial_transpose(op, side='A', dims=None):
    matrix, dims = operator_entries(op, dims)
    m, n = dims.m, dims.n
    tensor = matrix.reshape(m, n, m, n)
    if side == 'A':
        tensor = tensor.transpose(2, 1, 0, 3)
    elif side == 'B':
        tensor = tensor.transpose(0, 3, 2, 1)
    else:
        raise ValidationError("side must be 'A' or 'B', got {}".format(side))
    return np.ascontiguousarray(tensor.reshape(m * n, m * n))


def is_ppt(rho, tol=PSD_TOL, dims=None):
    transposed = partial_transpose(rho, 'A', dims)
    min_eigenvalue = float(np.linalg.eigvalsh(transposed)[0])
    return min_eigenvalue >= -tol, min_eigenvalue


def spectral(op, tol=RANK_TOL, dims=None):
    if isinstance(op, PositiveOperator) or hasattr(op, 'dims'):
        matrix, _ = operator_entries(op, dims)
    else:
        matrix = np.asarray(op, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValidationError('spectral expects a square matrix, got shape {}'.format(matrix.shape))
    asym = max_abs(matrix - matrix.conj().T)
    if asym > SPECTRAL_HERMITIAN_TOL * max(1.0, max_abs(matrix)):
        raise ValidationError('matrix is not Hermitian (max |A - A^dag| = {:.3e})'.format(asym))

    values, vectors = np.linalg.eigh((matrix + matrix.conj().T) / 2)
    order = np.argsort(values)[::-1]
    values, vectors = values[order], vectors[:, order]

    scale = np.max(np.abs(values)) if values.size else 0.0
    mask = np.abs(values) > tol * scale if scale > 0 else np.zeros(values.shape, dtype=bool)
    return SpectralData(eigenvalues=values, eigenvectors=vectors, rank=int(np.sum(mask)),
                        range_basis=vectors[:, mask], kernel_basis=vectors[:, ~mask], tol=tol)


def pt_ranks(rho, tol=RANK_TOL, dims=None):
    """(r(rho), r(rho^{T_A}))"""
    matrix, dims = operator_entries(rho, dims)
    return spectral(matrix, tol).rank, spectral(partial_transpose(matrix, 'A', dims), tol).rank


def swap_subsystems(op, m, n):
    """Exchange the roles of A (dimension m) and B (dimension n).

    Vectors and matrices are both accepted; the result uses index b * m + a.
    """
    op = np.asarray(op, dtype=complex)
    if op.ndim == 1:
        out = op.reshape(m, n).T.reshape(-1)
    else:
        out = op.reshape(m, n, m, n).transpose(1, 0, 3, 2).reshape(m * n, m * n)
    return np.ascontiguousarray(out)


# Constructors
# ============

def projector(vector):
    vector = np.asarray(vector, dtype=complex).reshape(-1)
    return np.outer(vector, vector.conj())


def product_vector(e, f):
    return np.kron(np.asarray(e, dtype=complex), np.asarray(f, dtype=complex))


def product_state(e, f, dims):
    return PureState.from_vector(product_vector(e, f), dims)


def basis_state(a, b, dims):
    vector = np.zeros(dims.total, dtype=complex)
    vector[a * dims.n + b] = 1.0
    return PureState(vector, dims)


def maximally_entangled(m):
    """|Psi_+> = Σ_i |ii> / sqrt(m)"""
    return PureState(np.eye(m, dtype=complex).reshape(-1) / np.sqrt(m), BipartiteDims(m, m))


def swap_operator(m):
    identity = np.eye(m * m, dtype=complex)
    return identity.reshape(m, m, m, m).transpose(0, 1, 3, 2).reshape(m * m, m * m)


def antisymmetric_projector(m):
    return (np.eye(m * m, dtype=complex) - swap_operator(m)) / 2


def orthonormal_complement(vectors, dim):
    """Orthonormal basis (columns) of the complement of span(columns of `vectors`)."""
    vectors = np.asarray(vectors, dtype=complex).reshape(dim, -1)
    if vectors.shape[1] == 0:
        return np.eye(dim, dtype=complex)
    return la.null_space(vectors.conj().T)


def fix_phase(vector):
    """Rotate so the first nonzero amplitude is real positive."""
    vector = np.asarray(vector, dtype=complex)
    idx = int(np.argmax(np.abs(vector) > NORM_TOL))
    if abs(vector[idx]) == 0:
        return vector
    return vector * (abs(vector[idx]) / vector[idx])


# Random generators
# =================

def complex_gaussian(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_unitary(d, rng):
    return unitary_group.rvs(d, random_state=rng)


def random_local_unitary(dims, rng):
    return np.kron(random_unitary(dims.m, rng), random_unitary(dims.n, rng))


def random_pure_state(dims, rng):
    return PureState.from_vector(complex_gaussian(rng, dims.total), dims)


def random_product_state(dims, rng):
    return product_state(complex_gaussian(rng, dims.m), complex_gaussian(rng, dims.n), dims)


def random_density_matrix(dims, rng, rank=None):
    rank = dims.total if rank is None else rank
    g = complex_gaussian(rng, dims.total, rank)
    return DensityMatrix.from_unnormalized(g @ g.conj().T, dims)


def random_separable_state(dims, rng, terms=20):
    weights = rng.dirichlet(np.ones(terms))
    matrix = np.zeros((dims.total, dims.total), dtype=complex)
    for w in weights:
        matrix += w * random_product_state(dims, rng).projector()
    return DensityMatrix.from_unnormalized(matrix, dims)
