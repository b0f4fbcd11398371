"""Schmidt-rank constrained optimization.

Every search is a multistart. Restart i draws its starting point from
`np.random.default_rng([i, seed])`, so the result of a search does not depend
on how its restarts are scheduled across threads.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg as la
import torch

from src.builders import optimizer_builder
from src.core import bilin
from src.core.bilin import BipartiteDims, PureState
from src.core.exceptions import CertificationError, NumericalError, ValidationError
from src.utils.util import log

FOUND_RESIDUAL = 1e-7
STALL_RESIDUAL = 1e-4
RANK_R_TAIL = 1e-10
ARG_TAIL = 1e-7
CERTIFICATION_TOL = 1e-6
TANGENT_TOL = 1e-6
SAME_VECTOR_OVERLAP = 1 - 1e-6
SPAN_RTOL = 1e-4
TANGENT_GRAD = 1e-12
BISECTION_TOL = 1e-6
MAX_ROUNDS = 8

ALTERNATION_RTOL = 1e-6
POLISH_WINDOW = 1e-2
POLISH_FLOOR = 1e-24
POLISH_LIMIT = 8
NEWTON_STEPS = 60
NEWTON_RTOL = 1e-12
NEWTON_GRAD_FLOOR = 1e-16
NEWTON_STEP_FLOOR = 1e-12


# Configuration and records
# =========================

@dataclass(frozen=True, eq=False)
class OptimizerConfig:
    restarts: int = 64
    max_iters: int = 500
    convergence_tol: float = 1e-10
    seed: int = 0
    threads: int = 1
    polish: dict = field(default_factory=lambda: dict(optimizer_builder.DEFAULT_POLISH))

    def __post_init__(self):
        if int(self.restarts) < 1:
            raise ValidationError('restarts must be >= 1, got {}'.format(self.restarts))
        if int(self.max_iters) < 1:
            raise ValidationError('max_iters must be >= 1, got {}'.format(self.max_iters))
        if not float(self.convergence_tol) > 0:
            raise ValidationError('convergence_tol must be > 0, got {}'.format(self.convergence_tol))
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValidationError('seed must be an unsigned 64-bit integer, got {}'.format(self.seed))
        object.__setattr__(self, 'restarts', int(self.restarts))
        object.__setattr__(self, 'max_iters', int(self.max_iters))
        object.__setattr__(self, 'convergence_tol', float(self.convergence_tol))
        object.__setattr__(self, 'seed', int(self.seed))
        object.__setattr__(self, 'threads', max(int(self.threads), 1))

    def derive(self, **changes):
        return replace(self, **changes)

    def rng(self, index):
        return np.random.default_rng([int(index), self.seed])

    def to_dict(self):
        # threads are left out: results must not depend on them
        return {
            'restarts': self.restarts,
            'max_iters': self.max_iters,
            'convergence_tol': self.convergence_tol,
            'seed': self.seed,
        }


@dataclass(frozen=True, eq=False)
class SeesawRun:
    value: float
    vector: np.ndarray
    converged: bool
    iterations: int


@dataclass(frozen=True, eq=False)
class RankOptResult:
    value: float
    argvector: PureState
    schmidt_rank_used: int
    converged: bool
    restart_values: np.ndarray
    mode: str = 'min'
    iterations: int = 0
    gap: float = 0.0

    def __post_init__(self):
        tail = bilin.schmidt_tail(self.argvector.amplitudes, self.argvector.dims, self.schmidt_rank_used)
        if tail > ARG_TAIL:
            raise NumericalError(
                'argvector breaks its Schmidt rank constraint r={} (tail {:.3e})'.format(
                    self.schmidt_rank_used, tail))

    def telemetry(self):
        return {
            'value': float(self.value),
            'mode': self.mode,
            'schmidt_rank_used': int(self.schmidt_rank_used),
            'converged': bool(self.converged),
            'iterations': int(self.iterations),
            'gap': float(self.gap),
            'restart_values': [float(v) for v in self.restart_values],
        }


@dataclass(frozen=True, eq=False)
class Certification:
    """Outcome of the multistart check min over rank-(k-1) vectors of <psi|W|psi>."""
    min_value: float
    restarts: int
    seed: int
    gap: float = 0.0
    converged: bool = True
    tol: float = CERTIFICATION_TOL
    argvector: Optional[PureState] = None

    @property
    def certified(self):
        return self.min_value >= -self.tol

    def to_dict(self):
        return {
            'min_value': float(self.min_value),
            'restarts': int(self.restarts),
            'seed': int(self.seed),
            'gap': float(self.gap),
            'converged': bool(self.converged),
            'certified': bool(self.certified),
        }


@dataclass(frozen=True, eq=False)
class SubspaceSearchResult:
    """Outcome of a search for a low Schmidt rank vector inside a subspace.

    status is 'found', 'none' (every restart stalled above the floor) or
    'inconclusive'. `residual` is ||(1 - Pi) e f|| for product searches and the
    Schmidt tail of the projected vector for rank-r searches.
    """
    status: str
    residual: float
    r: int
    vector: Optional[PureState] = None
    factors: Optional[tuple] = None
    restart_residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    candidates: tuple = ()
    candidate_factors: tuple = ()

    @property
    def found(self):
        return self.status == 'found'

    def telemetry(self):
        return {
            'status': self.status,
            'residual': float(self.residual),
            'r': int(self.r),
            'candidates': len(self.candidates),
            'restart_residuals': [float(v) for v in self.restart_residuals],
        }


@dataclass(frozen=True, eq=False)
class TangentSet:
    vectors: tuple
    span_dim: int
    values: np.ndarray

    def stacked(self):
        if not self.vectors:
            return np.zeros((0, 0), dtype=complex)
        return np.array([v.amplitudes for v in self.vectors])


@dataclass(frozen=True, eq=False)
class BlockCheck:
    estimate: float
    samples: int

    @property
    def admissible(self):
        return self.estimate > 0

    def to_dict(self):
        return {'estimate': float(self.estimate), 'samples': int(self.samples),
                'admissible': bool(self.admissible)}


# Restart plumbing
# ================

def run_restarts(fn, cfg, count=None):
    """[fn(0), ..., fn(count - 1)], in index order whatever the thread count."""
    count = cfg.restarts if count is None else count
    if cfg.threads > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(fn, range(count)))
    return [fn(index) for index in range(count)]


def best_index(values, mode='min'):
    """Best value; ties go to the lowest restart index."""
    sign = 1.0 if mode == 'min' else -1.0
    return min(range(len(values)), key=lambda i: (sign * values[i], i))


def _as_hermitian(a, dims=None):
    matrix, dims = bilin.operator_entries(a, dims)
    matrix = np.asarray(matrix, dtype=complex)
    asym = bilin.max_abs(matrix - matrix.conj().T)
    if asym > bilin.SPECTRAL_HERMITIAN_TOL * max(1.0, bilin.max_abs(matrix)):
        raise ValidationError('operator is not Hermitian (max |A - A^dag| = {:.3e})'.format(asym))
    return (matrix + matrix.conj().T) / 2, dims


def _extremal_eigvec(matrix, mode):
    values, vectors = np.linalg.eigh(matrix)
    j = 0 if mode == 'min' else -1
    return float(values[j]), vectors[:, j]


def _isometry(rng, rows, cols):
    return la.qr(bilin.complex_gaussian(rng, rows, cols), mode='economic')[0]


# See-saw
# =======

def _seesaw(a, dims, r, mode, cfg, index):
    """Alternate the A-side and B-side r-dimensional subspaces.

    With E fixed the best vector in E (x) B is an eigenvector of the
    compression of `a`; its right Schmidt vectors give F, and symmetrically for
    A (x) F. Every iterate has Schmidt rank <= r and the value is monotone.
    """
    m, n = dims.m, dims.n
    rng = cfg.rng(index)
    left = _isometry(rng, m, r)
    eye_m, eye_n = np.eye(m), np.eye(n)

    previous = None
    converged = False
    for iteration in range(1, cfg.max_iters + 1):
        frame = np.kron(left, eye_n)
        _, x = _extremal_eigvec(frame.conj().T @ a @ frame, mode)
        _, _, vh = la.svd((frame @ x).reshape(m, n))
        right = vh[:r].T

        frame = np.kron(eye_m, right)
        value, x = _extremal_eigvec(frame.conj().T @ a @ frame, mode)
        vector = frame @ x
        u, _, _ = la.svd(vector.reshape(m, n))
        left = u[:, :r]

        if previous is not None and abs(value - previous) <= cfg.convergence_tol:
            converged = True
            break
        previous = value

    vector = vector / np.linalg.norm(vector)
    value = float(np.real(np.vdot(vector, a @ vector)))
    return SeesawRun(value=value, vector=vector, converged=converged, iterations=iteration)


def extremal_overlap(a, dims=None, r=1, mode='min', cfg=None):
    """min or max of <psi|a|psi> over unit vectors of Schmidt rank <= r."""
    cfg = cfg or OptimizerConfig()
    matrix, dims = _as_hermitian(a, dims)
    if mode not in ('min', 'max'):
        raise ValidationError("mode must be 'min' or 'max', got {}".format(mode))
    if not 1 <= r <= dims.m:
        raise ValidationError('r must lie in [1, {}], got {}'.format(dims.m, r))

    if r == dims.m:
        value, vector = _extremal_eigvec(matrix, mode)
        return RankOptResult(value=value, argvector=PureState.from_vector(vector, dims),
                             schmidt_rank_used=r, converged=True, restart_values=np.array([value]),
                             mode=mode, iterations=1)

    runs = run_restarts(lambda index: _seesaw(matrix, dims, r, mode, cfg, index), cfg)
    values = np.array([run.value for run in runs])
    best = runs[best_index(values, mode)]
    ordered = np.sort(values) if mode == 'min' else np.sort(values)[::-1]
    gap = float(abs(ordered[1] - ordered[0])) if len(ordered) > 1 else 0.0

    if not best.converged:
        log.warning('See-saw ({}, r={}) hit max_iters={} before converging'.format(mode, r, cfg.max_iters))
    log.debug('extremal_overlap {} r={}: {:.3e} over {} restarts'.format(mode, r, best.value, len(runs)))
    return RankOptResult(value=best.value, argvector=PureState.from_vector(best.vector, dims),
                         schmidt_rank_used=r, converged=best.converged, restart_values=values,
                         mode=mode, iterations=best.iterations, gap=gap)


def certify(a, dims=None, k=2, cfg=None, tol=CERTIFICATION_TOL):
    """Multistart check of the class-k witness contract for `a`."""
    cfg = cfg or OptimizerConfig()
    result = extremal_overlap(a, dims, k - 1, 'min', cfg)
    return Certification(min_value=result.value, restarts=cfg.restarts, seed=cfg.seed,
                         gap=result.gap, converged=result.converged, tol=tol,
                         argvector=result.argvector)


# Local descent
# =============

def _factor_vector(left, right, conjugate=False):
    """vec(L R^T): a vector of Schmidt rank <= number of columns."""
    left = left.conj() if conjugate else left
    return (left @ right.T).reshape(-1)


def _polish_factors(objective, left, right, cfg):
    """Run the configured torch optimizer on the factors (left, right)."""
    params = [torch.tensor(np.ascontiguousarray(x), dtype=torch.float64, requires_grad=True)
              for x in (left.real, left.imag, right.real, right.imag)]

    def loss_fn():
        return objective(torch.complex(params[0], params[1]), torch.complex(params[2], params[3]))

    optimizer_builder.descend(loss_fn, params, cfg.polish)
    values = [p.detach().numpy() for p in params]
    return values[0] + 1j * values[1], values[2] + 1j * values[3]


def _residual_objective(blocks):
    tensors = [(torch.as_tensor(cdag), conjugate) for cdag, conjugate in blocks]

    def objective(left, right):
        total = 0.0
        for cdag, conjugate in tensors:
            vector = ((left.conj() if conjugate else left) @ right.T).reshape(-1)
            z = cdag @ (vector / torch.linalg.vector_norm(vector))
            total = total + torch.sum(z.real ** 2 + z.imag ** 2)
        return total
    return objective


def _rayleigh_objective(matrix):
    tensor = torch.as_tensor(matrix)

    def objective(left, right):
        vector = (left @ right.T).reshape(-1)
        vector = vector / torch.linalg.vector_norm(vector)
        return torch.real(torch.vdot(vector, tensor @ vector))
    return objective


def _truncated_factors(vector, dims, r):
    u, s, vh = la.svd(np.asarray(vector).reshape(dims.m, dims.n))
    return u[:, :r] * s[:r], vh[:r].T


def _newton_refine(matrix, vector, dims, r, steps=NEWTON_STEPS):
    """Newton steps on the Rayleigh quotient over rank-r factors.

    The pseudo-inverse drops the flat gauge directions.
    Returns the iterate with the smallest gradient and that gradient's norm.
    """
    left, right = _truncated_factors(vector, dims, r)
    shapes = [left.shape, left.shape, right.shape, right.shape]
    sizes = [int(np.prod(shape)) for shape in shapes]
    objective = _rayleigh_objective(matrix)

    def loss(x):
        parts = [chunk.reshape(shape) for chunk, shape in zip(torch.split(x, sizes), shapes)]
        return objective(torch.complex(parts[0], parts[1]), torch.complex(parts[2], parts[3]))

    x = torch.tensor(np.concatenate([left.real.ravel(), left.imag.ravel(),
                                     right.real.ravel(), right.imag.ravel()]), dtype=torch.float64)
    best_norm, best_x = np.inf, x
    for _ in range(steps):
        x = x.detach().requires_grad_(True)
        grad, = torch.autograd.grad(loss(x), x)
        grad_norm = float(torch.linalg.vector_norm(grad))
        if not np.isfinite(grad_norm):
            break
        if grad_norm < best_norm:
            best_norm, best_x = grad_norm, x.detach().clone()
        if grad_norm <= NEWTON_GRAD_FLOOR:
            break
        hessian = torch.autograd.functional.hessian(loss, x.detach())
        step = torch.linalg.pinv(hessian, rtol=NEWTON_RTOL, hermitian=True) @ grad
        if float(torch.linalg.vector_norm(step)) <= NEWTON_STEP_FLOOR:
            break
        x = x.detach() - step

    parts = [chunk.reshape(shape).numpy() for chunk, shape in zip(torch.split(best_x, sizes), shapes)]
    refined = _factor_vector(parts[0] + 1j * parts[1], parts[2] + 1j * parts[3])
    return refined / np.linalg.norm(refined), best_norm


def _span_rank(singular_values):
    singular_values = np.asarray(singular_values)
    if singular_values.size == 0 or singular_values[0] <= 0:
        return 0
    return int(np.sum(singular_values > SPAN_RTOL * singular_values[0]))


# Subspace searches
# =================

def _check_basis(subspace_basis, dims):
    basis = np.asarray(subspace_basis, dtype=complex)
    if basis.ndim == 1:
        basis = basis[:, None]
    if basis.shape[0] != dims.total:
        raise ValidationError('basis vectors have length {}, dims need {}'.format(basis.shape[0], dims.total))
    if basis.shape[1]:
        error = bilin.max_abs(basis.conj().T @ basis - np.eye(basis.shape[1]))
        if error > 1e-10:
            raise ValidationError('subspace basis is not orthonormal (error {:.3e})'.format(error))
    return basis


def _complement_dagger(basis, dims):
    return bilin.orthonormal_complement(basis, dims.total).conj().T


def _residual(blocks, left, right):
    total = 0.0
    for cdag, conjugate in blocks:
        vector = _factor_vector(left, right, conjugate)
        total += np.linalg.norm(cdag @ (vector / np.linalg.norm(vector))) ** 2
    return float(np.sqrt(total))


def _smallest_right_singular(matrix):
    _, _, vh = la.svd(matrix)
    return vh[-1].conj()


@dataclass(frozen=True, eq=False)
class _ProductRun:
    e: np.ndarray
    f: np.ndarray
    residual: float


def _product_alternation(blocks, dims, cfg, index):
    """Alternating sigma_min steps on the constraint matrices M(e) and N(f).

    A block (C^dag, conjugate) constrains C^dag (e (x) f), or C^dag (e* (x) f)
    when `conjugate` is set.
    """
    m, n = dims.m, dims.n
    rng = cfg.rng(index)
    e = bilin.complex_gaussian(rng, m)
    e = e / np.linalg.norm(e)
    eye_m, eye_n = np.eye(m), np.eye(n)

    previous = None
    for _ in range(cfg.max_iters):
        f = _smallest_right_singular(np.vstack([
            cdag @ np.kron((e.conj() if conjugate else e)[:, None], eye_n) for cdag, conjugate in blocks]))
        rows = []
        for cdag, conjugate in blocks:
            block = cdag @ np.kron(eye_m, f[:, None])
            rows.append(block.conj() if conjugate else block)
        e = _smallest_right_singular(np.vstack(rows))

        value = _residual(blocks, e[:, None], f[:, None]) ** 2
        if value <= POLISH_FLOOR:
            break
        # relative stall; linear convergence towards zero keeps going
        if previous is not None and abs(previous - value) <= ALTERNATION_RTOL * value:
            break
        previous = value
    return _ProductRun(e=e, f=f, residual=_residual(blocks, e[:, None], f[:, None]))


def _polish_product(blocks, run, cfg):
    left, right = _polish_factors(_residual_objective(blocks), run.e[:, None], run.f[:, None], cfg)
    residual = _residual(blocks, left, right)
    if not np.isfinite(residual) or residual >= run.residual:
        return run
    e, f = left[:, 0], right[:, 0]
    return _ProductRun(e=e / np.linalg.norm(e), f=f / np.linalg.norm(f), residual=residual)


def _verdict(residual, found_tol, label):
    if residual <= found_tol:
        return 'found'
    if residual > STALL_RESIDUAL:
        return 'none'
    log.warning('{} search is inconclusive: best residual {:.3e}'.format(label, residual))
    return 'inconclusive'


def _dedup(vectors, keys):
    kept, kept_keys = [], []
    for vector, key in zip(vectors, keys):
        if all(abs(np.vdot(vector, other)) ** 2 <= SAME_VECTOR_OVERLAP for other in kept):
            kept.append(vector)
            kept_keys.append(key)
    return kept, kept_keys


def _product_search(blocks, dims, cfg, label):
    blocks = [(cdag, conjugate) for cdag, conjugate in blocks if cdag.shape[0] > 0]
    if not blocks:
        e = np.eye(dims.m, dtype=complex)[0]
        f = np.eye(dims.n, dtype=complex)[0]
        vector = bilin.basis_state(0, 0, dims)
        return SubspaceSearchResult(status='found', residual=0.0, r=1, vector=vector, factors=(e, f),
                                    restart_residuals=np.zeros(1), candidates=(vector,),
                                    candidate_factors=((e, f),))

    runs = run_restarts(lambda index: _product_alternation(blocks, dims, cfg, index), cfg)
    order = sorted(range(len(runs)), key=lambda i: (runs[i].residual, i))
    for i in order[:POLISH_LIMIT]:
        if POLISH_FLOOR < runs[i].residual ** 2 and runs[i].residual <= POLISH_WINDOW:
            runs[i] = _polish_product(blocks, runs[i], cfg)

    residuals = np.array([run.residual for run in runs])
    order = sorted(range(len(runs)), key=lambda i: (residuals[i], i))
    best = runs[order[0]]
    status = _verdict(best.residual, FOUND_RESIDUAL, label)

    hits = [runs[i] for i in order if residuals[i] <= FOUND_RESIDUAL]
    vectors, factors = _dedup([bilin.product_vector(run.e, run.f) for run in hits],
                              [(run.e, run.f) for run in hits])
    candidates = tuple(PureState.from_vector(v, dims) for v in vectors)
    log.debug('{} search: {} (residual {:.3e}, {} distinct hits)'.format(
        label, status, best.residual, len(candidates)))
    return SubspaceSearchResult(
        status=status, residual=best.residual, r=1,
        vector=bilin.product_state(best.e, best.f, dims) if status == 'found' else None,
        factors=(best.e, best.f), restart_residuals=residuals,
        candidates=candidates, candidate_factors=tuple(factors))


def find_product_vector(subspace_basis, dims, cfg=None):
    """Product vector |e, f> inside span(subspace_basis), if the search finds one."""
    cfg = cfg or OptimizerConfig()
    basis = _check_basis(subspace_basis, dims)
    return _product_search([(_complement_dagger(basis, dims), False)], dims, cfg, 'product')


def find_ppt_product_vector(range_basis, pt_range_basis, dims, cfg=None):
    """|e, f> in span(range_basis) with |e*, f> in span(pt_range_basis)."""
    cfg = cfg or OptimizerConfig()
    blocks = [(_complement_dagger(_check_basis(range_basis, dims), dims), False),
              (_complement_dagger(_check_basis(pt_range_basis, dims), dims), True)]
    return _product_search(blocks, dims, cfg, 'PPT product')


def _projected(basis, vector):
    return basis @ (basis.conj().T @ vector)


def _projected_tail(basis, vector, dims, r):
    psi = _projected(basis, vector)
    if np.linalg.norm(psi) < bilin.NORM_TOL:
        return 1.0
    return bilin.schmidt_tail(psi, dims, r)


def find_rank_r_vector(subspace_basis, dims, r, cfg=None):
    """Vector of Schmidt rank <= r inside span(subspace_basis), if found.

    min over rank-r phi of <phi|(1 - Pi)|phi> vanishes exactly when the
    subspace holds such a vector; the returned psi is Pi phi normalized.
    """
    cfg = cfg or OptimizerConfig()
    if int(r) != r or r < 1:
        raise ValidationError('r must be a positive integer, got {}'.format(r))
    basis = _check_basis(subspace_basis, dims)
    if r == 1:
        return find_product_vector(basis, dims, cfg)
    if basis.shape[1] == 0:
        return SubspaceSearchResult(status='none', residual=1.0, r=r)
    if r >= dims.m:
        vector = PureState.from_vector(basis[:, 0], dims)
        return SubspaceSearchResult(status='found', residual=0.0, r=r, vector=vector,
                                    restart_residuals=np.zeros(1), candidates=(vector,))

    cdag = _complement_dagger(basis, dims)
    if cdag.shape[0] == 0:
        vector = bilin.basis_state(0, 0, dims)
        return SubspaceSearchResult(status='found', residual=0.0, r=r, vector=vector,
                                    restart_residuals=np.zeros(1), candidates=(vector,))
    penalty = cdag.conj().T @ cdag

    runs = run_restarts(lambda index: _seesaw(penalty, dims, r, 'min', cfg, index), cfg)
    vectors = [run.vector for run in runs]
    tails = [_projected_tail(basis, v, dims, r) for v in vectors]

    order = sorted(range(len(runs)), key=lambda i: (tails[i], i))
    for i in order[:POLISH_LIMIT]:
        if POLISH_FLOOR < runs[i].value and tails[i] <= POLISH_WINDOW:
            left, right = _truncated_factors(vectors[i], dims, r)
            left, right = _polish_factors(_rayleigh_objective(penalty), left, right, cfg)
            candidate = _factor_vector(left, right)
            candidate = candidate / np.linalg.norm(candidate)
            tail = _projected_tail(basis, candidate, dims, r)
            if np.isfinite(tail) and tail < tails[i]:
                vectors[i], tails[i] = candidate, tail

    tails = np.array(tails)
    order = sorted(range(len(runs)), key=lambda i: (tails[i], i))
    best = order[0]
    status = _verdict(tails[best], RANK_R_TAIL, 'rank-{}'.format(r))

    hits = [_projected(basis, vectors[i]) for i in order if tails[i] <= RANK_R_TAIL]
    hits = [v / np.linalg.norm(v) for v in hits]
    kept, _ = _dedup(hits, hits)
    candidates = tuple(PureState.from_vector(v, dims) for v in kept)
    vector = candidates[0] if status == 'found' else None
    log.debug('rank-{} search: {} (tail {:.3e})'.format(r, status, tails[best]))
    return SubspaceSearchResult(status=status, residual=float(tails[best]), r=r, vector=vector,
                                restart_residuals=tails, candidates=candidates)


# Tangent sets and witness optimization
# =====================================

def _witness_parts(w):
    matrix, dims = _as_hermitian(w)
    k = int(w.k)
    return matrix, dims, k


def tangent_set(w, cfg=None):
    """Distinct rank-(k-1) vectors with <psi|W|psi> ~ 0, and the dimension of their span."""
    cfg = cfg or OptimizerConfig()
    matrix, dims, k = _witness_parts(w)
    r = k - 1
    count = max(cfg.restarts, 3 * dims.total)
    runs = run_restarts(lambda index: _seesaw(matrix, dims, r, 'min', cfg, index), cfg, count)

    vectors, values = [], []
    for run in runs:
        vector, value = run.vector, run.value
        if abs(value) <= POLISH_WINDOW:
            vector, grad_norm = _newton_refine(matrix, vector, dims, r)
            value = float(np.real(np.vdot(vector, matrix @ vector)))
            # stationarity as well: a stalled see-saw can sit at a tiny positive value
            if abs(value) <= TANGENT_TOL and grad_norm <= TANGENT_GRAD:
                vectors.append(vector)
        values.append(value)

    vectors, _ = _dedup(vectors, vectors)
    span_dim = _span_rank(la.svdvals(np.array(vectors))) if vectors else 0
    log.debug('Tangent set: {} distinct vectors spanning {} of {} dimensions'.format(
        len(vectors), span_dim, dims.total))
    return TangentSet(vectors=tuple(PureState.from_vector(v, dims) for v in vectors),
                      span_dim=span_dim, values=np.array(values))


def block_check(w, p, dims=None, cfg=None):
    """Multistart estimate of inf over e1, e2 of [P^-1/2 W P^-1/2]_min on span{e1, e2} (x) B."""
    cfg = cfg or OptimizerConfig()
    w_matrix, dims = _as_hermitian(w, dims)
    p_matrix, _ = _as_hermitian(p, dims)
    m, n = dims.m, dims.n
    if m < 2:
        raise ValidationError('block check needs dim A >= 2')

    def sample(index):
        pair = _isometry(cfg.rng(index), m, 2)
        frame = np.hstack([np.kron(pair[:, [0]], np.eye(n)), np.kron(pair[:, [1]], np.eye(n))])
        data = bilin.spectral(frame.conj().T @ p_matrix @ frame)
        if data.rank == 0:
            return np.inf
        scale = data.range_basis / np.sqrt(data.eigenvalues[:data.rank])
        return float(np.linalg.eigvalsh(scale.conj().T @ frame.conj().T @ w_matrix @ frame @ scale)[0])

    estimates = run_restarts(sample, cfg)
    return BlockCheck(estimate=float(min(estimates)), samples=len(estimates))


def _subtraction_candidates(matrix, tangents, dims):
    """Positive operators vanishing on the tangent span: the complement projector and its
    rank-one pieces along eigenvectors of the compressed witness."""
    if tangents.span_dim == 0:
        return [np.eye(dims.total, dtype=complex)]
    u, s, _ = la.svd(tangents.stacked().T)
    complement = u[:, _span_rank(s):]
    candidates = [complement @ complement.conj().T]
    if complement.shape[1] > 1:
        _, vectors = np.linalg.eigh(complement.conj().T @ matrix @ complement)
        for j in range(vectors.shape[1]):
            candidates.append(bilin.projector(complement @ vectors[:, j]))
    return candidates


def _largest_subtraction(matrix, p, dims, k, cfg, tol):
    """Largest lambda (to `tol`) with matrix - lambda p still certified as class k."""
    extremum = extremal_overlap(p, dims, k - 1, 'max', cfg)
    weight = extremum.value
    if weight <= bilin.NORM_TOL:
        return 0.0
    psi = extremum.argvector.amplitudes
    hi = float(np.real(np.vdot(psi, matrix @ psi))) / weight
    if hi <= tol:
        return 0.0
    if certify(matrix - hi * p, dims, k, cfg).certified:
        return hi

    lo = 0.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if certify(matrix - mid * p, dims, k, cfg).certified:
            lo = mid
        else:
            hi = mid
    return lo


def optimize_witness(w, cfg=None, max_rounds=MAX_ROUNDS, tol=BISECTION_TOL):
    """Subtract positive operators orthogonal to the tangent set while W stays class k."""
    cfg = cfg or OptimizerConfig()
    matrix, dims, k = _witness_parts(w)

    certification = certify(matrix, dims, k, cfg)
    if not certification.certified:
        log.error('optimize_witness got an operator that is not a class-{} witness'.format(k))
        raise CertificationError('input is not a valid witness (min value {:.3e})'.format(
            certification.min_value), vector=certification.argvector, value=certification.min_value)

    rounds = []
    optimal = False
    span_dim = 0
    for round_index in range(max_rounds):
        tangents = tangent_set(replace(w, matrix=matrix), cfg)
        span_dim = tangents.span_dim
        if span_dim == dims.total:
            optimal = True
            break

        best_lam, best_p, best_gain = 0.0, None, 0.0
        for p in _subtraction_candidates(matrix, tangents, dims):
            lam = _largest_subtraction(matrix, p, dims, k, cfg, tol)
            gain = lam * float(np.trace(p).real)
            if gain > best_gain:
                best_lam, best_p, best_gain = lam, p, gain

        record = {'round': round_index, 'span_dim': span_dim, 'lambda': best_lam}
        if k == 2 and best_p is not None:
            record['block_check'] = block_check(matrix, best_p, dims, cfg).to_dict()
        rounds.append(record)
        if best_p is None or best_lam <= tol:
            break

        matrix = matrix - best_lam * best_p
        log.infov('Round {}: subtracted lambda={:.6f} (tangent span {}/{})'.format(
            round_index, best_lam, span_dim, dims.total))

    certification = certify(matrix, dims, k, cfg)
    telemetry = {'rounds': rounds, 'span_dim': span_dim, 'optimal': optimal}
    return replace(w, matrix=matrix, provenance='optimized', certification=certification,
                   telemetry=telemetry)
