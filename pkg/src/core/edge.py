"""Edge states: greedy edge decompositions, the constructive Schmidt-number-two
certificate for rank-4 PPT states, and the search tools used as evidence that
3 x 3 PPT states have Schmidt number two.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from src.builders import optimizer_builder
from src.core import bilin, rankopt
from src.core.bilin import DensityMatrix, PositiveOperator, PureState
from src.core.exceptions import NumericalError, SearchError, ValidationError
from src.utils.util import log

ADMISSIBLE_RANK_PAIRS = ((5, 7), (5, 8), (6, 6), (6, 7), (7, 6), (8, 5))

MIN_LAMBDA = 1e-12
RANGE_TOL = 1e-7
RECONSTRUCTION_TOL = 1e-8
SUPPORT_TOL = 1e-7
LEMMA4_RESIDUAL = 1e-6
LEMMA4_VALUE = 1e-8
DEFAULT_ETA = 1e-3
PERTURB_RESTARTS = 200


def lemma4_count(r, r_t):
    """Parameters left once a two-product vector has to fit K(delta) and K(delta^{T_A}) in 3 x 3."""
    return 27 - r - 2 * r_t


def admissible_rank_pairs():
    return list(ADMISSIBLE_RANK_PAIRS)


@dataclass(frozen=True, eq=False)
class Subtraction:
    lam: float
    remainder: PositiveOperator
    vector: PureState
    rank_before: int
    rank_after: int


@dataclass(frozen=True, eq=False)
class EdgeDecomposition:
    """rho = sum_i w_i |psi_i><psi_i| + delta, with trace(delta) = p."""
    p: float
    components: list
    delta: PositiveOperator
    k: int
    fully_decomposed: bool = False
    reconstruction_error: float = 0.0
    telemetry: dict = field(default_factory=dict)

    @property
    def edge_state(self):
        if self.fully_decomposed:
            return None
        return self.delta.normalized()

    def reconstruct(self):
        matrix = np.array(self.delta.entries)
        for weight, psi, _ in self.components:
            matrix = matrix + weight * psi.projector()
        return matrix


@dataclass(frozen=True, eq=False)
class Schmidt2Certificate:
    components: list
    reconstruction_error: float
    telemetry: dict = field(default_factory=dict)

    def __post_init__(self):
        weights = np.array([w for w, _ in self.components])
        if np.any(weights <= 0):
            raise NumericalError('certificate has a non-positive weight', eigenvalue=float(weights.min()))
        if abs(weights.sum() - 1) > RECONSTRUCTION_TOL:
            raise NumericalError('certificate weights sum to {:.12f}'.format(weights.sum()))
        for _, psi in self.components:
            tail = bilin.schmidt_tail(psi.amplitudes, psi.dims, 2)
            if tail > bilin.RANK_TOL:
                raise NumericalError('certificate component has Schmidt tail {:.3e} beyond rank 2'.format(tail))
        if self.reconstruction_error > RECONSTRUCTION_TOL:
            raise NumericalError('certificate reconstruction error {:.3e}'.format(self.reconstruction_error))


@dataclass(frozen=True, eq=False)
class Lemma4Result:
    found: bool
    psi: Optional[PureState]
    value: float
    residuals: dict
    ranks: tuple
    admissible: bool
    l_count: int
    restart_losses: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_dict(self):
        return {
            'found': bool(self.found),
            'value': float(self.value),
            'residuals': {key: float(v) for key, v in self.residuals.items()},
            'ranks': list(self.ranks),
            'admissible': bool(self.admissible),
            'l_count': int(self.l_count),
        }


@dataclass(frozen=True, eq=False)
class RankPerturbation:
    state: DensityMatrix
    ranks: tuple
    original_ranks: tuple
    distance: float
    eta: float
    added: list = field(default_factory=list)
    subtracted: Optional[tuple] = None

    def to_dict(self):
        return {
            'ranks': list(self.ranks),
            'original_ranks': list(self.original_ranks),
            'distance': float(self.distance),
            'eta': float(self.eta),
            'added': len(self.added),
            'subtracted_weight': float(self.subtracted[0]) if self.subtracted else 0.0,
        }


def _require_3x3(dims):
    if (dims.m, dims.n) != (3, 3):
        raise ValidationError('this procedure is defined on 3 x 3 systems only, got {}'.format(dims.as_list()))


# Subtraction
# ===========

def subtract_pure(rho, psi):
    """rho - lam |psi><psi| with the largest lam keeping positivity, lam = <psi|rho^+|psi>^-1.

    psi is first projected on the range of rho, so the remainder stays positive
    when psi only lies in the range up to the search residual.
    """
    matrix, dims = bilin.operator_entries(rho)
    vector = psi.amplitudes if isinstance(psi, PureState) else np.asarray(psi, dtype=complex)
    vector = vector / np.linalg.norm(vector)

    data = bilin.spectral(matrix)
    projected = data.range_basis @ (data.range_basis.conj().T @ vector)
    outside = float(np.linalg.norm(vector - projected))
    if outside > RANGE_TOL:
        raise ValidationError('psi lies outside the range of rho (residual {:.3e})'.format(outside))
    projected = projected / np.linalg.norm(projected)

    lam = 1.0 / float(np.real(np.vdot(projected, data.pseudo_inverse() @ projected)))
    if lam < MIN_LAMBDA:
        raise NumericalError('degenerate subtraction, lambda = {:.3e}'.format(lam), eigenvalue=lam)

    remainder = matrix - lam * bilin.projector(projected)
    remainder = (remainder + remainder.conj().T) / 2
    min_eigenvalue = float(np.linalg.eigvalsh(remainder)[0])
    if min_eigenvalue < -bilin.REMAINDER_PSD_TOL * max(1.0, abs(np.trace(matrix).real)):
        raise NumericalError('remainder lost positivity', eigenvalue=min_eigenvalue)
    return Subtraction(lam=lam, remainder=PositiveOperator(remainder, dims),
                       vector=PureState.from_vector(projected, dims), rank_before=data.rank,
                       rank_after=bilin.spectral(remainder).rank)


def is_edge_state(delta, k, cfg=None):
    """(True, None) when the range of delta holds no vector of Schmidt rank < k,
    else (False, violating vector)."""
    if int(k) != k or k < 2:
        raise ValidationError('k must be an integer >= 2, got {}'.format(k))
    matrix, dims = bilin.operator_entries(delta)
    data = bilin.spectral(matrix)
    search = rankopt.find_rank_r_vector(data.range_basis, dims, k - 1, cfg)
    if search.found:
        return False, search.vector
    if search.status == 'inconclusive':
        log.warning('Edge test for k={} is inconclusive, treating the state as edge'.format(k))
    return True, None


# Edge decompositions
# ===================

def _finish(rho_matrix, dims, components, current, k, stopped_on_edge, steps):
    current = (current + current.conj().T) / 2
    p = float(np.trace(current).real)
    fully = p <= bilin.TRACE_TOL
    if fully:
        current = np.zeros_like(current)
        p = 0.0

    reconstructed = current + sum((w * psi.projector() for w, psi, _ in components), np.zeros_like(current))
    error = bilin.max_abs(reconstructed - rho_matrix)
    if error > RECONSTRUCTION_TOL:
        raise NumericalError('edge decomposition reconstructs the input only to {:.3e}'.format(error))

    if fully:
        log.infov('State fully decomposed into {} components of Schmidt rank < {}'.format(len(components), k))
    else:
        log.infov('Edge remainder p={:.6f} after {} subtractions'.format(p, len(components)))
    return EdgeDecomposition(p=p, components=components, delta=PositiveOperator(current, dims), k=k,
                             fully_decomposed=fully, reconstruction_error=error,
                             telemetry={'steps': steps, 'stopped_on_edge': bool(stopped_on_edge)})


def edge_decompose(rho, k, cfg=None):
    """Greedy split of rho into rank-(< k) pure components plus a k-edge remainder.

    Each step subtracts, among the distinct candidates found by the search, the
    one admitting the largest weight. p is an upper bound, not the minimum.
    """
    cfg = cfg or rankopt.OptimizerConfig()
    if int(k) != k or k < 2:
        raise ValidationError('k must be an integer >= 2, got {}'.format(k))
    rho_matrix, dims = bilin.operator_entries(rho)
    current = np.array(rho_matrix)
    components, steps = [], []
    stopped_on_edge = False

    for _ in range(dims.total):
        if np.trace(current).real <= bilin.TRACE_TOL:
            break
        data = bilin.spectral(current)
        search = rankopt.find_rank_r_vector(data.range_basis, dims, k - 1, cfg)
        if not search.found:
            stopped_on_edge = True
            break

        best = None
        for candidate in search.candidates:
            try:
                subtraction = subtract_pure(PositiveOperator(current, dims), candidate)
            except (ValidationError, NumericalError) as e:
                log.debug('Skipping candidate: {}'.format(e))
                continue
            if best is None or subtraction.lam > best.lam:
                best = subtraction
        if best is None:
            stopped_on_edge = True
            break

        rank = bilin.tail_rank(best.vector.amplitudes, dims)
        components.append((best.lam, best.vector, rank))
        steps.append({'lambda': best.lam, 'rank_after': best.rank_after, 'candidates': len(search.candidates)})
        current = np.array(best.remainder.entries)
        log.debug('Subtracted lambda={:.6f}, rank {} -> {}'.format(best.lam, best.rank_before, best.rank_after))

    return _finish(rho_matrix, dims, components, current, k, stopped_on_edge, steps)


def _ppt_weight(matrix_pinv, pt_pinv, e, f):
    psi = bilin.product_vector(e, f)
    psi_t = bilin.product_vector(e.conj(), f)
    return min(1.0 / float(np.real(np.vdot(psi, matrix_pinv @ psi))),
               1.0 / float(np.real(np.vdot(psi_t, pt_pinv @ psi_t))))


def _subtract_ppt_product(matrix, dims, e, f, lam):
    remainder = matrix - lam * bilin.projector(bilin.product_vector(e, f))
    remainder = (remainder + remainder.conj().T) / 2
    scale = max(1.0, abs(np.trace(matrix).real))
    for label, op in (('remainder', remainder), ('partial transpose', bilin.partial_transpose(remainder, 'A', dims))):
        min_eigenvalue = float(np.linalg.eigvalsh(op)[0])
        if min_eigenvalue < -bilin.REMAINDER_PSD_TOL * scale:
            raise NumericalError('{} lost positivity'.format(label), eigenvalue=min_eigenvalue)
    return remainder


def _ppt_candidates(matrix, dims, cfg):
    data = bilin.spectral(matrix)
    pt_data = bilin.spectral(bilin.partial_transpose(matrix, 'A', dims))
    search = rankopt.find_ppt_product_vector(data.range_basis, pt_data.range_basis, dims, cfg)
    return search, data.pseudo_inverse(), pt_data.pseudo_inverse()


def extract_ppt_edge(rho, cfg=None):
    """Subtract product vectors |e, f> in R(rho) with |e*, f> in R(rho^{T_A}) while
    keeping both rho and rho^{T_A} positive; the remainder is a PPT edge state."""
    cfg = cfg or rankopt.OptimizerConfig()
    rho_matrix, dims = bilin.operator_entries(rho)
    ppt, min_eigenvalue = bilin.is_ppt(rho_matrix, dims=dims)
    if not ppt:
        raise ValidationError('extract_ppt_edge needs a PPT state (min PT eigenvalue {:.3e})'.format(min_eigenvalue))

    current = np.array(rho_matrix)
    components, steps = [], []
    stopped_on_edge = False
    for _ in range(dims.total):
        if np.trace(current).real <= bilin.TRACE_TOL:
            break
        search, pinv, pt_pinv = _ppt_candidates(current, dims, cfg)
        if not search.found:
            stopped_on_edge = True
            break

        best = None
        for e, f in search.candidate_factors:
            e, f = e / np.linalg.norm(e), f / np.linalg.norm(f)
            lam = _ppt_weight(pinv, pt_pinv, e, f)
            if lam < MIN_LAMBDA:
                continue
            if best is None or lam > best[0]:
                best = (lam, e, f)
        if best is None:
            stopped_on_edge = True
            break

        lam, e, f = best
        current = _subtract_ppt_product(current, dims, e, f, lam)
        components.append((lam, bilin.product_state(e, f, dims), 1))
        steps.append({'lambda': lam, 'ranks_after': list(bilin.pt_ranks(current, dims=dims))})
        log.debug('PPT subtraction lambda={:.6f}, ranks now {}'.format(lam, steps[-1]['ranks_after']))

    return _finish(rho_matrix, dims, components, current, 2, stopped_on_edge, steps)


# Rank-4 states
# =============

def rank4_schmidt2(delta, cfg=None):
    """Explicit decomposition of a rank-4 3 x 3 PPT state into Schmidt-rank-2 states.

    A product vector |e1, f> sits in the kernel; because the state is PPT,
    delta|e2, f> and the next remainder applied to |e3, f> have no e1 part, and
    what remains after subtracting them lives on A (x) f-perp, a 3 x 2 space.
    """
    cfg = cfg or rankopt.OptimizerConfig()
    matrix, dims = bilin.operator_entries(delta)
    _require_3x3(dims)
    data = bilin.spectral(matrix)
    if data.rank != 4:
        raise ValidationError('rank4_schmidt2 needs a rank-4 state, got rank {}'.format(data.rank))
    ppt, min_eigenvalue = bilin.is_ppt(matrix, dims=dims)
    if not ppt:
        raise ValidationError('rank4_schmidt2 needs a PPT state (min PT eigenvalue {:.3e})'.format(min_eigenvalue))

    search = rankopt.find_product_vector(data.kernel_basis, dims, cfg)
    if not search.found:
        log.error('No product vector in the 5-dimensional kernel (residual {:.3e})'.format(search.residual))
        raise SearchError('no product vector found in the kernel', telemetry=search.telemetry())
    e1, f = search.factors
    e1 = bilin.fix_phase(e1 / np.linalg.norm(e1))
    f = bilin.fix_phase(f / np.linalg.norm(f))
    complement = bilin.orthonormal_complement(e1[:, None], dims.m)
    e2, e3 = bilin.fix_phase(complement[:, 0]), bilin.fix_phase(complement[:, 1])

    e1_part = np.kron(e1.conj()[None, :], np.eye(dims.n))

    def e1_free(vector, step):
        leak = float(np.linalg.norm(e1_part @ vector))
        if leak > SUPPORT_TOL:
            raise NumericalError('step {} component has an e1 part of norm {:.3e}'.format(step, leak))

    components, ranks = [], [data.rank]
    current = matrix
    for step, e in ((3, e2), (4, e3)):
        image = current @ bilin.product_vector(e, f)
        if np.linalg.norm(image) <= bilin.NORM_TOL:
            continue
        psi = PureState.from_vector(image, dims)
        e1_free(psi.amplitudes, step)
        subtraction = subtract_pure(PositiveOperator(current, dims), psi)
        components.append((subtraction.lam, subtraction.vector))
        current = np.array(subtraction.remainder.entries)
        ranks.append(subtraction.rank_after)

    f_part = np.kron(np.eye(dims.m), f.conj()[None, :])
    rest = bilin.spectral(current)
    for j in range(rest.rank):
        vector = rest.range_basis[:, j]
        leak = float(np.linalg.norm(f_part @ vector))
        if leak > SUPPORT_TOL:
            raise NumericalError('step 5 component overlaps A (x) f by {:.3e}'.format(leak))
        components.append((float(rest.eigenvalues[j]), PureState.from_vector(vector, dims)))

    reconstructed = sum(w * psi.projector() for w, psi in components)
    error = bilin.max_abs(reconstructed - matrix)
    telemetry = {
        'kernel_residual': search.residual,
        'ranks': ranks + [rest.rank],
        'e1': _vector_dict(e1),
        'f': _vector_dict(f),
    }
    log.infov('Schmidt-2 certificate with {} components (error {:.3e})'.format(len(components), error))
    return Schmidt2Certificate(components=components, reconstruction_error=error, telemetry=telemetry)


def _vector_dict(vector):
    return {'re': [float(x) for x in np.real(vector)], 'im': [float(x) for x in np.imag(vector)]}


# Evidence for Schmidt number two
# ===============================

def _tkron(a, b):
    return (a[:, None] * b[None, :]).reshape(-1)


def _lemma4_objective(p, q):
    p = torch.as_tensor(p)
    q = torch.as_tensor(q)

    def parts(e1, f1, e2, f2, log_beta):
        e1, f1 = e1 / torch.linalg.vector_norm(e1), f1 / torch.linalg.vector_norm(f1)
        e2, f2 = e2 / torch.linalg.vector_norm(e2), f2 / torch.linalg.vector_norm(f2)
        t1 = _tkron(e1.conj(), f1)
        t2 = _tkron(e2.conj(), f2)
        # <e1 f1|Q^{T_A}|e2 f2> = <e2* f1|Q|e1* f2>
        cross = torch.vdot(_tkron(e2.conj(), f1), q @ _tkron(e1.conj(), f2))
        phase = cross.conj() / torch.sqrt(cross.real ** 2 + cross.imag ** 2 + 1e-30)
        beta = -torch.exp(log_beta) * phase
        psi = _tkron(e1, f1) + beta * _tkron(e2, f2)
        z = p @ psi
        z1, z2 = q @ t1, q @ t2
        p_term = torch.sum(z.real ** 2 + z.imag ** 2) / torch.sum(psi.real ** 2 + psi.imag ** 2)
        q_terms = (torch.sum(z1.real ** 2 + z1.imag ** 2), torch.sum(z2.real ** 2 + z2.imag ** 2))
        return psi, p_term, q_terms
    return parts


def lemma4_search(delta, cfg=None):
    """Look for |Psi> = |e1 f1> + beta |e2 f2> with <Psi|P + Q^{T_A}|Psi> <= 0.

    P and Q project on the kernels of delta and delta^{T_A}. The penalty pushes
    Psi into R(delta) and e_i* (x) f_i into R(delta^{T_A}); the phase of beta
    makes the cross term negative.
    """
    cfg = cfg or rankopt.OptimizerConfig()
    matrix, dims = bilin.operator_entries(delta)
    _require_3x3(dims)
    ranks = bilin.pt_ranks(matrix, dims=dims)
    p = bilin.spectral(matrix).kernel_projector()
    q = bilin.spectral(bilin.partial_transpose(matrix, 'A', dims)).kernel_projector()
    w = p + bilin.partial_transpose(q, 'A', dims)
    parts = _lemma4_objective(p, q)
    polish = dict(cfg.polish, steps=max(int(cfg.polish.get('steps', 1)), 10))

    def restart(index):
        rng = cfg.rng(index)
        raw = [bilin.complex_gaussian(rng, d) for d in (dims.m, dims.n, dims.m, dims.n)]
        params = []
        for x in raw:
            params += [torch.tensor(np.ascontiguousarray(x.real), requires_grad=True),
                       torch.tensor(np.ascontiguousarray(x.imag), requires_grad=True)]
        params.append(torch.tensor(0.0, dtype=torch.float64, requires_grad=True))

        def factors():
            return [torch.complex(params[2 * i], params[2 * i + 1]) for i in range(4)] + [params[8]]

        def loss_fn():
            _, p_term, (q1, q2) = parts(*factors())
            return p_term + q1 + q2

        loss = optimizer_builder.descend(loss_fn, params, polish)
        with torch.no_grad():
            psi, p_term, (q1, q2) = parts(*factors())
        psi = psi.numpy()
        residuals = {'p': float(p_term) ** 0.5, 'q1': float(q1) ** 0.5, 'q2': float(q2) ** 0.5}
        return loss, psi, residuals

    runs = rankopt.run_restarts(restart, cfg)
    losses = np.nan_to_num(np.array([run[0] for run in runs]), nan=np.inf)
    best = rankopt.best_index(losses, 'min')
    _, psi, residuals = runs[best]
    psi = psi / np.linalg.norm(psi)
    value = float(np.real(np.vdot(psi, w @ psi)))
    if bilin.tail_rank(psi, dims) > 2:
        raise NumericalError('two-product candidate has Schmidt rank above 2')

    found = max(residuals.values()) <= LEMMA4_RESIDUAL and value <= LEMMA4_VALUE
    l_count = lemma4_count(*ranks)
    log.infov('Two-product search on ranks {}: {} (value {:.3e}, L = {})'.format(
        ranks, 'found' if found else 'not found', value, l_count))
    return Lemma4Result(found=found, psi=PureState(psi, dims) if found else None, value=value,
                        residuals=residuals, ranks=tuple(ranks), admissible=tuple(ranks) in ADMISSIBLE_RANK_PAIRS,
                        l_count=l_count, restart_losses=losses)


def _ranks_below(ranks, target):
    return ranks[0] < target[0], ranks[1] < target[1]


def perturb_ranks(delta, target=(7, 7), cfg=None, eta=DEFAULT_ETA, restarts=PERTURB_RESTARTS):
    """Nearby PPT state with larger ranks.

    Adds eta-weighted product projectors until (r, r^{T_A}) reaches `target`:
    a random product raises both ranks, one from R(delta) raises only the PT
    rank and one whose partner |e*, f> lies in R(delta^{T_A}) raises only r.
    Then a new PPT-compatible product vector is subtracted and the result
    renormalized.
    """
    cfg = cfg or rankopt.OptimizerConfig()
    matrix, dims = bilin.operator_entries(delta)
    _require_3x3(dims)
    original = bilin.pt_ranks(matrix, dims=dims)
    if sum(original) > 13:
        raise ValidationError('perturb_ranks needs r + r^T <= 13, got {}'.format(original))
    if eta < 0:
        raise ValidationError('eta must be non-negative, got {}'.format(eta))
    if eta == 0:
        return RankPerturbation(state=DensityMatrix(matrix, dims), ranks=original, original_ranks=original,
                                distance=0.0, eta=0.0)

    search_cfg = cfg.derive(restarts=restarts)
    rng = np.random.default_rng([cfg.seed, dims.total])
    current = np.array(matrix)
    added = []
    for _ in range(2 * dims.total):
        ranks = bilin.pt_ranks(current, dims=dims)
        raise_r, raise_t = _ranks_below(ranks, target)
        if not (raise_r or raise_t):
            break
        if raise_r and raise_t:
            e, f = bilin.complex_gaussian(rng, dims.m), bilin.complex_gaussian(rng, dims.n)
        elif raise_r:
            basis = bilin.spectral(bilin.partial_transpose(current, 'A', dims)).range_basis
            search = rankopt.find_product_vector(basis, dims, search_cfg)
            if not search.found:
                raise SearchError('no product vector in the PT range', telemetry=search.telemetry())
            e, f = search.factors[0].conj(), search.factors[1]
        else:
            basis = bilin.spectral(current).range_basis
            search = rankopt.find_product_vector(basis, dims, search_cfg)
            if not search.found:
                raise SearchError('no product vector in the range', telemetry=search.telemetry())
            e, f = search.factors
        psi = bilin.product_state(e, f, dims)
        current = current + eta * psi.projector()
        added.append(psi)
    current = current / np.trace(current).real

    search, pinv, pt_pinv = _ppt_candidates(current, dims, search_cfg)
    best = None
    for e, f in search.candidate_factors:
        e, f = e / np.linalg.norm(e), f / np.linalg.norm(f)
        vector = bilin.product_vector(e, f)
        if any(psi.overlap(vector) > rankopt.SAME_VECTOR_OVERLAP for psi in added):
            continue
        lam = _ppt_weight(pinv, pt_pinv, e, f)
        if lam >= MIN_LAMBDA and (best is None or lam < best[0]):
            best = (lam, e, f)
    if best is None:
        log.error('No PPT-compatible product vector to subtract')
        raise SearchError('no qualifying product vector for the subtraction', telemetry=search.telemetry())

    lam, e, f = best
    current = _subtract_ppt_product(current, dims, e, f, lam)
    state = DensityMatrix.from_unnormalized(current, dims)
    distance = bilin.max_abs(state.entries - matrix)
    if distance > 10 * eta:
        log.warning('Perturbed state is {:.3e} away, more than 10 eta'.format(distance))
    ranks = bilin.pt_ranks(state)
    log.infov('Ranks {} -> {} at distance {:.3e}'.format(original, ranks, distance))
    return RankPerturbation(state=state, ranks=tuple(ranks), original_ranks=tuple(original), distance=distance,
                            eta=eta, added=added, subtracted=(lam, bilin.product_state(e, f, dims)))
