"""Named 3 x 3 state families used as evidence and regression fodder.

Constructions, in the A-major composite index a * 3 + b:

tiles       rho = (1 - sum_i |u_i><u_i|) / 4 over the five-member tiles UPB
            A: |0>, (|0> - |1>)/sqrt2, |2>, (|1> - |2>)/sqrt2, (|0> + |1> + |2>)/sqrt3
            B: (|0> - |1>)/sqrt2, |2>, (|1> - |2>)/sqrt2, |0>, (|0> + |1> + |2>)/sqrt3
chessboard  rho ~ sum_i |V_i><V_i| with real a, b, c, d, m, n and
            V1 = (m, 0, s, 0, n, 0, 0, 0, 0)    V2 = (0, a, 0, b, 0, c, 0, 0, 0)
            V3 = (n, 0, 0, 0, -m, 0, t, 0, 0)   V4 = (0, b, 0, -a, 0, 0, 0, d, 0)
            s = a c / n and t = a d / m make rho^{T_A} a chessboard state again
choi        a on |ii><ii|, 1 on |ii><jj| (i != j), b on |01>, |12>, |20>,
            c on |10>, |21>, |02>, over 3 (a + b + c); positive iff a >= 1,
            PPT iff b c >= 1
alpha       (2/7) |Psi_+><Psi_+| + (alpha/7) sigma_+ + ((5 - alpha)/7) sigma_-,
            which is choi(1, alpha/2, (5 - alpha)/2)
horodecki   the 1997 family with parameter a in (0, 1), over 8a + 1
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.core import bilin, edge, witness
from src.core.bilin import BipartiteDims, DensityMatrix
from src.core.exceptions import ValidationError
from src.utils.util import log

DIMS_3X3 = BipartiteDims(3, 3)

_S2 = 1 / np.sqrt(2)
_S3 = 1 / np.sqrt(3)
TILES_A = np.array([[1, 0, 0], [_S2, -_S2, 0], [0, 0, 1], [0, _S2, -_S2], [_S3, _S3, _S3]])
TILES_B = np.array([[_S2, -_S2, 0], [0, 0, 1], [0, _S2, -_S2], [1, 0, 0], [_S3, _S3, _S3]])

DEFAULT_CHESSBOARD = {'a': 0.8, 'b': 0.5, 'c': 0.9, 'd': 0.6, 'm': 1.1, 'n': 0.7}


@dataclass(frozen=True)
class Expected:
    ppt: bool
    rank: int
    pt_rank: Optional[int] = None
    entangled: Optional[bool] = None
    note: str = ''

    def to_dict(self):
        return {'ppt': self.ppt, 'rank': self.rank, 'pt_rank': self.pt_rank,
                'entangled': self.entangled, 'note': self.note}


@dataclass(frozen=True, eq=False)
class CatalogEntry:
    name: str
    parameters: dict
    state: DensityMatrix
    expected: Expected
    flags: list = field(default_factory=list)


def _check_range(name, value, lo, hi):
    if not lo <= value <= hi:
        raise ValidationError('{} must lie in [{}, {}], got {}'.format(name, lo, hi, value))


def isotropic_state(m, p):
    """p |Psi_+><Psi_+| + (1 - p) 1 / m^2"""
    if int(m) != m or m < 2:
        raise ValidationError('m must be an integer >= 2, got {}'.format(m))
    _check_range('p', p, 0.0, 1.0)
    dims = BipartiteDims(m, m)
    matrix = p * bilin.maximally_entangled(m).projector() + (1 - p) * np.eye(m * m) / m ** 2
    return DensityMatrix(matrix, dims)


def tiles_vectors():
    """The five tiles product vectors."""
    return [np.kron(a, b).astype(complex) for a, b in zip(TILES_A, TILES_B)]


def upb_tiles_state():
    matrix = np.eye(9, dtype=complex)
    for vector in tiles_vectors():
        matrix -= bilin.projector(vector)
    state = DensityMatrix(matrix / 4, DIMS_3X3)
    return CatalogEntry('tiles', {}, state,
                        Expected(ppt=True, rank=4, pt_rank=4, entangled=True,
                                 note='complement of the tiles UPB; 2-edge state'))


def _choi_matrix(a, b, c):
    matrix = np.zeros((9, 9), dtype=complex)
    for i in range(3):
        for j in range(3):
            matrix[4 * i, 4 * j] = 1.0
        matrix[4 * i, 4 * i] = a
        matrix[3 * i + (i + 1) % 3, 3 * i + (i + 1) % 3] = b
        matrix[3 * i + (i + 2) % 3, 3 * i + (i + 2) % 3] = c
    return matrix / (3 * (a + b + c))


def choi_state(a=1.0, b=3.0, c=1 / 3):
    """Generalized Choi state.

    The Choi map witness gives Tr(W rho) proportional to a + c - 2, so a PPT
    entry with a + c < 2 is entangled.
    """
    if a < 1:
        raise ValidationError('choi_state needs a >= 1 for positivity, got {}'.format(a))
    if b < 0 or c < 0:
        raise ValidationError('choi_state needs b, c >= 0, got {}, {}'.format(b, c))
    state = DensityMatrix(_choi_matrix(a, b, c), DIMS_3X3)
    ppt = b * c >= 1 - 1e-12
    entangled = True if ppt and a + c < 2 else None
    return CatalogEntry('choi', {'a': a, 'b': b, 'c': c}, state,
                        Expected(ppt=ppt, rank=bilin.spectral(state).rank, entangled=entangled,
                                 note='generalized Choi matrix'))


def horodecki_alpha_state(alpha=4.0):
    _check_range('alpha', alpha, 2.0, 5.0)
    entry = choi_state(1.0, alpha / 2, (5 - alpha) / 2)
    ppt = alpha <= 4
    entangled = True if 3 < alpha <= 4 else (False if alpha <= 3 else None)
    note = 'separable for alpha <= 3, PPT entangled on (3, 4], NPPT above 4'
    return CatalogEntry('alpha', {'alpha': alpha}, entry.state,
                        Expected(ppt=ppt, rank=entry.expected.rank, entangled=entangled, note=note))


def chessboard_state(a=None, b=None, c=None, d=None, m=None, n=None):
    params = dict(DEFAULT_CHESSBOARD)
    params.update({key: value for key, value in (('a', a), ('b', b), ('c', c), ('d', d), ('m', m), ('n', n))
                   if value is not None})
    a, b, c, d, m, n = (float(params[key]) for key in ('a', 'b', 'c', 'd', 'm', 'n'))
    if m == 0 or n == 0:
        raise ValidationError('chessboard_state needs m, n != 0')
    s, t = a * c / n, a * d / m
    vectors = [
        [m, 0, s, 0, n, 0, 0, 0, 0],
        [0, a, 0, b, 0, c, 0, 0, 0],
        [n, 0, 0, 0, -m, 0, t, 0, 0],
        [0, b, 0, -a, 0, 0, 0, d, 0],
    ]
    matrix = sum(bilin.projector(np.array(v, dtype=complex)) for v in vectors)
    state = DensityMatrix.from_unnormalized(matrix, DIMS_3X3)

    rank = bilin.spectral(state).rank
    flags = []
    if rank != 4:
        log.warning('Chessboard parameters {} give rank {}, not 4'.format(params, rank))
        flags.append('rank_{}'.format(rank))
    return CatalogEntry('chessboard', params, state,
                        Expected(ppt=True, rank=rank, pt_rank=rank, entangled=True if rank == 4 else None,
                                 note='PPT by construction; entangled for generic parameters'),
                        flags)


def horodecki_1997_state(a=0.5):
    if not 0 < a < 1:
        raise ValidationError('horodecki_1997_state needs 0 < a < 1, got {}'.format(a))
    matrix = np.zeros((9, 9), dtype=complex)
    for i in (0, 1, 2, 3, 4, 5, 7):
        matrix[i, i] = a
    for i in (0, 4, 8):
        for j in (0, 4, 8):
            if i != j:
                matrix[i, j] = a
    matrix[6, 6] = matrix[8, 8] = (1 + a) / 2
    matrix[6, 8] = matrix[8, 6] = np.sqrt(1 - a ** 2) / 2
    state = DensityMatrix(matrix / (8 * a + 1), DIMS_3X3)
    return CatalogEntry('horodecki', {'a': a}, state,
                        Expected(ppt=True, rank=bilin.spectral(state).rank, entangled=True,
                                 note='PPT entangled for 0 < a < 1'))


def _isotropic_entry(m=3, p=0.5):
    state = isotropic_state(int(m), p)
    threshold = 1 / (m + 1)
    return CatalogEntry('isotropic', {'m': int(m), 'p': p}, state,
                        Expected(ppt=p <= threshold, rank=bilin.spectral(state).rank,
                                 entangled=p > threshold, note='entangled iff p > 1/(m+1)'))


CATALOG = {
    'tiles': upb_tiles_state,
    'chessboard': chessboard_state,
    'alpha': horodecki_alpha_state,
    'choi': choi_state,
    'horodecki': horodecki_1997_state,
    'isotropic': _isotropic_entry,
}


def build_entry(name, **params):
    if name not in CATALOG:
        log.error('Specify valid catalog entry among {}'.format(list(CATALOG.keys())))
        raise ValidationError('unknown catalog entry {}'.format(name))
    entry = CATALOG[name](**params)
    log.debug('{} state is built'.format(name))
    return entry


def verify_entry(entry, cfg=None):
    """Recompute the expected properties of an entry.

    ppt and ranks are eigensolves. With `cfg`, entanglement of a PPT entry is
    checked by extracting its PPT edge part and detecting it with a witness
    built from that edge state.
    """
    observed = {}
    ppt, min_eigenvalue = bilin.is_ppt(entry.state)
    observed['ppt'] = ppt
    observed['min_pt_eigenvalue'] = min_eigenvalue
    r, r_t = bilin.pt_ranks(entry.state)
    observed['rank'] = r
    observed['pt_rank'] = r_t

    checks = {'ppt': ppt == entry.expected.ppt, 'rank': r == entry.expected.rank}
    if entry.expected.pt_rank is not None:
        checks['pt_rank'] = r_t == entry.expected.pt_rank

    if cfg is not None and entry.expected.entangled and ppt:
        decomposition = edge.extract_ppt_edge(entry.state, cfg)
        if decomposition.fully_decomposed:
            observed['entangled'] = False
        else:
            delta = decomposition.edge_state
            w = witness.ppt_edge_witness(delta, cfg)
            observed['edge_ranks'] = list(bilin.pt_ranks(delta))
            observed['witness_value'] = witness.evaluate(w, delta)
            observed['entangled'] = observed['witness_value'] < 0
        checks['entangled'] = observed['entangled'] == entry.expected.entangled

    return {'observed': observed, 'checks': checks, 'ok': all(checks.values())}
