"""JSON interchange for matrices, pure states, witnesses and certificates.

A matrix block is {"dims": [m, n], "re": [[...]], "im": [[...]]}, row-major in
the composite index a * n + b. A pure state block carries flat "re"/"im" lists.
Blocks written with m > n are read with the subsystems swapped.
"""
import numpy as np

from src.core import bilin, rankopt
from src.core.bilin import BipartiteDims, DensityMatrix, PureState
from src.core.exceptions import ValidationError
from src.core.witness import Witness
from src.utils.util import log


def _dims(obj):
    try:
        m, n = obj['dims']
    except (KeyError, TypeError, ValueError):
        raise ValidationError('block needs "dims": [m, n]')
    return BipartiteDims.ordered(m, n)


def _complex(obj, shape):
    if 're' not in obj:
        raise ValidationError('block needs a "re" field')
    try:
        re = np.asarray(obj['re'], dtype=float)
        im = np.asarray(obj.get('im', np.zeros_like(re)), dtype=float)
    except (TypeError, ValueError) as e:
        raise ValidationError('entries are not real numbers: {}'.format(e))
    if re.shape != shape or im.shape != shape:
        raise ValidationError('entries have shape {}/{}, dims need {}'.format(re.shape, im.shape, shape))
    return re + 1j * im


def encode_matrix(matrix, dims):
    matrix = np.asarray(matrix, dtype=complex)
    return {
        'dims': dims.as_list(),
        're': np.real(matrix).tolist(),
        'im': np.imag(matrix).tolist(),
    }


def decode_matrix(obj):
    """(matrix, dims), subsystems swapped if the file has m > n."""
    dims = _dims(obj)
    d = dims.total
    matrix = _complex(obj, (d, d))
    if dims.swapped:
        log.info('Swapping subsystems to keep m <= n')
        matrix = bilin.swap_subsystems(matrix, dims.n, dims.m)
    return matrix, dims


def encode_state(state):
    return encode_matrix(state.entries, state.dims)


def decode_state(obj):
    matrix, dims = decode_matrix(obj)
    return DensityMatrix(matrix, dims)


def encode_pure(psi):
    return {
        'dims': psi.dims.as_list(),
        're': np.real(psi.amplitudes).tolist(),
        'im': np.imag(psi.amplitudes).tolist(),
    }


def decode_pure(obj):
    dims = _dims(obj)
    vector = _complex(obj, (dims.total,))
    if dims.swapped:
        vector = bilin.swap_subsystems(vector, dims.n, dims.m)
    return PureState.from_vector(vector, dims)


def encode_witness(w):
    obj = encode_matrix(w.matrix, w.dims)
    obj['k'] = w.k
    obj['provenance'] = w.provenance
    if w.certification is not None:
        obj['certification'] = w.certification.to_dict()
    if w.telemetry:
        obj['telemetry'] = plain(w.telemetry)
    return obj


def decode_witness(obj):
    # witness commands write a report around the block
    if isinstance(obj, dict) and isinstance(obj.get('witness'), dict):
        obj = obj['witness']
    matrix, dims = decode_matrix(obj)
    if 'k' not in obj:
        raise ValidationError('witness block needs a "k" field')
    certification = None
    if obj.get('certification'):
        record = obj['certification']
        certification = rankopt.Certification(
            min_value=float(record['min_value']), restarts=int(record.get('restarts', 0)),
            seed=int(record.get('seed', 0)), gap=float(record.get('gap', 0.0)),
            converged=bool(record.get('converged', True)))
    return Witness(matrix, int(obj['k']), dims, obj.get('provenance', 'user'), certification)


def encode_components(components):
    """Weighted pure components, (weight, psi[, rank]) tuples."""
    blocks = []
    for component in components:
        weight, psi = component[0], component[1]
        block = {'weight': float(weight), 'state': encode_pure(psi),
                 'schmidt_rank': bilin.tail_rank(psi.amplitudes, psi.dims)}
        blocks.append(block)
    return blocks


def encode_certificate(certificate):
    return {
        'components': encode_components(certificate.components),
        'reconstruction_error': float(certificate.reconstruction_error),
        'telemetry': plain(certificate.telemetry),
    }


def encode_decomposition(decomposition):
    obj = {
        'p': float(decomposition.p),
        'k': int(decomposition.k),
        'fully_decomposed': bool(decomposition.fully_decomposed),
        'reconstruction_error': float(decomposition.reconstruction_error),
        'components': encode_components(decomposition.components),
        'telemetry': plain(decomposition.telemetry),
    }
    if not decomposition.fully_decomposed:
        obj['edge_state'] = encode_state(decomposition.edge_state)
        obj['edge_ranks'] = list(bilin.pt_ranks(decomposition.edge_state))
    return obj


def plain(obj):
    """numpy scalars and arrays to JSON-ready python values."""
    if isinstance(obj, dict):
        return {str(key): plain(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(value) for value in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {'re': np.real(obj).tolist(), 'im': np.imag(obj).tolist()}
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, complex):
        return {'re': obj.real, 'im': obj.imag}
    return obj
