import copy

from src.core import bilin, witness
from src.core.bilin import PureState
from src.core.exceptions import ValidationError
from src.utils import interchange
from src.utils.util import log, read_json


def _isotropic(witness_config, cfg, state):
    m = witness_config.get('m', state.dims.m if state is not None else None)
    if m is None:
        raise ValidationError('isotropic witness needs m')
    k = witness_config.get('k', m)
    return witness.isotropic_witness(int(m), int(k), cfg)


def _from_edge(witness_config, cfg, state):
    if state is None:
        raise ValidationError('from_edge witness needs an edge state')
    return witness.witness_from_edge(state, int(witness_config.get('k', 2)), cfg=cfg)


def _ppt_edge(witness_config, cfg, state):
    if state is None:
        raise ValidationError('ppt_edge witness needs a PPT edge state')
    return witness.ppt_edge_witness(state, cfg)


def _fidelity(witness_config, cfg, state):
    psi = witness_config.get('psi')
    if psi is None:
        if state is None:
            raise ValidationError('fidelity witness needs a pure state or a state to take one from')
        # leading eigenvector
        data = bilin.spectral(state)
        psi = PureState.from_vector(data.eigenvectors[:, 0], state.dims)
    return witness.fidelity_witness(psi, int(witness_config.get('k', 2)), cfg)


def _file(witness_config, cfg, state):
    path = witness_config.get('path')
    if path is None:
        raise ValidationError('witness file path is missing')
    try:
        obj = read_json(path)
    except ValueError as e:
        raise ValidationError('{} is not valid JSON: {}'.format(path, e))
    return interchange.decode_witness(obj)


WITNESSES = {
    'isotropic': _isotropic,
    'from_edge': _from_edge,
    'ppt_edge': _ppt_edge,
    'fidelity': _fidelity,
    'file': _file,
}


def build(witness_config, cfg=None, state=None):
    witness_config = copy.copy(witness_config or {})
    witness_name = witness_config.pop('name', 'isotropic')

    if witness_name not in WITNESSES:
        log.error(
            'Specify valid witness name among {}'.format(list(WITNESSES.keys()))
        )
        raise ValidationError('unknown witness {}'.format(witness_name))

    w = WITNESSES[witness_name](witness_config, cfg, state)
    log.infov('{} witness of class {} is built'.format(witness_name.upper(), w.k))
    return w
