import os

from src.core import catalog
from src.core.exceptions import ValidationError
from src.utils import interchange
from src.utils.util import log, read_json


def build(source, params=None, catalog_config=None):
    """(state, catalog entry or None) from a JSON file path or a catalog name.

    Parameters come from the `catalog` section of the config and are
    overridden by `params`.
    """
    if source is None:
        log.error('Specify a state file or a catalog name')
        raise ValidationError('no state given')

    if os.path.exists(source):
        try:
            obj = read_json(source)
        except ValueError as e:
            raise ValidationError('{} is not valid JSON: {}'.format(source, e))
        state = interchange.decode_state(obj)
        log.infov('State {} x {} is loaded from {}'.format(state.dims.m, state.dims.n, source))
        return state, None

    name = source[len('catalog:'):] if source.startswith('catalog:') else source
    if name not in catalog.CATALOG:
        log.error('{} is neither a file nor a catalog entry among {}'.format(
            source, list(catalog.CATALOG.keys())))
        raise ValidationError('unknown state source {}'.format(source))

    entry_params = dict((catalog_config or {}).get(name) or {})
    entry_params.update(params or {})
    entry = catalog.build_entry(name, **entry_params)
    log.infov('{} state is built from the catalog'.format(name.upper()))
    return entry.state, entry
