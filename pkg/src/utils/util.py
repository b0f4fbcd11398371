import os
import json
import yaml
import logging
from colorlog import ColoredFormatter


# Logging
# =======

def _infov(self, msg, *args, **kwargs):
    self.log(logging.INFO + 1, msg, *args, **kwargs)

ch = logging.StreamHandler()
ch.setLevel(logging.DEBUG)

formatter = ColoredFormatter(
    "%(log_color)s[%(asctime)s] %(message)s",
    datefmt=None,
    reset=True,
    log_colors={
        'DEBUG':    'cyan',
        'INFO':     'white,bold',
        'INFOV':    'cyan,bold',
        'WARNING':  'yellow',
        'ERROR':    'red,bold',
        'CRITICAL': 'red,bg_white',
    },
    secondary_log_colors={},
    style='%'
)
ch.setFormatter(formatter)

log = logging.getLogger('qsw')
log.setLevel(os.environ.get('QSW_LOG_LEVEL', 'INFO').upper())
log.handlers = []       # No duplicated handlers
log.propagate = False   # workaround for duplicated logs in ipython
log.addHandler(ch)

logging.addLevelName(logging.INFO + 1, 'INFOV')
logging.Logger.infov = _infov


# general utils
# =============

ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


def load_config(config_name):
    """Load `configs/<config_name>.yml`, or a path to a yml file."""
    if config_name.endswith(('.yml', '.yaml')):
        config_path = config_name
    else:
        config_path = os.path.join(ROOT, 'configs', config_name + '.yml')
    if not os.path.exists(config_path):
        log.error('Config {} does not exist'.format(config_path))
        raise FileNotFoundError(config_path)
    with open(config_path) as file:
        config = yaml.load(file, Loader=yaml.FullLoader)
    return config or {}


def num_threads():
    """Parallel restart cap from QSW_THREADS (default 1)."""
    value = os.environ.get('QSW_THREADS', '1')
    try:
        threads = int(value)
    except ValueError:
        log.warning("QSW_THREADS='{}' is not an integer, using 1".format(value))
        return 1
    return max(threads, 1)


def schema_path(name='report'):
    return os.path.join(ROOT, 'schemas', name + '.schema.json')


def validate_report(report, name='report'):
    import jsonschema

    with open(schema_path(name)) as f:
        schema = json.load(f)
    jsonschema.validate(instance=report, schema=schema)


def dump_report(report):
    # sort_keys keeps reports byte-identical across runs
    return json.dumps(report, indent=2, sort_keys=True)


def write_report(report, out_path=None, validate=True):
    if validate:
        validate_report(report)
    text = dump_report(report)
    if out_path is None:
        print(text)
        return None

    directory = os.path.dirname(out_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(out_path, 'w') as f:
        f.write(text + '\n')
    log.info('Report is written to {}'.format(out_path))
    return out_path


def read_json(path):
    with open(path, 'r') as f:
        return json.load(f)


def write_json(obj, out_path=None):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out_path is None:
        print(text)
        return None
    directory = os.path.dirname(out_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(out_path, 'w') as f:
        f.write(text + '\n')
    log.info('{} is written'.format(out_path))
    return out_path
