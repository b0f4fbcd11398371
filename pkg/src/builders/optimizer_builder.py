import copy

from torch import optim
from src.utils.util import log, num_threads

OPTIMIZERS = {
    'sgd': optim.SGD,
    'rmsprop': optim.RMSprop,
    'adam': optim.Adam,
    'lbfgs': optim.LBFGS,
}

DEFAULT_POLISH = {
    'name': 'lbfgs',
    'steps': 4,
    'lr': 1.0,
    'max_iter': 100,
    'history_size': 20,
    'tolerance_grad': 1e-14,
    'tolerance_change': 1e-22,
    'line_search_fn': 'strong_wolfe',
}


def build(polish_config, params):
    """torch optimizer for local descent; `steps` is consumed by `descend`."""
    optim_config = copy.deepcopy(polish_config or DEFAULT_POLISH)
    optimizer_name = optim_config.pop('name', 'lbfgs')
    optim_config.pop('steps', None)
    optim_config['params'] = params

    if optimizer_name not in OPTIMIZERS:
        log.error(
            'Specify valid optimizer name among {}'.format(list(OPTIMIZERS.keys()))
        )
        raise KeyError(optimizer_name)

    optimizer = OPTIMIZERS[optimizer_name](**optim_config)
    log.debug('{} optimizer is built'.format(optimizer_name.upper()))
    return optimizer


def descend(loss_fn, params, polish_config=None):
    """Minimize `loss_fn()` over `params` in place; returns the final loss."""
    polish_config = polish_config or DEFAULT_POLISH
    optimizer = build(polish_config, params)
    steps = int(polish_config.get('steps', 1))

    def closure():
        optimizer.zero_grad()
        loss = loss_fn()
        loss.backward()
        return loss

    for _ in range(steps):
        optimizer.step(closure)
    return float(loss_fn().detach())


def build_config(config=None, **overrides):
    """OptimizerConfig from the `optimizer`/`polish` sections of a yml config.

    Flags given on the command line (restarts, seed, tol) win over the file.
    """
    from src.core.rankopt import OptimizerConfig

    config = config or {}
    optimizer_config = dict(config.get('optimizer', {}))
    for key, value in overrides.items():
        if value is not None:
            optimizer_config[key] = value
    if 'tol' in optimizer_config:
        optimizer_config['convergence_tol'] = optimizer_config.pop('tol')
    optimizer_config.setdefault('threads', num_threads())
    optimizer_config['polish'] = dict(config.get('polish', DEFAULT_POLISH))

    cfg = OptimizerConfig(**optimizer_config)
    log.infov('Optimizer config: {} restarts, {} iterations, seed {}, {} thread(s)'.format(
        cfg.restarts, cfg.max_iters, cfg.seed, cfg.threads))
    return cfg
