import argparse
import sys

from src.core.exceptions import CertificationError, QSWError, ValidationError
from src.engine import Engine
from src.utils import util
from src.utils.util import log


def _param(text):
    key, sep, value = text.partition('=')
    if not sep:
        raise argparse.ArgumentTypeError('expected key=value, got {}'.format(text))
    try:
        return key, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError('{} is not a real number'.format(value))


def build_parser():
    parser = argparse.ArgumentParser(prog='qsw', description='Schmidt number witnesses and edge states')
    parser.add_argument('--config', default='default',
                        help="Config name under configs/ or a path to a yml file")
    parser.add_argument('--seed', type=int, default=None,
                        help="Seed of every multistart search")
    parser.add_argument('--restarts', type=int, default=None,
                        help="Restarts per search")
    parser.add_argument('--tol', type=float, default=None,
                        help="Convergence tolerance of the alternating searches")
    parser.add_argument('--out', default=None,
                        help="Write the report to this file instead of stdout")
    parser.add_argument('--format', default='json', choices=['json'],
                        help="Report format")
    commands = parser.add_subparsers(dest='command')
    commands.required = True

    classify = commands.add_parser('classify', help="Schmidt number bounds with certificates")
    classify.add_argument('state', help="State JSON file or catalog name")
    classify.add_argument('--k-max', type=int, default=None, help="Largest class swept (default m)")

    witness = commands.add_parser('witness').add_subparsers(dest='action')
    witness.required = True
    isotropic = witness.add_parser('isotropic')
    isotropic.add_argument('--m', type=int, required=True)
    isotropic.add_argument('--k', type=int, required=True)
    from_edge = witness.add_parser('from-edge')
    from_edge.add_argument('--state', required=True)
    from_edge.add_argument('--k', type=int, default=2)
    optimize = witness.add_parser('optimize')
    optimize.add_argument('--witness', required=True)
    evaluate = witness.add_parser('evaluate')
    evaluate.add_argument('--witness', required=True)
    evaluate.add_argument('--state', required=True)

    edge = commands.add_parser('edge').add_subparsers(dest='action')
    edge.required = True
    decompose = edge.add_parser('decompose')
    decompose.add_argument('--state', required=True)
    decompose.add_argument('--k', type=int, default=2)
    decompose.add_argument('--ppt', action='store_true', help="PPT-preserving product subtractions")
    rank4 = edge.add_parser('rank4')
    rank4.add_argument('--state', required=True)
    perturb = edge.add_parser('perturb')
    perturb.add_argument('--state', required=True)
    perturb.add_argument('--target', type=int, nargs=2, default=[7, 7])
    perturb.add_argument('--eta', type=float, default=None)

    catalog = commands.add_parser('catalog').add_subparsers(dest='action')
    catalog.required = True
    catalog.add_parser('list')
    emit = catalog.add_parser('emit')
    emit.add_argument('name')
    emit.add_argument('--param', type=_param, action='append', default=[],
                      help="key=value, repeatable")

    conjecture = commands.add_parser('conjecture').add_subparsers(dest='action')
    conjecture.required = True
    conjecture.add_parser('scan')
    return parser


def run(args):
    engine = Engine(config_name=args.config, seed=args.seed, restarts=args.restarts, tol=args.tol)
    action = getattr(args, 'action', None)

    if args.command == 'classify':
        report = engine.classify(args.state, args.k_max)
    elif args.command == 'witness' and action == 'isotropic':
        _, report = engine.witness_isotropic(args.m, args.k)
    elif args.command == 'witness' and action == 'from-edge':
        _, report = engine.witness_from_edge(args.state, args.k)
    elif args.command == 'witness' and action == 'optimize':
        _, report = engine.witness_optimize(args.witness)
    elif args.command == 'witness' and action == 'evaluate':
        _, report = engine.witness_evaluate(args.witness, args.state)
    elif args.command == 'edge' and action == 'decompose':
        _, report = engine.edge_decompose(args.state, args.k, args.ppt)
    elif args.command == 'edge' and action == 'rank4':
        _, report = engine.edge_rank4(args.state)
    elif args.command == 'edge' and action == 'perturb':
        _, report = engine.edge_perturb(args.state, args.target, args.eta)
    elif args.command == 'catalog' and action == 'list':
        report = engine.catalog_list()
    elif args.command == 'catalog' and action == 'emit':
        # state files are plain matrix blocks, not reports
        _, block = engine.catalog_emit(args.name, dict(args.param))
        util.write_json(block, args.out)
        return 0
    elif args.command == 'conjecture' and action == 'scan':
        report = engine.conjecture_scan()
    else:
        raise ValidationError('unknown command {} {}'.format(args.command, action or ''))

    util.write_report(report, args.out)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ValidationError as e:
        log.error('Invalid input: {}'.format(e))
        return ValidationError.exit_code
    except CertificationError as e:
        log.error('Certification failed: {}'.format(e))
        return CertificationError.exit_code
    except QSWError as e:
        log.error('{}: {}'.format(type(e).__name__, e))
        return QSWError.exit_code
    except (FileNotFoundError, IsADirectoryError) as e:
        log.error('Cannot read input: {}'.format(e))
        return ValidationError.exit_code


if __name__ == '__main__':
    sys.exit(main())
