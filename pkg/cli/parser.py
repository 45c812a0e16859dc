"""
Parser
Argument parsing and resolution of every flag into a RunConfig
"""

import argparse
import logging
from pathlib import Path

from attacks.attack_spec import AttackSpec
from cli.run_config import RunConfig, parse_eps_grid, parse_list
from common.errors import UsageError
from model.architectures import registry
from schema.config_schemas import ATTACK_KINDS, FILL_RANGES, TRAIN_MODES, get_config_schema
from schema.schema_validator import validator
from training.trainer import TrainConfig

logger = logging.getLogger(__name__)

LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR']
DEFAULT_ATTACKS = 'fgsm,pgd,bim'
DEFAULT_EPS_GRID = '0:0.3:0.05'


class ArgumentParser(argparse.ArgumentParser):
    """argparse parser that raises UsageError instead of exiting"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(settings):
    common = ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=0, help='root random seed')
    common.add_argument('--log-level', choices=LOG_LEVELS, default=settings.log_level,
                        type=str.upper, help='logging level (SALGRAD_LOG_LEVEL)')
    common.add_argument('--quiet', action='store_true', help='hide progress bars')
    common.add_argument('--print-config', action='store_true',
                        help='print the resolved configuration and exit')
    return common


def _data_flags(parser, settings, synthetic_size):
    parser.add_argument('--dataset', choices=['mnist', 'synthetic'], default='mnist')
    parser.add_argument('--data-dir', default=settings.data_dir,
                        help='MNIST IDX directory (SALGRAD_DATA_DIR)')
    parser.add_argument('--data-seed', type=int, default=0, help='seed of the synthetic dataset')
    parser.add_argument('--synthetic-size', type=int, default=synthetic_size)


def build_parser(settings):
    """
    Build the top-level parser

    Args:
        settings: Settings providing environment defaults

    Returns:
        ArgumentParser with one subparser per command
    """
    common = _common(settings)
    parser = ArgumentParser(prog='salgrad',
                            description='Saliency-guided training and adversarial robustness lab')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=ArgumentParser)

    train = sub.add_parser('train', parents=[common], help='train a regular or saliency model')
    _data_flags(train, settings, synthetic_size=2048)
    train.add_argument('--mode', choices=TRAIN_MODES, default='regular')
    train.add_argument('--arch', choices=registry.names(), default='mnist_cnn')
    train.add_argument('--epochs', type=int, default=100)
    train.add_argument('--batch-size', type=int, default=256)
    train.add_argument('--lr', type=float, default=0.1)
    train.add_argument('--lambda', dest='lam', type=float, default=None,
                       help='KL weight (saliency mode, default 1.0)')
    train.add_argument('--mask-fraction', type=float, default=None,
                       help='fraction of lowest-gradient pixels masked (saliency mode, default 0.5)')
    train.add_argument('--fill-range', choices=FILL_RANGES, default=None,
                       help='range of the random fill values (saliency mode, default image)')
    train.add_argument('--train-subset', type=int, default=None, help='train on the first N samples')
    train.add_argument('--eval-subset', type=int, default=None,
                       help='log clean accuracy on N test samples after every epoch')
    train.add_argument('--out', default='model.sgck', help='checkpoint path')
    train.add_argument('--metrics', default='metrics.csv', help='per-epoch metrics CSV')

    attack = sub.add_parser('attack', parents=[common], help='attack a checkpoint at one epsilon')
    _data_flags(attack, settings, synthetic_size=512)
    attack.add_argument('--ckpt', required=True)
    attack.add_argument('--label', default=None, help='model label (default: checkpoint stem)')
    attack.add_argument('--attack', default='fgsm', type=str.lower)
    attack.add_argument('--eps', type=float, default=0.1)
    attack.add_argument('--alpha', type=float, default=None)
    attack.add_argument('--steps', type=int, default=None)
    attack.add_argument('--mu', type=float, default=None)
    attack.add_argument('--n-samples', type=int, default=1000)
    attack.add_argument('--dump-dir', default=None, help='write adversarial images as PGM here')
    attack.add_argument('--dump-count', type=int, default=16)
    attack.add_argument('--dump-saliency', action='store_true',
                        help='also write the saliency maps of the clean images')

    sweep = sub.add_parser('sweep', parents=[common], help='accuracy-versus-epsilon curves')
    _data_flags(sweep, settings, synthetic_size=512)
    sweep.add_argument('--ckpt', required=True)
    sweep.add_argument('--ckpt-baseline', default=None, help='regular model compared against --ckpt')
    sweep.add_argument('--label', default=None)
    sweep.add_argument('--baseline-label', default='regular')
    sweep.add_argument('--attacks', default=DEFAULT_ATTACKS)
    sweep.add_argument('--eps-grid', default=DEFAULT_EPS_GRID, help='start:end:step or a comma list')
    sweep.add_argument('--n-samples', type=int, default=1000)
    sweep.add_argument('--threads', type=int, default=1)
    sweep.add_argument('--bim-steps', type=int, default=None)
    sweep.add_argument('--pgd-steps', type=int, default=None)
    sweep.add_argument('--mim-steps', type=int, default=None)
    sweep.add_argument('--mu', type=float, default=None)
    sweep.add_argument('--out', default='curves.csv')
    sweep.add_argument('--summary', default=None, help='paired summary (default: <out>.summary.txt)')

    report = sub.add_parser('report', parents=[common], help='render curves CSV as SVG')
    report.add_argument('--curves', required=True)
    report.add_argument('--out', default=None, help='SVG path (default: curves path with .svg)')

    sub.add_parser('selfcheck', parents=[common], help='gradient, attack and format self-checks')

    fetch = sub.add_parser('fetch', parents=[common], help='download MNIST')
    fetch.add_argument('--out', default=settings.data_dir)
    fetch.add_argument('--url', default=settings.mnist_url)

    return parser


def _positive(name, value):
    if value is not None and value < 1:
        raise UsageError(f"--{name.replace('_', '-')} must be >= 1, got {value}")


def resolve(args):
    """
    Validate flags and materialise every default

    Returns:
        RunConfig
    """
    options = {k: v for k, v in vars(args).items() if k not in ('command',)}
    command = args.command

    if command == 'train':
        if args.mode == 'regular':
            given = [flag for flag, value in (('--lambda', args.lam), ('--mask-fraction', args.mask_fraction),
                                              ('--fill-range', args.fill_range)) if value is not None]
            if given:
                raise UsageError(f"{', '.join(given)} only apply to --mode saliency")
        options['lam'] = 1.0 if args.lam is None else args.lam
        options['mask_fraction'] = 0.5 if args.mask_fraction is None else args.mask_fraction
        options['fill_range'] = args.fill_range or 'image'
        for name in ('train_subset', 'eval_subset', 'synthetic_size'):
            _positive(name, options[name])
        TrainConfig(mode=args.mode, epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
                    lam=options['lam'], mask_fraction=options['mask_fraction'], seed=args.seed,
                    fill_range=options['fill_range'], arch=args.arch)

    elif command == 'attack':
        if args.attack not in ATTACK_KINDS:
            raise UsageError(f"unknown attack '{args.attack}'; valid kinds: {', '.join(ATTACK_KINDS)}")
        spec = AttackSpec.with_defaults(args.attack, args.eps, alpha=args.alpha, steps=args.steps,
                                        mu=args.mu, seed=args.seed)
        options.update(alpha=spec.alpha, steps=spec.steps, mu=spec.mu)
        options['label'] = args.label or Path(args.ckpt).stem
        for name in ('n_samples', 'dump_count', 'synthetic_size'):
            _positive(name, options[name])

    elif command == 'sweep':
        options['attacks'] = parse_list(args.attacks, ATTACK_KINDS, 'attack kinds')
        options['eps_grid'] = parse_eps_grid(args.eps_grid)
        if options['eps_grid'][0] != 0:
            raise UsageError(f"--eps-grid must start at 0, got {options['eps_grid'][0]}")
        options['label'] = args.label or ('saliency' if args.ckpt_baseline else Path(args.ckpt).stem)
        if args.ckpt_baseline and options['label'] == args.baseline_label:
            raise UsageError("--label and --baseline-label must differ")
        options['summary'] = args.summary or (f"{args.out}.summary.txt" if args.ckpt_baseline else None)
        sweep_config = {'attacks': options['attacks'], 'eps_grid': options['eps_grid'],
                        'n_samples': args.n_samples, 'seed': args.seed, 'threads': args.threads}
        for name in ('bim_steps', 'pgd_steps', 'mim_steps', 'mu'):
            if options[name] is not None:
                sweep_config[name] = options[name]
        validator.require(sweep_config, get_config_schema('sweep'), "sweep config")

    elif command == 'report':
        options['out'] = args.out or str(Path(args.curves).with_suffix('.svg'))

    return RunConfig(command, options)
