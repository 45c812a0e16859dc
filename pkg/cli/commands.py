"""
Commands
Entry points of the salgrad subcommands
"""

import logging
import sys

import numpy as np

from attacks.attack_spec import AttackSpec
from attacks.gradient_attacks import run_attack
from attacks.image_dump import dump_pgm
from cli.parser import build_parser, resolve
from cli.settings import load_settings
from common.errors import EXIT_INVARIANT, EXIT_OK, EXIT_RUNTIME, InvariantViolation, SalgradError
from common.seeding import derive_rng, derive_seed
from data.dataset import subset
from data.fetch import fetch_mnist
from data.idx import load_mnist
from data.synthetic import synthetic_two_class
from evaluation.report import (compare_curves, read_csv, render_svg, soft_monotonicity,
                               summary_lines, write_csv, write_summary)
from evaluation.robustness import EVAL_BATCH_SIZE, count_correct, robustness_sweep
from model.architectures import build_model
from model.checkpoint import load_checkpoint, save_checkpoint
from testing.selfcheck import SelfCheckRunner
from training.saliency import saliency_map
from training.trainer import TrainConfig, train

logger = logging.getLogger(__name__)


def load_split(options, split, limit=None):
    """Train or test split of the configured dataset, reduced to a seeded selection of limit samples"""
    if options['dataset'] == 'synthetic':
        size = options['synthetic_size']
        dataset = synthetic_two_class(size, seed=derive_seed(options['data_seed'], 'synthetic', split) % (2 ** 32),
                                      split=split)
    else:
        dataset = load_mnist(options['data_dir'], split)
    if limit is not None and limit < len(dataset):
        dataset = subset(dataset, limit, seed=derive_seed(options['data_seed'], 'subset', split) % (2 ** 32))
    logger.info(f"Loaded {dataset.name}/{dataset.split}: {len(dataset)} samples")
    return dataset


def cmd_train(options):
    config = TrainConfig(mode=options['mode'], epochs=options['epochs'], batch_size=options['batch_size'],
                         lr=options['lr'], lam=options['lam'], mask_fraction=options['mask_fraction'],
                         seed=options['seed'], fill_range=options['fill_range'], arch=options['arch'])
    dataset = load_split(options, 'train', options['train_subset'])
    eval_set = load_split(options, 'test', options['eval_subset']) if options['eval_subset'] else None

    model = build_model(config.arch, config.seed)
    result = train(model, dataset, config, eval_set=eval_set, metrics_path=options['metrics'],
                   progress=not options['quiet'])
    save_checkpoint(result.model, options['out'])

    last = result.history[-1]
    print(f"trained {config.mode} {config.arch} for {config.epochs} epochs: "
          f"loss {last.loss:.4f} train_acc {last.train_acc:.4f} -> {options['out']}")
    return EXIT_OK


def cmd_attack(options):
    model = load_checkpoint(options['ckpt'])
    dataset = load_split(options, 'test', options['n_samples'])
    spec = AttackSpec(kind=options['attack'], epsilon=options['eps'], alpha=options['alpha'],
                      steps=options['steps'], mu=options['mu'], seed=options['seed'])
    rng = derive_rng(options['seed'], spec.kind, spec.epsilon)

    correct, adversarial = 0, []
    for start in range(0, len(dataset), EVAL_BATCH_SIZE):
        images = dataset.images[start:start + EVAL_BATCH_SIZE]
        labels = dataset.labels[start:start + EVAL_BATCH_SIZE]
        result = run_attack(model, images, labels, spec, rng=rng)
        if not result.contained(spec.epsilon):
            raise InvariantViolation(f"{spec.kind} left the epsilon-box at epsilon {spec.epsilon}")
        correct += count_correct(model, result.adversarial, labels)
        if options['dump_dir'] and sum(len(a) for a in adversarial) < options['dump_count']:
            adversarial.append(result.adversarial)

    if options['dump_dir']:
        count = options['dump_count']
        dump_pgm(np.concatenate(adversarial)[:count], options['dump_dir'], f"adv_{spec.kind}", spec.epsilon)
        if options['dump_saliency']:
            maps = saliency_map(model, dataset.images[:count], dataset.labels[:count])
            dump_pgm(maps, options['dump_dir'], "saliency", 0)

    print("model,attack,epsilon,accuracy")
    print(f"{options['label']},{spec.kind},{spec.epsilon:g},{correct / len(dataset):.6f}")
    return EXIT_OK


def _spec_defaults(options):
    defaults = {}
    for kind in ('bim', 'pgd', 'mim'):
        steps = options.get(f"{kind}_steps")
        if steps is not None:
            defaults.setdefault(kind, {})['steps'] = steps
    if options.get('mu') is not None:
        defaults.setdefault('mim', {})['mu'] = options['mu']
    return defaults


def cmd_sweep(options):
    dataset = load_split(options, 'test', options['n_samples'])
    runs = [(options['label'], options['ckpt'])]
    if options['ckpt_baseline']:
        runs.append((options['baseline_label'], options['ckpt_baseline']))

    results = {}
    for label, path in runs:
        model = load_checkpoint(path)
        results[label] = robustness_sweep(model, dataset, options['attacks'], options['eps_grid'],
                                          spec_defaults=_spec_defaults(options), model_label=label,
                                          seed=options['seed'], threads=options['threads'],
                                          progress=not options['quiet'])
        for curve in results[label]:
            soft_monotonicity(curve)

    write_csv([curve for curves in results.values() for curve in curves], options['out'])
    print(f"curves -> {options['out']}")
    if options['ckpt_baseline']:
        rows = compare_curves(results[options['label']], results[options['baseline_label']])
        write_summary(rows, options['summary'])
        for line in summary_lines(rows):
            print(line)
    return EXIT_OK


def cmd_report(options):
    curves = read_csv(options['curves'])
    for curve in curves:
        soft_monotonicity(curve)
    render_svg(curves, options['out'])
    labels = sorted({c.model_label for c in curves})
    print(f"{len({c.attack for c in curves})} panels, {len(labels)} models -> {options['out']}")
    return EXIT_OK


def cmd_selfcheck(options):
    summary = SelfCheckRunner(seed=options['seed']).run_all_checks()
    for result in summary['results']:
        status = 'PASS' if result['passed'] else 'FAIL'
        print(f"{status} {result['name']}: {result['detail']}")
    print(f"{summary['passed']}/{summary['total']} checks passed")
    return EXIT_OK if summary['failed'] == 0 else EXIT_INVARIANT


def cmd_fetch(options):
    paths = fetch_mnist(options['out'], base_url=options['url'])
    for path in paths:
        print(path)
    return EXIT_OK


COMMANDS = {
    'train': cmd_train,
    'attack': cmd_attack,
    'sweep': cmd_sweep,
    'report': cmd_report,
    'selfcheck': cmd_selfcheck,
    'fetch': cmd_fetch,
}


def configure_logging(level):
    logging.basicConfig(level=getattr(logging, level, logging.INFO), stream=sys.stderr,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s', force=True)


def main(argv=None):
    """
    Parse argv, run one subcommand and return its exit code

    0 success, 1 usage or configuration error, 2 runtime error,
    3 invariant violation.
    """
    settings = load_settings()
    try:
        args = build_parser(settings).parse_args(argv)
        configure_logging(args.log_level)
        config = resolve(args)
        if args.print_config:
            print(config.to_json())
            return EXIT_OK
        logger.info(f"config: {config.to_json()}")
        return COMMANDS[config.command](config.options)
    except SalgradError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception(f"unexpected {type(e).__name__}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
