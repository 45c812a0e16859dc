"""
Robustness
Clean accuracy and accuracy-versus-epsilon sweeps
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List

import numpy as np
from tqdm import tqdm

from attacks.attack_spec import AttackSpec
from attacks.gradient_attacks import run_attack
from autodiff.tensor import Tensor
from common.errors import InvariantViolation, ParameterError
from common.seeding import derive_rng, derive_seed

logger = logging.getLogger(__name__)

EVAL_BATCH_SIZE = 200


def predict(model, images, batch_size=EVAL_BATCH_SIZE):
    """Eval-mode argmax predictions"""
    predictions = []
    for start in range(0, images.shape[0], batch_size):
        logits = model.forward(Tensor(images[start:start + batch_size]), train_mode=False)
        predictions.append(np.argmax(logits.data, axis=1))
    return np.concatenate(predictions) if predictions else np.zeros(0, dtype=np.int64)


def count_correct(model, images, labels, batch_size=EVAL_BATCH_SIZE):
    return int(np.sum(predict(model, images, batch_size) == np.asarray(labels)))


def accuracy(model, dataset, batch_size=EVAL_BATCH_SIZE):
    """
    Top-1 eval-mode accuracy over the whole dataset

    Args:
        model: Classifier
        dataset: Non-empty Dataset

    Returns:
        Fraction of correctly classified samples
    """
    if len(dataset) == 0:
        raise ParameterError("accuracy of an empty dataset is undefined")
    return count_correct(model, dataset.images, dataset.labels, batch_size) / len(dataset)


@dataclass(frozen=True)
class CurvePoint:
    epsilon: float
    n_samples: int
    n_correct: int

    @property
    def accuracy(self):
        return self.n_correct / self.n_samples


@dataclass
class RobustnessCurve:
    """Accuracy of one model under one attack over an epsilon grid"""

    model_label: str
    attack: str
    points: List[CurvePoint] = field(default_factory=list)

    @property
    def epsilons(self):
        return [p.epsilon for p in self.points]

    @property
    def accuracies(self):
        return [p.accuracy for p in self.points]

    def check(self):
        """
        Verify the structural invariants

        Returns:
            List of violation messages, empty when the curve is well formed
        """
        problems = []
        eps = self.epsilons
        if not eps or eps[0] != 0:
            problems.append(f"{self.model_label}/{self.attack}: no point at epsilon 0")
        if any(b <= a for a, b in zip(eps, eps[1:])):
            problems.append(f"{self.model_label}/{self.attack}: epsilons not strictly increasing")
        if len({p.n_samples for p in self.points}) > 1:
            problems.append(f"{self.model_label}/{self.attack}: sample count varies across epsilon")
        return problems


def validate_grid(eps_grid):
    grid = [float(e) for e in eps_grid]
    if not grid or grid[0] != 0.0:
        raise ParameterError(f"epsilon grid must start at 0, got {grid}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ParameterError(f"epsilon grid must be strictly increasing, got {grid}")
    return grid


def make_spec(kind, epsilon, spec_defaults=None, seed=0):
    """AttackSpec for one sweep cell, with per-kind overrides applied"""
    overrides = dict((spec_defaults or {}).get(kind, {}))
    return AttackSpec.with_defaults(kind, epsilon, alpha=overrides.get('alpha'),
                                    steps=overrides.get('steps'), mu=overrides.get('mu'),
                                    seed=derive_seed(seed, kind, epsilon) % (2 ** 31))


def evaluate_cell(model, dataset, kind, epsilon, spec_defaults=None, seed=0, batch_size=EVAL_BATCH_SIZE):
    """
    Attack the whole evaluation set at one epsilon

    Each cell draws from its own generator derived from (seed, attack,
    epsilon), so cells can run in any order or in parallel.

    Returns:
        (CurvePoint, list of invariant violations)
    """
    spec = make_spec(kind, epsilon, spec_defaults, seed)
    rng = derive_rng(seed, kind, epsilon)
    correct, problems = 0, []
    for start in range(0, len(dataset), batch_size):
        images = dataset.images[start:start + batch_size]
        labels = dataset.labels[start:start + batch_size]
        result = run_attack(model, images, labels, spec, rng=rng)
        if not result.contained(epsilon):
            problems.append(f"{kind} at epsilon {epsilon}: adversarial outside the epsilon-box "
                            f"(max distance {float(result.perturbation_norm.max()):.3g})")
        if epsilon == 0 and not np.array_equal(result.adversarial, images):
            problems.append(f"{kind} at epsilon 0 changed its input")
        correct += count_correct(model, result.adversarial, labels, batch_size)
    return CurvePoint(float(epsilon), len(dataset), correct), problems


def robustness_sweep(model, dataset, attack_kinds, eps_grid, spec_defaults=None,
                     model_label="model", seed=0, threads=1, batch_size=EVAL_BATCH_SIZE,
                     progress=False):
    """
    Accuracy under every attack at every epsilon of the grid

    Args:
        model: Classifier, read-shared by the worker threads
        dataset: Evaluation Dataset
        attack_kinds: Attack names
        eps_grid: Strictly increasing budgets starting at 0
        spec_defaults: Optional kind -> {'steps', 'alpha', 'mu'} overrides
        model_label: Name written into the curves
        seed: Root seed of the per-cell generators
        threads: Worker threads; results do not depend on it

    Returns:
        List of RobustnessCurve, one per attack

    Raises:
        InvariantViolation on containment or zero-budget identity failures
    """
    grid = validate_grid(eps_grid)
    if len(dataset) == 0:
        raise ParameterError("cannot sweep an empty dataset")
    clean_correct = count_correct(model, dataset.images, dataset.labels, batch_size)
    cells = [(kind, eps) for kind in attack_kinds for eps in grid]
    logger.info(f"Sweep of {model_label}: {len(cells)} cells on {len(dataset)} samples, {threads} threads")

    def work(cell):
        return evaluate_cell(model, dataset, cell[0], cell[1], spec_defaults, seed, batch_size)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        outcomes = pool.map(work, cells)
        if progress:
            outcomes = tqdm(outcomes, total=len(cells), desc=f"sweep {model_label}", leave=False)
        outcomes = list(outcomes)

    problems = []
    curves = {kind: RobustnessCurve(model_label, kind) for kind in attack_kinds}
    for (kind, eps), (point, cell_problems) in zip(cells, outcomes):
        problems.extend(cell_problems)
        if eps == 0 and point.n_correct != clean_correct:
            problems.append(f"{kind}: epsilon-0 accuracy {point.n_correct} differs from clean {clean_correct}")
        curves[kind].points.append(point)
        logger.debug(f"{model_label} {kind} eps={eps}: {point.accuracy:.4f}")

    for curve in curves.values():
        problems.extend(curve.check())
    if problems:
        for problem in problems:
            logger.error(problem)
        raise InvariantViolation("; ".join(problems))
    return list(curves.values())
