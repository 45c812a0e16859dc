"""
Gradient Attacks
FGSM, BIM, PGD and MIM sharing one projection core
"""

import logging

import numpy as np

from attacks.attack_spec import AdversarialBatch
from autodiff.ops import sign
from autodiff.tensor import Tensor
from common.errors import ParameterError
from common.seeding import derive_rng
from training.saliency import input_gradients

logger = logging.getLogger(__name__)


def _prepare(x):
    array = x.data if isinstance(x, Tensor) else np.asarray(x)
    dtype = array.dtype if array.dtype in (np.float32, np.float64) else np.float32
    return np.array(array, dtype=dtype, copy=True)


def project(x_adv, x_orig, epsilon):
    """
    Clamp into [x_orig - eps, x_orig + eps] intersected with [0, 1]

    Args:
        x_adv: Candidate images
        x_orig: Clean images, same shape
        epsilon: L-infinity budget

    Returns:
        Projected array
    """
    eps = x_orig.dtype.type(epsilon)
    return np.clip(np.clip(x_adv, x_orig - eps, x_orig + eps), 0, 1)


def fgsm(model, x, y, epsilon):
    """
    One signed-gradient step of size epsilon, then the valid-range clamp

    Args:
        model: Classifier, run in eval mode
        x: Clean images in [0, 1]
        y: True labels
        epsilon: Step size and budget

    Returns:
        AdversarialBatch
    """
    original = _prepare(x)
    if epsilon == 0:
        return AdversarialBatch.build(original.copy(), original)
    eps = original.dtype.type(epsilon)
    grad = input_gradients(model, original, y)
    adversarial = np.clip(original + eps * sign(grad), 0, 1)
    return AdversarialBatch.build(adversarial, original)


def _iterate(model, original, start, y, epsilon, alpha, steps):
    step = original.dtype.type(alpha)
    adversarial = start
    for _ in range(steps):
        grad = input_gradients(model, adversarial, y)
        adversarial = project(adversarial + step * sign(grad), original, epsilon)
    return adversarial


def _check_iterative(kind, epsilon, alpha, steps):
    if steps < 1:
        raise ParameterError(f"{kind}: steps must be >= 1, got {steps}")
    if alpha <= 0:
        raise ParameterError(f"{kind}: alpha must be > 0, got {alpha}")
    if alpha > epsilon > 0:
        logger.warning(f"{kind}: alpha {alpha} exceeds epsilon {epsilon}")


def bim(model, x, y, epsilon, alpha, steps):
    """
    Iterative signed steps of size alpha, projected after every step

    Starts from the clean images.
    """
    _check_iterative("bim", epsilon, alpha, steps)
    original = _prepare(x)
    if epsilon == 0:
        return AdversarialBatch.build(original.copy(), original)
    adversarial = _iterate(model, original, original.copy(), y, epsilon, alpha, steps)
    return AdversarialBatch.build(adversarial, original)


def pgd(model, x, y, epsilon, alpha, steps, rng):
    """
    BIM from a uniformly random start inside the epsilon-box

    Args:
        rng: Object with uniform(low, high, size) supplying the start noise
    """
    _check_iterative("pgd", epsilon, alpha, steps)
    original = _prepare(x)
    if epsilon == 0:
        return AdversarialBatch.build(original.copy(), original)
    noise = np.asarray(rng.uniform(-epsilon, epsilon, size=original.shape)).astype(original.dtype)
    start = project(original + noise, original, epsilon)
    adversarial = _iterate(model, original, start, y, epsilon, alpha, steps)
    return AdversarialBatch.build(adversarial, original)


def mim(model, x, y, epsilon, alpha, steps, mu):
    """
    Momentum iterative method

    g <- mu * g + grad / ||grad||_2 per sample, then a signed step of size
    alpha and the projection. A sample whose gradient has zero L2 norm
    keeps the raw (zero) gradient and counts as a degenerate step.
    """
    _check_iterative("mim", epsilon, alpha, steps)
    if mu < 0:
        raise ParameterError(f"mim: mu must be >= 0, got {mu}")
    original = _prepare(x)
    if epsilon == 0:
        return AdversarialBatch.build(original.copy(), original)
    n = original.shape[0]
    step = original.dtype.type(alpha)
    momentum = np.zeros(original.shape, dtype=np.float64)
    adversarial = original.copy()
    degenerate = 0
    for _ in range(steps):
        grad = input_gradients(model, adversarial, y).astype(np.float64)
        norm = np.sqrt(np.sum(grad.reshape(n, -1) ** 2, axis=1))
        zero = norm == 0
        if np.any(zero):
            degenerate += int(np.sum(zero))
            logger.warning(f"mim: {int(np.sum(zero))} samples with a zero gradient")
        scale = np.where(zero, 1.0, norm).reshape((n,) + (1,) * (grad.ndim - 1))
        momentum = mu * momentum + grad / scale
        adversarial = project(adversarial + step * sign(momentum).astype(original.dtype), original, epsilon)
    return AdversarialBatch.build(adversarial, original, degenerate)


def run_attack(model, x, y, spec, rng=None):
    """
    Dispatch an AttackSpec

    Args:
        model: Classifier
        x: Clean images
        y: True labels
        spec: AttackSpec
        rng: PGD start generator; derived from spec.seed when omitted

    Returns:
        AdversarialBatch
    """
    if spec.kind == 'fgsm':
        return fgsm(model, x, y, spec.epsilon)
    if spec.kind == 'bim':
        return bim(model, x, y, spec.epsilon, spec.alpha, spec.steps)
    if spec.kind == 'pgd':
        rng = rng if rng is not None else derive_rng(spec.seed, 'pgd', spec.epsilon)
        return pgd(model, x, y, spec.epsilon, spec.alpha, spec.steps, rng)
    if spec.kind == 'mim':
        return mim(model, x, y, spec.epsilon, spec.alpha, spec.steps, spec.mu)
    raise ParameterError(f"unknown attack kind '{spec.kind}'")

