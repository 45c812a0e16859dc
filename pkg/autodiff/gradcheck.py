"""
Gradient Check
Central-difference verification of reverse-mode gradients
"""

import logging
from dataclasses import dataclass

import numpy as np

from autodiff.tensor import Tape, Tensor, backward

logger = logging.getLogger(__name__)

SHADOW_DTYPE = np.float64


@dataclass
class GradientCheckResult:
    """Outcome of one finite-difference comparison"""

    max_error: float
    checked: int
    excluded: int
    worst_index: int = -1

    def passed(self, tolerance=1e-4):
        return self.checked > 0 and self.max_error < tolerance


def relative_error(analytic, numeric, floor=1e-6):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def gradient_check(f, x, h=1e-4, points=100, rng=None, exclude=None, tolerance=1e-4):
    """
    Compare the tape gradient of f against central differences

    A coordinate counts as a kink and is excluded when the one-sided
    slopes disagree, or when the central estimates at h and h/10 disagree
    by more than the tolerance.

    Args:
        f: Callable Tensor -> scalar Tensor, deterministic
        x: Array-like point, evaluated in 64-bit
        h: Central-difference step
        points: Number of coordinates sampled (all when the tensor is smaller)
        rng: Generator choosing the coordinates
        exclude: Optional boolean mask of coordinates to skip
        tolerance: Threshold used by the kink detector

    Returns:
        GradientCheckResult
    """
    base = np.array(x, dtype=SHADOW_DTYPE)
    rng = rng if rng is not None else np.random.default_rng(0)

    with Tape() as tape:
        leaf = tape.watch(Tensor(base))
        loss = f(leaf)
    analytic = backward(loss, tape, [leaf])[leaf].reshape(-1)

    def evaluate(flat):
        return float(f(Tensor(flat.reshape(base.shape))).item())

    flat = base.reshape(-1)
    candidates = np.arange(flat.size)
    if exclude is not None:
        candidates = candidates[~np.asarray(exclude, dtype=bool).reshape(-1)]
    if candidates.size > points:
        candidates = np.sort(rng.choice(candidates, size=points, replace=False))

    f0 = evaluate(flat)
    worst, worst_index, checked, excluded = 0.0, -1, 0, 0
    for index in candidates:
        values = {}
        for step in (h, -h, h / 10, -h / 10):
            shifted = flat.copy()
            shifted[index] += step
            values[step] = evaluate(shifted)
        central = (values[h] - values[-h]) / (2 * h)
        fine = (values[h / 10] - values[-h / 10]) / (2 * h / 10)
        forward_slope = (values[h] - f0) / h
        backward_slope = (f0 - values[-h]) / h
        if (relative_error(forward_slope, backward_slope) > 1e-2
                or relative_error(central, fine) > tolerance):
            excluded += 1
            continue
        error = relative_error(float(analytic[index]), central)
        checked += 1
        if error > worst:
            worst, worst_index = error, int(index)

    if excluded:
        logger.debug(f"gradient check excluded {excluded} kink coordinates")
    return GradientCheckResult(worst, checked, excluded, worst_index)


def finite_difference_check(f, x, h=1e-4, points=100, rng=None, exclude=None):
    """
    Worst relative error between analytic and central-difference gradients

    Args:
        f: Callable Tensor -> scalar Tensor, deterministic
        x: Point to check at
        h: Central-difference step

    Returns:
        Maximum relative error over the checked coordinates
    """
    return gradient_check(f, x, h=h, points=points, rng=rng, exclude=exclude).max_error
