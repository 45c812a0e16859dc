"""
Synthetic Data
Two-class 28x28 set separable by where the bright blob sits
"""

import logging

import numpy as np

from common.errors import ParameterError
from data.dataset import Dataset

logger = logging.getLogger(__name__)

SIDE = 28
BLOB_HEIGHT = 8
BLOB_WIDTH = 12


def synthetic_two_class(n, seed=0, split="train", noise=0.08, intensity=0.85):
    """
    Class 0 has a bright blob in the top half, class 1 in the bottom half

    Args:
        n: Number of images (at least 2); labels alternate 0, 1, 0, ...
        seed: Integer seed; equal seeds give bit-identical datasets
        noise: Standard deviation of the additive Gaussian noise
        intensity: Mean blob brightness

    Returns:
        Dataset of n images 1 x 28 x 28, pixels clamped to [0, 1]
    """
    if n < 2:
        raise ParameterError(f"synthetic dataset needs at least 2 samples, got {n}")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    images = rng.normal(0.1, noise, size=(n, 1, SIDE, SIDE))

    half = SIDE // 2
    top = rng.integers(1, half - BLOB_HEIGHT, size=n)
    left = rng.integers(2, SIDE - BLOB_WIDTH - 2, size=n)
    for i in range(n):
        row = top[i] + (half if labels[i] == 1 else 0)
        images[i, 0, row:row + BLOB_HEIGHT, left[i]:left[i] + BLOB_WIDTH] += intensity

    images = np.clip(images, 0.0, 1.0).astype(np.float32)
    dataset = Dataset(images, labels, name="synthetic", split=split)
    logger.debug(f"Synthetic dataset generated: {n} samples, seed {seed}")
    return dataset


def half_contrast(images):
    """mean(top half) - mean(bottom half) per image"""
    half = images.shape[-2] // 2
    return images[..., :half, :].mean(axis=(1, 2, 3)) - images[..., half:, :].mean(axis=(1, 2, 3))


def contrast_rule_accuracy(dataset):
    """Accuracy of the rule 'class 0 iff the top half is brighter'"""
    predictions = (half_contrast(dataset.images) <= 0).astype(np.int64)
    return float(np.mean(predictions == dataset.labels))
