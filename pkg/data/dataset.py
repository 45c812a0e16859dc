"""
Dataset
Immutable image/label container, deterministic subsets and batching
"""

import logging
from dataclasses import dataclass

import numpy as np

from common.errors import DimensionError, ParameterError

logger = logging.getLogger(__name__)

SPLITS = ("train", "test")


@dataclass(frozen=True)
class Dataset:
    """
    Images N x 1 x H x W in [0, 1] with one class index per image
    """

    images: np.ndarray
    labels: np.ndarray
    name: str = "dataset"
    split: str = "train"
    num_classes: int = 10

    def __post_init__(self):
        images = np.ascontiguousarray(self.images, dtype=np.float32)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if images.ndim != 4:
            raise DimensionError("dataset images must be N x C x H x W", images.shape)
        if labels.shape != (images.shape[0],):
            raise DimensionError("image count and label count differ", images.shape, labels.shape)
        if images.size and (images.min() < 0.0 or images.max() > 1.0):
            raise ParameterError(f"{self.name}: pixels must lie in [0, 1]")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ParameterError(f"{self.name}: labels must lie in [0, {self.num_classes})")
        if self.split not in SPLITS:
            raise ParameterError(f"split must be one of {SPLITS}, got '{self.split}'")
        images.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return int(self.labels.shape[0])

    @property
    def image_shape(self):
        return self.images.shape[1:]

    def take(self, indices, name=None):
        """Dataset restricted to the given indices, in that order"""
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.images[indices], self.labels[indices], name or self.name,
                       self.split, self.num_classes)


def subset(dataset, n, seed=None):
    """
    Deterministic selection of n samples

    Args:
        dataset: Source dataset
        n: Number of samples, at most len(dataset)
        seed: None keeps the first n in order; an integer selects a
            seeded random permutation

    Returns:
        Dataset of n samples
    """
    if n < 1 or n > len(dataset):
        raise ParameterError(f"subset size {n} outside [1, {len(dataset)}]")
    if seed is None:
        indices = np.arange(n)
    else:
        indices = np.random.default_rng(seed).permutation(len(dataset))[:n]
    return dataset.take(indices, name=f"{dataset.name}[{n}]")


def batches(dataset, batch_size, shuffle_seed=None):
    """
    Iterate (images, labels) batches; the final partial batch is kept

    Args:
        dataset: Source dataset
        batch_size: Samples per batch
        shuffle_seed: None for dataset order, otherwise a seeded shuffle

    Yields:
        (images float32 array, labels int64 array)
    """
    if batch_size < 1:
        raise ParameterError(f"batch size must be >= 1, got {batch_size}")
    order = np.arange(len(dataset))
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(dataset))
    for start in range(0, len(dataset), batch_size):
        index = order[start:start + batch_size]
        yield dataset.images[index], dataset.labels[index]


def batch_count(dataset, batch_size):
    return -(-len(dataset) // batch_size)


def train_test_split(dataset, test_fraction=0.2, seed=0):
    """Split into a train and a test Dataset by a seeded permutation"""
    if not 0.0 < test_fraction < 1.0:
        raise ParameterError(f"test fraction must be in (0, 1), got {test_fraction}")
    order = np.random.default_rng(seed).permutation(len(dataset))
    n_test = max(1, int(round(len(dataset) * test_fraction)))
    if n_test >= len(dataset):
        raise ParameterError(f"dataset of {len(dataset)} samples is too small to split")
    test_part = dataset.take(order[:n_test])
    train_part = dataset.take(order[n_test:])
    return (Dataset(train_part.images, train_part.labels, dataset.name, "train", dataset.num_classes),
            Dataset(test_part.images, test_part.labels, dataset.name, "test", dataset.num_classes))
