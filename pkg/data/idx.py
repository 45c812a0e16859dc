"""
IDX Reader
Big-endian IDX image/label files as used by MNIST
"""

import gzip
import logging
import struct
from pathlib import Path

import numpy as np

from common.errors import (ArtifactIOError, DimensionError, IdxCountMismatchError,
                           IdxMagicError, IdxTruncatedError)
from data.dataset import Dataset

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def _read_bytes(path):
    path = Path(path)
    try:
        if path.suffix == ".gz":
            with gzip.open(path, "rb") as f:
                return f.read()
        return path.read_bytes()
    except OSError as e:
        raise ArtifactIOError(f"cannot read IDX file {path}: {e}")


def _header(raw, count, what):
    size = 4 * count
    if len(raw) < size:
        raise IdxTruncatedError(f"{what}: header needs {size} bytes, file has {len(raw)}")
    return struct.unpack(f">{count}I", raw[:size])


def parse_idx_images(raw, what="images"):
    """
    Decode an IDX3 image file

    Returns:
        uint8 array N x rows x cols
    """
    (magic,) = _header(raw, 1, what)
    if magic != IMAGES_MAGIC:
        raise IdxMagicError(f"{what}: magic {magic} is not the image magic {IMAGES_MAGIC}")
    _, count, rows, cols = _header(raw, 4, what)
    expected = count * rows * cols
    payload = raw[16:]
    if len(payload) < expected:
        raise IdxTruncatedError(f"{what}: expected {expected} pixel bytes, found {len(payload)}")
    return np.frombuffer(payload[:expected], dtype=np.uint8).reshape(count, rows, cols)


def parse_idx_labels(raw, what="labels"):
    """
    Decode an IDX1 label file

    Returns:
        uint8 array N
    """
    (magic,) = _header(raw, 1, what)
    if magic != LABELS_MAGIC:
        raise IdxMagicError(f"{what}: magic {magic} is not the label magic {LABELS_MAGIC}")
    _, count = _header(raw, 2, what)
    payload = raw[8:]
    if len(payload) < count:
        raise IdxTruncatedError(f"{what}: expected {count} label bytes, found {len(payload)}")
    return np.frombuffer(payload[:count], dtype=np.uint8).copy()


def encode_idx_images(pixels):
    pixels = np.asarray(pixels, dtype=np.uint8)
    count, rows, cols = pixels.shape
    return struct.pack(">IIII", IMAGES_MAGIC, count, rows, cols) + pixels.tobytes()


def encode_idx_labels(labels):
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", LABELS_MAGIC, labels.shape[0]) + labels.tobytes()


def load_idx(images_path, labels_path, name="mnist", split="train"):
    """
    Load an image/label IDX pair, scaling pixels by 1/255

    Args:
        images_path: IDX3 image file (optionally .gz)
        labels_path: IDX1 label file (optionally .gz)

    Returns:
        Dataset
    """
    pixels = parse_idx_images(_read_bytes(images_path), what=str(images_path))
    labels = parse_idx_labels(_read_bytes(labels_path), what=str(labels_path))
    if pixels.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(
            f"{images_path} holds {pixels.shape[0]} images but {labels_path} holds {labels.shape[0]} labels"
        )
    images = (pixels.astype(np.float32) / np.float32(255.0))[:, None, :, :]
    dataset = Dataset(images, labels.astype(np.int64), name=name, split=split)
    logger.info(f"Loaded {len(dataset)} {split} images of {dataset.image_shape} from {images_path}")
    return dataset


def write_idx(dataset, images_path, labels_path):
    """
    Write a single-channel dataset as an IDX pair

    Pixels are stored as round(255 * value); datasets loaded from IDX
    round-trip exactly.
    """
    if dataset.images.shape[1] != 1:
        raise DimensionError("IDX images are single-channel", dataset.images.shape)
    pixels = np.rint(dataset.images[:, 0] * 255.0).astype(np.uint8)
    try:
        Path(images_path).write_bytes(encode_idx_images(pixels))
        Path(labels_path).write_bytes(encode_idx_labels(dataset.labels))
    except OSError as e:
        raise ArtifactIOError(f"cannot write IDX files: {e}")
    logger.info(f"Wrote {len(dataset)} samples to {images_path}")


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def find_mnist_files(root, split):
    """Locate the raw or gzipped MNIST files of a split under root"""
    root = Path(root)
    found = []
    for stem in MNIST_FILES[split]:
        for candidate in (root / stem, root / f"{stem}.gz"):
            if candidate.exists():
                found.append(candidate)
                break
        else:
            raise ArtifactIOError(f"MNIST file {stem}[.gz] not found under {root}")
    return found


def load_mnist(root, split="train"):
    images_path, labels_path = find_mnist_files(root, split)
    return load_idx(images_path, labels_path, name="mnist", split=split)
