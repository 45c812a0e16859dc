"""
Image Dump
Writes images as binary 8-bit PGM files
"""

import logging
from pathlib import Path

import numpy as np

from common.errors import ArtifactIOError, DimensionError

logger = logging.getLogger(__name__)


def encode_pgm(image):
    """Single-channel image in [0, 1] -> P5 PGM bytes"""
    image = np.asarray(image)
    if image.ndim == 3:
        if image.shape[0] != 1:
            raise DimensionError("PGM images are single-channel", image.shape)
        image = image[0]
    if image.ndim != 2:
        raise DimensionError("expected an H x W image", image.shape)
    height, width = image.shape
    pixels = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    return f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes()


def decode_pgm(raw):
    """P5 PGM bytes -> float32 image in [0, 1]"""
    magic, dims, maxval, payload = raw.split(b"\n", 3)
    if magic != b"P5":
        raise DimensionError(f"not a binary PGM: {magic!r}")
    width, height = (int(v) for v in dims.split())
    pixels = np.frombuffer(payload[:width * height], dtype=np.uint8).reshape(height, width)
    return pixels.astype(np.float32) / np.float32(int(maxval))


def dump_pgm(images, out_dir, prefix, epsilon, start_index=0):
    """
    Write one PGM per image as <prefix>_<eps>_<index>.pgm

    Args:
        images: Array N x 1 x H x W in [0, 1]
        out_dir: Output directory, created if missing
        prefix: File name stem, e.g. 'adv_fgsm'
        epsilon: Budget written into the file name
        start_index: Index of the first image

    Returns:
        List of written paths
    """
    out_dir = Path(out_dir)
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for offset, image in enumerate(np.asarray(images)):
            path = out_dir / f"{prefix}_{epsilon:g}_{start_index + offset}.pgm"
            path.write_bytes(encode_pgm(image))
            written.append(path)
    except OSError as e:
        raise ArtifactIOError(f"cannot write images under {out_dir}: {e}")
    logger.info(f"Wrote {len(written)} PGM images to {out_dir}")
    return written
