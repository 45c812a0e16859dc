"""
Checkpoints
Bit-exact binary persistence of model parameters
"""

import logging
import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from autodiff.tensor import Tensor
from common.errors import (ArtifactIOError, CheckpointError, CheckpointManifestError,
                           CheckpointMagicError, CheckpointTruncatedError,
                           CheckpointVersionError, ParameterError)
from model.architectures import Model, manifest

logger = logging.getLogger(__name__)

MAGIC = b"SGCK"
FORMAT_VERSION = 1
PAYLOAD_DTYPE = np.dtype("<f4")


def _pack_string(value):
    raw = value.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def encode_checkpoint(model):
    """
    Serialize a model

    Layout (little-endian): magic, u32 version, length-prefixed arch id,
    u64 seed, u32 epoch, u32 tensor count, then per tensor a
    length-prefixed name, u32 rank, u32 dims and the f32 payload.
    """
    try:
        header = struct.pack("<QII", model.seed, model.epoch, len(model.params))
    except struct.error as e:
        raise CheckpointError(f"cannot encode seed {model.seed} / epoch {model.epoch} of {model.arch_id}: {e}")
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION), _pack_string(model.arch_id), header]
    for name, tensor in model.params.items():
        parts.append(_pack_string(name))
        parts.append(struct.pack("<I", tensor.data.ndim))
        parts.append(struct.pack(f"<{tensor.data.ndim}I", *tensor.shape))
        parts.append(tensor.data.astype(PAYLOAD_DTYPE).tobytes(order="C"))
    return b"".join(parts)


class _Cursor:
    """Sequential reader that reports truncation instead of crashing"""

    def __init__(self, raw):
        self.raw = raw
        self.offset = 0

    def take(self, count, what):
        end = self.offset + count
        if end > len(self.raw):
            raise CheckpointTruncatedError(
                f"checkpoint truncated while reading {what}: need {count} bytes at offset "
                f"{self.offset}, file has {len(self.raw)}"
            )
        chunk = self.raw[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def string(self, what):
        (length,) = self.unpack("<I", what)
        try:
            return self.take(length, what).decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointManifestError(f"{what} is not valid UTF-8: {e}")


def decode_checkpoint(raw, expected_arch=None):
    """
    Rebuild a model from checkpoint bytes

    Args:
        raw: Checkpoint bytes
        expected_arch: If given, the stored architecture must match it

    Returns:
        Model
    """
    cursor = _Cursor(raw)
    magic = cursor.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise CheckpointMagicError(f"bad checkpoint magic {magic!r}, expected {MAGIC!r}")
    (version,) = cursor.unpack("<I", "version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"unknown checkpoint version {version}, supported: {FORMAT_VERSION}")
    arch_id = cursor.string("architecture id")
    if expected_arch is not None and arch_id != expected_arch:
        raise CheckpointManifestError(f"checkpoint holds architecture '{arch_id}', expected '{expected_arch}'")
    try:
        layout = manifest(arch_id)
    except ParameterError as e:
        raise CheckpointManifestError(str(e))
    seed, epoch, count = cursor.unpack("<QII", "header")
    if count != len(layout):
        raise CheckpointManifestError(f"{arch_id} has {len(layout)} tensors, checkpoint stores {count}")

    params = OrderedDict()
    for expected_name, expected_shape in layout:
        name = cursor.string("tensor name")
        (rank,) = cursor.unpack("<I", f"rank of {name}")
        shape = cursor.unpack(f"<{rank}I", f"dims of {name}")
        if name != expected_name or tuple(shape) != expected_shape:
            raise CheckpointManifestError(
                f"tensor {name}{tuple(shape)} does not match manifest entry {expected_name}{expected_shape}"
            )
        nbytes = int(np.prod(shape)) * PAYLOAD_DTYPE.itemsize
        payload = cursor.take(nbytes, f"payload of {name}")
        values = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).reshape(shape).astype(np.float32)
        params[name] = Tensor(values, name=name)
    if cursor.offset != len(raw):
        raise CheckpointManifestError(f"{len(raw) - cursor.offset} trailing bytes after the last tensor")
    return Model(arch_id, params, seed=seed, epoch=epoch)


def save_checkpoint(model, path):
    """
    Write a checkpoint file

    Args:
        model: Model to persist
        path: Destination file
    """
    path = Path(path)
    try:
        path.write_bytes(encode_checkpoint(model))
    except OSError as e:
        raise ArtifactIOError(f"cannot write checkpoint {path}: {e}")
    logger.info(f"Checkpoint saved to {path}")
    return path


def load_checkpoint(path, expected_arch=None):
    """
    Read a checkpoint file

    Args:
        path: Checkpoint file
        expected_arch: Optional architecture the file must hold

    Returns:
        Model
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ArtifactIOError(f"cannot read checkpoint {path}: {e}")
    model = decode_checkpoint(raw, expected_arch=expected_arch)
    logger.info(f"Checkpoint loaded from {path}: {model}")
    return model
