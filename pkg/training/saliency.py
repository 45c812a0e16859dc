"""
Saliency
Input gradients, low-gradient masking and the joint masked-KL loss
"""

import logging
from dataclasses import dataclass

import numpy as np

from autodiff import ops
from autodiff.tensor import Tape, Tensor, backward
from common.errors import DimensionError, ParameterError
from common.seeding import next_seed

logger = logging.getLogger(__name__)

FILL_RANGES = ("image", "remaining")


def _as_array(batch):
    return batch.data if isinstance(batch, Tensor) else np.asarray(batch)


def classification_loss(model, batch, labels, train_mode=False, rng=None):
    """Cross-entropy of the model on a batch, plus the logits"""
    logits = model.forward(batch, train_mode=train_mode, rng=rng)
    return ops.cross_entropy(ops.log_softmax(logits), labels), logits


def input_gradients(model, batch, labels):
    """
    Gradient of the cross-entropy loss with respect to every input pixel

    Dropout is disabled for this pass.

    Args:
        model: Classifier
        batch: Array or Tensor N x C x H x W
        labels: Class index per sample

    Returns:
        Array shaped like batch
    """
    with Tape() as tape:
        x = tape.watch(Tensor(_as_array(batch)))
        loss, _ = classification_loss(model, x, labels, train_mode=False)
    return backward(loss, tape, [x])[x]


def saliency_map(model, batch, labels):
    """|input gradient| scaled to [0, 1] per image"""
    magnitude = np.abs(input_gradients(model, batch, labels))
    peak = magnitude.reshape(magnitude.shape[0], -1).max(axis=1)
    peak = np.where(peak > 0, peak, 1.0).reshape((-1,) + (1,) * (magnitude.ndim - 1))
    return (magnitude / peak).astype(np.float32)


@dataclass
class MaskedBatch:
    """Original batch, its masked copy and the replaced-pixel mask"""

    original: np.ndarray
    masked: np.ndarray
    mask: np.ndarray

    @property
    def replaced_per_image(self):
        return self.mask.reshape(self.mask.shape[0], -1).sum(axis=1)


def mask_low_gradient_pixels(batch, grads, mask_fraction, rng, fill_range="image"):
    """
    Replace the lowest-|gradient| pixels of every image with random values

    Per image, floor(K * pixels) pixels with the smallest |gradient| are
    replaced; equal magnitudes are masked lower flat index first. Fill
    values are uniform over the image's [min, max] ('image') or over the
    range of the pixels left unmasked ('remaining').

    Args:
        batch: Array N x C x H x W
        grads: Input gradients, same shape
        mask_fraction: K in [0, 1]
        rng: Generator for the fill values
        fill_range: 'image' or 'remaining'

    Returns:
        MaskedBatch
    """
    if not 0.0 <= mask_fraction <= 1.0:
        raise ParameterError(f"mask fraction must be in [0, 1], got {mask_fraction}")
    if fill_range not in FILL_RANGES:
        raise ParameterError(f"fill range must be one of {FILL_RANGES}, got '{fill_range}'")
    original = _as_array(batch)
    grads = _as_array(grads)
    if grads.shape != original.shape:
        raise DimensionError("gradients must match the batch", grads.shape, original.shape)

    n = original.shape[0]
    flat = original.reshape(n, -1)
    pixels = flat.shape[1]
    count = int(np.floor(mask_fraction * pixels))
    mask = np.zeros(flat.shape, dtype=bool)
    masked = flat.copy()
    if count == 0:
        return MaskedBatch(original, masked.reshape(original.shape), mask.reshape(original.shape))

    order = np.argsort(np.abs(grads.reshape(n, -1)), axis=1, kind="stable")[:, :count]
    np.put_along_axis(mask, order, True, axis=1)
    for i in range(n):
        source = flat[i]
        if fill_range == "remaining" and count < pixels:
            source = flat[i][~mask[i]]
        low, high = float(source.min()), float(source.max())
        masked[i, order[i]] = rng.uniform(low, high, size=count).astype(flat.dtype)
    return MaskedBatch(original, masked.reshape(original.shape), mask.reshape(original.shape))


def saliency_terms(model, batch, masked, labels, lam, rng=None, train_mode=True):
    """
    Joint loss and the logits on the original batch

    Both forwards share one dropout mask: a single seed is drawn from rng
    and each forward replays it. With lam == 0 the masked forward is
    skipped and the loss is the plain cross-entropy.
    """
    if lam < 0:
        raise ParameterError(f"lambda must be >= 0, got {lam}")
    original = batch if isinstance(batch, Tensor) else Tensor(batch)
    seed = next_seed(rng) if rng is not None else 0
    loss, logits = classification_loss(model, original, labels, train_mode, np.random.default_rng(seed))
    if lam == 0:
        return loss, logits
    masked = masked if isinstance(masked, Tensor) else Tensor(masked)
    if masked.shape != original.shape:
        raise DimensionError("masked batch must match the original", masked.shape, original.shape)
    masked_logits = model.forward(masked, train_mode=train_mode, rng=np.random.default_rng(seed))
    divergence = ops.kl_divergence(ops.log_softmax(logits), ops.log_softmax(masked_logits))
    return ops.add(loss, ops.scale(divergence, lam)), logits


def saliency_loss(model, batch, masked, labels, lam, rng=None, train_mode=True):
    """
    cross_entropy(f(X), y) + lam * KL(f(X) || f(X_masked)), averaged over the batch

    Args:
        model: Classifier
        batch: Original images
        masked: Masked images, same shape
        labels: Class indices
        lam: KL weight, >= 0
        rng: Generator whose next seed drives the shared dropout mask
        train_mode: Enables dropout

    Returns:
        Scalar Tensor
    """
    return saliency_terms(model, batch, masked, labels, lam, rng, train_mode)[0]


def regular_terms(model, batch, labels, rng=None, train_mode=True):
    """Plain cross-entropy with the same seed discipline as saliency_terms"""
    batch = batch if isinstance(batch, Tensor) else Tensor(batch)
    seed = next_seed(rng) if rng is not None else 0
    return classification_loss(model, batch, labels, train_mode, np.random.default_rng(seed))
