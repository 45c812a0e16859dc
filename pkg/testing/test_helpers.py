"""
Test Helpers
Reference implementations and toy models shared by the test suite
"""

import logging
from pathlib import Path

import numpy as np

from autodiff import ops
from autodiff.tensor import Tensor
from data.dataset import Dataset
from data.idx import MNIST_FILES, write_idx

logger = logging.getLogger(__name__)


class ToyLinearClassifier:
    """
    Softmax regression on flattened pixels

    Exposes the same forward() as Model, so attacks, saliency and
    evaluation accept it.
    """

    def __init__(self, weight, bias=None, dtype=np.float64):
        self.weight = Tensor(np.asarray(weight), dtype=dtype, name="weight")
        self.bias = Tensor(np.asarray(bias), dtype=dtype, name="bias") if bias is not None else None

    def forward(self, batch, train_mode=False, rng=None):
        x = batch if isinstance(batch, Tensor) else Tensor(batch, dtype=self.weight.dtype)
        return ops.linear(ops.flatten(x), self.weight, self.bias)

    def parameters(self):
        return [p for p in (self.weight, self.bias) if p is not None]


def binary_logistic_model(w, dtype=np.float64):
    """
    Two-class model with logits [0, w.x], so P(class 1) = sigmoid(w.x)

    Args:
        w: Weight vector over the flattened pixels
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    return ToyLinearClassifier(np.stack([np.zeros_like(w), w]), dtype=dtype)


def constant_class_model(label, num_classes=10, pixels=784):
    """Model that ignores its input and always predicts label"""
    bias = np.zeros(num_classes)
    bias[label] = 1.0
    return ToyLinearClassifier(np.zeros((num_classes, pixels)), bias, dtype=np.float32)


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def naive_conv2d(x, kernel, stride=1):
    """Loop reference for valid cross-correlation"""
    n, c, h, w = x.shape
    o, _, kh, kw = kernel.shape
    out_h, out_w = (h - kh) // stride + 1, (w - kw) // stride + 1
    out = np.zeros((n, o, out_h, out_w), dtype=np.float64)
    for b in range(n):
        for f in range(o):
            for i in range(out_h):
                for j in range(out_w):
                    patch = x[b, :, i * stride:i * stride + kh, j * stride:j * stride + kw]
                    out[b, f, i, j] = np.sum(patch * kernel[f])
    return out


def random_images(n, seed=0, shape=(1, 28, 28)):
    """Uniform [0, 1) float32 images"""
    return np.random.default_rng(seed).random((n,) + tuple(shape)).astype(np.float32)


def random_labels(n, seed=0, num_classes=10):
    return np.random.default_rng(seed).integers(0, num_classes, size=n)


def byte_valued_dataset(n, seed=0, split="train"):
    """Dataset whose pixels are exact multiples of 1/255, as IDX files store them"""
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(n, 1, 28, 28)).astype(np.float32) / np.float32(255.0)
    return Dataset(pixels, rng.integers(0, 10, size=n), name="mnist", split=split)


def write_tiny_mnist(root, n_train=64, n_test=32, seed=0):
    """Write a small MNIST-layout directory (four uncompressed IDX files)"""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for split, n in (("train", n_train), ("test", n_test)):
        images_name, labels_name = MNIST_FILES[split]
        write_idx(byte_valued_dataset(n, seed + (split == "test"), split),
                  root / images_name, root / labels_name)
    return root


def relu_with_wrong_gradient(x):
    """relu whose gradient rule is doubled; used to prove the gradient checks can fail"""
    x_data = x.data

    def vjp(g, needs):
        return (2 * g * (x_data > 0),)

    return ops._emit("relu", np.maximum(x_data, 0), (x,), vjp)
