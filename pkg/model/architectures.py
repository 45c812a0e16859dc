"""
Architectures
Fixed parameter manifests and forward definitions of the classifiers
"""

import logging
from collections import OrderedDict

import numpy as np

from autodiff import ops
from autodiff.tensor import DEFAULT_DTYPE, Tensor
from common.errors import DimensionError, ParameterError

logger = logging.getLogger(__name__)

IMAGE_SHAPE = (1, 28, 28)
NUM_CLASSES = 10

# Two valid 3x3 convs take 28x28 to 24x24, one 2x2 pool to 12x12: 64 * 12 * 12 = 9216.
MNIST_CNN_MANIFEST = (
    ("conv1.weight", (32, 1, 3, 3)),
    ("conv1.bias", (32,)),
    ("conv2.weight", (64, 32, 3, 3)),
    ("conv2.bias", (64,)),
    ("fc1.weight", (128, 9216)),
    ("fc1.bias", (128,)),
    ("fc2.weight", (NUM_CLASSES, 128)),
    ("fc2.bias", (NUM_CLASSES,)),
)

# Softmax regression on raw pixels; cheap baseline for smoke runs.
MNIST_LINEAR_MANIFEST = (
    ("fc.weight", (NUM_CLASSES, 784)),
    ("fc.bias", (NUM_CLASSES,)),
)


def _fan_in(name, layout):
    """Fan-in of the layer a parameter belongs to"""
    layer = name.split(".")[0]
    weight_shape = dict(layout)[f"{layer}.weight"]
    return int(np.prod(weight_shape[1:]))


def _check_batch(batch):
    if batch.data.ndim != 4 or batch.shape[1:] != IMAGE_SHAPE:
        raise DimensionError("expected an N x 1 x 28 x 28 batch", batch.shape, (-1,) + IMAGE_SHAPE)


def mnist_cnn_forward(params, batch, hyper, train_mode=False, rng=None):
    """conv-relu-conv-relu-pool-dropout-fc-relu-dropout-fc"""
    _check_batch(batch)
    x = ops.add_bias(ops.conv2d(batch, params["conv1.weight"], stride=1), params["conv1.bias"])
    x = ops.relu(x)
    x = ops.add_bias(ops.conv2d(x, params["conv2.weight"], stride=1), params["conv2.bias"])
    x = ops.relu(x)
    x = ops.max_pool2d(x, 2)
    x = ops.dropout(x, hyper["dropout1"], train_mode, rng)
    x = ops.flatten(x)
    x = ops.relu(ops.linear(x, params["fc1.weight"], params["fc1.bias"]))
    x = ops.dropout(x, hyper["dropout2"], train_mode, rng)
    return ops.linear(x, params["fc2.weight"], params["fc2.bias"])


def mnist_linear_forward(params, batch, hyper, train_mode=False, rng=None):
    _check_batch(batch)
    return ops.linear(ops.flatten(batch), params["fc.weight"], params["fc.bias"])


class ArchitectureRegistry:
    """
    Registry of known architectures
    """

    def __init__(self):
        self.architectures = {}

    def register(self, arch_id, manifest, forward, hyper):
        """
        Register an architecture

        Args:
            arch_id: Architecture name stored in checkpoints
            manifest: Ordered (name, shape) pairs
            forward: Callable(params, batch, hyper, train_mode, rng) -> logits
            hyper: Default hyperparameters (dropout rates, class count)
        """
        self.architectures[arch_id] = {
            "manifest": tuple((name, tuple(shape)) for name, shape in manifest),
            "forward": forward,
            "hyper": dict(hyper),
        }
        logger.debug(f"Architecture registered: {arch_id}")

    def get(self, arch_id):
        if arch_id not in self.architectures:
            known = ", ".join(sorted(self.architectures))
            raise ParameterError(f"Unknown architecture '{arch_id}' (known: {known})")
        return self.architectures[arch_id]

    def names(self):
        return sorted(self.architectures)


registry = ArchitectureRegistry()
registry.register("mnist_cnn", MNIST_CNN_MANIFEST, mnist_cnn_forward,
                  {"dropout1": 0.25, "dropout2": 0.5, "num_classes": NUM_CLASSES})
registry.register("mnist_linear", MNIST_LINEAR_MANIFEST, mnist_linear_forward,
                  {"num_classes": NUM_CLASSES})


def manifest(arch_id):
    """Ordered (name, shape) pairs of an architecture"""
    return list(registry.get(arch_id)["manifest"])


def manifest_parameter_count(arch_id):
    return sum(int(np.prod(shape)) for _, shape in manifest(arch_id))


class Model:
    """
    Classifier f_theta: architecture id, named parameters and hyperparameters
    """

    def __init__(self, arch_id, params, hyper=None, seed=0, epoch=0):
        entry = registry.get(arch_id)
        expected = entry["manifest"]
        names = [name for name, _ in expected]
        if list(params) != names:
            raise DimensionError(f"parameters of {arch_id} do not follow the manifest order {names}")
        for name, shape in expected:
            if params[name].shape != shape:
                raise DimensionError(f"parameter {name} has the wrong shape", params[name].shape, shape)
        self.arch_id = arch_id
        self.params = OrderedDict(params)
        self.hyper = dict(entry["hyper"], **(hyper or {}))
        self.seed = seed
        self.epoch = epoch
        self._forward = entry["forward"]

    def forward(self, batch, train_mode=False, rng=None):
        return self._forward(self.params, batch, self.hyper, train_mode, rng)

    def parameters(self):
        return list(self.params.values())

    def count_parameters(self):
        return sum(p.size for p in self.params.values())

    def astype(self, dtype):
        """Copy with every parameter cast to dtype"""
        params = OrderedDict((name, Tensor(t.data.astype(dtype), dtype=dtype, name=name))
                             for name, t in self.params.items())
        return Model(self.arch_id, params, self.hyper, self.seed, self.epoch)

    def __repr__(self):
        return f"Model({self.arch_id}, {self.count_parameters()} parameters, epoch {self.epoch})"


def build_model(arch_id, seed):
    """
    Initialize an architecture with uniform +-1/sqrt(fan_in) weights

    Args:
        arch_id: Registered architecture name
        seed: Integer seed; equal seeds give bit-identical parameters

    Returns:
        Model
    """
    layout = manifest(arch_id)
    rng = np.random.default_rng(seed)
    params = OrderedDict()
    for name, shape in layout:
        bound = 1.0 / np.sqrt(_fan_in(name, layout))
        values = rng.uniform(-bound, bound, size=shape).astype(DEFAULT_DTYPE)
        params[name] = Tensor(values, name=name)
    model = Model(arch_id, params, seed=seed)
    logger.info(f"Model built: {model} (seed {seed})")
    return model


def build_mnist_cnn(seed):
    """Two 3x3 convs, a 2x2 pool and two fully connected layers"""
    return build_model("mnist_cnn", seed)


def forward(model, batch, train_mode=False, rng=None):
    """
    Logits of a batch

    Args:
        model: Model
        batch: Tensor N x 1 x 28 x 28 with pixels in [0, 1]
        train_mode: Enables dropout
        rng: Generator driving dropout in train mode

    Returns:
        Tensor N x num_classes
    """
    return model.forward(batch, train_mode=train_mode, rng=rng)
