"""
Self Check
Runner for the gradient, attack and file-format checks behind `salgrad selfcheck`
"""

import logging
import tempfile
from collections import OrderedDict
from pathlib import Path

import numpy as np

from attacks.attack_spec import AttackSpec
from attacks.gradient_attacks import bim, fgsm, mim, pgd, run_attack
from autodiff import ops
from autodiff.gradcheck import gradient_check
from autodiff.tensor import Tensor
from common.errors import SalgradError
from common.seeding import derive_rng, derive_seed
from data.dataset import Dataset
from data.idx import load_idx, write_idx
from model.architectures import IMAGE_SHAPE, Model, build_model
from model.checkpoint import decode_checkpoint, encode_checkpoint
from schema.config_schemas import ATTACK_KINDS

logger = logging.getLogger(__name__)

GRADIENT_TOLERANCE = 1e-4
GRADIENT_POINTS = 100
IDENTITY_BATCH = 32


class ZeroNoise:
    """Start-noise source for PGD that always returns zeros"""

    def uniform(self, low, high, size):
        return np.zeros(size)


def _weighted_sum(out, weights):
    return ops.reduce_sum(ops.mul(out, Tensor(weights, dtype=out.dtype)))


def _op_cases(rng):
    """
    name -> (point, f) pairs covering every differentiable op

    Ops are looked up on the module at call time, so a replaced gradient
    rule is what gets checked.
    """
    def normal(*shape):
        return rng.standard_normal(shape)

    c34, w34 = normal(3, 4), normal(3, 4)
    w_img, bias3 = normal(2, 3, 2, 2), normal(3)
    kernel, w_conv = normal(3, 2, 3, 3), normal(2, 3, 4, 4)
    w_conv2 = normal(2, 3, 2, 2)
    w_pool = normal(2, 2, 2, 2)
    weight, bias, w_lin = normal(3, 5), normal(3), normal(4, 3)
    w_logits, labels = normal(4, 5), rng.integers(0, 5, size=4)
    q_logits = normal(4, 5)
    image = normal(2, 2, 6, 6)

    def as64(a):
        return Tensor(a, dtype=np.float64)

    return OrderedDict([
        ("add", (normal(3, 4), lambda x: _weighted_sum(ops.add(x, c34), w34))),
        ("sub", (normal(3, 4), lambda x: _weighted_sum(ops.sub(x, c34), w34))),
        ("sub[right]", (normal(3, 4), lambda x: _weighted_sum(ops.sub(as64(c34), x), w34))),
        ("mul", (normal(3, 4), lambda x: _weighted_sum(ops.mul(x, c34), w34))),
        ("scale", (normal(3, 4), lambda x: _weighted_sum(ops.scale(x, -0.7), w34))),
        ("square", (normal(3, 4), lambda x: _weighted_sum(ops.square(x), w34))),
        ("reduce_sum", (normal(3, 4), lambda x: ops.reduce_sum(x))),
        ("mean", (normal(3, 4), lambda x: ops.mean(x))),
        ("flatten", (normal(2, 3, 2, 2), lambda x: _weighted_sum(ops.flatten(x), w_img.reshape(2, -1)))),
        ("add_bias", (normal(2, 3, 2, 2), lambda x: _weighted_sum(ops.add_bias(x, as64(bias3)), w_img))),
        ("add_bias[bias]", (normal(3), lambda b: _weighted_sum(ops.add_bias(as64(w_conv2), b), w_img))),
        ("conv2d", (image, lambda x: _weighted_sum(ops.conv2d(x, as64(kernel)), w_conv))),
        ("conv2d[kernel]", (kernel, lambda k: _weighted_sum(ops.conv2d(as64(image), k), w_conv))),
        ("conv2d[stride=2]", (image, lambda x: _weighted_sum(ops.conv2d(x, as64(kernel), stride=2), w_conv2))),
        ("relu", (normal(3, 4), lambda x: _weighted_sum(ops.relu(x), w34))),
        ("max_pool2d", (normal(2, 2, 4, 4), lambda x: _weighted_sum(ops.max_pool2d(x), w_pool))),
        ("linear", (normal(4, 5), lambda x: _weighted_sum(ops.linear(x, as64(weight), as64(bias)), w_lin))),
        ("linear[weight]", (weight, lambda w: _weighted_sum(ops.linear(as64(w_logits), w, as64(bias)), w_lin))),
        ("linear[bias]", (bias, lambda b: _weighted_sum(ops.linear(as64(w_logits), as64(weight), b), w_lin))),
        ("dropout", (normal(3, 4), lambda x: _weighted_sum(
            ops.dropout(x, 0.5, True, np.random.default_rng(7)), w34))),
        ("log_softmax", (normal(4, 5), lambda x: _weighted_sum(ops.log_softmax(x), w_logits))),
        ("cross_entropy", (normal(4, 5), lambda x: ops.cross_entropy(ops.log_softmax(x), labels))),
        ("kl_divergence[p]", (normal(4, 5), lambda x: ops.kl_divergence(
            ops.log_softmax(x), ops.log_softmax(as64(q_logits))))),
        ("kl_divergence[q]", (normal(4, 5), lambda x: ops.kl_divergence(
            ops.log_softmax(as64(q_logits)), ops.log_softmax(x)))),
    ])


class SelfCheckRunner:
    """
    Runs the self-check suite and collects itemized results
    """

    def __init__(self, seed=0, points=GRADIENT_POINTS, tolerance=GRADIENT_TOLERANCE):
        self.seed = seed
        self.points = points
        self.tolerance = tolerance
        self.test_results = []
        logger.info("Self-check runner initialized")

    def _record(self, name, passed, detail):
        result = {'name': name, 'passed': bool(passed), 'detail': detail}
        if not passed:
            logger.error(f"Self-check failed: {name}: {detail}")
        self.test_results.append(result)
        return result

    def _gradient(self, name, point, f):
        try:
            outcome = gradient_check(f, point, points=self.points, tolerance=self.tolerance,
                                     rng=derive_rng(self.seed, 'gradcheck', name))
        except SalgradError as e:
            return self._record(f"gradient {name}", False, str(e))
        return self._record(f"gradient {name}", outcome.passed(self.tolerance),
                            f"max relative error {outcome.max_error:.2e} over {outcome.checked} points "
                            f"({outcome.excluded} kinks excluded)")

    def check_op_gradients(self):
        """Finite-difference check of every op in 64-bit"""
        rng = np.random.default_rng(derive_seed(self.seed, 'ops'))
        return [self._gradient(name, point, f) for name, (point, f) in _op_cases(rng).items()]

    def check_model_gradients(self, arch_id='mnist_cnn'):
        """Finite-difference check of the full classifier loss, input and first-layer weights"""
        model = build_model(arch_id, derive_seed(self.seed, 'model') % (2 ** 32)).astype(np.float64)
        rng = np.random.default_rng(derive_seed(self.seed, 'model-input'))
        x = rng.random((1,) + IMAGE_SHAPE)
        labels = rng.integers(0, 10, size=1)

        def loss_wrt_input(batch):
            return ops.cross_entropy(ops.log_softmax(model.forward(batch)), labels)

        first = next(iter(model.params))

        def loss_wrt_param(weight):
            params = OrderedDict(model.params)
            params[first] = weight
            swapped = Model(model.arch_id, params, model.hyper)
            return ops.cross_entropy(ops.log_softmax(swapped.forward(Tensor(x))), labels)

        return [self._gradient(f"{arch_id} loss[input]", x, loss_wrt_input),
                self._gradient(f"{arch_id} loss[{first}]", model.params[first].data, loss_wrt_param)]

    def check_attack_identities(self, epsilon=0.1, steps=3):
        """bim(1, alpha=eps) == fgsm, mim(mu=0) == bim, pgd(zero start) == bim, all bitwise"""
        model = build_model('mnist_cnn', derive_seed(self.seed, 'identities') % (2 ** 32))
        rng = np.random.default_rng(derive_seed(self.seed, 'identity-batch'))
        x = rng.random((IDENTITY_BATCH,) + IMAGE_SHAPE).astype(np.float32)
        y = rng.integers(0, 10, size=IDENTITY_BATCH)
        alpha = epsilon / 4

        reference = bim(model, x, y, epsilon, alpha, steps).adversarial
        pairs = [
            ("bim(steps=1, alpha=eps) == fgsm", bim(model, x, y, epsilon, epsilon, 1).adversarial,
             fgsm(model, x, y, epsilon).adversarial),
            ("mim(mu=0) == bim", mim(model, x, y, epsilon, alpha, steps, 0.0).adversarial, reference),
            ("pgd(zero start) == bim", pgd(model, x, y, epsilon, alpha, steps, ZeroNoise()).adversarial,
             reference),
        ]
        results = []
        for name, left, right in pairs:
            differing = int(np.sum(left != right))
            results.append(self._record(name, differing == 0, f"{differing} differing pixels"))
        return results

    def check_attack_containment(self, epsilon=0.1):
        """Every attack stays in the epsilon-box and returns its input at epsilon 0"""
        model = build_model('mnist_linear', derive_seed(self.seed, 'containment') % (2 ** 32))
        rng = np.random.default_rng(derive_seed(self.seed, 'containment-batch'))
        x = rng.random((8,) + IMAGE_SHAPE).astype(np.float32)
        y = rng.integers(0, 10, size=8)
        results = []
        for kind in ATTACK_KINDS:
            attack_rng = derive_rng(self.seed, kind)
            moved = run_attack(model, x, y, AttackSpec.with_defaults(kind, epsilon), rng=attack_rng)
            still = run_attack(model, x, y, AttackSpec.with_defaults(kind, 0.0), rng=attack_rng)
            passed = moved.contained(epsilon) and np.array_equal(still.adversarial, x)
            results.append(self._record(f"{kind} containment", passed,
                                        f"max distance {float(moved.perturbation_norm.max()):.4g}"))
        return results

    def check_roundtrips(self):
        """IDX and checkpoint files read back bit-exactly"""
        rng = np.random.default_rng(derive_seed(self.seed, 'roundtrip'))
        pixels = rng.integers(0, 256, size=(5, 1, 28, 28)).astype(np.float32) / np.float32(255.0)
        dataset = Dataset(pixels, rng.integers(0, 10, size=5), name="roundtrip", split="test")
        with tempfile.TemporaryDirectory() as tmp:
            images_path, labels_path = Path(tmp) / "images.idx", Path(tmp) / "labels.idx"
            write_idx(dataset, images_path, labels_path)
            back = load_idx(images_path, labels_path, name="roundtrip", split="test")
        idx_ok = np.array_equal(back.images, dataset.images) and np.array_equal(back.labels, dataset.labels)

        model = build_model('mnist_cnn', derive_seed(self.seed, 'checkpoint') % (2 ** 32))
        restored = decode_checkpoint(encode_checkpoint(model), expected_arch='mnist_cnn')
        ckpt_ok = (restored.seed == model.seed and restored.epoch == model.epoch
                   and all(np.array_equal(restored.params[n].data, p.data) for n, p in model.params.items()))
        return [self._record("idx roundtrip", idx_ok, f"{len(dataset)} samples"),
                self._record("checkpoint roundtrip", ckpt_ok, f"{model.count_parameters()} parameters")]

    def run_all_checks(self):
        """
        Run every check

        Returns:
            Summary dict with total, passed, failed and the itemized results
        """
        self.test_results = []
        self.check_op_gradients()
        self.check_model_gradients()
        self.check_attack_identities()
        self.check_attack_containment()
        self.check_roundtrips()

        passed = sum(1 for r in self.test_results if r['passed'])
        logger.info(f"Self-check: {passed}/{len(self.test_results)} passed")
        return {
            'total': len(self.test_results),
            'passed': passed,
            'failed': len(self.test_results) - passed,
            'results': list(self.test_results)
        }
