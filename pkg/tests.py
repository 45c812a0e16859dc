"""
Comprehensive Unit Tests for Salgrad
Tests autodiff, model, saliency training, attacks, data, evaluation and the CLI
"""

import contextlib
import gzip
import io
import json
import math
import os
import re
import struct
import tempfile
import unittest
from collections import OrderedDict
from pathlib import Path
from types import SimpleNamespace
from unittest import mock

import numpy as np
import requests

from attacks.attack_spec import AttackSpec
from attacks.gradient_attacks import bim, fgsm, mim, pgd, project, run_attack
from attacks.image_dump import decode_pgm, dump_pgm
from autodiff import ops
from autodiff.gradcheck import finite_difference_check, gradient_check
from autodiff.tensor import Tape, Tensor, backward
from cli.commands import load_split, main
from cli.run_config import RunConfig, parse_eps_grid
from cli.settings import load_settings
from common.errors import (ArtifactIOError, CheckpointError, CheckpointMagicError, CheckpointManifestError,
                           CheckpointTruncatedError, CheckpointVersionError, ConfigError,
                           ContractError, DimensionError, IdxCountMismatchError, IdxMagicError,
                           IdxTruncatedError, LabelIndexError, NonFiniteError, ParameterError,
                           UsageError)
from data.dataset import Dataset, batches, subset, train_test_split
from data.fetch import fetch_mnist
from data.idx import (encode_idx_images, encode_idx_labels, load_idx, load_mnist,
                      parse_idx_images, parse_idx_labels, write_idx)
from data.synthetic import contrast_rule_accuracy, synthetic_two_class
from evaluation.report import (compare_curves, read_csv, render_svg, soft_monotonicity,
                               summary_lines, write_csv, write_summary)
from evaluation.robustness import (CurvePoint, RobustnessCurve, accuracy, count_correct,
                                   robustness_sweep)
from model.architectures import (IMAGE_SHAPE, build_mnist_cnn, build_model, forward, manifest,
                                 manifest_parameter_count)
from model.checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from model.optimizer import adadelta_step, init_adadelta
from schema.config_schemas import get_config_schema
from schema.schema_validator import SchemaValidator
from testing.selfcheck import SelfCheckRunner, ZeroNoise
from testing.test_helpers import (ToyLinearClassifier, binary_logistic_model, byte_valued_dataset,
                                  constant_class_model, naive_conv2d, random_images, random_labels,
                                  relu_with_wrong_gradient, sigmoid, write_tiny_mnist)
from training.saliency import (classification_loss, input_gradients, mask_low_gradient_pixels,
                               saliency_loss, saliency_map)
from training.trainer import TrainConfig, read_metrics, train, train_epoch

CNN_PARAMETER_COUNT = 1199882


def log_softmax_reference(z):
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def run_cli(argv):
    """Run main() and capture (exit code, stdout, stderr)"""
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(list(argv) + ['--quiet', '--log-level', 'ERROR'])
    return code, out.getvalue(), err.getvalue()


class AutodiffTestCase(unittest.TestCase):
    """Unit tests for tensors, the tape and the differentiable ops"""

    @classmethod
    def setUpClass(cls):
        print("\n" + "=" * 60)
        print("Salgrad - Autodiff Tests")
        print("=" * 60)

    # Test 1: Convolution examples
    def test_01_conv2d_examples(self):
        """Unit kernel, all-ones kernel and the loop oracle"""
        print("\n1. Testing conv2d...")

        x = Tensor([[[[1, 2], [3, 4]]]])
        out = ops.conv2d(x, Tensor([[[[1]]]]), stride=1)
        np.testing.assert_array_equal(out.data, x.data)

        ones = ops.conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))))
        self.assertEqual(ones.shape, (1, 1, 1, 1))
        self.assertEqual(float(ones.data[0, 0, 0, 0]), 9.0)

        rng = np.random.default_rng(3)
        image, kernel = rng.standard_normal((1, 1, 5, 5)), rng.standard_normal((1, 1, 3, 3))
        result = ops.conv2d(Tensor(image), Tensor(kernel)).data
        np.testing.assert_allclose(result, naive_conv2d(image, kernel), atol=1e-6)

        wide, kernels = rng.standard_normal((2, 3, 7, 7)), rng.standard_normal((4, 3, 3, 3))
        strided = ops.conv2d(Tensor(wide), Tensor(kernels), stride=2).data
        self.assertEqual(strided.shape, (2, 4, 3, 3))
        np.testing.assert_allclose(strided, naive_conv2d(wide, kernels, stride=2), atol=1e-9)
        print("   [OK] conv2d matches the loop reference")

    # Test 2: Convolution shape errors
    def test_02_conv2d_shape_errors(self):
        """Channel mismatch and undersized input report both shapes"""
        print("\n2. Testing conv2d shape errors...")

        with self.assertRaises(DimensionError) as ctx:
            ops.conv2d(Tensor(np.zeros((1, 2, 5, 5))), Tensor(np.zeros((1, 3, 3, 3))))
        self.assertIn("(1, 2, 5, 5)", str(ctx.exception))
        self.assertIn("(1, 3, 3, 3)", str(ctx.exception))

        with self.assertRaises(DimensionError):
            ops.conv2d(Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 3, 3))))
        print("   [OK] Shape mismatches rejected")

    # Test 3: relu, max pool, linear
    def test_03_relu_pool_linear(self):
        """Layer forward definitions"""
        print("\n3. Testing relu, max_pool2d and linear...")

        np.testing.assert_array_equal(ops.relu(Tensor([-1.0, 0.0, 2.0])).data, [0.0, 0.0, 2.0])

        pooled = ops.max_pool2d(Tensor(np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)))
        np.testing.assert_array_equal(pooled.data[0, 0], [[5, 7], [13, 15]])

        out = ops.linear(Tensor([[1.0, 2.0]]), Tensor([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]),
                         Tensor([0.5, 0.0, -1.0]))
        np.testing.assert_allclose(out.data, [[1.5, 2.0, 2.0]])

        with self.assertRaises(DimensionError):
            ops.linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))
        print("   [OK] Layers compute their definitions")

    # Test 4: Max pool tie routing
    def test_04_max_pool_ties(self):
        """Ties route the gradient to the first maximum"""
        print("\n4. Testing max_pool2d tie routing...")

        with Tape() as tape:
            x = tape.watch(Tensor(np.ones((1, 1, 2, 2))))
            loss = ops.reduce_sum(ops.max_pool2d(x))
        grad = backward(loss, tape, [x])[x]
        np.testing.assert_array_equal(grad[0, 0], [[1.0, 0.0], [0.0, 0.0]])
        print("   [OK] Gradient routed to the first maximum")

    # Test 5: Dropout
    def test_05_dropout(self):
        """p=0 and eval mode are identities; survivors are scaled"""
        print("\n5. Testing dropout...")

        x = Tensor(np.random.default_rng(0).random((4, 8)))
        self.assertIs(ops.dropout(x, 0.0, True, np.random.default_rng(1)), x)
        self.assertIs(ops.dropout(x, 0.5, False), x)

        dropped = ops.dropout(x, 0.5, True, np.random.default_rng(1)).data
        kept = dropped != 0
        np.testing.assert_allclose(dropped[kept], x.data[kept] * 2.0, rtol=1e-6)

        again = ops.dropout(x, 0.5, True, np.random.default_rng(1)).data
        np.testing.assert_array_equal(dropped, again)

        for p in (1.0, 1.5, -0.1):
            with self.assertRaises(ParameterError):
                ops.dropout(x, p, True, np.random.default_rng(1))
        with self.assertRaises(ContractError):
            ops.dropout(x, 0.5, True)
        print("   [OK] Dropout modes behave")

    # Test 6: log_softmax
    def test_06_log_softmax(self):
        """Symmetry, overflow safety, direct formula and shift invariance"""
        print("\n6. Testing log_softmax...")

        half = math.log(0.5)
        np.testing.assert_allclose(ops.log_softmax(Tensor([0.0, 0.0])).data, [half, half])
        np.testing.assert_allclose(ops.log_softmax(Tensor([1000.0, 1000.0])).data, [half, half])

        z = np.array([1.0, 2.0, 3.0])
        direct = np.log(np.exp(z) / np.exp(z).sum())
        np.testing.assert_allclose(ops.log_softmax(Tensor(z)).data, direct, atol=1e-9)

        np.testing.assert_allclose(ops.log_softmax(Tensor(z + 17.5)).data,
                                   ops.log_softmax(Tensor(z)).data, atol=1e-9)
        print("   [OK] log_softmax stable and exact")

    # Test 7: Cross-entropy
    def test_07_cross_entropy(self):
        """Perfect, uniform and hand-computed batches"""
        print("\n7. Testing cross_entropy...")

        confident = ops.log_softmax(Tensor([[50.0, 0.0, 0.0]]))
        self.assertAlmostEqual(ops.cross_entropy(confident, [0]).item(), 0.0, places=9)

        uniform = ops.log_softmax(Tensor(np.zeros((1, 10))))
        self.assertAlmostEqual(ops.cross_entropy(uniform, [3]).item(), 2.302585, places=6)

        rows = np.log(np.array([[0.7, 0.2, 0.1], [0.25, 0.25, 0.5]]))
        expected = (-math.log(0.7) - math.log(0.5)) / 2
        self.assertAlmostEqual(ops.cross_entropy(Tensor(rows), [0, 2]).item(), expected, places=12)
        print("   [OK] Cross-entropy values")

    # Test 8: Label errors
    def test_08_cross_entropy_label_error(self):
        """Out-of-range label names the sample"""
        print("\n8. Testing out-of-range labels...")

        log_probs = ops.log_softmax(Tensor(np.zeros((3, 4))))
        with self.assertRaises(LabelIndexError) as ctx:
            ops.cross_entropy(log_probs, [0, 1, 4])
        self.assertEqual(ctx.exception.sample, 2)
        self.assertIsInstance(ctx.exception, IndexError)
        print(f"   [OK] {ctx.exception}")

    # Test 9: KL divergence
    def test_09_kl_divergence(self):
        """Identical inputs, the two-point example and asymmetry"""
        print("\n9. Testing kl_divergence...")

        p = Tensor(np.log([[0.5, 0.5]]))
        q = Tensor(np.log([[0.25, 0.75]]))
        self.assertLess(abs(ops.kl_divergence(p, p).item()), 1e-12)

        forward_kl = ops.kl_divergence(p, q).item()
        self.assertAlmostEqual(forward_kl, 0.5 * math.log(2) + 0.5 * math.log(2 / 3), places=12)
        self.assertAlmostEqual(forward_kl, 0.14384, places=5)

        reverse_kl = ops.kl_divergence(q, p).item()
        self.assertNotAlmostEqual(forward_kl, reverse_kl, places=6)
        print(f"   [OK] KL(p||q)={forward_kl:.5f}, KL(q||p)={reverse_kl:.5f}")

    # Test 10: backward examples
    def test_10_backward_examples(self):
        """Linear functional and the hand-differentiated quadratic"""
        print("\n10. Testing backward...")

        with Tape() as tape:
            x = tape.watch(Tensor(np.random.default_rng(0).random((2, 3, 4))))
            loss = ops.reduce_sum(x)
        np.testing.assert_array_equal(backward(loss, tape, [x])[x], np.ones((2, 3, 4)))

        with Tape() as tape:
            x = tape.watch(Tensor([[1.0, 1.0]]))
            w = Tensor([[1.0, 2.0]])
            loss = ops.reduce_sum(ops.square(ops.sub(ops.linear(x, w), [[1.0]])))
        grads = backward(loss, tape, [x])
        np.testing.assert_allclose(grads[x], [[4.0, 8.0]])
        np.testing.assert_allclose(grads[x.id], [[4.0, 8.0]])
        print("   [OK] Gradients [4, 8]")

    # Test 11: backward contracts
    def test_11_backward_contracts(self):
        """Non-scalar loss, unreachable targets and tape ordering"""
        print("\n11. Testing backward contracts...")

        with Tape() as tape:
            x = tape.watch(Tensor(np.ones((2, 2))))
            unused = tape.watch(Tensor(np.ones(3)))
            doubled = ops.scale(x, 2.0)
            loss = ops.reduce_sum(doubled)
        with self.assertRaises(ContractError):
            backward(doubled, tape, [x])

        grads = backward(loss, tape, [x, unused])
        np.testing.assert_array_equal(grads[unused], np.zeros(3))
        np.testing.assert_array_equal(grads[x], np.full((2, 2), 2.0))

        ids = [node.output for node in tape.nodes]
        self.assertEqual(ids, sorted(ids))
        for node in tape.nodes:
            self.assertTrue(all(parent < node.output for parent in node.parents))
        print("   [OK] Contracts hold")

    # Test 12: Determinism and dtype
    def test_12_backward_determinism(self):
        """Identical inputs give bit-identical gradients of the input dtype"""
        print("\n12. Testing backward determinism...")

        model = build_model('mnist_linear', 5)
        images = random_images(4, seed=1)
        labels = random_labels(4, seed=2)
        first = input_gradients(model, images, labels)
        second = input_gradients(model, images, labels)
        np.testing.assert_array_equal(first, second)
        self.assertEqual(first.dtype, np.float32)
        print("   [OK] Gradients reproducible")

    # Test 13: Non-finite outputs
    def test_13_non_finite(self):
        """NaN or Inf outputs raise"""
        print("\n13. Testing non-finite detection...")

        with self.assertRaises(NonFiniteError):
            ops.scale(Tensor([1e308, 1.0]), 10.0)
        print("   [OK] Overflow detected")

    # Test 14: Finite-difference check examples
    def test_14_finite_difference_examples(self):
        """Quadratic exactness and kink exclusion"""
        print("\n14. Testing finite_difference_check...")

        error = finite_difference_check(lambda t: ops.reduce_sum(ops.square(t)), [0.5, -1.5, 2.0, 3.0])
        self.assertLess(error, 1e-8)

        result = gradient_check(lambda t: ops.reduce_sum(ops.relu(t)), [0.0, 1.0, -1.0])
        self.assertEqual(result.excluded, 1)
        self.assertEqual(result.checked, 2)
        self.assertTrue(result.passed(1e-4))
        print(f"   [OK] Quadratic error {error:.2e}, relu kink excluded")

    # Test 15: Finite-difference suite over every op
    def test_15_op_gradient_suite(self):
        """Every differentiable op agrees with central differences"""
        print("\n15. Testing the op gradient suite...")

        results = SelfCheckRunner(seed=0).check_op_gradients()
        failed = [r for r in results if not r['passed']]
        self.assertEqual(failed, [])
        self.assertGreaterEqual(len(results), 20)
        print(f"   [OK] {len(results)} op gradient checks passed")

    # Test 16: Corrupted gradient rule is caught
    def test_16_corrupted_gradient_detected(self):
        """A wrong relu gradient rule fails the check that names relu"""
        print("\n16. Testing corrupted gradient detection...")

        with mock.patch.object(ops, "relu", relu_with_wrong_gradient):
            results = SelfCheckRunner(seed=0).check_op_gradients()
        failed = [r['name'] for r in results if not r['passed']]
        self.assertEqual(failed, ["gradient relu"])
        print(f"   [OK] Failing check: {failed[0]}")

    # Test 17: KL of nearly equal rows
    def test_17_kl_nonnegative_float32(self):
        """float32 KL between distributions 1e-4 apart never goes below zero"""
        print("\n17. Testing KL sign on nearly equal rows...")

        rng = np.random.default_rng(21)
        values = []
        for _ in range(200):
            logits = rng.normal(size=(10, 10)).astype(np.float32)
            nudged = logits + np.float32(1e-4) * rng.normal(size=logits.shape).astype(np.float32)
            kl = ops.kl_divergence(ops.log_softmax(Tensor(logits)), ops.log_softmax(Tensor(nudged)))
            self.assertEqual(kl.dtype, np.float32)
            values.append(kl.item())
        self.assertGreaterEqual(min(values), 0.0)
        print(f"   [OK] Smallest KL {min(values):.3g} over {len(values)} batches")


class ModelTestCase(unittest.TestCase):
    """Unit tests for the architectures, Adadelta and checkpoints"""

    @classmethod
    def setUpClass(cls):
        print("\n" + "=" * 60)
        print("Salgrad - Model Tests")
        print("=" * 60)
        cls.cnn = build_mnist_cnn(11)

    # Test 1: Determinism and parameter count
    def test_01_build_is_deterministic(self):
        """Same seed twice gives bit-identical parameters; count matches the manifest"""
        print("\n1. Testing build_mnist_cnn...")

        again = build_mnist_cnn(11)
        for name, param in self.cnn.params.items():
            np.testing.assert_array_equal(param.data, again.params[name].data)
        other = build_mnist_cnn(12)
        self.assertFalse(np.array_equal(other.params["conv1.weight"].data,
                                        self.cnn.params["conv1.weight"].data))

        self.assertEqual(self.cnn.count_parameters(), CNN_PARAMETER_COUNT)
        self.assertEqual(manifest_parameter_count('mnist_cnn'), CNN_PARAMETER_COUNT)
        self.assertEqual([name for name, _ in manifest('mnist_cnn')], list(self.cnn.params))
        print(f"   [OK] {self.cnn.count_parameters()} parameters")

    # Test 2: Initialization bounds
    def test_02_initialization_bounds(self):
        """Weights lie within +-1/sqrt(fan_in)"""
        print("\n2. Testing initialization bounds...")

        fan_ins = {"conv1": 9, "conv2": 32 * 9, "fc1": 9216, "fc2": 128}
        for name, param in self.cnn.params.items():
            bound = 1.0 / math.sqrt(fan_ins[name.split(".")[0]])
            self.assertLessEqual(float(np.abs(param.data).max()), bound + 1e-7)
        print("   [OK] Uniform bounds respected")

    # Test 3: Zero image forward
    def test_03_zero_image_forward(self):
        """Logits of a zero image follow the bias-only path"""
        print("\n3. Testing forward on a zero image...")

        p = {name: t.data.astype(np.float64) for name, t in self.cnn.params.items()}
        r1 = np.maximum(p["conv1.bias"], 0)
        r2 = np.maximum(p["conv2.weight"].sum(axis=(2, 3)) @ r1 + p["conv2.bias"], 0)
        flat = np.repeat(r2, 144)
        hidden = np.maximum(p["fc1.weight"] @ flat + p["fc1.bias"], 0)
        expected = p["fc2.weight"] @ hidden + p["fc2.bias"]

        logits = forward(self.cnn, Tensor(np.zeros((1, 1, 28, 28))))
        np.testing.assert_allclose(logits.data[0], expected, rtol=1e-4, atol=1e-5)
        print("   [OK] Bias path reproduced")

    # Test 4: Forward modes
    def test_04_forward_modes(self):
        """Eval mode is deterministic, seeded train mode repeats, logits finite"""
        print("\n4. Testing forward modes...")

        batch = Tensor(random_images(32, seed=4))
        first = self.cnn.forward(batch)
        self.assertEqual(first.shape, (32, 10))
        np.testing.assert_array_equal(first.data, self.cnn.forward(batch).data)
        self.assertTrue(np.all(np.isfinite(first.data)))

        train_a = self.cnn.forward(batch, train_mode=True, rng=np.random.default_rng(9))
        train_b = self.cnn.forward(batch, train_mode=True, rng=np.random.default_rng(9))
        np.testing.assert_array_equal(train_a.data, train_b.data)
        self.assertFalse(np.array_equal(train_a.data, first.data))
        print("   [OK] Forward modes consistent")

    # Test 5: Wrong input size
    def test_05_forward_wrong_size(self):
        """Wrong spatial size raises a dimension error"""
        print("\n5. Testing wrong input size...")

        with self.assertRaises(DimensionError):
            self.cnn.forward(Tensor(np.zeros((1, 1, 32, 32))))
        print("   [OK] Rejected")

    # Test 6: Adadelta
    def test_06_adadelta(self):
        """Zero gradients, the one-step hand value and two-step growth"""
        print("\n6. Testing adadelta_step...")

        model = build_model('mnist_linear', 1)
        before = {n: p.data.copy() for n, p in model.params.items()}
        state = init_adadelta(model)
        adadelta_step(model, {n: np.zeros(p.shape, dtype=p.dtype) for n, p in model.params.items()}, state)
        for name, param in model.params.items():
            np.testing.assert_array_equal(param.data, before[name])

        scalar = SimpleNamespace(params=OrderedDict(w=Tensor(np.zeros(1), dtype=np.float64, name="w")))
        state = init_adadelta(scalar, lr=0.1, rho=0.9, eps=1e-6)
        adadelta_step(scalar, {"w": np.ones(1)}, state)
        expected = -0.1 * math.sqrt(1e-6 / (0.1 * 1 + 1e-6))
        self.assertAlmostEqual(float(scalar.params["w"].data[0]), expected, places=12)

        square_avg, acc_delta = state.square_avg["w"].copy(), state.acc_delta["w"].copy()
        previous = float(scalar.params["w"].data[0])
        adadelta_step(scalar, {"w": np.ones(1)}, state)
        self.assertGreater(abs(float(scalar.params["w"].data[0]) - previous), 0)
        self.assertTrue(np.all(state.square_avg["w"] > square_avg))
        self.assertTrue(np.all(state.acc_delta["w"] > acc_delta))
        self.assertEqual(state.steps, 2)
        print(f"   [OK] First step {expected:.3e}")

    # Test 7: Missing gradients
    def test_07_adadelta_missing_gradient(self):
        """Missing gradient raises a contract error naming the parameter"""
        print("\n7. Testing missing gradients...")

        model = build_model('mnist_linear', 1)
        state = init_adadelta(model)
        with self.assertRaises(ContractError) as ctx:
            adadelta_step(model, {"fc.weight": np.zeros((10, 784), dtype=np.float32)}, state)
        self.assertIn("fc.bias", str(ctx.exception))
        with self.assertRaises(ParameterError):
            init_adadelta(model, rho=1.0)
        print("   [OK] Missing fc.bias reported")

    # Test 8: Checkpoint roundtrip
    def test_08_checkpoint_roundtrip(self):
        """save then load reproduces every parameter bitwise"""
        print("\n8. Testing checkpoint roundtrip...")

        self.cnn.epoch = 4
        with tempfile.TemporaryDirectory() as tmp:
            path = save_checkpoint(self.cnn, Path(tmp) / "cnn.sgck")
            restored = load_checkpoint(path, expected_arch='mnist_cnn')
            self.assertEqual(path.read_bytes()[:4], b"SGCK")
        self.cnn.epoch = 0
        self.assertEqual((restored.arch_id, restored.seed, restored.epoch), ('mnist_cnn', 11, 4))
        for name, param in self.cnn.params.items():
            np.testing.assert_array_equal(restored.params[name].data, param.data)
        print("   [OK] Bit-exact")

    # Test 9: Checkpoint corruption
    def test_09_checkpoint_errors(self):
        """Truncation, bad magic, unknown version and wrong architecture"""
        print("\n9. Testing checkpoint errors...")

        raw = encode_checkpoint(build_model('mnist_linear', 2))
        with self.assertRaises(CheckpointTruncatedError):
            decode_checkpoint(raw[:-10])
        with self.assertRaises(CheckpointMagicError):
            decode_checkpoint(b"XXXX" + raw[4:])
        with self.assertRaises(CheckpointVersionError):
            decode_checkpoint(raw[:4] + struct.pack("<I", 99) + raw[8:])
        with self.assertRaises(CheckpointManifestError):
            decode_checkpoint(raw, expected_arch='mnist_cnn')
        with self.assertRaises(ArtifactIOError):
            load_checkpoint("/nonexistent/model.sgck")
        print("   [OK] Distinct errors raised")

    # Test 10: 64-bit copies
    def test_10_astype(self):
        """astype gives an independent copy in the requested dtype"""
        print("\n10. Testing Model.astype...")

        model = build_model('mnist_linear', 3)
        wide = model.astype(np.float64)
        self.assertEqual(wide.params["fc.weight"].dtype, np.float64)
        np.testing.assert_array_equal(wide.params["fc.weight"].data, model.params["fc.weight"].data)
        wide.params["fc.weight"].data[0, 0] = 5.0
        self.assertNotEqual(float(model.params["fc.weight"].data[0, 0]), 5.0)
        print("   [OK] astype copies")

    # Test 11: Seed range
    def test_11_seed_range(self):
        """Seeds beyond u64 are rejected by the configs and by the checkpoint encoder"""
        print("\n11. Testing the seed range...")

        self.assertEqual(TrainConfig(seed=2 ** 64 - 1).seed, 2 ** 64 - 1)
        with self.assertRaises(ConfigError):
            TrainConfig(seed=2 ** 64)
        with self.assertRaises(ConfigError):
            AttackSpec.with_defaults("fgsm", 0.1, seed=2 ** 64)
        with self.assertRaises(CheckpointError):
            encode_checkpoint(build_model('mnist_linear', 2 ** 64))
        print("   [OK] Out-of-range seeds rejected")


class SaliencyTrainingTestCase(unittest.TestCase):
    """Unit tests for input gradients, masking, the joint loss and training"""

    @classmethod
    def setUpClass(cls):
        print("\n" + "=" * 60)
        print("Salgrad - Saliency Training Tests")
        print("=" * 60)

    # Test 1: Logistic input gradient
    def test_01_input_gradients_logistic(self):
        """Binary logistic gradient equals (sigmoid(w.x) - 1) * w"""
        print("\n1. Testing input_gradients on a logistic model...")

        w = np.array([0.7, -1.2, 0.4, 2.0])
        x = np.array([0.2, 0.9, 0.5, 0.1]).reshape(1, 1, 2, 2)
        grads = input_gradients(binary_logistic_model(w), x, [1])
        expected = (sigmoid(w @ x.reshape(-1)) - 1) * w
        np.testing.assert_allclose(grads.reshape(-1), expected, atol=1e-12)

        flat = constant_class_model(2, pixels=4)
        np.testing.assert_array_equal(input_gradients(flat, x.astype(np.float32), [1]), np.zeros(x.shape))
        print("   [OK] Hand gradient reproduced")

    # Test 2: Input gradient against finite differences
    def test_02_input_gradients_finite_difference(self):
        """Loss gradient on a 4x4 toy image agrees with central differences"""
        print("\n2. Testing input gradients against finite differences...")

        rng = np.random.default_rng(8)
        model = ToyLinearClassifier(rng.standard_normal((3, 16)), rng.standard_normal(3))
        image = rng.random((1, 1, 4, 4))
        result = gradient_check(lambda x: classification_loss(model, x, [2])[0], image)
        self.assertTrue(result.passed(1e-4))

        analytic = input_gradients(model, image, [2])
        self.assertEqual(analytic.shape, image.shape)
        print(f"   [OK] Max relative error {result.max_error:.2e}")

    # Test 3: Masking example
    def test_03_mask_example(self):
        """K=0.5 on four pixels masks the two smallest |gradient| positions"""
        print("\n3. Testing mask_low_gradient_pixels...")

        batch = np.array([0.2, 0.4, 0.6, 0.8], dtype=np.float32).reshape(1, 1, 2, 2)
        grads = np.array([0.9, -0.1, 0.5, 0.3]).reshape(1, 1, 2, 2)
        masked = mask_low_gradient_pixels(batch, grads, 0.5, np.random.default_rng(0))
        self.assertEqual(list(np.flatnonzero(masked.mask.reshape(-1))), [1, 3])
        np.testing.assert_array_equal(masked.masked.reshape(-1)[[0, 2]], batch.reshape(-1)[[0, 2]])
        self.assertTrue(np.all((masked.masked >= batch.min()) & (masked.masked <= batch.max())))

        tied = mask_low_gradient_pixels(batch, np.ones_like(grads), 0.5, np.random.default_rng(0))
        self.assertEqual(list(np.flatnonzero(tied.mask.reshape(-1))), [0, 1])
        print("   [OK] Pixels 1 and 3 replaced, ties by index")

    # Test 4: Masking edge cases
    def test_04_mask_edge_cases(self):
        """K=0 is a no-op, K=1 stays in the image range, bad K raises"""
        print("\n4. Testing masking edge cases...")

        batch = random_images(3, seed=5)
        grads = np.random.default_rng(6).standard_normal(batch.shape)
        none = mask_low_gradient_pixels(batch, grads, 0.0, np.random.default_rng(0))
        np.testing.assert_array_equal(none.masked, batch)
        self.assertFalse(none.mask.any())

        image = np.linspace(0.2, 0.8, 16, dtype=np.float32).reshape(1, 1, 4, 4)
        full = mask_low_gradient_pixels(image, np.ones(image.shape), 1.0, np.random.default_rng(0))
        self.assertTrue(full.mask.all())
        self.assertTrue(np.all((full.masked >= np.float32(0.2)) & (full.masked <= np.float32(0.8))))

        for fraction in (-0.1, 1.5):
            with self.assertRaises(ParameterError):
                mask_low_gradient_pixels(batch, grads, fraction, np.random.default_rng(0))
        with self.assertRaises(DimensionError):
            mask_low_gradient_pixels(batch, grads[:, :, :10], 0.5, np.random.default_rng(0))
        print("   [OK] Edge cases handled")

    # Test 5: Replaced counts on the K grid
    def test_05_mask_counts(self):
        """Per-image replaced count equals floor(K * pixels); unmasked pixels kept bitwise"""
        print("\n5. Testing replaced-pixel counts...")

        batch = random_images(4, seed=7)
        grads = np.random.default_rng(8).standard_normal(batch.shape)
        pixels = 28 * 28
        for fraction in (0.0, 0.25, 0.5, 0.75, 1.0):
            masked = mask_low_gradient_pixels(batch, grads, fraction, np.random.default_rng(1))
            np.testing.assert_array_equal(masked.replaced_per_image, [math.floor(fraction * pixels)] * 4)
            np.testing.assert_array_equal(masked.masked[~masked.mask], batch[~masked.mask])
        print("   [OK] Counts match on the grid")

    # Test 6: Remaining-pixel fill range
    def test_06_fill_range_remaining(self):
        """'remaining' draws fill values from the range of the unmasked pixels"""
        print("\n6. Testing the remaining-pixel fill range...")

        batch = np.array([0.0, 0.9, 0.5, 0.6], dtype=np.float32).reshape(1, 1, 2, 2)
        grads = np.array([0.1, 0.9, 0.2, 0.8]).reshape(1, 1, 2, 2)
        for seed in range(5):
            masked = mask_low_gradient_pixels(batch, grads, 0.5, np.random.default_rng(seed),
                                              fill_range="remaining")
            filled = masked.masked.reshape(-1)[[0, 2]]
            self.assertTrue(np.all((filled >= np.float32(0.6)) & (filled <= np.float32(0.9))))
        with self.assertRaises(ParameterError):
            mask_low_gradient_pixels(batch, grads, 0.5, np.random.default_rng(0), fill_range="global")
        print("   [OK] Fill values within [0.6, 0.9]")

    # Test 7: Joint loss reductions
    def test_07_saliency_loss_reductions(self):
        """lambda=0 and masked==original both give the plain cross-entropy"""
        print("\n7. Testing saliency_loss reductions...")

        model = build_model('mnist_linear', 4)
        batch = random_images(6, seed=1)
        labels = random_labels(6, seed=2)
        masked = random_images(6, seed=3)
        plain, _ = classification_loss(model, Tensor(batch), labels)

        zero_weight = saliency_loss(model, batch, masked, labels, 0.0, train_mode=False)
        self.assertEqual(zero_weight.item(), plain.item())

        same_input = saliency_loss(model, batch, batch, labels, 1.0, train_mode=False)
        self.assertEqual(same_input.item(), plain.item())

        joint = saliency_loss(model, batch, masked, labels, 1.0, train_mode=False)
        self.assertGreaterEqual(joint.item(), plain.item())

        with self.assertRaises(ParameterError):
            saliency_loss(model, batch, masked, labels, -1.0, train_mode=False)
        print("   [OK] Reductions exact, KL term non-negative")

    # Test 8: Joint loss by hand
    def test_08_saliency_loss_hand_computed(self):
        """Toy 2-class model: cross-entropy plus lambda times KL computed directly"""
        print("\n8. Testing saliency_loss against a direct evaluation...")

        weight = np.array([[1.0, -0.5], [0.3, 0.8]])
        model = ToyLinearClassifier(weight)
        batch = np.array([[0.9, 0.1], [0.2, 0.7]]).reshape(2, 1, 1, 2)
        masked = np.array([[0.4, 0.1], [0.2, 0.3]]).reshape(2, 1, 1, 2)
        labels = np.array([0, 1])
        lam = 0.75

        p_log = log_softmax_reference(batch.reshape(2, 2) @ weight.T)
        q_log = log_softmax_reference(masked.reshape(2, 2) @ weight.T)
        cross_entropy = -np.mean(p_log[[0, 1], labels])
        divergence = np.mean(np.sum(np.exp(p_log) * (p_log - q_log), axis=1))

        loss = saliency_loss(model, batch, masked, labels, lam, train_mode=False)
        self.assertAlmostEqual(loss.item(), cross_entropy + lam * divergence, places=12)
        print(f"   [OK] loss = {loss.item():.6f}")

    # Test 9: Saliency maps
    def test_09_saliency_map(self):
        """Saliency maps are |gradient| scaled to [0, 1] per image"""
        print("\n9. Testing saliency_map...")

        model = build_model('mnist_linear', 6)
        maps = saliency_map(model, random_images(3, seed=1), random_labels(3, seed=1))
        self.assertEqual(maps.shape, (3,) + IMAGE_SHAPE)
        self.assertGreaterEqual(float(maps.min()), 0.0)
        np.testing.assert_allclose(maps.reshape(3, -1).max(axis=1), np.ones(3), rtol=1e-6)
        print("   [OK] Maps normalized")

    # Test 10: Synthetic training accuracy
    def test_10_synthetic_training_accuracy(self):
        """One epoch on the synthetic set reaches 90% train accuracy"""
        print("\n10. Testing one epoch on the synthetic set...")

        dataset = synthetic_two_class(2048, seed=1)
        config = TrainConfig(mode="regular", epochs=1, batch_size=32, lr=1.0, seed=3, arch="mnist_linear")
        model = build_model(config.arch, config.seed)
        state = init_adadelta(model, lr=config.lr)
        model, state, metrics = train_epoch(model, dataset, config, state, np.random.default_rng(config.seed))
        self.assertEqual(metrics.samples, 2048)
        self.assertEqual(model.epoch, 1)
        self.assertGreaterEqual(accuracy(model, dataset), 0.9)
        print(f"   [OK] Accuracy {accuracy(model, dataset):.3f}, epoch mean {metrics.train_acc:.3f}")

    # Test 11: Loss decreases
    def test_11_loss_decreases(self):
        """Per-epoch mean loss strictly decreases over the first three epochs"""
        print("\n11. Testing loss decrease...")

        dataset = synthetic_two_class(512, seed=2)
        config = TrainConfig(mode="regular", epochs=3, batch_size=32, lr=1.0, seed=5, arch="mnist_linear")
        result = train(build_model(config.arch, config.seed), dataset, config)
        losses = [m.loss for m in result.history]
        self.assertEqual(len(losses), 3)
        self.assertLess(losses[1], losses[0])
        self.assertLess(losses[2], losses[1])
        print(f"   [OK] Epoch losses {[round(loss, 4) for loss in losses]}")

    # Test 12: Saliency reduces to regular training
    def test_12_saliency_reduction(self):
        """K=0, lambda=0 saliency training is bit-identical to regular training"""
        print("\n12. Testing the K=0, lambda=0 reduction...")

        dataset = synthetic_two_class(64, seed=4)
        trained = {}
        for mode in ("regular", "saliency"):
            config = TrainConfig(mode=mode, epochs=1, batch_size=32, lr=0.1, lam=0.0,
                                 mask_fraction=0.0, seed=9, arch="mnist_cnn")
            trained[mode] = train(build_model(config.arch, config.seed), dataset, config).model
        for name, param in trained["regular"].params.items():
            np.testing.assert_array_equal(param.data, trained["saliency"].params[name].data)
        print("   [OK] Parameter trajectories identical")

    # Test 13: Training determinism and metrics file
    def test_13_training_determinism(self):
        """Two runs with the same seed give bit-identical parameters and metrics"""
        print("\n13. Testing training determinism...")

        dataset = synthetic_two_class(128, seed=6)
        config = TrainConfig(mode="saliency", epochs=2, batch_size=16, lr=0.1, seed=2, arch="mnist_linear")
        with tempfile.TemporaryDirectory() as tmp:
            first = train(build_model(config.arch, config.seed), dataset, config,
                          metrics_path=Path(tmp) / "a.csv")
            second = train(build_model(config.arch, config.seed), dataset, config,
                           metrics_path=Path(tmp) / "b.csv")
            self.assertEqual((Path(tmp) / "a.csv").read_bytes(), (Path(tmp) / "b.csv").read_bytes())
            rows = read_metrics(Path(tmp) / "a.csv")
        for name, param in first.model.params.items():
            np.testing.assert_array_equal(param.data, second.model.params[name].data)
        self.assertEqual([r["epoch"] for r in rows], [1, 2])
        self.assertEqual({r["mode"] for r in rows}, {"saliency"})
        print("   [OK] Deterministic, metrics rows validated")

    # Test 14: Training config validation
    def test_14_train_config_validation(self):
        """Out-of-range hyperparameters are rejected before training"""
        print("\n14. Testing TrainConfig validation...")

        defaults = TrainConfig()
        self.assertEqual((defaults.epochs, defaults.batch_size, defaults.lr, defaults.mask_fraction),
                         (100, 256, 0.1, 0.5))
        self.assertEqual(defaults.to_dict()["lambda"], 1.0)
        for bad in ({"mask_fraction": 1.5}, {"epochs": 0}, {"lam": -0.5}, {"mode": "adversarial"}):
            with self.assertRaises(ConfigError):
                TrainConfig(**bad)
        print("   [OK] Invalid configs rejected")

    # Test 15: Joint loss never below cross-entropy
    def test_15_saliency_loss_not_below_cross_entropy(self):
        """A masked batch almost equal to the original keeps the loss >= cross-entropy"""
        print("\n15. Testing saliency_loss against cross-entropy on near-identical batches...")

        model = build_model("mnist_linear", 4)
        rng = np.random.default_rng(17)
        for trial in range(200):
            batch = random_images(8, seed=trial)
            labels = random_labels(8, seed=trial)
            masked = batch + np.float32(1e-4) * rng.normal(size=batch.shape).astype(np.float32)
            joint = saliency_loss(model, batch, masked, labels, 1.0, train_mode=False).item()
            plain = classification_loss(model, Tensor(batch), labels)[0].item()
            self.assertGreaterEqual(joint, plain)
        print("   [OK] Joint loss >= cross-entropy in 200 trials")


class AttacksTestCase(unittest.TestCase):
    """Unit tests for projection and the FGSM, BIM, PGD and MIM generators"""

    @classmethod
    def setUpClass(cls):
        print("\n" + "=" * 60)
        print("Salgrad - Attack Tests")
        print("=" * 60)
        cls.cnn = build_model('mnist_cnn', 21)
        cls.images = random_images(6, seed=3)
        cls.labels = random_labels(6, seed=4)
        cls.logistic = binary_logistic_model([2.0, -3.0])
        cls.point = np.array([0.5, 0.5], dtype=np.float32).reshape(1, 1, 1, 2)

    # Test 1: Projection
    def test_01_project(self):
        """Interior points, box clamp and range clamp"""
        print("\n1. Testing project...")

        x = np.array([0.5, 0.5, 0.95], dtype=np.float64)
        np.testing.assert_array_equal(project(x, x, 0.1), x)
        np.testing.assert_allclose(project(np.array([0.9, 0.1, 1.2]), x, 0.1), [0.6, 0.4, 1.0])
        print("   [OK] Projection clamps")

    # Test 2: FGSM on the logistic model
    def test_02_fgsm_logistic(self):
        """Gradient signs [-, +] move [0.5, 0.5] to [0.4, 0.6]"""
        print("\n2. Testing fgsm on a logistic model...")

        result = fgsm(self.logistic, self.point, [1], 0.1)
        np.testing.assert_allclose(result.adversarial.reshape(-1), [0.4, 0.6], atol=1e-6)
        self.assertTrue(result.contained(0.1))
        print(f"   [OK] {result.adversarial.reshape(-1)}")

    # Test 3: Zero budget
    def test_03_zero_budget(self):
        """Every attack returns its input bitwise at epsilon 0"""
        print("\n3. Testing epsilon 0...")

        for kind in ('fgsm', 'bim', 'pgd', 'mim'):
            spec = AttackSpec.with_defaults(kind, 0.0)
            result = run_attack(self.cnn, self.images, self.labels, spec, rng=np.random.default_rng(1))
            np.testing.assert_array_equal(result.adversarial, self.images)
        print("   [OK] Inputs returned unchanged")

    # Test 4: Reduction identities
    def test_04_reduction_identities(self):
        """bim(1, alpha=eps) == fgsm, mim(mu=0) == bim, pgd(zero start) == bim"""
        print("\n4. Testing reduction identities...")

        eps, alpha, steps = 0.1, 0.025, 3
        np.testing.assert_array_equal(bim(self.cnn, self.images, self.labels, eps, eps, 1).adversarial,
                                      fgsm(self.cnn, self.images, self.labels, eps).adversarial)
        reference = bim(self.cnn, self.images, self.labels, eps, alpha, steps).adversarial
        np.testing.assert_array_equal(mim(self.cnn, self.images, self.labels, eps, alpha, steps, 0.0).adversarial,
                                      reference)
        np.testing.assert_array_equal(
            pgd(self.cnn, self.images, self.labels, eps, alpha, steps, ZeroNoise()).adversarial, reference)
        print("   [OK] All three identities bitwise")

    # Test 5: Containment
    def test_05_containment(self):
        """Adversarials stay inside the epsilon-box and the valid range"""
        print("\n5. Testing containment...")

        for kind in ('fgsm', 'bim', 'pgd', 'mim'):
            for eps in (0.05, 0.3):
                spec = AttackSpec.with_defaults(kind, eps, steps=3)
                result = run_attack(self.cnn, self.images, self.labels, spec, rng=np.random.default_rng(2))
                self.assertTrue(np.all(result.perturbation_norm <= eps + 1e-6))
                self.assertTrue(result.contained(eps))
        print("   [OK] All attacks contained")

    # Test 6: Linear saturation and momentum on a constant gradient
    def test_06_linear_model_iterates(self):
        """BIM saturates at the box corner; MIM with mu=1 matches BIM there"""
        print("\n6. Testing iterates on a linear model...")

        corner = bim(self.logistic, self.point, [1], 0.1, 0.025, 10).adversarial
        np.testing.assert_allclose(corner.reshape(-1), [0.4, 0.6], atol=1e-6)

        momentum = mim(self.logistic, self.point, [1], 0.1, 0.025, 10, 1.0)
        np.testing.assert_array_equal(momentum.adversarial, corner)
        self.assertEqual(momentum.degenerate_steps, 0)
        print("   [OK] Corner [0.4, 0.6] reached")

    # Test 7: PGD randomness
    def test_07_pgd_seeds(self):
        """Different seeds give different but contained adversarials"""
        print("\n7. Testing PGD seeds...")

        first = pgd(self.cnn, self.images, self.labels, 0.2, 0.05, 2, np.random.default_rng(1))
        second = pgd(self.cnn, self.images, self.labels, 0.2, 0.05, 2, np.random.default_rng(2))
        self.assertFalse(np.array_equal(first.adversarial, second.adversarial))
        self.assertTrue(first.contained(0.2) and second.contained(0.2))

        spec = AttackSpec.with_defaults('pgd', 0.2, steps=2, seed=5)
        again_a = run_attack(self.cnn, self.images, self.labels, spec)
        again_b = run_attack(self.cnn, self.images, self.labels, spec)
        np.testing.assert_array_equal(again_a.adversarial, again_b.adversarial)
        print("   [OK] Seeded and contained")

    # Test 8: Degenerate MIM steps
    def test_08_mim_zero_gradient(self):
        """A zero gradient is flagged and leaves the image in place"""
        print("\n8. Testing MIM with a zero gradient...")

        flat = constant_class_model(0, num_classes=2, pixels=2)
        result = mim(flat, self.point, [1], 0.1, 0.025, 4, 1.0)
        self.assertEqual(result.degenerate_steps, 4)
        np.testing.assert_array_equal(result.adversarial, self.point)
        print("   [OK] 4 degenerate steps recorded")

    # Test 9: Inputs untouched
    def test_09_inputs_not_mutated(self):
        """Attacks never modify the input batch or the model"""
        print("\n9. Testing input immutability...")

        images = self.images.copy()
        weights = self.cnn.params["fc2.weight"].data.copy()
        for kind in ('fgsm', 'bim', 'pgd', 'mim'):
            run_attack(self.cnn, images, self.labels, AttackSpec.with_defaults(kind, 0.2, steps=2),
                       rng=np.random.default_rng(0))
        np.testing.assert_array_equal(images, self.images)
        np.testing.assert_array_equal(self.cnn.params["fc2.weight"].data, weights)
        print("   [OK] Nothing mutated")

    # Test 10: Attack specs
    def test_10_attack_spec(self):
        """Default schedule and validation"""
        print("\n10. Testing AttackSpec...")

        self.assertEqual((AttackSpec.with_defaults('bim', 0.2).steps, AttackSpec.with_defaults('bim', 0.2).alpha),
                         (10, 0.05))
        pgd_spec = AttackSpec.with_defaults('PGD', 0.2)
        self.assertEqual((pgd_spec.kind, pgd_spec.steps), ('pgd', 40))
        self.assertAlmostEqual(pgd_spec.alpha, 0.01)
        self.assertEqual(AttackSpec.with_defaults('mim', 0.1).mu, 1.0)

        with self.assertRaises(ConfigError):
            AttackSpec.with_defaults('cw', 0.1)
        with self.assertRaises(ConfigError):
            AttackSpec(kind='bim', epsilon=0.1, alpha=0.0, steps=1, mu=1.0, seed=0)
        with self.assertRaises(ConfigError):
            AttackSpec.with_defaults('fgsm', -0.1)
        print("   [OK] Specs validated")

    # Test 11: PGM dump
    def test_11_dump_pgm(self):
        """Adversarial images are written as adv_<attack>_<eps>_<index>.pgm"""
        print("\n11. Testing PGM dump...")

        images = byte_valued_dataset(3).images
        with tempfile.TemporaryDirectory() as tmp:
            paths = dump_pgm(images, tmp, "adv_fgsm", 0.1)
            self.assertEqual([p.name for p in paths],
                             ["adv_fgsm_0.1_0.pgm", "adv_fgsm_0.1_1.pgm", "adv_fgsm_0.1_2.pgm"])
            decoded = decode_pgm(paths[1].read_bytes())
        np.testing.assert_array_equal(decoded, images[1, 0])
        print("   [OK] PGM files written")


class DataTestCase(unittest.TestCase):
    """Unit tests for datasets, IDX files, the synthetic set and the MNIST fetch"""

    @classmethod
    def setUpClass(cls):
        print("\n" + "=" * 60)
        print("Salgrad - Data Tests")
        print("=" * 60)

    # Test 1: IDX roundtrip
    def test_01_idx_roundtrip(self):
        """write_idx then load_idx reproduces the dataset exactly, also gzipped"""
        print("\n1. Testing IDX roundtrip...")

        dataset = byte_valued_dataset(7, seed=2)
        with tempfile.TemporaryDirectory() as tmp:
            images_path, labels_path = Path(tmp) / "images.idx", Path(tmp) / "labels.idx"
            write_idx(dataset, images_path, labels_path)
            back = load_idx(images_path, labels_path, split="train")

            gz_images, gz_labels = Path(tmp) / "images.idx.gz", Path(tmp) / "labels.idx.gz"
            gz_images.write_bytes(gzip.compress(images_path.read_bytes()))
            gz_labels.write_bytes(gzip.compress(labels_path.read_bytes()))
            zipped = load_idx(gz_images, gz_labels)

        for loaded in (back, zipped):
            np.testing.assert_array_equal(loaded.images, dataset.images)
            np.testing.assert_array_equal(loaded.labels, dataset.labels)
        print(f"   [OK] {len(back)} samples roundtrip")

    # Test 2: Pixel scaling
    def test_02_pixel_scaling(self):
        """Pixel 255 maps to 1.0 and 0 to 0.0"""
        print("\n2. Testing pixel scaling...")

        pixels = np.zeros((1, 28, 28), dtype=np.uint8)
        pixels[0, 0, 0] = 255
        with tempfile.TemporaryDirectory() as tmp:
            (Path(tmp) / "i").write_bytes(encode_idx_images(pixels))
            (Path(tmp) / "l").write_bytes(encode_idx_labels(np.array([3])))
            dataset = load_idx(Path(tmp) / "i", Path(tmp) / "l")
        self.assertEqual(float(dataset.images[0, 0, 0, 0]), 1.0)
        self.assertEqual(float(dataset.images[0, 0, 0, 1]), 0.0)
        self.assertEqual(dataset.image_shape, (1, 28, 28))
        print("   [OK] Endpoints exact")

    # Test 3: IDX errors
    def test_03_idx_errors(self):
        """Wrong magic, truncation and count mismatch are distinct errors"""
        print("\n3. Testing IDX errors...")

        image_bytes = encode_idx_images(np.zeros((3, 28, 28), dtype=np.uint8))
        label_bytes = encode_idx_labels(np.array([1, 2]))
        self.assertEqual(struct.unpack(">I", image_bytes[:4])[0], 2051)
        self.assertEqual(struct.unpack(">I", label_bytes[:4])[0], 2049)

        with self.assertRaises(IdxMagicError):
            parse_idx_labels(image_bytes)
        with self.assertRaises(IdxMagicError):
            parse_idx_images(label_bytes)
        with self.assertRaises(IdxTruncatedError):
            parse_idx_images(image_bytes[:-5])
        with self.assertRaises(IdxTruncatedError):
            parse_idx_labels(label_bytes[:6])

        with tempfile.TemporaryDirectory() as tmp:
            (Path(tmp) / "i").write_bytes(image_bytes)
            (Path(tmp) / "l").write_bytes(label_bytes)
            with self.assertRaises(IdxCountMismatchError):
                load_idx(Path(tmp) / "i", Path(tmp) / "l")
            with self.assertRaises(ArtifactIOError):
                load_mnist(tmp, "train")
        print("   [OK] Errors distinguished")

    # Test 4: MNIST directory layout
    def test_04_load_mnist(self):
        """load_mnist finds the standard file names"""
        print("\n4. Testing load_mnist...")

        with tempfile.TemporaryDirectory() as tmp:
            write_tiny_mnist(tmp, n_train=12, n_test=5)
            train_set, test_set = load_mnist(tmp, "train"), load_mnist(tmp, "test")
        self.assertEqual((len(train_set), train_set.split), (12, "train"))
        self.assertEqual((len(test_set), test_set.split), (5, "test"))
        print("   [OK] Both splits loaded")

    # Test 5: Synthetic dataset
    def test_05_synthetic(self):
        """Deterministic, in range and separable by the half-contrast rule"""
        print("\n5. Testing synthetic_two_class...")

        first = synthetic_two_class(400, seed=3)
        second = synthetic_two_class(400, seed=3)
        np.testing.assert_array_equal(first.images, second.images)
        np.testing.assert_array_equal(first.labels, second.labels)
        self.assertGreaterEqual(float(first.images.min()), 0.0)
        self.assertLessEqual(float(first.images.max()), 1.0)
        self.assertGreaterEqual(contrast_rule_accuracy(first), 0.99)
        with self.assertRaises(ParameterError):
            synthetic_two_class(1)
        print(f"   [OK] Contrast rule accuracy {contrast_rule_accuracy(first):.3f}")

    # Test 6: Dataset validation
    def test_06_dataset_validation(self):
        """Pixel range, label range and counts are enforced"""
        print("\n6. Testing Dataset validation...")

        images = np.zeros((2, 1, 28, 28), dtype=np.float32)
        with self.assertRaises(ParameterError):
            Dataset(images + 1.5, [0, 1])
        with self.assertRaises(ParameterError):
            Dataset(images, [0, 10])
        with self.assertRaises(DimensionError):
            Dataset(images, [0, 1, 2])
        dataset = Dataset(images, [0, 1])
        self.assertFalse(dataset.images.flags.writeable)
        print("   [OK] Invalid datasets rejected")

    # Test 7: Subsets
    def test_07_subset(self):
        """First-n selection, seeded permutations and size checks"""
        print("\n7. Testing subset...")

        dataset = synthetic_two_class(20, seed=1)
        head = subset(dataset, 5)
        np.testing.assert_array_equal(head.labels, dataset.labels[:5])

        shuffled = subset(dataset, 20, seed=4)
        self.assertEqual(sorted(shuffled.labels.tolist()), sorted(dataset.labels.tolist()))
        np.testing.assert_array_equal(subset(dataset, 8, seed=4).images, subset(dataset, 8, seed=4).images)
        with self.assertRaises(ParameterError):
            subset(dataset, 21)
        print("   [OK] Subsets deterministic")

    # Test 8: Batches
    def test_08_batches(self):
        """Partial last batch kept, shuffle reproducible"""
        print("\n8. Testing batches...")

        dataset = synthetic_two_class(10, seed=1)
        self.assertEqual([len(labels) for _, labels in batches(dataset, 4)], [4, 4, 2])
        order_a = np.concatenate([labels for _, labels in batches(dataset, 3, shuffle_seed=8)])
        order_b = np.concatenate([labels for _, labels in batches(dataset, 3, shuffle_seed=8)])
        np.testing.assert_array_equal(order_a, order_b)
        with self.assertRaises(ParameterError):
            list(batches(dataset, 0))
        print("   [OK] Batch sizes [4, 4, 2]")

    # Test 9: Train/test split
    def test_09_train_test_split(self):
        """Seeded split with disjoint parts"""
        print("\n9. Testing train_test_split...")

        dataset = synthetic_two_class(50, seed=2)
        train_part, test_part = train_test_split(dataset, test_fraction=0.2, seed=1)
        self.assertEqual((len(train_part), len(test_part)), (40, 10))
        self.assertEqual((train_part.split, test_part.split), ("train", "test"))
        with self.assertRaises(ParameterError):
            train_test_split(dataset, test_fraction=1.0)
        print("   [OK] 40/10 split")

    # Test 10: MNIST fetch
    def test_10_fetch_mnist(self):
        """Download writes four gzipped files; network failures surface as I/O errors"""
        print("\n10. Testing fetch_mnist with a patched requests.get...")

        response = mock.MagicMock()
        response.iter_content.return_value = [b"\x1f\x8b", b"payload"]
        with tempfile.TemporaryDirectory() as tmp:
            with mock.patch("data.fetch.requests.get", return_value=response) as get:
                paths = fetch_mnist(tmp, base_url="https://mirror.example/mnist")
            self.assertEqual(len(paths), 4)
            self.assertTrue(all(p.read_bytes() == b"\x1f\x8bpayload" for p in paths))
            self.assertEqual(get.call_args_list[0].args[0],
                             "https://mirror.example/mnist/train-images-idx3-ubyte.gz")
            self.assertFalse(any(Path(tmp).glob("*.part")))

            with mock.patch("data.fetch.requests.get", side_effect=requests.ConnectionError("offline")):
                with self.assertRaises(ArtifactIOError):
                    fetch_mnist(Path(tmp) / "other", base_url="https://mirror.example/mnist/")
        print("   [OK] Four files written")

    # Test 11: Interrupted download
    def test_11_fetch_interrupted(self):
        """A download failing mid-stream leaves neither the target nor a partial file"""
        print("\n11. Testing an interrupted download...")

        def broken_stream(chunk_size):
            yield b"\x1f\x8b"
            raise requests.ConnectionError("connection reset")

        response = mock.MagicMock()
        response.iter_content.side_effect = broken_stream
        with tempfile.TemporaryDirectory() as tmp:
            with mock.patch("data.fetch.requests.get", return_value=response):
                with self.assertRaises(ArtifactIOError):
                    fetch_mnist(tmp, base_url="https://mirror.example/mnist")
            self.assertEqual(list(Path(tmp).iterdir()), [])

            blocker = Path(tmp) / "file"
            blocker.write_text("not a directory")
            with self.assertRaises(ArtifactIOError):
                fetch_mnist(blocker / "mnist", base_url="https://mirror.example/mnist")
        print("   [OK] No partial files left")


class EvaluationReportTestCase(unittest.TestCase):
    """Unit tests for accuracy, robustness sweeps and the CSV/SVG report"""

    @classmethod
    def setUpClass(cls):
        print("\n" + "=" * 60)
        print("Salgrad - Evaluation and Report Tests")
        print("=" * 60)
        train_set = synthetic_two_class(512, seed=11)
        cls.test_set = synthetic_two_class(60, seed=12, split="test")
        config = TrainConfig(mode="regular", epochs=1, batch_size=32, lr=1.0, seed=1, arch="mnist_linear")
        cls.model = train(build_model(config.arch, config.seed), train_set, config).model

    @staticmethod
    def make_curve(label, attack, accuracies, n=100):
        points = [CurvePoint(round(0.1 * i, 10), n, int(round(a * n))) for i, a in enumerate(accuracies)]
        return RobustnessCurve(label, attack, points)

    # Test 1: Clean accuracy
    def test_01_accuracy(self):
        """Constant predictor scores exactly its class frequency"""
        print("\n1. Testing accuracy...")

        dataset = Dataset(np.zeros((100, 1, 28, 28), dtype=np.float32), np.arange(100) % 10)
        self.assertEqual(accuracy(constant_class_model(3), dataset), 0.10)
        empty = Dataset(np.zeros((0, 1, 28, 28), dtype=np.float32), np.zeros(0, dtype=np.int64))
        with self.assertRaises(ParameterError):
            accuracy(constant_class_model(3), empty)
        print("   [OK] Constant predictor accuracy 0.10")

    # Test 2: Sweep structure
    def test_02_sweep(self):
        """Epsilon-0 point equals clean accuracy; thread count does not matter"""
        print("\n2. Testing robustness_sweep...")

        grid = [0.0, 0.05, 0.1]
        kinds = ["fgsm", "pgd", "bim"]
        overrides = {"pgd": {"steps": 5}, "bim": {"steps": 3}}
        single = robustness_sweep(self.model, self.test_set, kinds, grid, overrides, "regular", seed=4, threads=1)
        pooled = robustness_sweep(self.model, self.test_set, kinds, grid, overrides, "regular", seed=4, threads=3)

        clean = count_correct(self.model, self.test_set.images, self.test_set.labels)
        self.assertEqual([c.attack for c in single], kinds)
        for first, second in zip(single, pooled):
            self.assertEqual(first.epsilons, grid)
            self.assertEqual(first.points[0].n_correct, clean)
            self.assertEqual(first.points, second.points)
            self.assertEqual(first.check(), [])

        with tempfile.TemporaryDirectory() as tmp:
            write_csv(single, Path(tmp) / "a.csv")
            write_csv(pooled, Path(tmp) / "b.csv")
            self.assertEqual((Path(tmp) / "a.csv").read_bytes(), (Path(tmp) / "b.csv").read_bytes())
        print(f"   [OK] FGSM accuracies {[round(a, 3) for a in single[0].accuracies]}")

    # Test 3: Grid validation
    def test_03_grid_validation(self):
        """Grids must start at 0 and increase strictly"""
        print("\n3. Testing epsilon grid validation...")

        for grid in ([0.1, 0.2], [0.0, 0.2, 0.1], []):
            with self.assertRaises(ParameterError):
                robustness_sweep(self.model, self.test_set, ["fgsm"], grid)
        print("   [OK] Invalid grids rejected")

    # Test 4: CSV roundtrip
    def test_04_csv_roundtrip(self):
        """Curves read back from CSV equal the written ones"""
        print("\n4. Testing curves CSV...")

        curves = [self.make_curve("saliency", "fgsm", [0.99, 0.7, 0.31]),
                  self.make_curve("regular", "fgsm", [0.98, 0.5, 0.12])]
        with tempfile.TemporaryDirectory() as tmp:
            path = write_csv(curves, Path(tmp) / "curves.csv")
            header = path.read_text().splitlines()[0]
            back = read_csv(path)
        self.assertEqual(header, "model,attack,epsilon,n_samples,n_correct,accuracy")
        self.assertEqual([(c.model_label, c.attack) for c in back], [("saliency", "fgsm"), ("regular", "fgsm")])
        for written, read in zip(curves, back):
            self.assertEqual(written.points, read.points)
        print(f"   [OK] {len(back)} curves roundtrip")

    # Test 5: Malformed CSV
    def test_05_malformed_csv(self):
        """Rows violating the curve-row schema are rejected"""
        print("\n5. Testing malformed curve rows...")

        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "bad.csv"
            path.write_text("model,attack,epsilon,n_samples,n_correct,accuracy\nm,fgsm,-0.1,10,5,0.5\n")
            with self.assertRaises(ConfigError):
                read_csv(path)
            path.write_text("model,attack,epsilon,n_samples,n_correct,accuracy\nm,fgsm,zero,10,5,0.5\n")
            with self.assertRaises(ParameterError):
                read_csv(path)
            with self.assertRaises(ArtifactIOError):
                read_csv(Path(tmp) / "missing.csv")
        print("   [OK] Bad rows rejected")

    # Test 6: SVG panels
    def test_06_render_svg(self):
        """One panel per attack and one polyline per (attack, model)"""
        print("\n6. Testing render_svg...")

        curves = [self.make_curve(label, attack, [0.99, 0.6, 0.2])
                  for attack in ("fgsm", "pgd", "bim") for label in ("saliency", "regular")]
        with tempfile.TemporaryDirectory() as tmp:
            render_svg(curves, Path(tmp) / "a.svg")
            render_svg(curves, Path(tmp) / "b.svg")
            svg = (Path(tmp) / "a.svg").read_text()
            self.assertEqual(svg, (Path(tmp) / "b.svg").read_text())
        panels = set(re.findall(r'id="(panel-[\w-]+)"', svg))
        lines = set(re.findall(r'id="(curve-[\w-]+)"', svg))
        self.assertEqual(panels, {"panel-fgsm", "panel-pgd", "panel-bim"})
        self.assertEqual(len(lines), 6)
        self.assertIn("curve-pgd-regular", lines)
        with self.assertRaises(ParameterError):
            render_svg([], "unused.svg")
        print(f"   [OK] {len(panels)} panels, {len(lines)} curves")

    # Test 7: Paired summary
    def test_07_compare_curves(self):
        """Deltas are saliency minus regular, with their sign"""
        print("\n7. Testing compare_curves...")

        saliency = [self.make_curve("saliency", "fgsm", [0.99, 0.7, 0.3])]
        regular = [self.make_curve("regular", "fgsm", [0.99, 0.5, 0.4]),
                   self.make_curve("regular", "pgd", [0.99, 0.2, 0.1])]
        rows = compare_curves(saliency, regular)
        self.assertEqual([row[5] for row in rows], ["0", "+", "-"])
        self.assertAlmostEqual(rows[1][4], 0.2)
        lines = summary_lines(rows)
        self.assertEqual(lines[0], "delta,fgsm,0,+0.0000,0")
        self.assertEqual(lines[1], "delta,fgsm,0.1,+0.2000,+")
        with tempfile.TemporaryDirectory() as tmp:
            path = write_summary(rows, Path(tmp) / "summary.txt")
            self.assertEqual(path.read_text().splitlines(), lines)
        print(f"   [OK] {len(rows)} paired points")

    # Test 8: Soft monotonicity
    def test_08_soft_monotonicity(self):
        """Rises above the slack are reported, smaller wiggles are not"""
        print("\n8. Testing soft_monotonicity...")

        self.assertEqual(soft_monotonicity(self.make_curve("m", "fgsm", [1.0, 0.5, 0.6, 0.61])), [0.2])
        self.assertEqual(soft_monotonicity(self.make_curve("m", "fgsm", [1.0, 0.5, 0.51])), [])
        print("   [OK] Rise at epsilon 0.2 flagged")

    # Test 9: Attack strength
    def test_09_attack_strength(self):
        """FGSM at 0.3 lowers accuracy; 40-step PGD is never more than a point weaker than FGSM"""
        print("\n9. Testing attack strength on the trained model...")

        test_set = synthetic_two_class(200, seed=13, split="test")
        fgsm_curve, pgd_curve = robustness_sweep(self.model, test_set, ["fgsm", "pgd"],
                                                 [0.0, 0.1, 0.2, 0.3], model_label="regular", seed=2)
        clean = fgsm_curve.accuracies[0]
        self.assertEqual(pgd_curve.accuracies[0], clean)
        self.assertLess(fgsm_curve.accuracies[-1], clean)
        for fgsm_acc, pgd_acc in zip(fgsm_curve.accuracies[1:], pgd_curve.accuracies[1:]):
            self.assertLessEqual(pgd_acc, fgsm_acc + 0.01)
        print(f"   [OK] clean {clean:.3f}, FGSM {[round(a, 3) for a in fgsm_curve.accuracies[1:]]}, "
              f"PGD {[round(a, 3) for a in pgd_curve.accuracies[1:]]}")


class CliTestCase(unittest.TestCase):
    """End-to-end tests of the salgrad command line on the synthetic dataset"""

    @classmethod
    def setUpClass(cls):
        print("\n" + "=" * 60)
        print("Salgrad - Command Line Tests")
        print("=" * 60)
        cls.tmp = tempfile.TemporaryDirectory()
        cls.root = Path(cls.tmp.name)
        cls.data = ['--dataset', 'synthetic', '--synthetic-size', '256']
        cls.checkpoints = {}
        for mode in ('regular', 'saliency'):
            path = cls.root / f"{mode}.sgck"
            code, _, err = run_cli(['train', '--mode', mode, '--arch', 'mnist_linear', '--epochs', '1',
                                    '--batch-size', '32', '--lr', '1.0', '--out', str(path),
                                    '--metrics', str(cls.root / f"{mode}.csv")] + cls.data)
            if code != 0:
                raise RuntimeError(f"training the {mode} fixture failed: {err}")
            cls.checkpoints[mode] = path

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def attack_accuracy(self, *flags):
        code, out, err = run_cli(['attack', '--ckpt', str(self.checkpoints['regular']),
                                  '--n-samples', '100'] + list(flags) + self.data)
        self.assertEqual(code, 0, err)
        lines = out.strip().splitlines()
        self.assertEqual(lines[0], "model,attack,epsilon,accuracy")
        return lines[1].split(",")

    # Test 1: Train command
    def test_01_train(self):
        """Metrics rows per epoch and bit-identical checkpoints across runs"""
        print("\n1. Testing salgrad train...")

        for run in ("a", "b"):
            args = ['train', '--arch', 'mnist_linear', '--epochs', '3', '--batch-size', '32',
                    '--lr', '1.0', '--seed', '5', '--out', str(self.root / f"{run}.sgck"),
                    '--metrics', str(self.root / f"{run}.csv")] + self.data
            code, out, err = run_cli(args)
            self.assertEqual(code, 0, err)
            self.assertIn("trained regular mnist_linear for 3 epochs", out)
        self.assertEqual((self.root / "a.sgck").read_bytes(), (self.root / "b.sgck").read_bytes())
        rows = read_metrics(self.root / "a.csv")
        self.assertEqual([r["epoch"] for r in rows], [1, 2, 3])
        self.assertEqual(load_checkpoint(self.root / "a.sgck").epoch, 3)
        print(f"   [OK] {len(rows)} metric rows, checkpoints identical")

    # Test 2: Usage errors
    def test_02_usage_errors(self):
        """Saliency-only flags in regular mode and unknown flags exit 1"""
        print("\n2. Testing usage errors...")

        code, _, err = run_cli(['train', '--mode', 'regular', '--lambda', '0.5'])
        self.assertEqual(code, 1)
        self.assertIn("--lambda", err)
        code, _, _ = run_cli(['train', '--no-such-flag'])
        self.assertEqual(code, 1)
        code, _, _ = run_cli(['train', '--mode', 'saliency', '--mask-fraction', '1.5'])
        self.assertEqual(code, 1)
        code, _, err = run_cli(['attack', '--ckpt', 'x.sgck', '--attack', 'cw'])
        self.assertEqual(code, 1)
        for kind in ("fgsm", "bim", "pgd", "mim"):
            self.assertIn(kind, err)
        print("   [OK] Exit code 1 for bad command lines")

    # Test 3: Missing artifacts
    def test_03_missing_checkpoint(self):
        """Unreadable inputs are runtime errors"""
        print("\n3. Testing missing artifacts...")

        code, _, err = run_cli(['attack', '--ckpt', str(self.root / "missing.sgck")] + self.data)
        self.assertEqual(code, 2)
        self.assertIn("missing.sgck", err)
        code, _, _ = run_cli(['attack', '--ckpt', str(self.checkpoints['regular']),
                              '--data-dir', str(self.root / "no-mnist")])
        self.assertEqual(code, 2)
        print("   [OK] Exit code 2")

    # Test 4: Zero-budget attack
    def test_04_attack_zero_budget(self):
        """An epsilon-0 attack reports the clean accuracy"""
        print("\n4. Testing salgrad attack at epsilon 0...")

        model, attack, eps, acc = self.attack_accuracy('--attack', 'pgd', '--eps', '0')
        options = {'dataset': 'synthetic', 'synthetic_size': 256, 'data_seed': 0, 'data_dir': None}
        clean = accuracy(load_checkpoint(self.checkpoints['regular']), load_split(options, 'test', 100))
        self.assertEqual((model, attack, eps), ("regular", "pgd", "0"))
        self.assertAlmostEqual(float(acc), clean, places=6)
        print(f"   [OK] Clean accuracy {clean:.4f}")

    # Test 5: One-step BIM equals FGSM
    def test_05_bim_one_step(self):
        """BIM with one step of size epsilon reports the FGSM accuracy"""
        print("\n5. Testing one-step BIM against FGSM...")

        fgsm_row = self.attack_accuracy('--attack', 'fgsm', '--eps', '0.2')
        bim_row = self.attack_accuracy('--attack', 'BIM', '--eps', '0.2', '--steps', '1', '--alpha', '0.2')
        self.assertEqual(fgsm_row[3], bim_row[3])
        self.assertEqual(bim_row[1], "bim")
        print(f"   [OK] Both at accuracy {fgsm_row[3]}")

    # Test 6: Image dumps
    def test_06_attack_dump(self):
        """Adversarial images and saliency maps are written as PGM"""
        print("\n6. Testing --dump-dir...")

        dump_dir = self.root / "dump"
        self.attack_accuracy('--attack', 'mim', '--eps', '0.1', '--dump-dir', str(dump_dir),
                             '--dump-count', '4', '--dump-saliency')
        adversarial = sorted(dump_dir.glob("adv_mim_0.1_*.pgm"))
        self.assertEqual(len(adversarial), 4)
        self.assertEqual(len(list(dump_dir.glob("saliency_0_*.pgm"))), 4)
        self.assertEqual(decode_pgm(adversarial[0].read_bytes()).shape, (28, 28))
        print(f"   [OK] {len(adversarial)} adversarial images written")

    # Test 7: Sweep and report
    def test_07_sweep_and_report(self):
        """Paired sweep writes both curves and the summary; report renders them"""
        print("\n7. Testing salgrad sweep and report...")

        curves_path = self.root / "curves.csv"
        code, out, err = run_cli(['sweep', '--ckpt', str(self.checkpoints['saliency']),
                                  '--ckpt-baseline', str(self.checkpoints['regular']),
                                  '--attacks', 'fgsm,bim', '--bim-steps', '3', '--n-samples', '50',
                                  '--threads', '2', '--out', str(curves_path)] + self.data)
        self.assertEqual(code, 0, err)
        curves = read_csv(curves_path)
        self.assertEqual({(c.model_label, c.attack) for c in curves},
                         {("saliency", "fgsm"), ("saliency", "bim"), ("regular", "fgsm"), ("regular", "bim")})
        self.assertTrue(all(len(c.points) == 7 for c in curves))
        summary = Path(f"{curves_path}.summary.txt").read_text().splitlines()
        self.assertEqual(len(summary), 14)
        self.assertTrue(all(line.startswith("delta,") for line in summary))
        self.assertEqual([line for line in out.splitlines() if line.startswith("delta,")], summary)

        code, out, err = run_cli(['report', '--curves', str(curves_path)])
        self.assertEqual(code, 0, err)
        svg = curves_path.with_suffix(".svg").read_text()
        self.assertIn('id="panel-bim"', svg)
        self.assertIn("2 panels, 2 models", out)
        print(f"   [OK] {len(curves)} curves, {len(summary)} summary lines")

    # Test 8: Resolved configuration
    def test_08_print_config(self):
        """--print-config shows every default materialised"""
        print("\n8. Testing --print-config...")

        code, out, _ = run_cli(['sweep', '--ckpt', 'model.sgck', '--print-config'])
        self.assertEqual(code, 0)
        config = json.loads(out)
        options = config['options']
        self.assertEqual(config['command'], 'sweep')
        self.assertEqual(options['attacks'], ['fgsm', 'pgd', 'bim'])
        self.assertEqual(len(options['eps_grid']), 7)
        self.assertEqual(options['eps_grid'][-1], 0.3)
        self.assertEqual(options['n_samples'], 1000)
        self.assertEqual(options['label'], 'model')

        code, out, _ = run_cli(['train', '--mode', 'saliency', '--print-config'])
        options = json.loads(out)['options']
        self.assertEqual((options['lam'], options['mask_fraction'], options['fill_range']), (1.0, 0.5, 'image'))
        self.assertEqual((options['epochs'], options['batch_size'], options['lr']), (100, 256, 0.1))
        print("   [OK] Defaults materialised")

    # Test 9: Epsilon grids
    def test_09_eps_grid(self):
        """Range and list syntax; malformed grids are usage errors"""
        print("\n9. Testing parse_eps_grid...")

        self.assertEqual(parse_eps_grid("0:0.3:0.05"), [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3])
        self.assertEqual(parse_eps_grid("0, 0.1,0.3"), [0.0, 0.1, 0.3])
        for bad in ("0:0.3", "a,b", "0.2,0.1", "0:0.3:0", ""):
            with self.assertRaises(UsageError):
                parse_eps_grid(bad)
        code, _, _ = run_cli(['sweep', '--ckpt', 'model.sgck', '--eps-grid', '0.1:0.3:0.1'])
        self.assertEqual(code, 1)
        print("   [OK] Grids parsed")

    # Test 10: Self-check command
    def test_10_selfcheck(self):
        """Every self-check passes on a correct build"""
        print("\n10. Testing salgrad selfcheck...")

        code, out, err = run_cli(['selfcheck'])
        self.assertEqual(code, 0, out + err)
        self.assertNotIn("FAIL", out)
        print(f"   [OK] {out.strip().splitlines()[-1]}")

    # Test 11: Fetch command
    def test_11_fetch(self):
        """fetch downloads the four archives from the configured mirror"""
        print("\n11. Testing salgrad fetch...")

        response = mock.MagicMock()
        response.iter_content.return_value = [b"data"]
        with mock.patch("data.fetch.requests.get", return_value=response) as get:
            code, out, err = run_cli(['fetch', '--out', str(self.root / "mnist"),
                                      '--url', 'https://mirror.example/'])
        self.assertEqual(code, 0, err)
        self.assertEqual(len(out.strip().splitlines()), 4)
        self.assertEqual(get.call_count, 4)

        with mock.patch("data.fetch.requests.get", side_effect=requests.Timeout("slow")):
            code, _, _ = run_cli(['fetch', '--out', str(self.root / "mnist2")])
        self.assertEqual(code, 2)
        print("   [OK] Four archives fetched")

    # Test 12: Environment settings
    def test_12_settings(self):
        """.env values apply unless the environment already sets them"""
        print("\n12. Testing load_settings...")

        env = {k: v for k, v in os.environ.items() if not k.startswith("SALGRAD_")}
        env["SALGRAD_LOG_LEVEL"] = "warning"
        dotenv = self.root / ".env"
        dotenv.write_text("SALGRAD_DATA_DIR=/srv/mnist\nSALGRAD_LOG_LEVEL=DEBUG\n")
        with mock.patch.dict(os.environ, env, clear=True):
            settings = load_settings(dotenv)
        self.assertEqual(settings.data_dir, "/srv/mnist")
        self.assertEqual(settings.log_level, "WARNING")
        self.assertTrue(settings.mnist_url.startswith("https://"))
        print(f"   [OK] data_dir={settings.data_dir} log_level={settings.log_level}")

    # Test 13: Seeded evaluation subsets
    def test_13_seeded_subset(self):
        """Limited splits are a reproducible shuffled selection, not the first n samples"""
        print("\n13. Testing load_split subsets...")

        options = {'dataset': 'synthetic', 'synthetic_size': 256, 'data_seed': 0, 'data_dir': None}
        full = load_split(options, 'test')
        first = load_split(options, 'test', 40)
        second = load_split(options, 'test', 40)
        np.testing.assert_array_equal(first.images, second.images)
        self.assertEqual(len(first), 40)
        self.assertFalse(np.array_equal(first.images, full.images[:40]))
        other = load_split(dict(options, data_seed=1), 'test', 40)
        self.assertFalse(np.array_equal(other.images, first.images))
        print("   [OK] Seeded selection")

    # Test 14: Seed range on the command line
    def test_14_seed_out_of_range(self):
        """A seed beyond u64 is a usage error before any training starts"""
        print("\n14. Testing --seed range...")

        code, _, err = run_cli(['train', '--seed', str(2 ** 64), '--out', str(self.root / "never.sgck")] + self.data)
        self.assertEqual(code, 1)
        self.assertIn("seed", err)
        self.assertFalse((self.root / "never.sgck").exists())
        print("   [OK] Exit code 1")

    # Test 15: Unexpected failures
    def test_15_unexpected_error_exit_code(self):
        """Errors outside the package hierarchy exit with the runtime code"""
        print("\n15. Testing unexpected exceptions...")

        with mock.patch("cli.commands.read_csv", side_effect=ValueError("corrupt state")):
            code, _, err = run_cli(['report', '--curves', str(self.root / "curves.csv")])
        self.assertEqual(code, 2)
        self.assertIn("ValueError: corrupt state", err)
        print("   [OK] Exit code 2")


class ConfigSchemaTestCase(unittest.TestCase):
    """Unit tests for the JSON schemas and the schema validator"""

    @classmethod
    def setUpClass(cls):
        print("\n" + "=" * 60)
        print("Salgrad - Configuration Schema Tests")
        print("=" * 60)

    # Test 1: Validator reports every violation
    def test_01_schema_validator(self):
        """All violations are reported and recorded"""
        print("\n1. Testing SchemaValidator...")

        validator = SchemaValidator()
        valid = validator.validate({'attacks': ['fgsm'], 'eps_grid': [0, 0.1], 'n_samples': 10,
                                    'seed': 0, 'threads': 2}, get_config_schema('sweep'))
        self.assertTrue(valid['valid'])

        invalid = validator.validate({'attacks': ['cw'], 'eps_grid': [0], 'n_samples': 0,
                                      'seed': 0, 'threads': 1}, get_config_schema('sweep'))
        self.assertFalse(invalid['valid'])
        self.assertEqual(len(invalid['errors']), 2)
        self.assertEqual(len(validator.get_validation_errors()), 1)
        validator.clear_errors()
        self.assertEqual(validator.get_validation_errors(), [])
        print(f"   [OK] {len(invalid['errors'])} violations reported")

    # Test 2: require raises ConfigError
    def test_02_require(self):
        """require() raises with the offending paths"""
        print("\n2. Testing SchemaValidator.require...")

        with self.assertRaises(ConfigError) as ctx:
            SchemaValidator().require({'mode': 'regular', 'epochs': 0}, get_config_schema('train'), "training config")
        self.assertIn("epochs", str(ctx.exception))
        self.assertGreaterEqual(len(ctx.exception.errors), 2)
        self.assertEqual(ctx.exception.exit_code, 1)
        print("   [OK] ConfigError raised")

    # Test 3: Run config
    def test_03_run_config(self):
        """RunConfig validates its command and reproduces a command line"""
        print("\n3. Testing RunConfig...")

        config = RunConfig('report', {'curves': 'c.csv', 'out': 'c.svg', 'quiet': True, 'seed': 0})
        self.assertEqual(config.argv(), ['report', '--curves', 'c.csv', '--out', 'c.svg', '--quiet', '--seed', '0'])
        self.assertEqual(json.loads(config.to_json())['command'], 'report')
        with self.assertRaises(ConfigError):
            RunConfig('serve', {})
        print("   [OK] RunConfig validated")


def run_tests():
    """Run all unit tests"""
    # Create test suite
    loader = unittest.TestLoader()
    test_suite = unittest.TestSuite()
    for case in (AutodiffTestCase, ModelTestCase, SaliencyTrainingTestCase, AttacksTestCase,
                 DataTestCase, EvaluationReportTestCase, CliTestCase, ConfigSchemaTestCase):
        test_suite.addTests(loader.loadTestsFromTestCase(case))

    # Run tests with detailed output
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(test_suite)

    # Print summary
    print("\n" + "=" * 60)
    print("TEST SUMMARY")
    print("=" * 60)
    print(f"Tests run: {result.testsRun}")
    print(f"Successes: {result.testsRun - len(result.failures) - len(result.errors)}")
    print(f"Failures: {len(result.failures)}")
    print(f"Errors: {len(result.errors)}")

    if result.testsRun > 0:
        success_rate = ((result.testsRun - len(result.failures) - len(result.errors)) / result.testsRun * 100)
        print(f"Success rate: {success_rate:.1f}%")

    if result.failures:
        print("\nFAILURES:")
        for test, traceback in result.failures:
            print(f"  - {test}")

    if result.errors:
        print("\nERRORS:")
        for test, traceback in result.errors:
            print(f"  - {test}")

    if not result.failures and not result.errors:
        print("\nALL TESTS PASSED!")

    print("=" * 60)

    return result.wasSuccessful()


if __name__ == "__main__":
    print("Salgrad - Unit Test Suite")
    print("=" * 60)

    try:
        success = run_tests()
        exit(0 if success else 1)
    except KeyboardInterrupt:
        print("\n\nTests interrupted by user")
        exit(1)
    except Exception as e:
        print(f"\n\nUnexpected error: {e}")
        import traceback
        traceback.print_exc()
        exit(1)
