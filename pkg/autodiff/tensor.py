"""
Tensor and Tape
Dense tensors and the reverse-mode computation record
"""

import itertools
import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from common.errors import ContractError, NonFiniteError

logger = logging.getLogger(__name__)

DEFAULT_DTYPE = np.float32

_tensor_ids = itertools.count(1)
_active = threading.local()


class Tensor:
    """
    n-dimensional array of reals with a process-unique id

    Ids grow monotonically, so a tensor is always younger than the
    tensors it was computed from.
    """

    __slots__ = ("data", "id", "name")

    def __init__(self, data, dtype=None, name=None):
        array = np.asarray(data)
        if dtype is None:
            dtype = array.dtype if array.dtype in (np.float32, np.float64) else DEFAULT_DTYPE
        self.data = np.ascontiguousarray(array, dtype=dtype)
        self.id = next(_tensor_ids)
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        """Copy of the underlying array"""
        return self.data.copy()

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"Tensor(id={self.id}{label}, shape={self.shape}, dtype={self.dtype})"


@dataclass
class TapeNode:
    """One recorded op: output id, parents and the local gradient rule"""

    output: int
    op: str
    parents: Tuple[int, ...]
    vjp: Callable
    saved: Dict[str, object] = field(default_factory=dict)


class Tape:
    """
    Reverse-mode record built during a forward pass

    Used as a context manager; ops executed inside the block are
    appended in creation order, which is a topological order.
    """

    def __init__(self):
        self.nodes = []
        self.shapes = {}
        self.dtypes = {}

    def __enter__(self):
        stack = getattr(_active, "stack", None)
        if stack is None:
            stack = _active.stack = []
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _active.stack.pop()
        return False

    def watch(self, *tensors):
        """Register leaf tensors so gradients can be requested for them"""
        for tensor in tensors:
            self.shapes[tensor.id] = tensor.shape
            self.dtypes[tensor.id] = tensor.dtype
        return tensors[0] if len(tensors) == 1 else tensors

    def record(self, op, output, parents, vjp, **saved):
        for parent in parents:
            if parent.id >= output.id:
                raise ContractError(f"{op}: parent {parent.id} is not older than output {output.id}")
            self.shapes.setdefault(parent.id, parent.shape)
            self.dtypes.setdefault(parent.id, parent.dtype)
        self.shapes[output.id] = output.shape
        self.dtypes[output.id] = output.dtype
        self.nodes.append(TapeNode(output.id, op, tuple(p.id for p in parents), vjp, saved))

    def __len__(self):
        return len(self.nodes)


def active_tape() -> Optional[Tape]:
    """Innermost tape of the calling thread, if any"""
    stack = getattr(_active, "stack", None)
    return stack[-1] if stack else None


class GradMap(dict):
    """Mapping tensor id -> gradient array; also indexable by Tensor"""

    def __getitem__(self, key):
        if isinstance(key, Tensor):
            key = key.id
        return super().__getitem__(key)

    def __contains__(self, key):
        if isinstance(key, Tensor):
            key = key.id
        return super().__contains__(key)


def check_finite(op, array):
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(f"{op} produced non-finite values")
    return array


def backward(loss, tape, wrt):
    """
    Reverse-mode gradients of a scalar loss

    Args:
        loss: Scalar Tensor recorded on the tape
        tape: Tape holding the forward computation
        wrt: Iterable of Tensors (or tensor ids) to differentiate against

    Returns:
        GradMap id -> gradient array, zeros for tensors not on a path to loss
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")

    wanted = []
    for item in wrt:
        tensor_id = item.id if isinstance(item, Tensor) else int(item)
        if isinstance(item, Tensor):
            tape.shapes.setdefault(tensor_id, item.shape)
            tape.dtypes.setdefault(tensor_id, item.dtype)
        if tensor_id not in tape.shapes:
            raise ContractError(f"tensor {tensor_id} was never seen by this tape")
        wanted.append(tensor_id)

    # ids whose gradient is required: the targets and everything downstream of them
    needed = set(wanted)
    for node in tape.nodes:
        if any(parent in needed for parent in node.parents):
            needed.add(node.output)

    grads = {loss.id: np.ones(loss.shape, dtype=loss.dtype)}
    for node in reversed(tape.nodes):
        upstream = grads.get(node.output)
        if upstream is None:
            continue
        needs = tuple(parent in needed for parent in node.parents)
        if not any(needs):
            continue
        local = node.vjp(upstream, needs)
        for parent, need, grad in zip(node.parents, needs, local):
            if not need or grad is None:
                continue
            grad = np.asarray(grad, dtype=tape.dtypes.get(parent, grad.dtype))
            if parent in grads:
                grads[parent] = grads[parent] + grad
            else:
                grads[parent] = grad

    result = GradMap()
    for tensor_id in wanted:
        grad = grads.get(tensor_id)
        if grad is None:
            grad = np.zeros(tape.shapes[tensor_id], dtype=tape.dtypes[tensor_id])
        result[tensor_id] = grad
    logger.debug(f"backward over {len(tape)} nodes for {len(wanted)} targets")
    return result
