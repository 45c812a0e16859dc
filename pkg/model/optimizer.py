"""
Adadelta Optimizer
Decayed accumulators of squared gradients and squared updates
"""

import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from common.errors import ContractError, ParameterError

logger = logging.getLogger(__name__)


@dataclass
class AdadeltaState:
    """Per-parameter accumulators E[g^2] and E[dx^2] plus the update constants"""

    rho: float = 0.9
    eps: float = 1e-6
    lr: float = 0.1
    square_avg: Dict[str, np.ndarray] = field(default_factory=dict)
    acc_delta: Dict[str, np.ndarray] = field(default_factory=dict)
    steps: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ParameterError(f"Adadelta rho must be in [0, 1), got {self.rho}")
        if self.eps <= 0:
            raise ParameterError(f"Adadelta eps must be positive, got {self.eps}")
        if self.lr <= 0:
            raise ParameterError(f"Adadelta lr must be positive, got {self.lr}")


def init_adadelta(model, lr=0.1, rho=0.9, eps=1e-6):
    """Fresh state with zero accumulators shaped like the parameters"""
    state = AdadeltaState(rho=rho, eps=eps, lr=lr)
    for name, param in model.params.items():
        state.square_avg[name] = np.zeros(param.shape, dtype=param.dtype)
        state.acc_delta[name] = np.zeros(param.shape, dtype=param.dtype)
    logger.info(f"Adadelta initialized: lr={lr}, rho={rho}, eps={eps}")
    return state


def adadelta_step(model, grads, state):
    """
    Apply one Adadelta update in place

    Args:
        model: Model whose parameters are updated
        grads: GradMap (or name -> array mapping) covering every parameter
        state: AdadeltaState, updated in place

    Returns:
        (model, state)
    """
    for name, param in model.params.items():
        if param in grads:
            grad = grads[param]
        elif name in grads:
            grad = grads[name]
        else:
            raise ContractError(f"missing gradient for parameter {name}")
        if grad.shape != param.shape:
            raise ContractError(f"gradient for {name} has shape {grad.shape}, expected {param.shape}")

        dtype = param.dtype.type
        rho, eps, lr = dtype(state.rho), dtype(state.eps), dtype(state.lr)
        grad = grad.astype(param.dtype, copy=False)
        square_avg = state.square_avg.get(name)
        if square_avg is None:
            square_avg = np.zeros(param.shape, dtype=param.dtype)
            state.acc_delta[name] = np.zeros(param.shape, dtype=param.dtype)

        square_avg = rho * square_avg + (1 - rho) * grad * grad
        delta = np.sqrt(state.acc_delta[name] + eps) / np.sqrt(square_avg + eps) * grad
        param.data = param.data - lr * delta
        state.acc_delta[name] = rho * state.acc_delta[name] + (1 - rho) * delta * delta
        state.square_avg[name] = square_avg

    state.steps += 1
    return model, state
