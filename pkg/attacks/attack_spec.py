"""
Attack Spec
Attack kind and step schedule, validated against the attack schema
"""

import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from schema.config_schemas import get_config_schema
from schema.schema_validator import validator

logger = logging.getLogger(__name__)

# Per-kind default schedule: (steps, alpha as a fraction of epsilon)
DEFAULT_SCHEDULE = {
    'fgsm': (1, 1.0),
    'bim': (10, 0.25),
    'pgd': (40, 0.05),
    'mim': (10, 0.25),
}
DEFAULT_MU = 1.0
# Step size used when epsilon is 0 and the schedule would give alpha == 0.
ZERO_BUDGET_ALPHA = 1.0 / 255.0


@dataclass(frozen=True)
class AttackSpec:
    """
    L-infinity attack parameters: budget epsilon, step alpha, step count, momentum mu
    """

    kind: str
    epsilon: float
    alpha: Optional[float] = None
    steps: int = 1
    mu: float = DEFAULT_MU
    seed: int = 0

    def __post_init__(self):
        validator.require(self.to_dict(), get_config_schema('attack'), f"{self.kind} attack spec")
        if self.alpha is not None and self.alpha > self.epsilon > 0:
            logger.warning(f"{self.kind}: step size {self.alpha} exceeds the budget {self.epsilon}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def with_defaults(cls, kind, epsilon, alpha=None, steps=None, mu=None, seed=0):
        """
        Fill unset fields from the default schedule

        BIM and MIM take 10 steps of epsilon/4, PGD 40 steps of epsilon/20,
        FGSM a single step of epsilon.
        """
        kind = kind.lower()
        if kind not in DEFAULT_SCHEDULE:
            validator.require({'kind': kind, 'epsilon': epsilon, 'steps': 1, 'mu': 0, 'seed': 0},
                              get_config_schema('attack'), "attack spec")
        default_steps, fraction = DEFAULT_SCHEDULE[kind]
        if alpha is None:
            alpha = epsilon * fraction if epsilon > 0 else ZERO_BUDGET_ALPHA
        return cls(kind=kind, epsilon=float(epsilon), alpha=float(alpha),
                   steps=int(steps if steps is not None else default_steps),
                   mu=float(mu if mu is not None else DEFAULT_MU), seed=int(seed))


@dataclass
class AdversarialBatch:
    """Adversarial images, their sources and the per-sample L-infinity distance"""

    adversarial: np.ndarray
    original: np.ndarray
    perturbation_norm: np.ndarray
    degenerate_steps: int = 0

    @classmethod
    def build(cls, adversarial, original, degenerate_steps=0):
        n = original.shape[0]
        norm = np.abs(adversarial.reshape(n, -1).astype(np.float64)
                      - original.reshape(n, -1).astype(np.float64)).max(axis=1)
        return cls(adversarial, original, norm, degenerate_steps)

    def contained(self, epsilon, tolerance=1e-6):
        """True when every sample lies in the epsilon-box and the valid pixel range"""
        inside_box = bool(np.all(self.perturbation_norm <= epsilon + tolerance))
        inside_range = bool(np.all((self.adversarial >= 0.0) & (self.adversarial <= 1.0)))
        return inside_box and inside_range

