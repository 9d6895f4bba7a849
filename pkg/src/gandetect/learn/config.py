from __future__ import annotations

from dataclasses import dataclass

from ..degrade import AugmentPolicy
from ..imagecore import InvalidInputError
from ..spectral import is_pow2


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters shared by the linear and CNN detectors.

    ``epochs``, ``batch``, ``lr`` and ``momentum`` drive CNN SGD. The linear
    detectors run ``linear_iters`` full-batch steps whose size is set from
    the data's curvature bound, with the same ``momentum``.
    """

    epochs: int = 20
    batch: int = 32
    lr: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    augment: AugmentPolicy | None = None
    side: int = 64
    linear_iters: int = 3000

    def __post_init__(self):
        if self.epochs < 1 or self.batch < 1 or self.linear_iters < 1:
            raise InvalidInputError("epochs, batch and linear_iters must be positive")
        if not self.lr > 0:
            raise InvalidInputError("lr must be positive")
        if not 0 <= self.momentum < 1:
            raise InvalidInputError("momentum must be in [0, 1)")
        if not is_pow2(self.side):
            raise InvalidInputError(f"side must be a power of two, got {self.side}")
