"""
Abstract base class for smooth losses minimized by the proximal gradient engines.

Every loss the engines see implements SmoothLoss: the data-fidelity cost of
Type-1 distillation and the OPF-fidelity cost of Type-2 distillation.
"""

from abc import ABC, abstractmethod
from typing import Optional, Tuple

import numpy as np


class SmoothLoss(ABC):
    """
    Differentiable part f(W) of a composite objective f(W) + λ·g(W).

    Implementations must be deterministic for a fixed W.
    """

    @abstractmethod
    def value(self, W: np.ndarray) -> float:
        """
        Evaluate f at W.

        Args:
            W: P×P map

        Returns:
            Loss value
        """
        pass

    @abstractmethod
    def gradient(self, W: np.ndarray) -> np.ndarray:
        """
        Evaluate ∇f at W.

        Args:
            W: P×P map

        Returns:
            P×P gradient
        """
        pass

    def value_and_gradient(self, W: np.ndarray) -> Tuple[float, np.ndarray]:
        """
        Evaluate f and ∇f together.

        Subclasses that share work between the two (e.g. one OPF batch) should
        override this.
        """
        return self.value(W), self.gradient(W)

    @property
    def lipschitz(self) -> Optional[float]:
        """Global Lipschitz constant of ∇f, or None when unknown."""
        return None
