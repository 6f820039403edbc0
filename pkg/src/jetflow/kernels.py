"""Radial interaction kernels with exact higher-order derivative tensors.

The gaussian family K(r) = exp(-|r|^2 / (2 sigma^2)) is the only one that
ships; it is normalized so K(0) = 1 and is smooth at every order, so all
derivative tensors up to order 5 exist in closed form. Derivatives are
evaluated through the 1-D Hermite factorization in :mod:`jetflow.backend`
rather than finite differences, which keeps them exact to machine
precision and bitwise symmetric in their indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import MAX_DERIV_ORDER, deriv_stack
from .errors import InvalidInputError

KERNEL_FAMILIES = ("gaussian",)


@dataclass(frozen=True)
class Kernel:
    """Gaussian kernel on R^dim with length scale sigma.

    Invariants: sigma > 0, dim in {1, 2, 3}, K(0) = 1, K even.
    """

    family: str = "gaussian"
    sigma: float = 1.0
    dim: int = 2

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise InvalidInputError(f"unknown kernel family {self.family!r}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidInputError(f"kernel sigma must be positive, got {self.sigma}")
        if self.dim not in (1, 2, 3):
            raise InvalidInputError(f"kernel dim must be 1, 2 or 3, got {self.dim}")

    def _check_displacement(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (self.dim,):
            raise InvalidInputError(
                f"displacement shape {r.shape} does not match dim {self.dim}"
            )
        return r

    def eval(self, r) -> float:
        """K(r) for a single displacement r in R^dim."""
        r = self._check_displacement(r)
        u2 = float(np.dot(r, r)) / self.sigma**2
        return float(np.exp(-0.5 * u2))

    def deriv_tensor(self, r, m: int) -> np.ndarray:
        """Rank-m derivative tensor of K at r.

        Entry (j1..jm) is the mixed partial of K along those axes; the
        result is fully symmetric under index permutation. m = 0 returns
        a 0-d array holding K(r).
        """
        if not isinstance(m, (int, np.integer)) or not 0 <= m <= MAX_DERIV_ORDER:
            raise InvalidInputError(
                f"derivative order must be an integer in 0..{MAX_DERIV_ORDER}, got {m}"
            )
        r = self._check_displacement(r)
        return deriv_stack(r, self.sigma, int(m))[int(m)]

    def deriv_all(self, r, m_max: int) -> list[np.ndarray]:
        """All derivative tensors of order 0..m_max at r (one pass)."""
        if not 0 <= m_max <= MAX_DERIV_ORDER:
            raise InvalidInputError(
                f"derivative order must be in 0..{MAX_DERIV_ORDER}, got {m_max}"
            )
        r = self._check_displacement(r)
        return deriv_stack(r, self.sigma, int(m_max))
