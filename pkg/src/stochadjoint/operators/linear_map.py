"""
Dense matrix realization of an operator between weighted L2 spaces.

The pairing on each side is diagonal, <x, y> = sum_i g_i x_i y_i, so the adjoint
with respect to these pairings is G_dom^-1 A^T G_cod.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from stochadjoint.core.errors import ParameterError, SpaceMismatchError, WorkbenchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearMap:
    """
    Matrix of an operator over indicator bases.

    Attributes:
        matrix: Shape (codomain size, domain size); column j is the image of basis vector j
        domain_weights: Gram weights of the domain pairing
        codomain_weights: Gram weights of the codomain pairing
        name: Operator name, e.g. "J" or "J*"
        domain: Descriptor of the domain space
        codomain: Descriptor of the codomain space
    """

    matrix: np.ndarray = field(repr=False)
    domain_weights: np.ndarray = field(repr=False)
    codomain_weights: np.ndarray = field(repr=False)
    name: str = "A"
    domain: str = ""
    codomain: str = ""

    def __post_init__(self) -> None:
        rows, cols = self.matrix.shape
        if self.domain_weights.shape != (cols,) or self.codomain_weights.shape != (rows,):
            raise ParameterError(
                f"{self.name}: matrix {self.matrix.shape} does not match weights "
                f"{self.domain_weights.shape} -> {self.codomain_weights.shape}"
            )
        if np.any(self.domain_weights <= 0) or np.any(self.codomain_weights <= 0):
            raise ParameterError(f"{self.name}: Gram weights must be positive")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.matrix.shape[1]:
            raise SpaceMismatchError(
                f"{self.name} expects {self.matrix.shape[1]} entries, got {x.shape[0]}"
            )
        return self.matrix @ x

    def adjoint(self) -> LinearMap:
        return adjoint_oracle(self)

    def compose(self, other: LinearMap) -> LinearMap:
        """self after other."""
        if not np.allclose(self.domain_weights, other.codomain_weights):
            raise SpaceMismatchError(f"cannot compose {self.name} with {other.name}")
        return LinearMap(
            self.matrix @ other.matrix,
            other.domain_weights,
            self.codomain_weights,
            name=f"{self.name}{other.name}",
            domain=other.domain,
            codomain=self.codomain,
        )

    def domain_pairing(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.sum(self.domain_weights * x * y))

    def codomain_pairing(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.sum(self.codomain_weights * x * y))

    def to_frame(self) -> pd.DataFrame:
        """Dense table: one row per codomain slot, one column per domain slot."""
        return pd.DataFrame(self.matrix)

    def to_triplets(self, atol: float = 0.0) -> Dict[str, Any]:
        """Nonzero entries as (row, col, value) plus the Gram weights."""
        rows, cols = np.nonzero(np.abs(self.matrix) > atol)
        return {
            "name": self.name,
            "domain": self.domain,
            "codomain": self.codomain,
            "shape": list(self.matrix.shape),
            "entries": [[int(r), int(c), float(self.matrix[r, c])] for r, c in zip(rows, cols)],
            "domain_weights": self.domain_weights.tolist(),
            "codomain_weights": self.codomain_weights.tolist(),
        }


def adjoint_oracle(operator: LinearMap) -> LinearMap:
    """
    A* = G_dom^-1 A^T G_cod, the adjoint with respect to the weighted pairings.

    Involutive: adjoint_oracle(adjoint_oracle(A)) reproduces A.

    Raises:
        WorkbenchError: If a Gram weight vanishes
    """
    if np.any(operator.domain_weights == 0):
        raise WorkbenchError(f"{operator.name}: singular domain Gram matrix")
    weights = operator.codomain_weights[None, :] / operator.domain_weights[:, None]
    matrix = operator.matrix.T * weights
    name = operator.name[:-1] if operator.name.endswith("*") else f"{operator.name}*"
    return LinearMap(
        matrix,
        operator.codomain_weights,
        operator.domain_weights,
        name=name,
        domain=operator.codomain,
        codomain=operator.domain,
    )


def weighted_projection(
    basis: np.ndarray, weights: np.ndarray, x: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Orthogonal projection of x onto the column span of `basis` under the weighted pairing.

    Solves the weighted least-squares problem with scipy's least-norm solver, so
    rank-deficient bases give a well-defined answer.

    Returns:
        (projection, coefficients)
    """
    root = np.sqrt(weights)
    if basis.shape[1] == 0:
        return np.zeros_like(x), np.zeros(0)
    coefficients, _, rank, _ = linalg.lstsq(basis * root[:, None], x * root)
    logger.debug(f"Projection onto {basis.shape[1]} columns of rank {rank}")
    return basis @ coefficients, coefficients


def min_eigenvalue(operator: LinearMap) -> float:
    """
    Smallest eigenvalue of a self-adjoint map, symmetrized in the weighted basis.

    With G^(1/2) A G^(-1/2) symmetric the spectrum is real.
    """
    root = np.sqrt(operator.domain_weights)
    symmetric = root[:, None] * operator.matrix / root[None, :]
    symmetric = 0.5 * (symmetric + symmetric.T)
    return float(linalg.eigvalsh(symmetric)[0])
