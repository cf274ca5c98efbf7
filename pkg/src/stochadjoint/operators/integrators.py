"""
The integration operators on a scenario tree.

    (L f)(t_k)   = sum_{j<k} f(t_j) dt
    (J phi)(t_k) = sum_{j<k} phi(t_j) dw_{j+1}
    (P a)(t_k)   = sum_{j<k} sum_i a(t_j, y_i) (flag_{j+1,i} - q_i)

Integrands are evaluated at the left end of each cell. Outputs are processes on
the same grid whose value at t_k is the integral over [0, t_k), with the value at
t = 1 kept as the terminal array.

The level recursions accept trailing batch axes, which is how `assemble_matrix`
pushes a whole indicator basis through an operator in one pass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple, Union

import numpy as np

from stochadjoint.core.errors import ModelError, TreeSizeError
from stochadjoint.spaces.processes import (
    MarkedProcess,
    Process,
    marked_pairing_weights,
    pair_L2Pi,
    pairing_weights,
)
from stochadjoint.spaces.tree import MarkSet, PathSample, ScenarioTree, TimeGrid
from stochadjoint.operators.linear_map import LinearMap

logger = logging.getLogger(__name__)

# dense assembly stops at this many domain slots
ASSEMBLY_LIMIT = 4096


class OperatorTag(str, Enum):
    L = "L"
    J = "J"
    P = "P"


def require_wiener(tree: ScenarioTree) -> None:
    if not tree.has_wiener:
        raise ModelError(f"{tree!r} has no Wiener driver; use a wiener or joint tree")


def require_marks(tree: ScenarioTree) -> None:
    if not tree.has_marks:
        raise ModelError(f"{tree!r} has no marks; use a poisson or joint tree")


def _broadcast(column: np.ndarray, target: np.ndarray) -> np.ndarray:
    return column.reshape(column.shape + (1,) * (target.ndim - column.ndim))


def _increment(tree: ScenarioTree, previous: np.ndarray, tag: OperatorTag, k: int) -> np.ndarray:
    """Contribution of the step t_{k-1} -> t_k, as a level-k array."""
    lifted = tree.lift(previous, k - 1, k)
    if tag is OperatorTag.L:
        return lifted * tree.dt
    if tag is OperatorTag.J:
        dw = tree.wiener_increments(k)
        return lifted * _broadcast(dw, lifted)
    compensated = tree.compensated_increments(k)
    return np.einsum("am...,am->a...", lifted, compensated)


def integrate_levels(
    tree: ScenarioTree, levels: Sequence[np.ndarray], tag: Union[OperatorTag, str]
) -> List[np.ndarray]:
    """
    Run the integral recursion out_k = out_{k-1} + increment_k.

    Args:
        tree: Probability space
        levels: Integrand level arrays k = 0..n-1, with a mark axis for P and
            optional trailing batch axes
        tag: Which operator

    Returns:
        n + 1 level arrays, the last one being the value at t = 1
    """
    tag = OperatorTag(tag)
    if tag is OperatorTag.J:
        require_wiener(tree)
    elif tag is OperatorTag.P:
        require_marks(tree)

    batch = levels[0].shape[2:] if tag is OperatorTag.P else levels[0].shape[1:]
    out = [np.zeros((1,) + batch)]
    for k in range(1, tree.n_steps + 1):
        out.append(tree.lift(out[-1], k - 1, k) + _increment(tree, levels[k - 1], tag, k))
    return out


def op_L(f: Process) -> Process:
    """Pathwise Lebesgue integral; (L f)(t_0) = 0."""
    out = integrate_levels(f.tree, f.levels, OperatorTag.L)
    return Process(f.tree, out[:-1], terminal=out[-1])


def op_J(phi: Process) -> Process:
    """
    Ito integral against the tree's Wiener driver.

    Raises:
        ModelError: If the tree has no Wiener driver
    """
    out = integrate_levels(phi.tree, phi.levels, OperatorTag.J)
    return Process(phi.tree, out[:-1], terminal=out[-1])


def op_P(a: MarkedProcess) -> Process:
    """
    Integral against the compensated jump measure.

    Raises:
        ModelError: If the tree has no marks
    """
    out = integrate_levels(a.tree, a.levels, OperatorTag.P)
    return Process(a.tree, out[:-1], terminal=out[-1])


def domain_size(tree: ScenarioTree, tag: Union[OperatorTag, str]) -> int:
    slots = sum(tree.level_size(k) for k in range(tree.n_steps))
    return slots * tree.n_marks if OperatorTag(tag) is OperatorTag.P else slots


def assemble_matrix(tag: Union[OperatorTag, str], tree: ScenarioTree) -> LinearMap:
    """
    Matrix of L, J or P over the indicator bases of the process spaces.

    Column j is the image of the j-th indicator, in `to_vector` order. The
    codomain is the process space on indices 0..n-1 with the L2 pairing weights;
    the domain carries the L2 weights (L, J) or the marked L2(Pi) weights (P).

    Raises:
        ModelError: If the operator does not apply to the tree
        TreeSizeError: If the domain exceeds the dense assembly limit
    """
    tag = OperatorTag(tag)
    size = domain_size(tree, tag)
    if size > ASSEMBLY_LIMIT:
        raise TreeSizeError(size, ASSEMBLY_LIMIT)

    identity = np.eye(size)
    levels = []
    offset = 0
    for k in range(tree.n_steps):
        width = tree.level_size(k) * (tree.n_marks if tag is OperatorTag.P else 1)
        block = identity[offset : offset + width]
        if tag is OperatorTag.P:
            block = block.reshape(tree.level_size(k), tree.n_marks, size)
        levels.append(block)
        offset += width

    out = integrate_levels(tree, levels, tag)
    matrix = np.concatenate(out[:-1], axis=0)
    domain_weights = marked_pairing_weights(tree) if tag is OperatorTag.P else pairing_weights(tree)
    logger.debug(f"Assembled {tag.value} on {tree!r}: matrix {matrix.shape}")
    return LinearMap(
        matrix,
        domain_weights,
        pairing_weights(tree),
        name=tag.value,
        domain="L2(Pi)" if tag is OperatorTag.P else "L2",
        codomain="L2",
    )


@dataclass(frozen=True)
class MartingaleTest:
    """Outcome of `is_martingale`: the verdict and the largest one-step defect."""

    is_martingale: bool
    defect: float

    def __bool__(self) -> bool:
        return self.is_martingale


def martingale_defect(x: Process) -> float:
    """max_k max |E[x(t_{k+1}) | F_{t_k}] - x(t_k)|, including the terminal step if present."""
    tree = x.tree
    last = x.n_steps if x.terminal is not None else x.n_steps - 1
    defect = 0.0
    for k in range(last):
        step = tree.conditional_expectation(x[k + 1], k + 1, k) - x[k]
        defect = max(defect, float(np.max(np.abs(step))))
    return defect


def is_martingale(x: Process, tolerance: float = 1e-12) -> MartingaleTest:
    """
    Whether x(t_k) = E[x(t_{k+1}) | F_{t_k}] on every atom.

    The tolerance is relative to the largest value of the process.
    """
    scale = max(float(np.max(np.abs(v))) for v in x.levels)
    defect = martingale_defect(x)
    return MartingaleTest(defect <= tolerance * (1.0 + scale), defect)


def poisson_second_moment(a: MarkedProcess) -> float:
    """E[P(a)(1)^2], by enumeration of the tree."""
    terminal = op_P(a).terminal
    return float(a.tree.expectation(terminal**2, a.tree.n_steps))


def tree_poisson_variance(a: MarkedProcess) -> float:
    """sum_k E sum_i a^2 q_i (1 - q_i): the tree's exact value of E[P(a)(1)^2]."""
    tree = a.tree
    variance = tree.branches.q * (1.0 - tree.branches.q)
    return float(sum(tree.expectation(v**2 @ variance, k) for k, v in enumerate(a.levels)))


def intensity_poisson_variance(a: MarkedProcess) -> float:
    """sum_k dt E sum_i a^2 pi_i: the continuous-time isometry value."""
    return pair_L2Pi(a, a)


def deterministic_poisson_second_moment(
    values: np.ndarray, marks: MarkSet, n_steps: int
) -> Tuple[float, float]:
    """
    Both sides of the Poisson isometry for a time-only integrand a(t_k, y_i).

    Needs no tree, so it is usable far beyond the exact-mode atom cap.

    Args:
        values: Shape (n_steps, m)
        marks: Mark set
        n_steps: Grid resolution

    Returns:
        (tree value sum a^2 q (1 - q), intensity value sum a^2 pi dt)
    """
    grid = TimeGrid(n_steps)
    q = marks.jump_probabilities(grid.dt)
    values = np.asarray(values, dtype=float).reshape(n_steps, len(marks))
    squares = (values**2).sum(axis=0)
    return float(squares @ (q * (1.0 - q))), float(squares @ (marks.intensities * grid.dt))


def sampled_J(phi_paths: np.ndarray, sample: PathSample) -> np.ndarray:
    """
    J(phi) along sampled paths.

    Args:
        phi_paths: Integrand values along the paths, shape (n_paths, n_steps)

    Returns:
        Shape (n_paths, n_steps + 1); column k is J(phi)(t_k)
    """
    require_wiener(sample.tree)
    out = np.zeros((sample.n_paths, sample.tree.n_steps + 1))
    np.cumsum(phi_paths * sample.wiener_increments, axis=1, out=out[:, 1:])
    return out


def sampled_P(a_paths: np.ndarray, sample: PathSample) -> np.ndarray:
    """
    P(a) along sampled paths.

    Args:
        a_paths: Integrand values along the paths, shape (n_paths, n_steps, m)

    Returns:
        Shape (n_paths, n_steps + 1)
    """
    require_marks(sample.tree)
    out = np.zeros((sample.n_paths, sample.tree.n_steps + 1))
    np.cumsum(np.sum(a_paths * sample.compensated_increments, axis=2), axis=1, out=out[:, 1:])
    return out
