"""
Two-parameter kernels, the operators J~ and P~, and representation kernels.

A kernel lambda(t_k, s_j) is stored row by row: row k holds the arrays for
j = 0..k-1, the j-th one measurable with respect to F_{s_j} (a level-j array,
with a trailing mark axis for marked kernels). Rows run over k = 0..n-1 and
row 0 is empty.

Representation kernels come from a downward recursion over the martingale
M_j = E[X | F_{t_j}] of a level-m variable X:

    wiener:  lambda_j = E[M_{j+1} dw_{j+1} | F_{t_j}] / dt
    poisson: mu_{j,i} = E[M_{j+1} (flag_i - q_i) | F_{t_j}] / (q_i (1 - q_i))

Both are conditional regression coefficients on one step, so on any tree they
give the orthogonal projection onto the span of the stochastic integrals of
that driver; on the binary Wiener tree the Wiener part alone reproduces X.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from stochadjoint.core.errors import (
    LevelError,
    MartingaleDefectError,
    ModelError,
    ParameterError,
    TreeSizeError,
)
from stochadjoint.operators.integrators import (
    ASSEMBLY_LIMIT,
    is_martingale,
    op_J,
    require_marks,
    require_wiener,
)
from stochadjoint.spaces.processes import Process, norm_Lp, pair_L2
from stochadjoint.spaces.tree import Model, RandomVariable, ScenarioTree, space_descriptor

logger = logging.getLogger(__name__)

# reconstruction must be exact on the Wiener tree up to rounding
RECONSTRUCTION_TOLERANCE = 1e-9


class Driver(str, Enum):
    WIENER = "w"
    POISSON = "nu"


class _TriangularKernel:
    """Shared storage of Kernel2 and MarkedKernel2."""

    __slots__ = ("_tree", "_rows")

    def __init__(self, tree: ScenarioTree, rows: Sequence[Sequence[np.ndarray]]) -> None:
        if len(rows) != tree.n_steps:
            raise LevelError(f"a kernel needs {tree.n_steps} rows, got {len(rows)}")
        checked = []
        for k, row in enumerate(rows):
            if len(row) != k:
                raise LevelError(f"kernel row {k} needs {k} entries, got {len(row)}")
            arrays = []
            for j, values in enumerate(row):
                array = np.asarray(values, dtype=float)
                expected = (tree.level_size(j),) + self._trailing(tree)
                if array.shape != expected:
                    raise LevelError(
                        f"kernel entry ({k}, {j}) needs shape {expected}, got {array.shape}"
                    )
                arrays.append(array)
            checked.append(tuple(arrays))
        self._tree = tree
        self._rows = tuple(checked)

    @staticmethod
    def _trailing(tree: ScenarioTree) -> Tuple[int, ...]:
        return ()

    @classmethod
    def from_function(cls, tree: ScenarioTree, fn: Callable[[int, int], np.ndarray]) -> Any:
        """fn(k, j) returns the level-j array of lambda(t_k, s_j)."""
        return cls(tree, [[fn(k, j) for j in range(k)] for k in range(tree.n_steps)])

    @classmethod
    def constant(cls, tree: ScenarioTree, value: float) -> Any:
        shape = cls._trailing(tree)
        return cls.from_function(
            tree, lambda k, j: np.full((tree.level_size(j),) + shape, float(value))
        )

    @classmethod
    def zeros(cls, tree: ScenarioTree) -> Any:
        return cls.constant(tree, 0.0)

    @classmethod
    def random(cls, tree: ScenarioTree, rng: np.random.Generator, scale: float = 1.0) -> Any:
        shape = cls._trailing(tree)
        return cls.from_function(
            tree, lambda k, j: scale * rng.standard_normal((tree.level_size(j),) + shape)
        )

    @classmethod
    def from_vector(cls, tree: ScenarioTree, vector: np.ndarray) -> Any:
        vector = np.asarray(vector, dtype=float)
        shape = cls._trailing(tree)
        width = int(np.prod(shape)) if shape else 1
        expected = kernel_size(tree) * width
        if vector.shape != (expected,):
            raise LevelError(f"vector of shape {vector.shape} does not fit {expected} kernel slots")
        rows: List[List[np.ndarray]] = []
        offset = 0
        for k in range(tree.n_steps):
            row = []
            for j in range(k):
                size = tree.level_size(j) * width
                row.append(vector[offset : offset + size].reshape((tree.level_size(j),) + shape))
                offset += size
            rows.append(row)
        return cls(tree, rows)

    @property
    def tree(self) -> ScenarioTree:
        return self._tree

    @property
    def rows(self) -> tuple:
        return self._rows

    def row(self, k: int) -> tuple:
        return self._rows[k]

    def entry(self, k: int, j: int) -> np.ndarray:
        if not 0 <= j < k < self._tree.n_steps:
            raise LevelError(
                f"kernel entries need 0 <= j < k < {self._tree.n_steps}, got ({k}, {j})"
            )
        return self._rows[k][j]

    def near_diagonal(self) -> List[np.ndarray]:
        """lambda(t_{j+1}, s_j) for j = 0..n-2."""
        return [self._rows[j + 1][j] for j in range(self._tree.n_steps - 1)]

    def to_vector(self) -> np.ndarray:
        parts = [a.ravel() for row in self._rows for a in row]
        return np.concatenate(parts) if parts else np.zeros(0)

    def max_abs_difference(self, other: _TriangularKernel) -> float:
        self._tree.require_same(other.tree)
        diffs = [
            np.max(np.abs(a - b))
            for ra, rb in zip(self._rows, other.rows)
            for a, b in zip(ra, rb)
        ]
        return float(max(diffs, default=0.0))

    def _map(self, fn: Callable[..., np.ndarray], other: Any = None) -> Any:
        if isinstance(other, _TriangularKernel):
            self._tree.require_same(other.tree)
            rows = [[fn(a, b) for a, b in zip(ra, rb)] for ra, rb in zip(self._rows, other.rows)]
        else:
            rows = [[fn(a, other) for a in row] for row in self._rows]
        return type(self)(self._tree, rows)

    def __add__(self, other: Any) -> Any:
        return self._map(np.add, other)

    def __sub__(self, other: Any) -> Any:
        return self._map(np.subtract, other)

    def __mul__(self, other: float) -> Any:
        return self._map(np.multiply, other)

    __rmul__ = __mul__

    def _records(self) -> List[List[Any]]:
        records = []
        for k, row in enumerate(self._rows):
            for j, values in enumerate(row):
                for atom, value in enumerate(values):
                    if np.ndim(value) == 0:
                        records.append([k, j, atom, float(value)])
                    else:
                        records.extend([k, j, atom, i, float(v)] for i, v in enumerate(value))
        return records

    def to_dict(self) -> Dict[str, Any]:
        """Triplet form: one [k, j, atom, (mark,) value] record per slot."""
        return {
            "kind": self._kind,
            "space": space_descriptor(self._tree),
            "entries": self._records(),
        }

    def to_frame(self) -> pd.DataFrame:
        columns = ["k", "j", "atom", "value"]
        if self._trailing(self._tree):
            columns.insert(3, "mark")
        frame = pd.DataFrame(self._records(), columns=columns)
        frame.insert(1, "t", frame["k"] * self._tree.dt)
        frame.insert(3, "s", frame["j"] * self._tree.dt)
        if "mark" in frame:
            labels = np.array(self._tree.marks.labels, dtype=object)
            frame["mark"] = labels[frame["mark"].to_numpy(dtype=int)]
        return frame

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\r\n")
        logger.info(f"Wrote kernel table to {path}")

    _kind = "kernel"


class Kernel2(_TriangularKernel):
    """Scalar kernel lambda(t_k, s_j, atom), j < k."""

    _kind = "kernel"

    @classmethod
    def from_dict(cls, tree: ScenarioTree, data: Dict[str, Any]) -> Kernel2:
        kernel = cls.zeros(tree)
        rows = [[a.copy() for a in row] for row in kernel.rows]
        for k, j, atom, value in data["entries"]:
            rows[int(k)][int(j)][int(atom)] = float(value)
        return cls(tree, rows)


class MarkedKernel2(_TriangularKernel):
    """Marked kernel mu(t_k, s_j, atom, y_i), j < k."""

    _kind = "marked_kernel"

    @staticmethod
    def _trailing(tree: ScenarioTree) -> Tuple[int, ...]:
        return (tree.n_marks,)

    @classmethod
    def from_dict(cls, tree: ScenarioTree, data: Dict[str, Any]) -> MarkedKernel2:
        kernel = cls.zeros(tree)
        rows = [[a.copy() for a in row] for row in kernel.rows]
        for k, j, atom, mark, value in data["entries"]:
            rows[int(k)][int(j)][int(atom), int(mark)] = float(value)
        return cls(tree, rows)


def kernel_size(tree: ScenarioTree) -> int:
    """Number of (k, j, atom) slots of a scalar kernel."""
    return sum(tree.level_size(j) for k in range(tree.n_steps) for j in range(k))


# -- representation coefficients -------------------------------------------


def representation_coefficients(
    tree: ScenarioTree, values: np.ndarray, level: int, driver: Union[Driver, str]
) -> Tuple[List[np.ndarray], float]:
    """
    One-step regression coefficients of a level-m variable on one driver.

    Args:
        tree: Probability space carrying the driver
        values: Level-m array of the variable
        level: m
        driver: Which driver to regress on

    Returns:
        (coefficients for j = 0..m-1 as level-j arrays, E[X])
    """
    driver = Driver(driver)
    if driver is Driver.WIENER:
        require_wiener(tree)
    else:
        require_marks(tree)
        variance = tree.branches.q * (1.0 - tree.branches.q)

    coefficients: List[np.ndarray] = [np.zeros(0)] * level
    martingale = np.asarray(values, dtype=float)
    for j in range(level - 1, -1, -1):
        if driver is Driver.WIENER:
            weighted = martingale * tree.wiener_increments(j + 1)
            coefficients[j] = tree.conditional_expectation(weighted, j + 1, j) / tree.dt
        else:
            weighted = martingale[:, None] * tree.compensated_increments(j + 1)
            coefficients[j] = tree.conditional_expectation(weighted, j + 1, j) / variance
        martingale = tree.conditional_expectation(martingale, j + 1, j)
    return coefficients, float(martingale[0])


@dataclass(frozen=True)
class ClarkDecomposition:
    """
    xi = mean + sum_j lambda(s_j) dw_{j+1}.

    Attributes:
        tree: Wiener tree
        mean: E[xi]
        kernel: lambda as a process; zero at indices >= level
        level: Level of the represented variable
    """

    tree: ScenarioTree
    mean: float
    kernel: Process = field(repr=False)
    level: int

    def reconstruct(self) -> RandomVariable:
        integral = op_J(self.kernel)[self.level]
        return RandomVariable(self.tree, self.level, self.mean + integral)

    def reconstruction_error(self, xi: RandomVariable) -> float:
        return float(np.max(np.abs(self.reconstruct().values - xi.values)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "clark_decomposition",
            "space": space_descriptor(self.tree),
            "level": self.level,
            "mean": self.mean,
            "kernel": self.kernel.to_dict()["levels"],
        }

    def to_frame(self) -> pd.DataFrame:
        return self.kernel.to_frame()


def _require_wiener_only(tree: ScenarioTree) -> None:
    if tree.model is not Model.WIENER:
        raise ModelError(
            f"{tree!r}: representation by Wiener integrals alone "
            "is complete only on the wiener tree"
        )


def clark_kernel(xi: RandomVariable) -> ClarkDecomposition:
    """
    Mean and predictable kernel of an F_{t_m}-measurable variable.

    Raises:
        ModelError: If the tree is not a Wiener-only tree
    """
    tree = xi.tree
    _require_wiener_only(tree)
    coefficients, mean = representation_coefficients(tree, xi.values, xi.level, Driver.WIENER)
    levels = coefficients + [np.zeros(tree.level_size(j)) for j in range(xi.level, tree.n_steps)]
    return ClarkDecomposition(tree, mean, Process(tree, levels), xi.level)


def martingale_representation(mu: Process, tolerance: float = 1e-10) -> ClarkDecomposition:
    """
    Kernel of a martingale: mu(t_k) = E[mu] + sum_{j<k} lambda(s_j) dw_{j+1} for every k.

    The last available level (terminal if present) determines the kernel.

    Raises:
        ModelError: If the tree is not a Wiener-only tree
        MartingaleDefectError: If mu is not a martingale
    """
    _require_wiener_only(mu.tree)
    test = is_martingale(mu, tolerance)
    if not test:
        raise MartingaleDefectError(test.defect, tolerance)
    last = mu.n_steps if mu.terminal is not None else mu.n_steps - 1
    return clark_kernel(mu.at(last))


# -- two-parameter operators -----------------------------------------------


def integrate_row(
    tree: ScenarioTree, row: Sequence[np.ndarray], upto: int, driver: Union[Driver, str]
) -> np.ndarray:
    """
    sum_{j<upto} row[j] * increment_{j+1}, as a level-`upto` array.

    Trailing batch axes of the row arrays are kept (after the mark axis for the
    Poisson driver).
    """
    driver = Driver(driver)
    if len(row) == 0:
        raise LevelError("cannot integrate an empty row")
    batch = row[0].shape[2:] if driver is Driver.POISSON else row[0].shape[1:]
    acc = np.zeros((1,) + batch)
    for j in range(upto):
        lifted = tree.lift(row[j], j, j + 1)
        if driver is Driver.WIENER:
            dw = tree.wiener_increments(j + 1)
            increment = lifted * dw.reshape(dw.shape + (1,) * (lifted.ndim - 1))
        else:
            increment = np.einsum("am...,am->a...", lifted, tree.compensated_increments(j + 1))
        acc = tree.lift(acc, j, j + 1) + increment
    return acc


def op_Jtilde(kernel: Kernel2) -> Process:
    """
    (J~ lambda)(t_k) = sum_{j<k} lambda(t_k, s_j) dw_{j+1}.

    Raises:
        ModelError: If the tree has no Wiener driver
    """
    tree = kernel.tree
    require_wiener(tree)
    levels = [np.zeros(1)] + [
        integrate_row(tree, kernel.row(k), k, Driver.WIENER) for k in range(1, tree.n_steps)
    ]
    return Process(tree, levels)


def op_Ptilde(kernel: MarkedKernel2) -> Process:
    """
    (P~ mu)(t_k) = sum_{j<k} sum_i mu(t_k, s_j, y_i) (flag_{j+1,i} - q_i).

    Raises:
        ModelError: If the tree has no marks
    """
    tree = kernel.tree
    require_marks(tree)
    levels = [np.zeros(1)] + [
        integrate_row(tree, kernel.row(k), k, Driver.POISSON) for k in range(1, tree.n_steps)
    ]
    return Process(tree, levels)


def _columns(
    chi: Process, driver: Driver, workers: int
) -> Tuple[List[List[np.ndarray]], np.ndarray]:
    tree = chi.tree

    def column(k: int) -> Tuple[List[np.ndarray], float]:
        return representation_coefficients(tree, chi[k], k, driver)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(column, range(tree.n_steps)))
    return [r[0] for r in results], np.array([r[1] for r in results])


def wiener_kernel(chi: Process, workers: int = 1) -> Kernel2:
    """
    Kernel of the L2(w) component of chi, column by column in t.

    Raises:
        ModelError: If the tree has no Wiener driver
    """
    require_wiener(chi.tree)
    rows, _ = _columns(chi, Driver.WIENER, workers)
    return Kernel2(chi.tree, rows)


def poisson_kernel(chi: Process, workers: int = 1) -> MarkedKernel2:
    """
    Kernel of the L2(nu) component of chi, column by column in t.

    Raises:
        ModelError: If the tree has no marks
    """
    require_marks(chi.tree)
    rows, _ = _columns(chi, Driver.POISSON, workers)
    return MarkedKernel2(chi.tree, rows)


@dataclass(frozen=True)
class KernelExtraction:
    """
    chi(t_k) = mean[k] + (J~ lambda)(t_k).

    Attributes:
        mean: E chi(t_k) per time index
        kernel: lambda
        reconstruction_error: max |chi - mean - J~ lambda|
    """

    mean: np.ndarray
    kernel: Kernel2
    reconstruction_error: float

    def mean_process(self) -> Process:
        return Process.deterministic(self.kernel.tree, self.mean.tolist())


def extract_K(chi: Process, workers: int = 1) -> KernelExtraction:
    """
    Representation operator: the mean process and the two-parameter kernel of chi.

    Each column chi(t_k) is represented as its own F_{t_k}-measurable variable.

    Raises:
        ModelError: If the tree is not a Wiener-only tree
    """
    _require_wiener_only(chi.tree)
    rows, means = _columns(chi, Driver.WIENER, workers)
    kernel = Kernel2(chi.tree, rows)
    rebuilt = op_Jtilde(kernel) + Process.deterministic(chi.tree, means.tolist())
    error = rebuilt.max_abs_difference(chi)
    scale = 1.0 + max(float(np.max(np.abs(v))) for v in chi.levels)
    if error > RECONSTRUCTION_TOLERANCE * scale:
        logger.warning(f"Kernel reconstruction error {error:.3e} on {chi.tree!r}")
    return KernelExtraction(means, kernel, error)


# -- norms -----------------------------------------------------------------


def kernel_norm(kernel: Kernel2, r: float) -> float:
    """
    |||lambda|||_r = (sum_k dt E (sum_{j<k} lambda(t_k, s_j)^2 dt)^(r/2))^(1/r).

    Raises:
        ParameterError: If r <= 1
    """
    if not np.isfinite(r) or r <= 1:
        raise ParameterError(f"kernel norm exponent must be > 1, got {r}")
    tree = kernel.tree
    total = 0.0
    for k in range(1, tree.n_steps):
        acc = kernel.entry(k, 0) ** 2 * tree.dt
        for j in range(1, k):
            acc = tree.lift(acc, j - 1, j) + kernel.entry(k, j) ** 2 * tree.dt
        total += tree.dt * tree.expectation(acc ** (r / 2.0), k - 1)
    return float(total ** (1.0 / r))


def marked_kernel_norm(kernel: MarkedKernel2, discrete: bool = False) -> float:
    """
    |||mu|||_Pi = (sum_k dt sum_{j<k} E sum_i mu^2 pi_i dt)^(1/2).

    With `discrete` the weight pi_i dt is replaced by the tree's jump variance
    q_i (1 - q_i), which makes it equal to ||P~ mu||_2.
    """
    tree = kernel.tree
    require_marks(tree)
    q = tree.branches.q
    weights = q * (1.0 - q) if discrete else tree.marks.intensities * tree.dt
    total = 0.0
    for k, row in enumerate(kernel.rows):
        for j, values in enumerate(row):
            total += tree.dt * tree.expectation(values**2 @ weights, j)
    return float(np.sqrt(total))


# -- projections -----------------------------------------------------------


@dataclass(frozen=True)
class Projection:
    """chi = proj + resid with proj in the stochastic-integral image and resid orthogonal to it."""

    chi: Process
    proj: Process
    resid: Process

    @property
    def orthogonality(self) -> float:
        return pair_L2(self.proj, self.resid)

    @property
    def pythagoras_defect(self) -> float:
        return abs(
            norm_Lp(self.chi, 2) ** 2 - norm_Lp(self.proj, 2) ** 2 - norm_Lp(self.resid, 2) ** 2
        )


def project_L2w(chi: Process) -> Projection:
    """
    Orthogonal projection of chi onto the image of J~.

    Raises:
        ModelError: If the tree has no Wiener driver
    """
    proj = op_Jtilde(wiener_kernel(chi))
    return Projection(chi, proj, chi - proj)


def project_L2nu(chi: Process) -> Projection:
    """
    Orthogonal projection of chi onto the image of P~.

    Raises:
        ModelError: If the tree has no marks
    """
    proj = op_Ptilde(poisson_kernel(chi))
    return Projection(chi, proj, chi - proj)


def kernel_basis_matrix(tree: ScenarioTree, driver: Union[Driver, str]) -> np.ndarray:
    """
    Images of the indicator kernels under J~ (driver w) or P~ (driver nu).

    Returns:
        Matrix of shape (process slots, kernel slots); columns follow the kernel
        `to_vector` order, rows the process `to_vector` order

    Raises:
        TreeSizeError: If the kernel space exceeds the dense assembly limit
    """
    driver = Driver(driver)
    if driver is Driver.WIENER:
        require_wiener(tree)
    else:
        require_marks(tree)
    width = tree.n_marks if driver is Driver.POISSON else 1
    columns = kernel_size(tree) * width
    if columns > ASSEMBLY_LIMIT:
        raise TreeSizeError(columns, ASSEMBLY_LIMIT)

    rows = sum(tree.level_size(k) for k in range(tree.n_steps))
    matrix = np.zeros((rows, columns))
    row_offset = tree.level_size(0)
    col_offset = 0
    for k in range(1, tree.n_steps):
        sizes = [tree.level_size(j) * width for j in range(k)]
        block = np.eye(sum(sizes))
        arrays = []
        start = 0
        for j, size in enumerate(sizes):
            part = block[start : start + size]
            if driver is Driver.POISSON:
                part = part.reshape(tree.level_size(j), width, -1)
            arrays.append(part)
            start += size
        image = integrate_row(tree, arrays, k, driver)
        rows = slice(row_offset, row_offset + tree.level_size(k))
        matrix[rows, col_offset : col_offset + sum(sizes)] = image
        row_offset += tree.level_size(k)
        col_offset += sum(sizes)
    return matrix
