"""
Conjugate operators L*, J*, P* in closed form, and the decomposition of L* chi.

The closed forms are computed from conditional expectations and representation
kernels, never from matrix transposes; the Gram-transpose of the assembled
matrix is kept separately as an oracle to compare against.

With integrands evaluated at the left end of each cell and pairing weights
prob * dt, the exact adjoints on the tree are

    (L* chi)(t_j)      = E[sum_{k>j} chi(t_k) dt | F_{t_j}]
    (J* chi)(t_j)      = sum_{k>j} lambda(t_k, s_j) dt
    (P* chi)(t_j, y_i) = sum_{k>j} mu(t_k, s_j, y_i) (1 - q_i) dt

where lambda and mu are the Wiener and Poisson kernels of chi. The factor
(1 - q_i) is the tree's jump variance q_i (1 - q_i) over the intensity pi_i dt.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from stochadjoint.core.errors import LevelError
from stochadjoint.operators.integrators import (
    OperatorTag,
    assemble_matrix,
    op_J,
    op_L,
    op_P,
    require_marks,
    require_wiener,
)
from stochadjoint.operators.kernels import (
    Driver,
    representation_coefficients,
    extract_K,
    poisson_kernel,
    wiener_kernel,
)
from stochadjoint.operators.linear_map import adjoint_oracle
from stochadjoint.spaces.lattice import BinaryLattice
from stochadjoint.spaces.processes import MarkedProcess, Process, norm_Lp
from stochadjoint.spaces.tree import Model

logger = logging.getLogger(__name__)


def adjoint_L(chi: Process) -> Process:
    """
    Tail integral E[sum_{k>j} chi(t_k) dt | F_{t_j}] by backward recursion.

    Example:
        chi = 1 gives 1 - t_{j+1}.
    """
    tree = chi.tree
    n = tree.n_steps
    levels = [np.zeros(0)] * n
    levels[n - 1] = np.zeros(tree.level_size(n - 1))
    for j in range(n - 2, -1, -1):
        ahead = chi[j + 1] * tree.dt + levels[j + 1]
        levels[j] = tree.conditional_expectation(ahead, j + 1, j)
    return Process(tree, levels)


@dataclass(frozen=True)
class LDecomposition:
    """
    L* chi = mu + minus_integral.

    Attributes:
        mu: Martingale E[sum_j chi(t_j) dt | F_{t_k}], with its terminal value
        minus_integral: -sum_{j<=k} chi(t_j) dt, the Lebesgue part read at the right end of the cell
    """

    mu: Process
    minus_integral: Process

    def combined(self) -> Process:
        return Process(
            self.mu.tree,
            [a + b for a, b in zip(self.mu.levels, self.minus_integral.levels)],
        )


def adjoint_L_decomposition(chi: Process) -> LDecomposition:
    """Split L* chi into a martingale and minus the running integral of chi."""
    tree = chi.tree
    n = tree.n_steps
    integral = op_L(chi)
    # total integral is F_{t_{n-1}}-measurable
    total = integral.terminal
    mu_levels = [tree.conditional_expectation(total, n, k) for k in range(n)]
    minus = [-(integral[k] + chi[k] * tree.dt) for k in range(n)]
    return LDecomposition(Process(tree, mu_levels, terminal=total), Process(tree, minus))


def adjoint_J(chi: Process, workers: int = 1) -> Process:
    """
    J* chi = sum_{k>j} lambda(t_k, s_j) dt with lambda the Wiener kernel of chi.

    Components of chi orthogonal to the Wiener integrals do not contribute.

    Raises:
        ModelError: If the tree has no Wiener driver
    """
    tree = chi.tree
    require_wiener(tree)
    kernel = wiener_kernel(chi, workers)
    levels = []
    for j in range(tree.n_steps):
        tail = np.zeros(tree.level_size(j))
        for k in range(j + 1, tree.n_steps):
            tail = tail + kernel.entry(k, j) * tree.dt
        levels.append(tail)
    return Process(tree, levels)


def adjoint_P(chi: Process, workers: int = 1) -> MarkedProcess:
    """
    P* chi = sum_{k>j} mu(t_k, s_j, y_i) (1 - q_i) dt with mu the Poisson kernel of chi.

    Raises:
        ModelError: If the tree has no marks
    """
    tree = chi.tree
    require_marks(tree)
    kernel = poisson_kernel(chi, workers)
    factor = (1.0 - tree.branches.q) * tree.dt
    levels = []
    for j in range(tree.n_steps):
        tail = np.zeros((tree.level_size(j), tree.n_marks))
        for k in range(j + 1, tree.n_steps):
            tail = tail + kernel.entry(k, j) * factor
        levels.append(tail)
    return MarkedProcess(tree, levels)


def oracle_adjoint(tag: Union[OperatorTag, str], chi: Process) -> Union[Process, MarkedProcess]:
    """Apply the Gram-transpose of the assembled matrix of L, J or P to chi."""
    tag = OperatorTag(tag)
    adjoint = adjoint_oracle(assemble_matrix(tag, chi.tree))
    image = adjoint.apply(chi.to_vector())
    if tag is OperatorTag.P:
        return MarkedProcess.from_vector(chi.tree, image)
    return Process.from_vector(chi.tree, image)


@dataclass(frozen=True)
class ThetaDecomposition:
    """
    theta = L* chi split into Lebesgue, Wiener, Poisson and orthogonal martingale parts.

    Attributes:
        theta: L* chi
        kappa: J* chi
        alpha: P* chi (zero-width on a Wiener tree)
        h: Martingale orthogonal to every J- and P-integral, with its terminal value
        mu: Martingale part of theta
        minus_integral: Lebesgue part of theta
        residual: theta - (minus_integral + J kappa + P alpha + h)
    """

    theta: Process
    kappa: Process
    alpha: MarkedProcess
    h: Process
    mu: Process = field(repr=False)
    minus_integral: Process = field(repr=False)
    residual: Process = field(repr=False)

    @property
    def max_residual(self) -> float:
        return float(max(np.max(np.abs(v)) for v in self.residual.levels))

    @property
    def h_norm(self) -> float:
        """||h(1) - h(0)||_2: zero exactly when the stochastic integrals span every martingale."""
        tree = self.h.tree
        centered = self.h.terminal - self.h[0][0]
        return float(np.sqrt(tree.expectation(centered**2, tree.n_steps)))

    def orthogonality_J(self, phi: Process) -> float:
        """E[h(1) J(phi)(1)]."""
        tree = self.h.tree
        return float(tree.expectation(self.h.terminal * op_J(phi).terminal, tree.n_steps))

    def orthogonality_P(self, a: MarkedProcess) -> float:
        """E[h(1) P(a)(1)]."""
        tree = self.h.tree
        return float(tree.expectation(self.h.terminal * op_P(a).terminal, tree.n_steps))


def theta_decomposition(chi: Process, workers: int = 1) -> ThetaDecomposition:
    """
    Decompose theta = L* chi as -integral + J(kappa) + P(alpha) + h.

    kappa = J* chi is the Wiener kernel of the martingale mu; the Poisson kernel of
    mu is P* chi / (1 - q), and h is what remains of mu after both integrals,
    starting from h(0) = E[sum chi dt]. On a Wiener tree h is constant and the
    residual vanishes; on marked trees the residual is P(alpha q / (1 - q)), of order dt.
    """
    tree = chi.tree
    theta = adjoint_L(chi)
    split = adjoint_L_decomposition(chi)
    mu = split.mu

    kappa = adjoint_J(chi, workers) if tree.has_wiener else Process.zeros(tree)
    alpha = adjoint_P(chi, workers) if tree.has_marks else MarkedProcess.zeros(tree)

    h = mu
    if tree.has_wiener:
        h = h - op_J(_martingale_kernel(mu, Driver.WIENER))
    if tree.has_marks:
        h = h - op_P(_marked_martingale_kernel(mu))

    rebuilt = split.minus_integral + op_J(kappa) if tree.has_wiener else split.minus_integral
    if tree.has_marks:
        rebuilt = rebuilt + op_P(alpha)
    rebuilt = rebuilt + h
    residual = Process(tree, [a - b for a, b in zip(theta.levels, rebuilt.levels)])

    worst = float(max(np.max(np.abs(v)) for v in residual.levels))
    logger.debug(f"Theta decomposition on {tree!r}: max residual {worst:.3e}")
    return ThetaDecomposition(theta, kappa, alpha, h, mu, split.minus_integral, residual)


def _martingale_kernel(mu: Process, driver: Driver) -> Process:
    tree = mu.tree
    coefficients, _ = representation_coefficients(tree, mu.terminal, tree.n_steps, driver)
    return Process(tree, coefficients)


def _marked_martingale_kernel(mu: Process) -> MarkedProcess:
    tree = mu.tree
    coefficients, _ = representation_coefficients(tree, mu.terminal, tree.n_steps, Driver.POISSON)
    return MarkedProcess(tree, coefficients)


@dataclass(frozen=True)
class DiagonalDeviation:
    """
    Distance between the near-diagonal kernel of L* chi and the adjoints of chi.

    The maximum over atoms shrinks only like sqrt(dt) once chi is nonlinear in
    the driver; the prob * dt weighted L2 distance is of order dt.

    Attributes:
        n_steps: Grid resolution
        wiener: max_j |lambda_theta(t_{j+1}, s_j) - (J* chi)(t_j)| over j <= n-2
        poisson: Same for the Poisson kernel and P* chi; None without marks
        wiener_l2: (sum_{j<=n-2} dt E|lambda_theta(t_{j+1}, s_j) - (J* chi)(t_j)|^2)^(1/2)
        poisson_l2: Same with the intensity weights pi_i
    """

    n_steps: int
    wiener: Optional[float]
    poisson: Optional[float]
    wiener_l2: Optional[float] = None
    poisson_l2: Optional[float] = None

    @property
    def dt(self) -> float:
        return 1.0 / self.n_steps


def diagonal_identity_check(chi: Process, workers: int = 1) -> DiagonalDeviation:
    """
    Compare the kernel of theta = L* chi one step off the diagonal with J* chi and P* chi.

    In continuous time both agree on the diagonal.
    """
    tree = chi.tree
    theta = adjoint_L(chi)
    wiener = poisson = wiener_l2 = poisson_l2 = None

    if tree.has_wiener:
        if tree.model is Model.WIENER:
            kernel = extract_K(theta, workers).kernel
        else:
            kernel = wiener_kernel(theta, workers)
        kappa = adjoint_J(chi, workers)
        gaps = [d - kappa[j] for j, d in enumerate(kernel.near_diagonal())]
        wiener = float(max((np.max(np.abs(g)) for g in gaps), default=0.0))
        wiener_l2 = math.sqrt(sum(tree.expectation(g**2, j) * tree.dt for j, g in enumerate(gaps)))

    if tree.has_marks:
        marked = poisson_kernel(theta, workers)
        alpha = adjoint_P(chi, workers)
        pi = tree.marks.intensities
        gaps = [d - alpha[j] for j, d in enumerate(marked.near_diagonal())]
        poisson = float(max((np.max(np.abs(g)) for g in gaps), default=0.0))
        poisson_l2 = math.sqrt(
            sum(tree.expectation(g**2 @ pi, j) * tree.dt for j, g in enumerate(gaps))
        )

    logger.debug(
        f"Diagonal deviation at n={tree.n_steps}: wiener={wiener_l2}, poisson={poisson_l2} (L2)"
    )
    return DiagonalDeviation(tree.n_steps, wiener, poisson, wiener_l2, poisson_l2)


@dataclass(frozen=True)
class LatticeDeviation:
    """
    Near-diagonal deviation of L* chi for a chi that is a function of time and driver value.

    Attributes:
        lattice: Lattice chi lives on
        levels: lambda_theta(t_{j+1}, s_j) minus the adjoint at t_j, on the j + 1 states, j = 0..n-2
    """

    lattice: BinaryLattice
    levels: Tuple[np.ndarray, ...] = field(repr=False)

    @property
    def max(self) -> float:
        return float(max((np.max(np.abs(d)) for d in self.levels), default=0.0))

    @property
    def square_l2(self) -> float:
        lattice = self.lattice
        weight = lattice.dt * lattice.pi
        return float(sum(lattice.expectation(d**2, j) * weight for j, d in enumerate(self.levels)))

    @property
    def l2(self) -> float:
        return math.sqrt(self.square_l2)

    def along(self, states: np.ndarray) -> np.ndarray:
        """Per-path sum_j dt pi |deviation|^2 for lattice states of shape (n_paths, n_steps)."""
        lattice = self.lattice
        out = np.zeros(states.shape[0])
        for j, d in enumerate(self.levels):
            out += d[states[:, j]] ** 2
        return out * lattice.dt * lattice.pi


def lattice_diagonal_deviation(
    lattice: BinaryLattice, chi: Sequence[np.ndarray]
) -> LatticeDeviation:
    """
    Same comparison as `diagonal_identity_check` for a chi given on lattice states.

    Runs in O(n^3) whatever the resolution, so it reaches grids far beyond the
    exact tree cap.

    Args:
        lattice: Wiener or single-mark Poisson lattice
        chi: Levels 0..n-1, level k of length k + 1

    Raises:
        LevelError: If chi does not fit the lattice
    """
    n, dt = lattice.n_steps, lattice.dt
    if len(chi) != n or any(np.shape(v) != (k + 1,) for k, v in enumerate(chi)):
        raise LevelError(f"chi needs levels of length 1..{n} on {lattice}")
    chi = [np.asarray(v, dtype=float) for v in chi]
    # P* carries the tree variance q (1 - q) over the intensity q
    factor = 1.0 if lattice.model is Model.WIENER else 1.0 - lattice.p_up

    theta = [np.zeros(k + 1) for k in range(n)]
    for j in range(n - 2, -1, -1):
        theta[j] = lattice.step_expectation(chi[j + 1] * dt + theta[j + 1])

    tails = [np.zeros(j + 1) for j in range(n)]
    for k in range(1, n):
        conditional = chi[k]
        for j in range(k - 1, -1, -1):
            tails[j] += lattice.slope(conditional) * dt * factor
            conditional = lattice.step_expectation(conditional)

    levels = tuple(lattice.slope(theta[j + 1]) - tails[j] for j in range(n - 1))
    return LatticeDeviation(lattice, levels)


def adjoint_norm_ratio(chi: Process) -> float:
    """||J* chi||_2 / ||chi - E chi||_2, bounded by 1 on every tree."""
    centered = chi - Process.deterministic(chi.tree, chi.means().tolist())
    denominator = norm_Lp(centered, 2)
    if denominator == 0:
        return 0.0
    return norm_Lp(adjoint_J(chi), 2) / denominator
