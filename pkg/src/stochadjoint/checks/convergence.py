"""
Checks whose statement is a rate in dt, plus Monte-Carlo agreement with exact values.

A convergence entry fits log(gap) against log(n); it passes when the fitted
order lies in ORDER_RANGE, every halving ratio in HALVING_RANGE and the gap at
the finest resolution below the tolerance. Sampled gaps carry standard errors,
which widen the halving ranges by `mc_sigmas` of them.
"""

from __future__ import annotations

import logging
import math
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from stochadjoint.checks.common import CONVERGENCE_TOLERANCE, SuiteCheck
from stochadjoint.checks.report import CheckEntry, Kind, Mode
from stochadjoint.operators.adjoints import (
    adjoint_L,
    diagonal_identity_check,
    lattice_diagonal_deviation,
)
from stochadjoint.operators.integrators import (
    intensity_poisson_variance,
    poisson_second_moment,
    sampled_J,
    sampled_P,
    tree_poisson_variance,
)
from stochadjoint.spaces.lattice import BinaryLattice
from stochadjoint.spaces.processes import MarkedProcess, Process, norm_Np
from stochadjoint.spaces.tree import MarkSet, Model, ScenarioTree, build_tree, sample_paths

logger = logging.getLogger(__name__)

DIAGONAL_MARK = (("y", 0.5),)
# intensities of the Poisson isometry gap; the integrand differs per mark
GAP_MARKS = (("y", 3.0), ("z", 1.0))


def fitted_order(resolutions: Sequence[int], gaps: Sequence[float]) -> float:
    """Negative slope of log(gap) against log(n); NaN unless every gap is positive."""
    n = np.asarray(resolutions, dtype=float)
    g = np.asarray(gaps, dtype=float)
    if len(n) < 2 or np.any(g <= 0) or not np.all(np.isfinite(g)):
        return math.nan
    slope = np.polyfit(np.log(n), np.log(g), 1)[0]
    return float(-slope)


def halving_ratios(resolutions: Sequence[int], gaps: Sequence[float]) -> List[float]:
    """Successive gap ratios, rescaled to a doubling of n."""
    ratios = []
    for i in range(len(gaps) - 1):
        if gaps[i + 1] <= 0:
            ratios.append(math.inf)
            continue
        exponent = math.log(2.0) / math.log(resolutions[i + 1] / resolutions[i])
        ratios.append(float((gaps[i] / gaps[i + 1]) ** exponent))
    return ratios


def ratio_margins(
    resolutions: Sequence[int], gaps: Sequence[float], stderrs: Sequence[float], sigmas: float
) -> List[float]:
    """`sigmas` standard errors of every halving ratio, by the delta method."""
    margins = []
    for i in range(len(gaps) - 1):
        if gaps[i] <= 0 or gaps[i + 1] <= 0:
            margins.append(0.0)
            continue
        exponent = math.log(2.0) / math.log(resolutions[i + 1] / resolutions[i])
        ratio = (gaps[i] / gaps[i + 1]) ** exponent
        relative = exponent * math.hypot(stderrs[i] / gaps[i], stderrs[i + 1] / gaps[i + 1])
        margins.append(float(sigmas * ratio * relative))
    return margins


def relative_gap(values: np.ndarray, reference: np.ndarray) -> Tuple[float, float]:
    """1 - mean(values) / mean(reference) over paths, with its delta-method standard error."""
    n = values.shape[0]
    ratio = float(values.mean() / reference.mean())
    residual = values - ratio * reference
    stderr = float(residual.std(ddof=1) / (math.sqrt(n) * abs(reference.mean())))
    return 1.0 - ratio, stderr


def gap_integrand(compensated: np.ndarray) -> np.ndarray:
    """
    a(t_k, y_i) = 1 + tanh(N~_i(t_k)) / 2, from the compensated increments of the steps before t_k.

    Args:
        compensated: Shape (..., n_steps, m); the batch axes are atoms or paths

    Returns:
        Same shape; entry k is F_{t_k}-measurable
    """
    before = np.cumsum(compensated, axis=-2) - compensated
    return 1.0 + 0.5 * np.tanh(before)


def diagonal_integrand(t: float, x: np.ndarray) -> np.ndarray:
    """chi = x^2 + x of the driver value; nonlinear, so its kernel is not constant."""
    return x**2 + x


class ConvergenceCheck(SuiteCheck):
    """SuiteCheck that can turn a resolution sweep into a convergence entry."""

    def convergence(
        self,
        name: str,
        resolutions: Sequence[int],
        gaps: Sequence[float],
        stderrs: Optional[Sequence[float]] = None,
        **details: Any,
    ) -> CheckEntry:
        errors = list(stderrs) if stderrs is not None else [0.0] * len(gaps)
        triples = sorted(zip(resolutions, gaps, errors))
        ns = [int(n) for n, _, _ in triples]
        gs = [float(g) for _, g, _ in triples]
        facts = {
            "resolutions": ns,
            "gaps": gs,
            "halving_ratios": halving_ratios(ns, gs),
            "finest_gap": gs[-1] if gs else math.inf,
        }
        mode = Mode.EXACT
        if stderrs is not None:
            es = [float(e) for _, _, e in triples]
            sigmas = self.config.tolerances.mc_sigmas
            facts.update(stderrs=es, ratio_margins=ratio_margins(ns, gs, es, sigmas))
            mode = Mode.MC
        return self.entry(
            name,
            fitted_order(ns, gs),
            1.0,
            Kind.CONVERGENCE,
            tolerance=CONVERGENCE_TOLERANCE,
            constant=1.0,
            mode=mode,
            details={**facts, **details},
        )

    def resolutions(self, values: Sequence[int], marks: Sequence) -> List[int]:
        admissible = [n for n in sorted(set(values)) if self.admissible(tuple(marks), n)]
        dropped = sorted(set(values) - set(admissible))
        if dropped:
            logger.info(f"{self.name}: skipping resolutions {dropped} where some pi * dt >= 1")
        return admissible

    def fits_exactly(self, branching: int, n_steps: int) -> bool:
        return branching**n_steps <= self.config.max_atoms


class PoissonConvergenceCheck(ConvergenceCheck):
    check_id = "poisson_convergence"
    reference = "Poisson isometry in the limit"
    description = "sampled relative gap of E|P(a)(1)|^2 to the intensity form shrinks like dt"

    def _run(self) -> List[CheckEntry]:
        entries: List[CheckEntry] = []
        mark_set = MarkSet.of(GAP_MARKS)
        branching = 2 ** len(mark_set)
        ns = self.resolutions(self.config.poisson_convergence_n, GAP_MARKS)

        for n in ns:
            if self.fits_exactly(branching, n):
                entries.append(self._tree_isometry(self.tree(Model.POISSON.value, n, GAP_MARKS)))

        if not self.mc_enabled:
            logger.info(f"{self.name}: no order fit without Monte-Carlo paths")
            return entries

        gaps, stderrs = [], []
        for n in ns:
            tree = build_tree(
                Model.POISSON, n, mark_set, max_atoms=self.config.max_atoms, exact=False
            )
            seed = self.sample_seed(f"gap:{n}")
            sample = sample_paths(tree, self.config.mc_paths, seed, self.config.workers)
            a_paths = gap_integrand(sample.compensated_increments)
            second = sampled_P(a_paths, sample)[:, -1] ** 2
            squares = a_paths**2
            q = tree.branches.q
            tree_form = (squares @ (q * (1.0 - q))).sum(axis=1)
            intensity_form = (squares @ (mark_set.intensities * tree.dt)).sum(axis=1)
            entries.append(self.gate(f"mc.n{n}", second - tree_form, 0.0, n_steps=n))
            gap, stderr = relative_gap(second, intensity_form)
            gaps.append(gap)
            stderrs.append(stderr)
        marks = [list(m) for m in GAP_MARKS]
        entries.append(
            self.convergence("mc", ns, gaps, stderrs, marks=marks, paths=self.config.mc_paths)
        )
        return entries

    def _tree_isometry(self, tree: ScenarioTree) -> CheckEntry:
        """E|P(a)(1)|^2 by enumeration against the tree's variance form."""
        counts = [Process.compensated_count(tree, i) for i in range(tree.n_marks)]
        # same integrand as `gap_integrand`, level by level
        a = MarkedProcess(
            tree,
            [
                1.0 + 0.5 * np.tanh(np.stack([c[k] for c in counts], axis=1))
                for k in range(tree.n_steps)
            ],
        )
        exact = poisson_second_moment(a)
        intensity = intensity_poisson_variance(a)
        return self.entry(
            f"tree.n{tree.n_steps}",
            exact,
            tree_poisson_variance(a),
            details={"n_steps": tree.n_steps, "relative_gap": 1.0 - exact / intensity},
        )


class DiagonalConvergenceCheck(ConvergenceCheck):
    check_id = "diagonal_convergence"
    reference = "diagonal identity of the conjugate of L"
    description = (
        "L2 distance of the near-diagonal kernel of L* chi to J* chi and P* chi shrinks like dt"
    )

    def _run(self) -> List[CheckEntry]:
        entries: List[CheckEntry] = []
        wiener_ns = sorted(set(self.config.diagonal_convergence_n))
        poisson_ns = self.resolutions(self.config.diagonal_convergence_n, DIAGONAL_MARK)
        pi = DIAGONAL_MARK[0][1]
        for model, ns in ((Model.WIENER, wiener_ns), (Model.POISSON, poisson_ns)):
            entries.extend(self._sweep(model, ns, pi))
        return entries

    def _lattice(self, model: Model, n: int, pi: float) -> BinaryLattice:
        return BinaryLattice.wiener(n) if model is Model.WIENER else BinaryLattice.poisson(n, pi)

    def _sweep(self, model: Model, ns: Sequence[int], pi: float) -> List[CheckEntry]:
        name = model.value
        entries: List[CheckEntry] = []
        deviations = {}
        for n in ns:
            lattice = self._lattice(model, n, pi)
            deviations[n] = lattice_diagonal_deviation(lattice, lattice.process(diagonal_integrand))
            if self.fits_exactly(2, n):
                entries.append(self._tree_agreement(model, n, deviations[n].l2))

        if not self.mc_enabled:
            gaps = [deviations[n].l2 for n in ns]
            entries.append(self.convergence(name, ns, gaps, chi="x^2 + x"))
            return entries

        gaps, stderrs = [], []
        paths = self.config.mc_paths
        for n in ns:
            deviation = deviations[n]
            marks = MarkSet.of(DIAGONAL_MARK) if model is Model.POISSON else None
            tree = build_tree(model, n, marks, max_atoms=self.config.max_atoms, exact=False)
            sample = sample_paths(tree, paths, self.sample_seed(f"{name}:{n}"), self.config.workers)
            squares = deviation.along(deviation.lattice.path_states(sample))
            entries.append(self.gate(f"{name}.mc.n{n}", squares, deviation.square_l2, n_steps=n))
            mean = max(float(squares.mean()), 0.0)
            gap = math.sqrt(mean)
            stderr = float(squares.std(ddof=1) / math.sqrt(paths))
            gaps.append(gap)
            stderrs.append(stderr / (2.0 * gap) if gap > 0 else math.inf)
        entries.append(self.convergence(name, ns, gaps, stderrs, chi="x^2 + x", paths=paths))
        return entries

    def _tree_agreement(self, model: Model, n: int, lattice_gap: float) -> CheckEntry:
        """The lattice value must match the operators on the enumerated tree."""
        if model is Model.WIENER:
            tree = self.wiener_tree(n)
            x = Process.wiener(tree).with_terminal(None)
        else:
            tree = self.tree(Model.POISSON.value, n, DIAGONAL_MARK)
            x = Process.compensated_count(tree, 0).with_terminal(None)
        deviation = diagonal_identity_check(x * x + x, self.config.workers)
        tree_gap = deviation.wiener_l2 if model is Model.WIENER else deviation.poisson_l2
        return self.entry(
            f"{model.value}.tree.n{n}",
            float(tree_gap),
            lattice_gap,
            details={
                "n_steps": n,
                "max_deviation": deviation.wiener if model is Model.WIENER else deviation.poisson,
            },
        )


class McAgreementCheck(SuiteCheck):
    check_id = "mc_agreement"
    reference = "plumbing"
    description = "Monte-Carlo estimates of exact tree values within mc_sigmas standard errors"

    def _run(self) -> List[CheckEntry]:
        if not self.mc_enabled:
            logger.info("Monte-Carlo checks disabled (mc_paths < 2)")
            return []
        paths, workers = self.config.mc_paths, self.config.workers
        rng = self.input_rng()
        entries: List[CheckEntry] = []

        tree = self.wiener_tree()
        sample = sample_paths(tree, paths, self.sample_seed("wiener"), workers)
        phi = Process.random(tree, rng)
        integral = sampled_J(phi.along(sample), sample)[:, -1]
        n = tree.n_steps
        entries.append(self.gate("wiener_isometry", integral**2, norm_Np(phi, 2) ** 2, n_steps=n))
        fourth = sample.wiener_path[:, -1] ** 4
        entries.append(self.gate("fourth_moment", fourth, 3.0 - 2.0 * tree.dt, n_steps=n))

        chi = Process.random(tree, rng)
        # theta(0) = E sum_{k>=1} chi(t_k) dt
        path_sums = chi.along(sample)[:, 1:].sum(axis=1) * tree.dt
        entries.append(self.gate("theta_start", path_sums, float(adjoint_L(chi)[0][0]), n_steps=n))

        marked = self.marked_tree()
        sample = sample_paths(marked, paths, self.sample_seed("marked"), workers)
        a = MarkedProcess.random(marked, rng)
        a_paths = np.stack([a[k][sample.atoms(k)] for k in range(marked.n_steps)], axis=1)
        values = sampled_P(a_paths, sample)[:, -1]
        variance = tree_poisson_variance(a)
        entries.append(self.gate("poisson_isometry", values**2, variance, tree=repr(marked)))
        return entries
