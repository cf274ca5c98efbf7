"""
Sweeps of the classical inequalities over random and named inputs.

Random inputs come from `input_rng`, so exact-mode entries do not depend on the
run seed; only the Monte-Carlo gate of the fourth moment does.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from typing import Dict, List, Sequence

import numpy as np

from stochadjoint.checks.common import SuiteCheck
from stochadjoint.checks.properties import (
    check_bdg,
    check_decompositions,
    check_doob,
    check_marked_norm,
    check_norms,
    check_operator_bounds,
    check_polarization,
    check_poisson_isometry,
)
from stochadjoint.checks.report import CheckEntry, Kind, worst_of
from stochadjoint.operators.integrators import OperatorTag
from stochadjoint.spaces.processes import MarkedProcess, Process, norm_Lp, norm_Np
from stochadjoint.spaces.tree import Model, ScenarioTree, build_wiener_tree, sample_paths

logger = logging.getLogger(__name__)

BDG_RATIO_P = (4.0 / 3.0, 4.0)
FOURTH_MOMENT_STEPS = 4
FOURTH_MOMENT_MC_STEPS = 16
UNIT_MARK_STEPS = 10
DECOMPOSITION_INPUTS = 20
POLARIZATION_STEPS = 6


def random_martingales(tree: ScenarioTree, rng: np.random.Generator, count: int) -> List[Process]:
    """E[xi | F_{t_k}] for random terminal variables xi, with xi as terminal value."""
    n = tree.n_steps
    out = []
    for _ in range(count):
        xi = rng.standard_normal(tree.level_size(n))
        out.append(Process(tree, [tree.conditional_expectation(xi, n, k) for k in range(n)], xi))
    return out


def _ratio_details(sweep: Sequence[CheckEntry]) -> dict:
    ratios = [e.lhs / e.rhs for e in sweep if e.rhs > 0]
    return {"min_ratio": min(ratios, default=math.nan), "max_ratio": max(ratios, default=math.nan)}


class DoobCheck(SuiteCheck):
    check_id = "doob"
    reference = "Doob maximal inequality"
    description = "E max|mu|^p <= (p/(p-1))^p E|mu(1)|^p on random and named martingales"

    def _run(self) -> List[CheckEntry]:
        tree = self.primary_tree()
        martingales = random_martingales(tree, self.input_rng(), self.inputs)
        tol = self.tolerance()
        entries = []
        for p in sorted({p for p in self.config.p_values if p > 1}):
            sweep = [check_doob(mu, p, f"{self.check_id}.p{p:g}", tol) for mu in martingales]
            entries.append(
                self.adopt(worst_of(f"{self.check_id}.p{p:g}", sweep, {"tree": repr(tree)}))
            )

        constant = Process.constant(tree, 1.5).with_terminal(
            np.full(tree.level_size(tree.n_steps), 1.5)
        )
        entries.append(self.adopt(check_doob(constant, 2.0, f"{self.check_id}.constant", tol)))
        wiener = Process.wiener(self.wiener_tree(8))
        entries.append(self.adopt(check_doob(wiener, 2.0, f"{self.check_id}.wiener", tol)))
        return entries


class BdgCheck(SuiteCheck):
    check_id = "bdg"
    reference = "Burkholder-Davis-Gundy inequality"
    description = "E|J(phi)(1)|^p against ||phi||_{N_p}^p; an identity at p = 2"

    def _run(self) -> List[CheckEntry]:
        tree = self.wiener_tree()
        rng = self.input_rng()
        tol = self.tolerance()
        integrands = [Process.random(tree, rng) for _ in range(self.inputs)]
        prefix = self.check_id

        entries = [
            self.adopt(
                worst_of(
                    f"{prefix}.p2", [check_bdg(phi, 2.0, f"{prefix}.p2", tol) for phi in integrands]
                )
            ),
            self.adopt(check_bdg(Process.constant(tree, 1.0), 2.0, f"{prefix}.p2_one", tol)),
            self.adopt(check_bdg(Process.zeros(tree), 2.0, f"{prefix}.p2_zero", tol)),
        ]

        exponents = sorted(set(BDG_RATIO_P) | {p for p in self.config.p_values if p > 1 and p != 2})
        for p in exponents:
            sweep = [check_bdg(phi, p, f"{prefix}.ratio_p{p:g}", tol) for phi in integrands]
            entries.append(
                self.adopt(worst_of(f"{prefix}.ratio_p{p:g}", sweep, _ratio_details(sweep)))
            )

        small = self.wiener_tree(FOURTH_MOMENT_STEPS)
        w1 = small.wiener_path(small.n_steps)
        entries.append(
            self.entry(
                "fourth_moment",
                small.expectation(w1**4, small.n_steps),
                3.0 - 2.0 * small.dt,
                details={"n_steps": small.n_steps},
            )
        )

        if self.mc_enabled:
            sampled = build_wiener_tree(
                FOURTH_MOMENT_MC_STEPS, max_atoms=self.config.max_atoms, exact=False
            )
            sample = sample_paths(
                sampled, self.config.mc_paths, self.sample_seed("fourth"), self.config.workers
            )
            entries.append(
                self.gate(
                    "fourth_moment_mc",
                    sample.wiener_path[:, -1] ** 4,
                    3.0 - 2.0 * sampled.dt,
                    n_steps=FOURTH_MOMENT_MC_STEPS,
                )
            )
        return entries


class PoissonIsometryCheck(SuiteCheck):
    check_id = "poisson_isometry"
    reference = "Poisson isometry"
    description = "E|P(a)(1)|^2 on the tree and against the intensity form"

    def _run(self) -> List[CheckEntry]:
        tol = self.tolerance()
        entries: List[CheckEntry] = []
        trees = [
            ("poisson", self.marked_tree(Model.POISSON.value, self.config.n_steps)),
            ("joint", self.marked_tree()),
        ]
        for name, tree in trees:
            rng = self.input_rng(name)
            discrete, gaps = [], []
            for _ in range(self.inputs):
                first, second = check_poisson_isometry(
                    MarkedProcess.random(tree, rng), f"{self.check_id}.{name}", tol
                )
                discrete.append(first)
                gaps.append(second)
            details = {"tree": repr(tree)}
            entries.append(
                self.adopt(worst_of(f"{self.check_id}.{name}.discrete", discrete, details))
            )
            entries.append(self.adopt(worst_of(f"{self.check_id}.{name}.gap", gaps, details)))

        zero = MarkedProcess.zeros(trees[0][1])
        entries.extend(
            self.adopt(e) for e in check_poisson_isometry(zero, f"{self.check_id}.zero", tol)
        )

        unit = self.tree(Model.POISSON.value, UNIT_MARK_STEPS, (("unit", 1.0),))
        discrete, gap = check_poisson_isometry(
            MarkedProcess.constant(unit, 1.0), f"{self.check_id}.unit_mark", tol
        )
        entries.extend([self.adopt(discrete), self.adopt(gap)])
        q = 1.0 / UNIT_MARK_STEPS
        entries.append(
            self.entry(
                "unit_mark.second_moment",
                discrete.lhs,
                UNIT_MARK_STEPS * q * (1.0 - q),
                details={"pi": 1.0},
            )
        )
        entries.append(self.entry("unit_mark.relative_gap", gap.lhs, unit.dt, details={"pi": 1.0}))
        return entries


class OperatorBoundsCheck(SuiteCheck):
    check_id = "operator_bounds"
    reference = "integral operator bound"
    description = "maximal-norm bounds of L, J and P"

    def _run(self) -> List[CheckEntry]:
        tol = self.tolerance()
        p_values = self.config.p_values
        entries: List[CheckEntry] = []

        primary = self.primary_tree()
        rng = self.input_rng("L")
        inputs = [Process.random(primary, rng) for _ in range(self.inputs)]
        for p in sorted(set(p_values)):
            entry_id = f"{self.check_id}.L.p{p:g}"
            entries.append(
                self.adopt(check_operator_bounds(OperatorTag.L, p, inputs, entry_id, tol))
            )
        one = Process.constant(primary, 1.0)
        entries.append(
            self.adopt(
                check_operator_bounds(OperatorTag.L, 2.0, [one], f"{self.check_id}.L.one", tol)
            )
        )

        tree = self.wiener_tree()
        rng = self.input_rng("J")
        inputs = [Process.random(tree, rng) for _ in range(self.inputs)]
        for p in sorted({p for p in p_values if p >= 2} | {2.0}):
            entry_id = f"{self.check_id}.J.p{p:g}"
            entries.append(
                self.adopt(check_operator_bounds(OperatorTag.J, p, inputs, entry_id, tol))
            )
        one = Process.constant(tree, 1.0)
        entries.append(
            self.adopt(
                check_operator_bounds(OperatorTag.J, 2.0, [one], f"{self.check_id}.J.one", tol)
            )
        )

        marked = self.marked_tree(Model.POISSON.value, self.config.n_steps)
        rng = self.input_rng("P")
        marked_inputs = [MarkedProcess.random(marked, rng) for _ in range(self.inputs)]
        for p in sorted({p for p in p_values if p >= 2 and p % 2 == 0} | {2.0}):
            entry_id = f"{self.check_id}.P.p{p:g}"
            entries.append(
                self.adopt(check_operator_bounds(OperatorTag.P, p, marked_inputs, entry_id, tol))
            )
        return entries


class PolarizationCheck(SuiteCheck):
    check_id = "polarization"
    reference = "polarization identity"
    description = "E[J(phi) J(kappa)](t_k) = sum_{j<k} dt E[phi kappa]"

    def _run(self) -> List[CheckEntry]:
        tol = self.tolerance()
        entries: List[CheckEntry] = []
        trees = (("wiener", self.wiener_tree(POLARIZATION_STEPS)), ("joint", self.marked_tree()))
        for name, tree in trees:
            rng = self.input_rng(name)
            pairs, squares = [], []
            for _ in range(self.inputs):
                phi, kappa = Process.random(tree, rng), Process.random(tree, rng)
                pairs.append(check_polarization(phi, kappa, f"{self.check_id}.{name}", tol))
                squares.append(
                    check_polarization(phi, phi, f"{self.check_id}.{name}.isometry", tol)
                )
            entries.append(
                self.adopt(worst_of(f"{self.check_id}.{name}", pairs, {"tree": repr(tree)}))
            )
            entries.append(
                self.adopt(
                    worst_of(f"{self.check_id}.{name}.isometry", squares, {"tree": repr(tree)})
                )
            )

        tree = self.wiener_tree(POLARIZATION_STEPS)
        rng = self.input_rng("disjoint")
        even = Process.from_function(
            tree, lambda k: rng.standard_normal(tree.level_size(k)) * (k % 2 == 0)
        )
        odd = Process.from_function(
            tree, lambda k: rng.standard_normal(tree.level_size(k)) * (k % 2 == 1)
        )
        entries.append(self.adopt(check_polarization(even, odd, f"{self.check_id}.disjoint", tol)))
        return entries


class DecompositionsCheck(SuiteCheck):
    check_id = "decompositions"
    reference = "orthogonal decomposition"
    description = "L2 = deterministic + J~ image + P~ image + remainder on joint trees"

    def _run(self) -> List[CheckEntry]:
        tol = self.tolerance()
        count = min(DECOMPOSITION_INPUTS, self.inputs)
        spaces = []
        single = self.marks_key(1)
        if single and self.admissible(single, 2):
            spaces.append(self.tree(Model.JOINT.value, 2, single))
        spaces.append(self.marked_tree())

        entries: List[CheckEntry] = []
        for tree in spaces:
            rng = self.input_rng(f"{tree.n_steps}:{tree.n_marks}")
            chis = [Process.random(tree, rng) for _ in range(count)]
            prefix = f"{self.check_id}.n{tree.n_steps}_m{tree.n_marks}"
            entries.extend(self.adopt(e) for e in check_decompositions(tree, chis, prefix, tol))
        return entries


def _collapse(sweeps: Dict[str, List[CheckEntry]], details: dict) -> List[CheckEntry]:
    return [worst_of(entry_id, sweep, details) for entry_id, sweep in sorted(sweeps.items())]


class NormsCheck(SuiteCheck):
    """Embeddings and norm axioms of the process spaces, swept over random processes."""

    check_id = "norms"
    reference = "norm embeddings"
    description = "L_p <= H_p <= DH_p, N_2 = L_2, triangle inequality and homogeneity"

    def _run(self) -> List[CheckEntry]:
        tol = self.tolerance()
        tree = self.primary_tree()
        rng = self.input_rng("scalar")
        pairs = [(Process.random(tree, rng), Process.random(tree, rng)) for _ in range(self.inputs)]

        sweeps: Dict[str, List[CheckEntry]] = defaultdict(list)
        for p in sorted(set(self.config.p_values)):
            for f, g in pairs:
                for e in check_norms(f, g, p, f"{self.check_id}.p{p:g}", tol):
                    sweeps[e.id].append(e)
        for f, _ in pairs:
            sweeps[f"{self.check_id}.N2_equals_L2"].append(
                self.entry("N2_equals_L2", norm_Np(f, 2.0), norm_Lp(f, 2.0), Kind.EQUALITY, tol)
            )
        entries = [self.adopt(e) for e in _collapse(sweeps, {"tree": repr(tree)})]

        marked = self.marked_tree()
        rng = self.input_rng("marked")
        marked_pairs = [
            (MarkedProcess.random(marked, rng), MarkedProcess.random(marked, rng))
            for _ in range(self.inputs)
        ]
        marked_sweeps: Dict[str, List[CheckEntry]] = defaultdict(list)
        for p in sorted({p for p in self.config.p_values if p >= 2} | {2.0}):
            for a, b in marked_pairs:
                for e in check_marked_norm(a, b, p, f"{self.check_id}.Pi.p{p:g}", tol):
                    marked_sweeps[e.id].append(e)
        entries.extend(self.adopt(e) for e in _collapse(marked_sweeps, {"tree": repr(marked)}))
        return entries
