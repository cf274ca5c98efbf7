"""
Exact-mode identity checks.

Every entry here is an algebraic identity on a finite tree, so tolerances are
rounding-level and failures are hard by default.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Dict, List, Union

import numpy as np

from stochadjoint.checks.common import SuiteCheck
from stochadjoint.checks.properties import check_doob
from stochadjoint.checks.report import CheckEntry, Kind, worst_of
from stochadjoint.operators.adjoints import (
    adjoint_J,
    adjoint_L,
    adjoint_L_decomposition,
    adjoint_norm_ratio,
    adjoint_P,
    theta_decomposition,
)
from stochadjoint.operators.integrators import (
    OperatorTag,
    assemble_matrix,
    is_martingale,
    op_J,
    op_L,
    op_P,
)
from stochadjoint.operators.kernels import (
    Driver,
    Kernel2,
    MarkedKernel2,
    clark_kernel,
    extract_K,
    integrate_row,
    kernel_norm,
    marked_kernel_norm,
    martingale_representation,
    op_Jtilde,
    op_Ptilde,
    project_L2nu,
    project_L2w,
)
from stochadjoint.operators.linear_map import adjoint_oracle, min_eigenvalue
from stochadjoint.spaces.processes import (
    MarkedProcess,
    Process,
    norm_Lp,
    norm_Np,
    pair_L2,
    pair_L2Pi,
)
from stochadjoint.spaces.tree import Model, RandomVariable, ScenarioTree

logger = logging.getLogger(__name__)

FORWARD: Dict[OperatorTag, Callable] = {
    OperatorTag.L: op_L,
    OperatorTag.J: op_J,
    OperatorTag.P: op_P,
}
ADJOINT: Dict[OperatorTag, Callable] = {
    OperatorTag.L: adjoint_L,
    OperatorTag.J: adjoint_J,
    OperatorTag.P: adjoint_P,
}

ADJOINT_WIENER_STEPS = range(2, 9)
ADJOINT_JOINT_STEPS = range(1, 5)
# pi * dt < 1 already at n = 1, whatever intensities are configured
ADJOINT_SUBUNIT_MARKS = (("u1", 0.5), ("u2", 0.25))
CLARK_STEPS = 8
CLARK_INPUTS = 50
CLARK_RATIO_P = (4.0 / 3.0, 4.0)
CLARK_TOLERANCE = 1e-11
EXAMPLE_STEPS = 6
EXAMPLE_POISSON_STEPS = 4
EXAMPLE_TOLERANCE = 1e-12
LEMMA_WIENER_STEPS = 6
LEMMA_POISSON_STEPS = 3
LEMMA_INPUTS = 20
LEMMA_TOLERANCE = 1e-11
THETA_INPUTS = 20
THETA_TOLERANCE = 1e-9


class AdjointCheck(SuiteCheck):
    """Closed-form adjoints against the pairing identity and the Gram-transpose oracle."""

    check_id = "adjoint"
    reference = "conjugate operator formulas"
    description = "L*, J*, P* against <chi, X phi> = <X* chi, phi> and the matrix oracle"

    def spaces(self) -> List[ScenarioTree]:
        trees = [self.wiener_tree(n) for n in ADJOINT_WIENER_STEPS]
        configured = {self.marks_key(1), self.marks_key(2)} - {()}
        subunit = {ADJOINT_SUBUNIT_MARKS[:1], ADJOINT_SUBUNIT_MARKS}
        mark_sets = sorted(configured | subunit, key=lambda marks: (len(marks), marks))
        for marks in mark_sets:
            for n in ADJOINT_JOINT_STEPS:
                if self.admissible(marks, n):
                    trees.append(self.tree(Model.JOINT.value, n, marks))
                else:
                    logger.info(f"Skipping joint tree n={n} with marks {marks}: some pi * dt >= 1")
        return trees

    def _run(self) -> List[CheckEntry]:
        pairing: Dict[OperatorTag, List[CheckEntry]] = {tag: [] for tag in OperatorTag}
        oracle: Dict[OperatorTag, List[CheckEntry]] = {tag: [] for tag in OperatorTag}
        trees = self.spaces()
        for tree in trees:
            for tag in OperatorTag:
                if (tag is OperatorTag.J and not tree.has_wiener) or (
                    tag is OperatorTag.P and not tree.has_marks
                ):
                    continue
                self._sweep(tree, tag, pairing[tag], oracle[tag])

        summary = {"trees": [repr(t) for t in trees]}
        entries = []
        for tag in OperatorTag:
            if pairing[tag]:
                entries.append(
                    worst_of(f"{self.check_id}.{tag.value}.pairing", pairing[tag], summary)
                )
                entries.append(
                    worst_of(f"{self.check_id}.{tag.value}.oracle", oracle[tag], summary)
                )
        return entries

    def _sweep(
        self,
        tree: ScenarioTree,
        tag: OperatorTag,
        pairing: List[CheckEntry],
        oracle: List[CheckEntry],
    ) -> None:
        transpose = adjoint_oracle(assemble_matrix(tag, tree))
        rng = self.input_rng(f"{tree.model.value}:{tree.n_steps}:{tree.n_marks}:{tag.value}")
        for i in range(self.inputs):
            chi = Process.random(tree, rng)
            phi: Union[Process, MarkedProcess] = (
                MarkedProcess.random(tree, rng)
                if tag is OperatorTag.P
                else Process.random(tree, rng)
            )
            image = ADJOINT[tag](chi)
            lhs = pair_L2(chi, FORWARD[tag](phi))
            rhs = pair_L2Pi(image, phi) if tag is OperatorTag.P else pair_L2(image, phi)
            details = {"tree": repr(tree), "input": i}
            pairing.append(self.entry(f"{tag.value}.pairing", lhs, rhs, details=details))

            formula = image.to_vector()
            delta = float(np.max(np.abs(transpose.apply(chi.to_vector()) - formula)))
            scale = 1.0 + float(np.max(np.abs(formula)))
            oracle.append(self.deviation(f"{tag.value}.oracle", delta / scale, **details))


class AdjointBoundsCheck(SuiteCheck):
    """Norm bounds and positivity that follow from the adjoint formulas."""

    check_id = "adjoint_bounds"
    reference = "conjugate operator bounds"
    description = "||J* chi|| <= ||chi - E chi||, X*X >= 0, Doob bound of the L* martingale"

    def _run(self) -> List[CheckEntry]:
        entries: List[CheckEntry] = []
        trees = [self.wiener_tree(EXAMPLE_STEPS), self.marked_tree()]

        contraction = []
        for tree in trees:
            rng = self.input_rng(f"contraction:{tree.model.value}")
            for i in range(self.inputs):
                ratio = adjoint_norm_ratio(Process.random(tree, rng))
                contraction.append(
                    self.entry(
                        "J_contraction", ratio, 1.0, Kind.INEQUALITY, constant=1.0,
                        details={"tree": repr(tree), "input": i},
                    )
                )
        entries.append(worst_of(f"{self.check_id}.J_contraction", contraction))

        positivity, involution = [], []
        for tree in (self.wiener_tree(5), self.marked_tree()):
            for tag in (OperatorTag.L, OperatorTag.J):
                forward = assemble_matrix(tag, tree)
                gram = adjoint_oracle(forward).compose(forward)
                details = {"tree": repr(tree), "operator": tag.value}
                positivity.append(
                    self.entry(
                        "gram_psd", -min_eigenvalue(gram), 0.0, Kind.INEQUALITY, details=details
                    )
                )
                twice = adjoint_oracle(adjoint_oracle(forward))
                involution.append(
                    self.deviation(
                        "involution",
                        float(np.max(np.abs(twice.matrix - forward.matrix))),
                        **details,
                    )
                )
        entries.append(worst_of(f"{self.check_id}.gram_psd", positivity))
        entries.append(worst_of(f"{self.check_id}.involution", involution))

        tree = self.wiener_tree(EXAMPLE_STEPS)
        rng = self.input_rng("doob")
        doob, terminal, split = [], [], []
        for i in range(self.inputs):
            chi = Process.random(tree, rng)
            decomposition = adjoint_L_decomposition(chi)
            mu = decomposition.mu
            doob.append(
                self.adopt(check_doob(mu, 2.0, f"{self.check_id}.L_doob", self.tolerance()))
            )
            second_moment = tree.expectation(mu.terminal**2, tree.n_steps)
            terminal.append(
                self.entry(
                    "L_terminal", 4.0 * second_moment, 4.0 * norm_Lp(chi, 2) ** 2, Kind.INEQUALITY,
                    constant=4.0, details={"input": i},
                )
            )
            split.append(
                self.deviation(
                    "L_split", decomposition.combined().max_abs_difference(adjoint_L(chi)), input=i
                )
            )
        entries.append(worst_of(f"{self.check_id}.L_doob", doob))
        entries.append(worst_of(f"{self.check_id}.L_terminal", terminal))
        entries.append(worst_of(f"{self.check_id}.L_split", split))
        return entries


class ClarkCheck(SuiteCheck):
    """Martingale representation of random terminal variables on the Wiener tree."""

    check_id = "clark"
    reference = "Clark representation"
    description = "reconstruction, isometry and uniqueness of the Wiener representation kernel"

    def _run(self) -> List[CheckEntry]:
        tree = self.wiener_tree(CLARK_STEPS)
        n = tree.n_steps
        rng = self.input_rng()
        count = min(CLARK_INPUTS, self.inputs)

        reconstruction, isometry, uniqueness, martingale = [], [], [], []
        ratios: Dict[float, List[CheckEntry]] = {p: [] for p in CLARK_RATIO_P}
        for i in range(count):
            xi = RandomVariable(tree, n, rng.standard_normal(tree.level_size(n)))
            decomposition = clark_kernel(xi)
            centered = xi.values - decomposition.mean
            reconstruction.append(
                self.deviation(
                    "reconstruction",
                    decomposition.reconstruction_error(xi),
                    CLARK_TOLERANCE,
                    input=i,
                )
            )
            isometry.append(
                self.entry(
                    "isometry",
                    norm_Np(decomposition.kernel, 2),
                    math.sqrt(tree.expectation(centered**2, n)),
                    constant=1.0,
                    details={"input": i},
                )
            )
            for p in CLARK_RATIO_P:
                lhs = tree.expectation(np.abs(centered) ** p, n) ** (1.0 / p)
                ratios[p].append(
                    self.entry(
                        f"ratio_p{p:g}", lhs, norm_Np(decomposition.kernel, p), Kind.RATIO,
                        details={"p": p, "input": i},
                    )
                )

            kernel = Process.random(tree, rng)
            mean = float(rng.standard_normal())
            rebuilt = clark_kernel(RandomVariable(tree, n, mean + op_J(kernel).terminal))
            error = max(rebuilt.kernel.max_abs_difference(kernel), abs(rebuilt.mean - mean))
            uniqueness.append(self.deviation("uniqueness", error, input=i))

            mu = Process(
                tree, [tree.conditional_expectation(xi.values, n, k) for k in range(n)], xi.values
            )
            represented = martingale_representation(mu)
            martingale.append(
                self.deviation(
                    "martingale_representation",
                    (op_J(represented.kernel) + represented.mean).max_abs_difference(mu),
                    input=i,
                )
            )

        entries = [
            worst_of(f"{self.check_id}.reconstruction", reconstruction),
            worst_of(f"{self.check_id}.isometry", isometry),
            worst_of(f"{self.check_id}.uniqueness", uniqueness),
            worst_of(f"{self.check_id}.martingale_representation", martingale),
        ]
        for p, sweep in ratios.items():
            values = [e.lhs / e.rhs for e in sweep if e.rhs > 0]
            entries.append(
                worst_of(
                    f"{self.check_id}.ratio_p{p:g}",
                    sweep,
                    {
                        "min_ratio": min(values, default=math.nan),
                        "max_ratio": max(values, default=math.nan),
                    },
                )
            )
        return entries


class ExamplesCheck(SuiteCheck):
    """Closed-form values of the operators on standard inputs."""

    check_id = "examples"
    reference = "closed-form examples"
    description = "L*(1), L*(w), J(w), J*(w), Clark kernels of w(1) and w(1)^2, E w(1)^4, ..."

    def _run(self) -> List[CheckEntry]:
        tree = self.wiener_tree(EXAMPLE_STEPS)
        n, dt = tree.n_steps, tree.dt
        t = tree.grid.times
        tol = EXAMPLE_TOLERANCE
        w = Process.wiener(tree)
        one = Process.constant(tree, 1.0)
        ones_terminal = np.ones(tree.level_size(n))
        tail = Process.deterministic(tree, [1.0 - t[k + 1] for k in range(n)])
        entries: List[CheckEntry] = []

        entries.append(self.deviation("L_star_one", adjoint_L(one).max_abs_difference(tail), tol))
        w_tail = Process(tree, [w[k] * (1.0 - t[k + 1]) for k in range(n)])
        entries.append(self.deviation("L_star_w", adjoint_L(w).max_abs_difference(w_tail), tol))

        split = adjoint_L_decomposition(one)
        entries.append(
            self.deviation(
                "L_split_one_mu", split.mu.max_abs_difference(one.with_terminal(ones_terminal)), tol
            )
        )
        minus = Process.deterministic(tree, [-t[k + 1] for k in range(n)])
        integral_gap = split.minus_integral.max_abs_difference(minus)
        entries.append(self.deviation("L_split_one_integral", integral_gap, tol))

        w1 = clark_kernel(RandomVariable(tree, n, tree.wiener_path(n)))
        entries.append(self.deviation("clark_w1_kernel", w1.kernel.max_abs_difference(one), tol))
        entries.append(self.entry("clark_w1_mean", w1.mean, 0.0, tolerance=tol))

        squared = clark_kernel(RandomVariable(tree, n, tree.wiener_path(n) ** 2))
        squared_gap = squared.kernel.max_abs_difference(w * 2.0)
        entries.append(self.deviation("clark_w1_squared_kernel", squared_gap, tol))
        entries.append(self.entry("clark_w1_squared_mean", squared.mean, 1.0, tolerance=tol))

        conditioned = Process(tree, [w[k] ** 2 + 1.0 - t[k] for k in range(n)], w[n] ** 2)
        represented = martingale_representation(conditioned)
        entries.append(
            self.deviation(
                "martingale_w1_squared", represented.kernel.max_abs_difference(w * 2.0), tol
            )
        )

        half = Process(tree, [(w[k] ** 2 - t[k]) / 2.0 for k in range(n)], (w[n] ** 2 - 1.0) / 2.0)
        entries.append(self.deviation("J_of_w", op_J(w).max_abs_difference(half), tol))
        entries.append(
            self.entry(
                "fourth_moment", tree.expectation(w[n] ** 4, n), 3.0 - 2.0 * dt, tolerance=tol
            )
        )
        entries.append(self.deviation("J_star_w", adjoint_J(w).max_abs_difference(tail), tol))

        extraction = extract_K(Process(tree, [w[k] ** 2 for k in range(n)]))
        expected = Kernel2.from_function(tree, lambda k, j: 2.0 * tree.wiener_path(j))
        extracted_gap = extraction.kernel.max_abs_difference(expected)
        entries.append(self.deviation("extract_K_w_squared", extracted_gap, tol))
        entries.append(
            self.deviation(
                "extract_K_w_squared_mean", float(np.max(np.abs(extraction.mean - t[:n]))), tol
            )
        )

        in_time = Kernel2.from_function(tree, lambda k, j: np.full(tree.level_size(j), t[k]))
        scaled = Process(tree, [t[k] * w[k] for k in range(n)])
        entries.append(
            self.deviation("Jtilde_time_kernel", op_Jtilde(in_time).max_abs_difference(scaled), tol)
        )
        entries.append(
            self.entry(
                "kernel_norm_ones",
                kernel_norm(Kernel2.constant(tree, 1.0), 2.0),
                math.sqrt(dt * dt * n * (n - 1) / 2.0),
                tolerance=tol,
            )
        )

        theta_one = theta_decomposition(one)
        one_h = theta_one.h.max_abs_difference(one.with_terminal(ones_terminal))
        entries.append(self.deviation("theta_one_h", one_h, tol))
        one_kappa = theta_one.kappa.max_abs_difference(Process.zeros(tree))
        entries.append(self.deviation("theta_one_kappa", one_kappa, tol))
        theta_w = theta_decomposition(w)
        entries.append(
            self.deviation("theta_w_h", theta_w.h.max_abs_difference(Process.zeros(tree)), tol)
        )
        entries.append(self.deviation("theta_w_residual", theta_w.max_residual, tol))

        deterministic = Process.deterministic(tree, list(t[:n]))
        entries.append(
            self.deviation(
                "projection_deterministic",
                project_L2w(deterministic).proj.max_abs_difference(Process.zeros(tree)),
                tol,
            )
        )

        entries.extend(self._poisson_examples(tol))
        return entries

    def _poisson_examples(self, tol: float) -> List[CheckEntry]:
        marks = self.marks_key()
        if not marks or not self.admissible(marks, EXAMPLE_POISSON_STEPS):
            logger.info(f"Skipping Poisson examples for marks {marks}")
            return []
        tree = self.tree(Model.POISSON.value, EXAMPLE_POISSON_STEPS, marks)
        n, t, q = tree.n_steps, tree.grid.times, tree.branches.q
        count = Process.compensated_count(tree, 0)

        def level(k: int) -> np.ndarray:
            row = np.zeros(tree.n_marks)
            row[0] = (1.0 - t[k + 1]) * (1.0 - q[0])
            return np.tile(row, (tree.level_size(k), 1))

        expected = MarkedProcess(tree, [level(k) for k in range(n)])
        return [
            self.deviation("P_star_count", adjoint_P(count).max_abs_difference(expected), tol),
            self.deviation(
                "count_in_poisson_image",
                project_L2nu(count).resid.max_abs_difference(Process.zeros(tree)),
                tol,
            ),
        ]


def lemma_deviations(
    kernel: Union[Kernel2, MarkedKernel2], integrand: Union[Process, MarkedProcess]
) -> Dict[str, float]:
    """
    Largest violation of the four integration lemmas for J~ (scalar kernel) or P~ (marked kernel).

        a: E[(X~ k)(t_k)] = 0
        b: E[(X~ k)(t_m) | F_{t_k}] = sum_{j<k} k(t_m, s_j) dX_{j+1}, k < m
        c: E[(X~ k)(t_k) X(f)(t_k)] = sum_{j<k} E[k(t_k, s_j) f(t_j) var_j]
        d: sum_{k<m} (X~ k)(t_k) dt = sum_{j<m-1} (sum_{j<k<m} k(t_k, s_j) dt) dX_{j+1}
        isometry: ||X~ k||_2 minus the kernel norm

    var_j is dt for the Wiener driver and q_i (1 - q_i) per mark for the Poisson driver.
    """
    tree = kernel.tree
    n = tree.n_steps
    wiener = isinstance(kernel, Kernel2)
    driver = Driver.WIENER if wiener else Driver.POISSON
    image = op_Jtilde(kernel) if wiener else op_Ptilde(kernel)
    forward = op_J(integrand) if wiener else op_P(integrand)
    variance = tree.branches.q * (1.0 - tree.branches.q)

    a = max(abs(tree.expectation(image[k], k)) for k in range(n))

    b = 0.0
    for m in range(1, n):
        for k in range(m):
            conditioned = tree.conditional_expectation(image[m], m, k)
            partial = integrate_row(tree, kernel.row(m), k, driver)
            b = max(b, float(np.max(np.abs(conditioned - partial))))

    c = 0.0
    for k in range(1, n):
        lhs = tree.expectation(image[k] * forward[k], k)
        if wiener:
            rhs = sum(
                tree.expectation(kernel.entry(k, j) * integrand[j], j) * tree.dt for j in range(k)
            )
        else:
            rhs = sum(
                tree.expectation((kernel.entry(k, j) * integrand[j]) @ variance, j)
                for j in range(k)
            )
        c = max(c, abs(lhs - rhs))

    d = 0.0
    for m in range(2, n + 1):
        lhs = sum(tree.lift(image[k], k, m - 1) * tree.dt for k in range(m))
        row = [sum(kernel.entry(k, j) * tree.dt for k in range(j + 1, m)) for j in range(m - 1)]
        rhs = integrate_row(tree, row, m - 1, driver)
        d = max(d, float(np.max(np.abs(lhs - rhs))))

    if wiener:
        norm = kernel_norm(kernel, 2.0)
    else:
        norm = marked_kernel_norm(kernel, discrete=True)
    return {"a": a, "b": b, "c": c, "d": d, "isometry": abs(norm_Lp(image, 2) - norm)}


class LemmasCheck(SuiteCheck):
    """Integration lemmas of the two-parameter operators J~ and P~."""

    check_id = "lemmas"
    reference = "two-parameter integration lemmas"
    description = "mean zero, conditioning, polarization and Fubini for J~ and P~"

    def _run(self) -> List[CheckEntry]:
        count = min(LEMMA_INPUTS, self.inputs)
        entries: List[CheckEntry] = []
        spaces = [
            ("Jtilde", self.wiener_tree(LEMMA_WIENER_STEPS)),
            ("Ptilde", self.marked_tree(Model.POISSON.value, LEMMA_POISSON_STEPS)),
        ]
        for name, tree in spaces:
            rng = self.input_rng(name)
            sweeps: Dict[str, List[CheckEntry]] = {}
            intensity_ratios = []
            for i in range(count):
                if name == "Jtilde":
                    kernel: Union[Kernel2, MarkedKernel2] = Kernel2.random(tree, rng)
                    integrand: Union[Process, MarkedProcess] = Process.random(tree, rng)
                else:
                    kernel = MarkedKernel2.random(tree, rng)
                    integrand = MarkedProcess.random(tree, rng)
                    intensity_norm = marked_kernel_norm(kernel)
                    if intensity_norm > 0:
                        intensity_ratios.append(norm_Lp(op_Ptilde(kernel), 2) / intensity_norm)
                for item, value in lemma_deviations(kernel, integrand).items():
                    sweeps.setdefault(item, []).append(
                        self.deviation(f"{name}.{item}", value, LEMMA_TOLERANCE, input=i)
                    )
            for item, sweep in sweeps.items():
                entries.append(
                    worst_of(f"{self.check_id}.{name}.{item}", sweep, {"tree": repr(tree)})
                )
            if intensity_ratios:
                entries.append(
                    self.entry(
                        "Ptilde.intensity_ratio",
                        min(intensity_ratios),
                        max(intensity_ratios),
                        Kind.REPORT,
                        details={"tree": repr(tree), "dt": tree.dt},
                    )
                )
        return entries


class ThetaCheck(SuiteCheck):
    """Decomposition of L* chi into Lebesgue, Wiener, Poisson and orthogonal parts."""

    check_id = "theta"
    reference = "structure of the conjugate of L"
    description = "h orthogonal to all J and P integrals; exact decomposition on the Wiener tree"

    def _run(self) -> List[CheckEntry]:
        count = min(THETA_INPUTS, self.inputs)
        entries: List[CheckEntry] = []

        tree = self.marked_tree()
        rng = self.input_rng("joint")
        orthogonal_J, orthogonal_P, martingale, residual = [], [], [], []
        for i in range(count):
            decomposition = theta_decomposition(Process.random(tree, rng))
            worst_J = max(
                abs(decomposition.orthogonality_J(Process.random(tree, rng))) for _ in range(count)
            )
            worst_P = max(
                abs(decomposition.orthogonality_P(MarkedProcess.random(tree, rng)))
                for _ in range(count)
            )
            orthogonal_J.append(self.deviation("orthogonal_J", worst_J, THETA_TOLERANCE, input=i))
            orthogonal_P.append(self.deviation("orthogonal_P", worst_P, THETA_TOLERANCE, input=i))
            martingale.append(
                self.deviation("h_martingale", is_martingale(decomposition.h).defect, input=i)
            )
            residual.append(decomposition.max_residual)

        details = {"tree": repr(tree)}
        entries.append(worst_of(f"{self.check_id}.orthogonal_J", orthogonal_J, details))
        entries.append(worst_of(f"{self.check_id}.orthogonal_P", orthogonal_P, details))
        entries.append(worst_of(f"{self.check_id}.h_martingale", martingale, details))
        entries.append(
            self.entry(
                "joint_residual",
                max(residual),
                0.0,
                Kind.REPORT,
                details={**details, "dt": tree.dt},
            )
        )

        tree = self.wiener_tree(EXAMPLE_STEPS)
        rng = self.input_rng("wiener")
        exact, constant_h = [], []
        for i in range(count):
            decomposition = theta_decomposition(Process.random(tree, rng))
            exact.append(self.deviation("wiener_residual", decomposition.max_residual, input=i))
            h = decomposition.h
            start = h[0][0]
            spread = max(float(np.max(np.abs(h[k] - start))) for k in range(tree.n_steps + 1))
            constant_h.append(self.deviation("wiener_h_constant", spread, input=i))
        entries.append(worst_of(f"{self.check_id}.wiener_residual", exact))
        entries.append(worst_of(f"{self.check_id}.wiener_h_constant", constant_h))
        return entries
