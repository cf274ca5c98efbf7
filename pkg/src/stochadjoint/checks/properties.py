"""
Inequalities and identities of stochastic integration, each measured as report entries.

These functions take ready-made inputs and return entries; the registered checks
in the sibling modules draw the inputs and sweep them.
"""

from __future__ import annotations

import logging
import math
from typing import List, Sequence, Union

import numpy as np

from stochadjoint.checks.report import CheckEntry, Kind, make_entry, worst_of
from stochadjoint.core.errors import MartingaleDefectError, ModelError, ParameterError
from stochadjoint.operators.integrators import (
    OperatorTag,
    intensity_poisson_variance,
    is_martingale,
    op_J,
    op_L,
    op_P,
    poisson_second_moment,
    tree_poisson_variance,
)
from stochadjoint.operators.kernels import Driver, kernel_basis_matrix, project_L2nu, project_L2w
from stochadjoint.operators.linear_map import weighted_projection
from stochadjoint.spaces.processes import (
    MarkedProcess,
    Process,
    norm_DHp,
    norm_Hp,
    norm_Lp,
    norm_LpPi,
    norm_Np,
    pairing_weights,
    running_max,
)
from stochadjoint.spaces.tree import Model, ScenarioTree

logger = logging.getLogger(__name__)

DOOB = "Doob maximal inequality"
BDG = "Burkholder-Davis-Gundy inequality"
POISSON_ISOMETRY = "Poisson isometry"
OPERATOR_BOUND = "integral operator bound"
POLARIZATION = "polarization identity"
DECOMPOSITION = "orthogonal decomposition"
NORMS = "norm embeddings"


def conjugate_exponent(p: float) -> float:
    """p' = p / (p - 1)."""
    if not p > 1:
        raise ParameterError(f"conjugate exponent needs p > 1, got {p}")
    return p / (p - 1.0)


def check_doob(
    mu: Process,
    p: float,
    entry_id: str = "doob",
    tolerance: float = 1e-10,
    martingale_tolerance: float = 1e-10,
) -> CheckEntry:
    """
    E max_k |mu(t_k)|^p <= (p')^p E|mu(1)|^p.

    The running maximum includes the terminal value when mu carries one.

    Raises:
        ParameterError: If p <= 1
        MartingaleDefectError: If mu is not a martingale
    """
    constant = conjugate_exponent(p) ** p
    test = is_martingale(mu, martingale_tolerance)
    if not test:
        raise MartingaleDefectError(test.defect, martingale_tolerance)

    tree = mu.tree
    last = mu.n_steps if mu.terminal is not None else mu.n_steps - 1
    lhs = tree.expectation(running_max(mu, include_terminal=True) ** p, last)
    rhs = constant * tree.expectation(np.abs(mu[last]) ** p, last)
    return make_entry(
        entry_id, DOOB, lhs, rhs, Kind.INEQUALITY, tolerance, constant=constant, details={"p": p}
    )


def check_bdg(
    phi: Process, p: float, entry_id: str = "bdg", tolerance: float = 1e-10
) -> CheckEntry:
    """
    E|J(phi)(1)|^p against ||phi||_{N_p}^p.

    At p = 2 both constants are 1 and the entry is an equality; for other p only
    the two sides are reported.

    Raises:
        ModelError: If the tree has no Wiener driver
        ParameterError: If p <= 1
    """
    tree = phi.tree
    lhs = tree.expectation(np.abs(op_J(phi).terminal) ** p, tree.n_steps)
    rhs = norm_Np(phi, p) ** p
    if p == 2:
        return make_entry(
            entry_id, BDG, lhs, rhs, Kind.EQUALITY, tolerance, constant=1.0, details={"p": p}
        )
    ratio = lhs / rhs if rhs > 0 else math.nan
    return make_entry(
        entry_id, BDG, lhs, rhs, Kind.RATIO, tolerance, details={"p": p, "ratio": ratio}
    )


def check_poisson_isometry(
    a: MarkedProcess, entry_id: str = "poisson_isometry", tolerance: float = 1e-10
) -> List[CheckEntry]:
    """
    Both forms of the Poisson isometry for one integrand.

    Returns two entries:
        `<id>.discrete`: E|P(a)(1)|^2 equals sum E a^2 q (1 - q) exactly
        `<id>.gap`: the relative gap to sum E a^2 pi dt is at most max(pi) dt

    Raises:
        ModelError: If the tree has no marks
    """
    tree = a.tree
    second_moment = poisson_second_moment(a)
    discrete = tree_poisson_variance(a)
    intensity = intensity_poisson_variance(a)
    relative_gap = abs(intensity - second_moment) / intensity if intensity > 0 else 0.0
    constant = float(np.max(tree.marks.intensities))
    return [
        make_entry(
            f"{entry_id}.discrete",
            POISSON_ISOMETRY,
            second_moment,
            discrete,
            Kind.EQUALITY,
            tolerance,
        ),
        make_entry(
            f"{entry_id}.gap",
            POISSON_ISOMETRY,
            relative_gap,
            constant * tree.dt,
            Kind.INEQUALITY,
            tolerance,
            constant=constant,
            details={"second_moment": second_moment, "intensity_value": intensity, "dt": tree.dt},
        ),
    ]


def check_operator_bounds(
    which: Union[OperatorTag, str],
    p: float,
    inputs: Sequence[Union[Process, MarkedProcess]],
    entry_id: str = "operator_bounds",
    tolerance: float = 1e-10,
) -> CheckEntry:
    """
    Maximal-norm bounds of L, J and P over a sweep of integrands.

        L, p >= 1:       ||L f||_{DH_p} <= ||f||_p
        J, p = 2:        ||J phi||_{DH_2} <= 2 ||phi||_{N_2}
        P, p = 2:        ||P a||_{DH_2} <= 2 ||a||_{L_2(Pi)}

    J with p > 2 and P with even p > 2 report the largest ratio instead.

    Raises:
        ParameterError: If p is outside the operator's domain or the sweep is empty
    """
    tag = OperatorTag(which)
    if not inputs:
        raise ParameterError("operator bound sweep needs at least one input")
    if tag is OperatorTag.L and p < 1:
        raise ParameterError(f"L is bounded for p >= 1, got {p}")
    if tag is OperatorTag.J and p < 2:
        raise ParameterError(f"J bound needs p >= 2, got {p}")
    if tag is OperatorTag.P and (p < 2 or p % 2 != 0):
        raise ParameterError(f"P bound needs an even p >= 2, got {p}")

    entries = []
    for i, x in enumerate(inputs):
        if tag is OperatorTag.L:
            lhs, rhs, constant = norm_DHp(op_L(x), p), norm_Lp(x, p), 1.0
        elif tag is OperatorTag.J:
            lhs, base, constant = norm_DHp(op_J(x), p), norm_Np(x, p), 2.0
            rhs = constant * base if p == 2 else base
        else:
            lhs, base, constant = norm_DHp(op_P(x), p), norm_LpPi(x, p), 2.0
            rhs = constant * base if p == 2 else base

        asserted = tag is OperatorTag.L or p == 2
        kind = Kind.INEQUALITY if asserted else Kind.RATIO
        entries.append(
            make_entry(
                entry_id,
                OPERATOR_BOUND,
                lhs,
                rhs,
                kind,
                tolerance,
                constant=constant if asserted else math.nan,
                details={"operator": tag.value, "p": p, "input": i},
            )
        )

    ratios = [e.lhs / e.rhs for e in entries if e.rhs > 0]
    return worst_of(entry_id, entries, {"max_ratio": max(ratios, default=math.nan)})


def check_polarization(
    phi: Process, kappa: Process, entry_id: str = "polarization", tolerance: float = 1e-10
) -> CheckEntry:
    """
    E[J(phi)(t_k) J(kappa)(t_k)] = sum_{j<k} dt E[phi(t_j) kappa(t_j)] for every k.

    The entry reports the time index with the largest deviation.

    Raises:
        ModelError: If the tree has no Wiener driver
    """
    tree = phi.tree
    tree.require_same(kappa.tree)
    j_phi, j_kappa = op_J(phi), op_J(kappa)
    cross = np.array(
        [tree.expectation(phi[j] * kappa[j], j) * tree.dt for j in range(tree.n_steps)]
    )

    worst_k, worst_gap, lhs_worst, rhs_worst = 0, -1.0, 0.0, 0.0
    for k in range(1, tree.n_steps + 1):
        lhs = tree.expectation(j_phi[k] * j_kappa[k], k)
        rhs = float(cross[:k].sum())
        gap = abs(lhs - rhs) / (1.0 + abs(rhs))
        if gap > worst_gap:
            worst_k, worst_gap, lhs_worst, rhs_worst = k, gap, lhs, rhs
    return make_entry(
        entry_id,
        POLARIZATION,
        lhs_worst,
        rhs_worst,
        Kind.EQUALITY,
        tolerance,
        details={"k": worst_k},
    )


def check_decompositions(
    tree: ScenarioTree,
    chis: Sequence[Process],
    entry_id: str = "decompositions",
    tolerance: float = 1e-10,
) -> List[CheckEntry]:
    """
    Orthogonality of the Wiener and Poisson integral images and the three-way split of L2.

    Builds the images of all indicator kernels under J~ and P~ and measures their
    mutual pairings and their pairings with deterministic processes. Each chi is
    split by the two projections, Pythagoras is measured on the split, and both
    projections are compared with a least-squares oracle.

    Raises:
        ModelError: If the tree is not a joint tree
        TreeSizeError: If the kernel bases exceed the dense assembly limit
    """
    if tree.model is not Model.JOINT:
        raise ModelError(f"{tree!r}: the three-way decomposition needs a joint tree")

    weights = pairing_weights(tree)
    basis_w = kernel_basis_matrix(tree, Driver.WIENER)
    basis_nu = kernel_basis_matrix(tree, Driver.POISSON)
    # indicator of each time index: a basis of the deterministic processes
    sizes = [tree.level_size(k) for k in range(tree.n_steps)]
    deterministic = np.zeros((sum(sizes), tree.n_steps))
    deterministic[np.arange(sum(sizes)), np.repeat(np.arange(tree.n_steps), sizes)] = 1.0

    cross = float(np.max(np.abs(basis_w.T @ (weights[:, None] * basis_nu)), initial=0.0))
    constants = max(
        float(np.max(np.abs(deterministic.T @ (weights[:, None] * basis_w)), initial=0.0)),
        float(np.max(np.abs(deterministic.T @ (weights[:, None] * basis_nu)), initial=0.0)),
    )
    details = {
        "tree": repr(tree),
        "wiener_columns": basis_w.shape[1],
        "poisson_columns": basis_nu.shape[1],
    }
    entries = [
        make_entry(
            f"{entry_id}.cross_orthogonality",
            DECOMPOSITION,
            cross,
            0.0,
            Kind.EQUALITY,
            tolerance,
            details=details,
        ),
        make_entry(
            f"{entry_id}.deterministic_orthogonality",
            DECOMPOSITION,
            constants,
            0.0,
            Kind.EQUALITY,
            tolerance,
            details=details,
        ),
    ]

    pythagoras, oracle_w, oracle_nu = [], [], []
    for i, chi in enumerate(chis):
        split_w = project_L2w(chi)
        split_nu = project_L2nu(chi)
        resid = chi - split_w.proj - split_nu.proj
        total = norm_Lp(chi, 2) ** 2
        parts = (
            norm_Lp(split_w.proj, 2) ** 2 + norm_Lp(split_nu.proj, 2) ** 2 + norm_Lp(resid, 2) ** 2
        )
        pythagoras.append(
            make_entry(
                f"{entry_id}.pythagoras",
                DECOMPOSITION,
                parts,
                total,
                Kind.EQUALITY,
                tolerance,
                details={"input": i},
            )
        )
        vector = chi.to_vector()
        proj_w, _ = weighted_projection(basis_w, weights, vector)
        proj_nu, _ = weighted_projection(basis_nu, weights, vector)
        scale = 1.0 + float(np.max(np.abs(vector)))
        oracle_w.append(
            make_entry(
                f"{entry_id}.oracle_w",
                DECOMPOSITION,
                float(np.max(np.abs(proj_w - split_w.proj.to_vector()))) / scale,
                0.0,
                Kind.EQUALITY,
                tolerance,
                details={"input": i},
            )
        )
        oracle_nu.append(
            make_entry(
                f"{entry_id}.oracle_nu",
                DECOMPOSITION,
                float(np.max(np.abs(proj_nu - split_nu.proj.to_vector()))) / scale,
                0.0,
                Kind.EQUALITY,
                tolerance,
                details={"input": i},
            )
        )

    if chis:
        entries.append(worst_of(f"{entry_id}.pythagoras", pythagoras))
        entries.append(worst_of(f"{entry_id}.oracle_w", oracle_w))
        entries.append(worst_of(f"{entry_id}.oracle_nu", oracle_nu))
    logger.debug(
        f"Decomposition of {tree!r}: cross pairing {cross:.2e}, "
        f"deterministic pairing {constants:.2e}"
    )
    return entries


def check_norms(
    f: Process,
    g: Process,
    p: float,
    entry_id: str = "norms",
    tolerance: float = 1e-10,
    scale: float = -2.5,
) -> List[CheckEntry]:
    """
    Embedding chain, triangle inequality and homogeneity of the scalar norms at one p.

    Produces `<id>.chain_L_H` (L_p <= H_p), `<id>.chain_H_DH` (H_p <= DH_p) and,
    per norm, `<id>.triangle_<name>` and `<id>.homogeneity_<name>`. N_p takes
    part for p > 1 only.
    """
    f.tree.require_same(g.tree)
    norms = {"L": norm_Lp, "H": norm_Hp, "DH": norm_DHp}
    if p > 1:
        norms["N"] = norm_Np

    entries = [
        make_entry(
            f"{entry_id}.chain_L_H", NORMS, norm_Lp(f, p), norm_Hp(f, p), Kind.INEQUALITY, tolerance
        ),
        make_entry(
            f"{entry_id}.chain_H_DH",
            NORMS,
            norm_Hp(f, p),
            norm_DHp(f, p),
            Kind.INEQUALITY,
            tolerance,
        ),
    ]
    for name, norm in norms.items():
        triangle = norm(f + g, p), norm(f, p) + norm(g, p)
        entries.append(
            make_entry(f"{entry_id}.triangle_{name}", NORMS, *triangle, Kind.INEQUALITY, tolerance)
        )
        scaled = norm(scale * f, p), abs(scale) * norm(f, p)
        entries.append(
            make_entry(f"{entry_id}.homogeneity_{name}", NORMS, *scaled, Kind.EQUALITY, tolerance)
        )
    return entries


def check_marked_norm(
    a: MarkedProcess,
    b: MarkedProcess,
    p: float,
    entry_id: str = "norms.Pi",
    tolerance: float = 1e-10,
    scale: float = -2.5,
) -> List[CheckEntry]:
    """
    Triangle inequality of the L_p(Pi) functional, plus its homogeneity as a report-only entry.

    Raises:
        ParameterError: If p < 2
    """
    a.tree.require_same(b.tree)
    lhs, rhs = norm_LpPi(a + b, p), norm_LpPi(a, p) + norm_LpPi(b, p)
    triangle = make_entry(f"{entry_id}.triangle", NORMS, lhs, rhs, Kind.INEQUALITY, tolerance)
    scaled, expected = norm_LpPi(scale * a, p), abs(scale) * norm_LpPi(a, p)
    homogeneity = make_entry(
        f"{entry_id}.homogeneity",
        NORMS,
        scaled,
        expected,
        Kind.REPORT,
        tolerance,
        details={"relative_defect": abs(scaled - expected) / (1.0 + expected), "scale": scale},
    )
    return [triangle, homogeneity]
