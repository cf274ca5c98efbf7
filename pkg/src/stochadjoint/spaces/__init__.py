"""Probability spaces - scenario trees, processes, norms and pairings."""

from stochadjoint.spaces.lattice import BinaryLattice
from stochadjoint.spaces.processes import (
    MarkedProcess,
    Process,
    marked_pairing_weights,
    norm_DHp,
    norm_Hp,
    norm_LpPi,
    norm_Lp,
    norm_Np,
    pair_L2,
    pair_L2Pi,
    pairing_weights,
)
from stochadjoint.spaces.tree import (
    Atom,
    BranchTable,
    MarkSet,
    Mark,
    Model,
    PathSample,
    RandomVariable,
    ScenarioTree,
    TimeGrid,
    build_joint_tree,
    build_poisson_tree,
    build_tree,
    build_wiener_tree,
    conditional_expectation,
    sample_paths,
)

__all__ = [
    "Atom",
    "BinaryLattice",
    "BranchTable",
    "Mark",
    "MarkSet",
    "MarkedProcess",
    "Model",
    "PathSample",
    "Process",
    "RandomVariable",
    "ScenarioTree",
    "TimeGrid",
    "build_joint_tree",
    "build_poisson_tree",
    "build_tree",
    "build_wiener_tree",
    "conditional_expectation",
    "marked_pairing_weights",
    "norm_DHp",
    "norm_Hp",
    "norm_LpPi",
    "norm_Lp",
    "norm_Np",
    "pair_L2",
    "pair_L2Pi",
    "pairing_weights",
    "sample_paths",
]
