"""Operators - integrators, kernels, adjoints and their matrix oracles."""

from stochadjoint.operators.adjoints import (
    DiagonalDeviation,
    LDecomposition,
    LatticeDeviation,
    ThetaDecomposition,
    adjoint_J,
    adjoint_L,
    adjoint_L_decomposition,
    adjoint_P,
    diagonal_identity_check,
    lattice_diagonal_deviation,
    oracle_adjoint,
    theta_decomposition,
)
from stochadjoint.operators.integrators import (
    OperatorTag,
    assemble_matrix,
    deterministic_poisson_second_moment,
    is_martingale,
    op_J,
    op_L,
    op_P,
    poisson_second_moment,
)
from stochadjoint.operators.kernels import (
    ClarkDecomposition,
    Kernel2,
    KernelExtraction,
    MarkedKernel2,
    Projection,
    clark_kernel,
    extract_K,
    kernel_basis_matrix,
    kernel_norm,
    marked_kernel_norm,
    martingale_representation,
    op_Jtilde,
    op_Ptilde,
    poisson_kernel,
    project_L2nu,
    project_L2w,
    wiener_kernel,
)
from stochadjoint.operators.linear_map import LinearMap, adjoint_oracle, weighted_projection

__all__ = [
    "ClarkDecomposition",
    "DiagonalDeviation",
    "Kernel2",
    "KernelExtraction",
    "LDecomposition",
    "LatticeDeviation",
    "LinearMap",
    "MarkedKernel2",
    "OperatorTag",
    "Projection",
    "ThetaDecomposition",
    "adjoint_J",
    "adjoint_L",
    "adjoint_L_decomposition",
    "adjoint_P",
    "adjoint_oracle",
    "assemble_matrix",
    "clark_kernel",
    "deterministic_poisson_second_moment",
    "diagonal_identity_check",
    "extract_K",
    "is_martingale",
    "kernel_basis_matrix",
    "kernel_norm",
    "lattice_diagonal_deviation",
    "marked_kernel_norm",
    "martingale_representation",
    "op_J",
    "op_Jtilde",
    "op_L",
    "op_P",
    "op_Ptilde",
    "oracle_adjoint",
    "poisson_kernel",
    "poisson_second_moment",
    "project_L2nu",
    "project_L2w",
    "theta_decomposition",
    "weighted_projection",
    "wiener_kernel",
]
