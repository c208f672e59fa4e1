"""Kernels, maximal operators, weights and discrete sparse operators."""

from .discrete import BOperators, DiscreteOperator, Term, build_A_k, build_B, operator_to_json
from .kernels import (
    Kernel,
    KernelReport,
    apply_cz,
    cz_matrix,
    get_kernel,
    hilbert_kernel,
    kernel_matrix,
    riesz_kernel,
    signed_inverse_kernel,
    validate_kernel,
    zero_kernel,
)
from .lemmas import (
    EltwoChain,
    MeasuredConstants,
    WeakDecomposition,
    biw_ratio,
    constant_part_on,
    discretization_constant,
    eltwo_chain,
    median_term_norm,
    median_term_ratio,
    oscillation_bound_ratio,
    weak11_decomposition,
)
from .maximal import (
    MaximalNorm,
    Weight,
    a2_characteristic,
    a2_dyadic,
    dyadic_maximal,
    dyadic_maximal_operator,
    maximal_function,
    maximal_norm,
    multi_dyadic_maximal,
    power_weight,
    weighted_dyadic_maximal,
)
from .norms import ConvergenceWarning, NormResult, l2_norm, power_norm, svd_norm, weak_11_ratio, weighted_l2_norm
