"""Exact directed information, its variational forms and extremum solvers on finite alphabets."""
from .directed import (
    DirectedInfoReport,
    di_abs,
    di_cmi_sum,
    di_divergence,
    di_logratio,
    di_partition_sup,
    di_reverse,
    directed_information,
    mutual_information,
)
from .extremum import (
    DistortionSpec,
    InfeasibleConstraint,
    PowerSpec,
    SolverConfig,
    SolverResult,
    feedback_capacity,
    multistart_capacity,
    nrdf,
)
from .measures import (
    ConditionalTable,
    ForwardChannel,
    InputPolicy,
    InstanceSpec,
    InvalidInstance,
    JointMeasure,
    bsc,
    compose_joint,
    conditional_marginals,
    expand_causal,
    expand_forward,
    factorize,
    kl_divergence,
    marginal_x,
    marginal_y,
    mix_conditional,
    pi_backward,
    pi_forward,
)
from .oracles import brute_force_capacity, brute_force_nrdf
from .properties import PropertyReport, run_all
from .variational import (
    ReverseDecomposition,
    gap_A,
    gap_B,
    objective_A,
    objective_B,
    optimal_nu,
    optimal_reverse_decomposition,
    reciprocity_check,
)

__version__ = "0.1.0"
