"""Compressed sensing with partial random circulant matrices.

Fast convolution-based measurement operators, restricted isometry
estimation, and greedy / l1 sparse recovery.
"""

from circsense.circulant import (
    DENSE_LIMIT,
    GeneratorSequence,
    PartialCirculantOperator,
    SampleSet,
    ToeplitzOperator,
    adjoint,
    apply,
    circulant_apply,
    make_generator,
    make_operator,
    materialize,
    sample_set,
    toeplitz_generator,
    toeplitz_operator,
)
from circsense.recovery import (
    ALGORITHM_CONSTANTS,
    ALGORITHMS,
    DenseOperator,
    RecoveryProblem,
    RecoveryReport,
    basis_pursuit,
    cosamp,
    htp,
    iht,
    l0_oracle,
    recover,
    rip_certificate_check,
    stability_ratio,
)
from circsense.rip import (
    BoundParams,
    RipEstimate,
    TailProfile,
    exact_rip,
    mean_delta,
    monte_carlo_rip,
    tail_profile,
    theoretical_mean_bound,
    theoretical_sample_bound,
    theoretical_tail_variance,
)
from circsense.spectral import (
    chaos_matrix,
    chaos_value,
    fourier_projector,
    modulation_identity_check,
)

__version__ = "0.1.0"
