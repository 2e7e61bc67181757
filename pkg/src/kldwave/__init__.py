"""Waveform design by divergence maximization for Gaussian hypothesis
testing, with joint sensing-communication and multi-device random-access
extensions and a Monte Carlo detection harness."""

from . import errors
from .accel import FixedPointProblem, StemState, a_mm_kld, stem_step
from .detection import (
    DetectionResult,
    LrtResult,
    SeededRng,
    calibrate_threshold,
    detection_experiment,
    llr,
    lrt_experiment,
    mixture_llr,
    orthogonal_baseline,
    sample_obs,
    wilson_interval,
)
from .isac import (
    IsacParetoPoint,
    IsacScenario,
    isac_iterate,
    isac_objective,
    isac_solve,
    pareto_sweep,
)
from .linalg import (
    cholesky_pd,
    hermitian_part,
    kron_apply,
    logdet_pd,
    power_iteration_max_eig,
    solve_pd,
)
from .objective import (
    AuxiliaryVariables,
    CommAuxiliaries,
    aux_star,
    comm_aux_star,
    f_cq_eval,
    f_h_eval,
    f_obj,
    f_obj_comparable,
    f_q_eval,
    gamma_star,
    kld_from_cov,
    mi_eval,
    psi_star,
)
from .random_access import (
    RandomAccessScenario,
    RaGeneratorConfig,
    conditional_covs,
    generate_ra_scenario,
    init_waveform_set,
    pattern_weights,
    ra_block_update,
    ra_solve,
    sum_kld,
)
from .scenario import (
    GeneratorConfig,
    SensingScenario,
    covariances,
    generate_scenario,
    init_waveform,
    load_scenario,
    load_waveform,
    save_scenario,
    save_waveform,
    validate,
    waveform_power,
)
from .solvers import (
    RelaxationState,
    SolverOptions,
    SolverTrace,
    fp_iterate,
    fp_kld,
    lambda_bar,
    mm_kld,
    mm_map,
    solve_x_sylvester,
)

__version__ = "0.1.0"
