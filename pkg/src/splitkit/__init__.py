"""splitkit: operator-splitting solvers for nonconvex regularized fitting.

Library layout:

* :mod:`splitkit.opcore` - resolvent selections, dual-resolvent identity;
* :mod:`splitkit.regularizers` - MCP / SCAD / l1 calculus;
* :mod:`splitkit.splitting` - Douglas-Rachford, homotopy solver, ADMM;
* :mod:`splitkit.problems` - basis pursuit and robust regression instances;
* :mod:`splitkit.experiments` - grid protocols behind the CLI;
* :mod:`splitkit.cli` - the ``splitkit`` command.
"""

from .opcore import (
    DivergenceError,
    DualOperatorSpec,
    GeneralizedResolventSelection,
    LinearMap,
    ResolventSelection,
    gmi_dual_resolvent,
    identity_map,
    lipschitz_probe,
    moreau_dual_resolvent,
    over_relax,
    reflect,
)
from .regularizers import (
    McpParams,
    Regularizer,
    ScadParams,
    phi_mcp,
    phi_mcp_homotopy,
    phi_scad,
    prox_mcp,
    prox_scad,
    selectant_mcp_dual,
    selectant_scad_dual,
    soft_threshold,
    subgradient_membership,
)
from .splitting import (
    AdmmProblem,
    Cycle,
    DrConfig,
    HostConfig,
    HostResult,
    HostState,
    IterationTrace,
    PrimalTuple,
    admm_run,
    constant_schedule,
    detect_cycle,
    dr_run,
    dr_step,
    extract_primal,
    host_run,
    host_step,
    log_ramp,
    piecewise_ramp,
    rate_bound_check,
    write_trace_csv,
)
from .problems import (
    PERIODIC_REFERENCE_ORBIT,
    BasisPursuitInstance,
    RladInstance,
    StationarityReport,
    bp_dual_f_resolvent,
    bp_dual_g_resolvent,
    bp_dual_specs,
    bp_periodic_instance,
    bp_selections,
    bp_success_instance,
    check_stationarity,
    cycle_convention_search,
    load_dataset_csv,
    rlad_admm_problem,
    rlad_dual_f_resolvent,
    rlad_dual_g_resolvent,
    rlad_dual_specs,
    rlad_objective,
    rlad_selections,
    standardize_columns,
    synth_rlad_data,
)
from .experiments import (
    FitResult,
    compare_grids,
    fit_rlad_one,
    lambda_grid,
    run_bp_demo,
    run_grid,
    select_best,
    split_train_test,
)
from .verify import CheckResult, SuiteResult, run_suite

__version__ = "0.1.0"
