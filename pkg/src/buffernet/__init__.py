"""Markov switching buffer networks: gain analysis and parameter tuning.

The library models a directed buffer network whose edge weights switch under
a continuous-time Markov chain, computes its L1/Linf induced gains through
small certificate linear programs (with a resolvent formula and a Monte
Carlo simulator as independent cross-checks), and tunes the per-edge flow
multipliers and destination decay rates by difference-of-convex programming
over log-transformed posynomials.
"""

from .config import ConfigError, LoadedConfig, load_config
from .dcsolve import (
    DCProgram,
    DCSolution,
    NoFeasiblePointFound,
    SolveOptions,
    SolveTrace,
    convexify,
    solve_dc,
    solve_subproblem,
)
from .gains import (
    EmpiricalGain,
    GainReport,
    PiecewiseConstantInput,
    StabilityReport,
    TrajectoryBatch,
    Unstable,
    empirical_gain,
    export_trajectory_csv,
    l1_gain,
    lifted_matrix,
    linf_gain,
    resolvent_gain,
    sample_mode_path,
    simulate_mjls,
    stability_check,
)
from .netmodel import (
    BufferNetwork,
    CarSharingPricing,
    Edge,
    Graph,
    MarkovChain,
    ModeSystem,
    ParamBounds,
    TuningParams,
    adjacency,
    assemble_system,
    build_graph,
    carsharing_params,
    decompose_a,
    metzler_check,
    validate_generator,
)
from .posylog import (
    DCConstraint,
    LogPosynomial,
    Monomial,
    Posynomial,
    VariableSpace,
    eval_monomial,
    eval_posynomial,
    linearize_concave,
    log_transform,
    posy_add,
    posy_mul_monomial,
    posy_scale,
)
from .problems import (
    CostModel,
    OptimizationResult,
    VariableMap,
    build_gp_baseline,
    build_l1_problem,
    build_linf_problem,
    compare_gp,
    extract_solution,
    optimize_l1,
    optimize_linf,
)

__version__ = "0.1.0"
