"""p-modulus of curve families on discretized planar metric measure spaces.

The package computes the p-modulus of connecting-curve families and of
separating-boundary families on weighted grids under the l1, l2 or sup
norm, certifies each value with a Lagrangian dual bound, checks the sharp
product inequality mod_p(connecting)^(1/p) * mod_q(separating)^(1/q) >=
pi/4, and verifies coarea and Eilenberg-type level-set estimates for
chain-built potentials.
"""

from .estimator import ModulusSolver
from .families import (
    ConnectingFamily,
    DiscreteCurve,
    MeasureConstraint,
    OracleCut,
    SeparatingFamily,
    curve_constraint,
    loop_erase,
    most_violated_cut,
    shortest_admissible_curve,
)
from .geometry import (
    Displacement,
    HausdorffConstants,
    MetricGrid,
    NormTag,
    ball_volume,
    cell_measure,
    hausdorff_density_2d,
    step_length,
)
from .harness import ExperimentConfig, Report, emit_csv, run
from .modulus import (
    SHARP_PRODUCT_BOUND,
    Density,
    ModulusResult,
    ReciprocityReport,
    SolverConfig,
    lagrangian_lower_bound,
    solve_modulus,
    verify_reciprocity,
)
from .potential import (
    ChainPotential,
    LevelSetSlice,
    capacity_potential,
    chain_potential,
    coarea_check,
    eilenberg_check,
    level_set_boundary,
    normalized,
    sink_infimum,
)

__version__ = "0.1.0"

__all__ = [
    "ModulusSolver",
    "ConnectingFamily",
    "SeparatingFamily",
    "DiscreteCurve",
    "MeasureConstraint",
    "OracleCut",
    "curve_constraint",
    "loop_erase",
    "most_violated_cut",
    "shortest_admissible_curve",
    "Displacement",
    "HausdorffConstants",
    "MetricGrid",
    "NormTag",
    "ball_volume",
    "cell_measure",
    "hausdorff_density_2d",
    "step_length",
    "ExperimentConfig",
    "Report",
    "emit_csv",
    "run",
    "SHARP_PRODUCT_BOUND",
    "Density",
    "ModulusResult",
    "ReciprocityReport",
    "SolverConfig",
    "lagrangian_lower_bound",
    "solve_modulus",
    "verify_reciprocity",
    "ChainPotential",
    "LevelSetSlice",
    "capacity_potential",
    "chain_potential",
    "coarea_check",
    "eilenberg_check",
    "level_set_boundary",
    "normalized",
    "sink_infimum",
]
