//! Electrostatics, spin-center linewidth and constrained design optimization
//! for p-n-n+ diodes hosting optically addressable spin defects.

// `!(x > 0.0)` is how NaN inputs are rejected throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod error;
pub mod material;
pub mod poisson;
pub mod linewidth;
pub mod leakage;
pub mod optimizer;
mod quad;

pub use error::{Error, Result};
pub use linewidth::{
    delta_e_total, lineshape_eval, linewidth_majority, linewidth_report, optimal_defect_position,
    LineshapeKind, LinewidthReport,
};
pub use leakage::{
    drift_velocity, effective_density, emission_rates, field_enhancement_factor, generation_rate,
    leakage_analysis, leakage_current, leakage_report, surface_electric_linewidth,
    surface_magnetic_linewidth, trap_occupation, DepthProfile, EmissionRates, LeakageResult,
};
pub use material::{
    MaterialParams, MobilityFit, SpinCenterParams, TrapParams, VacuumPermittivity,
};
pub use optimizer::diode::{
    design_vector, diode_constraints, diode_objective, DesignBounds, DesignParam, DiodeProblem,
};
pub use optimizer::{
    finite_diff_gradient, merit_value, optimize, project_feasible, scaled_step, Constraint,
    ConstraintSet, GradSource, GradientHistory, Objective, ObjectiveValue, OptimizationTrace,
    OptimizeFailure, OptimizerConfig, ParameterVector, Termination, TraceRecord,
};
pub use poisson::{
    boundary_levels, charge_density, depletion_profile, sigmoid_regulator, solve_poisson,
    solve_poisson_from,
    DepletionProfile, DiodeDesign, GridConfig, PotentialSolution,
};
