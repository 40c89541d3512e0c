//! Scenario programs with constraint removal: accuracy assessment for a fixed
//! model and joint design of the initialization map.

mod accuracy;
mod problems;
mod removal;

pub use accuracy::{augment, AccuracyModel, MomentData};
pub use problems::{
    assess_quadratic, assess_scalar, design_init_map, design_param_count, design_program, quadratic_program,
    scalar_program, AccuracyKind, DesignSample, InitialState, ScenarioSolution, SolutionMeta,
};
pub use removal::{remove_constraints, RemovalOutcome, RemovalRule, RemovalSettings};
