//! Convex programs with linear objective, LMI constraints and scalar
//! constraints made of squared affine residuals.

mod program;
mod psd;
mod solver;

pub use program::{
    ConstraintLhs, ConvexProgram, LinearForm, MatrixAffine, ScalarConstraint, SquaredResiduals, VarId, VarKind,
};
pub use psd::project_psd;
pub use solver::{solve, solve_with, Solution, SolveOptions, Status, Tolerances};
