//! In-tree optimization engines.
//!
//! - [`ipm`]: primal-dual interior point method for convex QCQPs.
//! - [`bnb`]: best-first branch-and-bound over the crossing-order binaries.
//! - [`local`]: augmented-Lagrangian local solver for the fixed-order
//!   nonconvex problem.

pub mod bnb;
pub mod ipm;
pub mod local;
pub mod problem;

pub use bnb::{solve_mip, solve_mip_with_hint, BnBNode, MipSettings, MipSolution, MipStatus};
pub use ipm::{solve_qcqp, IpmSettings};
pub use local::{solve_local_nlp, LocalSettings};
pub use problem::{ConvexProblem, LinearRow, QuadRow, SubproblemSolution, SubproblemStatus};

use crate::error::{Error, Result};
use crate::relax::RelaxedModel;

/// Solves the continuous relaxation of a convex model with its current variable bounds.
pub fn solve_convex_subproblem(
    model: &RelaxedModel,
    warm_start: Option<&[f64]>,
) -> Result<SubproblemSolution> {
    if !model.is_convex() {
        return Err(Error::Numerical(format!(
            "{} carries nonconvex rows; use the local solver",
            model.kind.label()
        )));
    }
    Ok(solve_qcqp(&model.problem, warm_start, &IpmSettings::default()))
}
