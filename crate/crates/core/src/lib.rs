//! Two-dimensional aircraft conflict resolution with combined speed and
//! heading control.
//!
//! Each aircraft's control is a complex number `V = q·e^{iθ}` multiplying its
//! initial velocity. Pairwise separation becomes a disjunction of two linear
//! wedges in the controls, so the problem is a mixed-integer program whose
//! only nonconvexity is the speed-rate floor `|V| >= q̲`. The crate builds
//! two convex relaxations and a fixed-order local model, and solves them
//! with an in-tree interior point method and branch-and-bound.
//!
//! ```
//! use deconflict::{generate_cp, resolve, ResolveConfig, ResolutionStatus};
//!
//! let inst = generate_cp(4, 200.0, 500.0, 5.0).unwrap();
//! let report = resolve(&inst, &ResolveConfig::default()).unwrap();
//! assert_eq!(report.status, ResolutionStatus::Global);
//! ```

pub mod error;
pub mod geom;
pub mod instances;
pub mod model;
pub mod orchestrate;
pub mod relax;
pub mod solve;

pub use error::{Error, Result};
pub use geom::{
    count_conflicts, g_value, is_pair_conflict_free, relative_velocity, separation_margin,
    tangent_halfplanes, time_of_min_separation, AircraftState, CollisionCone, CrossingOrder,
    PairGeometry, Vec2,
};
pub use instances::{
    generate_cp, generate_rcp, AircraftRecord, GeneratorParams, InstanceFile, InstanceKind,
    InstanceSpec, PositionLaw,
};
pub use model::{
    box_bounds, build_disjunctions, deviation_cost, heading_cone_constraints, speed_ring_constraints,
    ControlBounds, ControlDecision, DisjunctiveConstraintPair, ProblemInstance,
};
pub use orchestrate::{
    resolve, verify, ControlRecord, PairMargin, ResolutionReport, ResolutionStatus, ResolveConfig,
    StepRecord, StepStatus, VerifyReport,
};
pub use relax::{
    build_lb_miqcp, build_lb_miqp, build_ub_nlp, check_bound_violations, hull_envelope,
    EnvelopeMode, HullEnvelope, ModelKind, RelaxConfig, RelaxedModel,
};
pub use solve::{
    solve_convex_subproblem, solve_local_nlp, solve_mip, solve_qcqp, IpmSettings, LocalSettings,
    MipSettings, MipSolution, MipStatus, SubproblemSolution, SubproblemStatus,
};
