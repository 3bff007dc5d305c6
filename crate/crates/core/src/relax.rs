//! Convex relaxations of the complex-number model and the fixed-order
//! nonconvex problem used for upper bounds.
//!
//! Variable layout, for `n` aircraft and `P` pairs:
//!
//! ```text
//! [dx_0, dy_0, ..., dx_{n-1}, dy_{n-1}, tx_0, ty_0, ..., tx_{n-1}, ty_{n-1}, z_0, ..., z_{P-1}]
//! ```
//!
//! The UB model keeps only the controls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::CrossingOrder;
use crate::model::{
    box_bounds, build_disjunctions, heading_cone_constraints, ControlBounds, ControlDecision,
    DisjunctiveConstraintPair, ProblemInstance,
};
use crate::solve::problem::{ConvexProblem, LinearRow, QuadRow};

/// Tolerance on speed-bound membership when counting violations.
pub const BOUND_VIOLATION_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "LB-MIQP")]
    LbMiqp,
    #[serde(rename = "LB-MIQCP")]
    LbMiqcp,
    #[serde(rename = "UB-NLP")]
    UbNlp,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::LbMiqp => "LB-MIQP",
            ModelKind::LbMiqcp => "LB-MIQCP",
            ModelKind::UbNlp => "UB-NLP",
        }
    }
}

/// Right endpoint of the `dx` secant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeMode {
    /// Secant of `dx²` over `[q̲c, 1]`.
    #[default]
    Verbatim,
    /// Secant of `dx²` over `[q̲c, q̄]`.
    Qbar,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RelaxConfig {
    pub envelope: EnvelopeMode,
    /// Drop pairs that diverge under every control in the box.
    pub prune_pairs: bool,
}

/// Linear overestimators of `dx²` and `dy²`, as `(slope, intercept)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullEnvelope {
    pub secant_x: (f64, f64),
    pub secant_y: (f64, f64),
    pub q_lo_sq: f64,
}

impl HullEnvelope {
    pub fn x_cap(&self, dx: f64) -> f64 {
        self.secant_x.0 * dx + self.secant_x.1
    }

    pub fn y_cap(&self, dy: f64) -> f64 {
        self.secant_y.0 * dy + self.secant_y.1
    }
}

pub fn hull_envelope(bounds: &ControlBounds, mode: EnvelopeMode) -> HullEnvelope {
    let qc = bounds.q_lo * bounds.cos_max_heading();
    let right = match mode {
        EnvelopeMode::Verbatim => 1.0,
        EnvelopeMode::Qbar => bounds.q_hi,
    };
    let (sl, su) = (bounds.th_lo.sin(), bounds.th_hi.sin());
    HullEnvelope {
        secant_x: (qc + right, -qc * right),
        secant_y: (bounds.q_hi * (sl + su), -bounds.q_hi * bounds.q_hi * sl * su),
        q_lo_sq: bounds.q_lo * bounds.q_lo,
    }
}

/// `Σ squares_k x_k² >= rhs`, a nonconvex (reverse-convex) row.
#[derive(Debug, Clone, PartialEq)]
pub struct ReverseQuadRow {
    pub squares: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl ReverseQuadRow {
    /// Positive when violated.
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.rhs - self.squares.iter().map(|&(k, h)| h * x[k] * x[k]).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct RelaxedModel {
    pub kind: ModelKind,
    pub n_aircraft: usize,
    pub bounds: ControlBounds,
    pub problem: ConvexProblem,
    pub reverse: Vec<ReverseQuadRow>,
    pub pairs: Vec<DisjunctiveConstraintPair>,
    /// Variable index of each pair's `z`; empty for the UB model.
    pub binaries: Vec<usize>,
    pub fixed_orders: Option<Vec<CrossingOrder>>,
}

pub fn dx_index(i: usize) -> usize {
    2 * i
}

pub fn dy_index(i: usize) -> usize {
    2 * i + 1
}

impl RelaxedModel {
    pub fn n_vars(&self) -> usize {
        self.problem.n()
    }

    pub fn controls(&self, x: &[f64]) -> Vec<ControlDecision> {
        (0..self.n_aircraft)
            .map(|i| ControlDecision::new(x[dx_index(i)], x[dy_index(i)]))
            .collect()
    }

    pub fn is_convex(&self) -> bool {
        self.reverse.is_empty()
    }

    /// Largest violation of every row, bound and reverse row at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.reverse
            .iter()
            .map(|r| r.violation(x))
            .fold(self.problem.max_violation(x), f64::max)
    }

    /// Constraint rows in the row order of `problem.linear`, for audits.
    pub fn linear_rows(&self) -> &[LinearRow] {
        &self.problem.linear
    }
}

fn add_objective(prob: &mut ConvexProblem, n_aircraft: usize) {
    for i in 0..n_aircraft {
        prob.p[(dx_index(i), dx_index(i))] = 2.0;
        prob.p[(dy_index(i), dy_index(i))] = 2.0;
        prob.q[dx_index(i)] = -2.0;
    }
    prob.c = n_aircraft as f64;
}

fn add_control_rows(prob: &mut ConvexProblem, bounds: &ControlBounds, n_aircraft: usize) {
    let cb = box_bounds(bounds);
    let [lo, hi] = heading_cone_constraints(bounds);
    for i in 0..n_aircraft {
        let (x, y) = (dx_index(i), dy_index(i));
        prob.lo[x] = cb.dx_lo;
        prob.hi[x] = cb.dx_hi;
        prob.lo[y] = cb.dy_lo;
        prob.hi[y] = cb.dy_hi;
        for h in [lo, hi] {
            prob.linear.push(LinearRow::new(vec![(x, h.a_dx), (y, h.a_dy)], h.rhs));
        }
    }
}

fn upper_ring(i: usize, bounds: &ControlBounds) -> QuadRow {
    QuadRow {
        squares: vec![(dx_index(i), 1.0), (dy_index(i), 1.0)],
        terms: Vec::new(),
        rhs: bounds.q_hi * bounds.q_hi,
    }
}

fn selected_pairs(inst: &ProblemInstance, cfg: &RelaxConfig) -> Result<Vec<DisjunctiveConstraintPair>> {
    let pairs = build_disjunctions(inst)?;
    if !cfg.prune_pairs {
        return Ok(pairs);
    }
    Ok(pairs
        .into_iter()
        .filter(|p| !crate::model::always_diverging(inst, p.i, p.j))
        .collect())
}

fn build_lower(inst: &ProblemInstance, cfg: &RelaxConfig, kind: ModelKind) -> Result<RelaxedModel> {
    let n = inst.n_aircraft();
    let pairs = selected_pairs(inst, cfg)?;
    let n_vars = 4 * n + pairs.len();
    let mut prob = ConvexProblem::new(n_vars);
    add_objective(&mut prob, n);
    add_control_rows(&mut prob, &inst.bounds, n);

    let env = hull_envelope(&inst.bounds, cfg.envelope);
    let cb = box_bounds(&inst.bounds);
    let tx_hi = env.x_cap(cb.dx_lo).max(env.x_cap(cb.dx_hi)).max(0.0);
    let ty_hi = env.y_cap(cb.dy_lo).max(env.y_cap(cb.dy_hi)).max(0.0);
    for i in 0..n {
        let (tx, ty) = (2 * n + 2 * i, 2 * n + 2 * i + 1);
        prob.lo[tx] = 0.0;
        prob.hi[tx] = tx_hi;
        prob.lo[ty] = 0.0;
        prob.hi[ty] = ty_hi;
        prob.linear.push(LinearRow::new(vec![(tx, -1.0), (ty, -1.0)], -env.q_lo_sq));
        prob.linear.push(LinearRow::new(
            vec![(tx, 1.0), (dx_index(i), -env.secant_x.0)],
            env.secant_x.1,
        ));
        prob.linear.push(LinearRow::new(
            vec![(ty, 1.0), (dy_index(i), -env.secant_y.0)],
            env.secant_y.1,
        ));
        if kind == ModelKind::LbMiqcp {
            prob.quad.push(upper_ring(i, &inst.bounds));
        }
    }

    let mut binaries = Vec::with_capacity(pairs.len());
    for (k, pair) in pairs.iter().enumerate() {
        let z = 4 * n + k;
        binaries.push(z);
        prob.lo[z] = 0.0;
        prob.hi[z] = 1.0;
        let idx = [dx_index(pair.i), dy_index(pair.i), dx_index(pair.j), dy_index(pair.j)];
        for row in pair.big_m_rows() {
            let mut terms: Vec<(usize, f64)> = idx.iter().copied().zip(row.form).collect();
            terms.push((z, row.z_coeff));
            prob.linear.push(LinearRow::new(terms, row.rhs));
        }
    }
    Ok(RelaxedModel {
        kind,
        n_aircraft: n,
        bounds: inst.bounds,
        problem: prob,
        reverse: Vec::new(),
        pairs,
        binaries,
        fixed_orders: None,
    })
}

/// Objective, box, heading cone, envelope and big-M disjunctions; no speed ring.
pub fn build_lb_miqp(inst: &ProblemInstance, cfg: &RelaxConfig) -> Result<RelaxedModel> {
    build_lower(inst, cfg, ModelKind::LbMiqp)
}

/// [`build_lb_miqp`] plus the convex upper ring `dx² + dy² <= q̄²`.
pub fn build_lb_miqcp(inst: &ProblemInstance, cfg: &RelaxConfig) -> Result<RelaxedModel> {
    build_lower(inst, cfg, ModelKind::LbMiqcp)
}

/// The full model with every crossing order fixed; continuous and nonconvex.
pub fn build_ub_nlp(
    inst: &ProblemInstance,
    cfg: &RelaxConfig,
    orders: &[CrossingOrder],
) -> Result<RelaxedModel> {
    let n = inst.n_aircraft();
    let pairs = selected_pairs(inst, cfg)?;
    if orders.len() != pairs.len() {
        return Err(Error::InvalidInstance(format!(
            "expected {} crossing orders, got {}",
            pairs.len(),
            orders.len()
        )));
    }
    let mut prob = ConvexProblem::new(2 * n);
    add_objective(&mut prob, n);
    add_control_rows(&mut prob, &inst.bounds, n);
    let mut reverse = Vec::with_capacity(n);
    for i in 0..n {
        prob.quad.push(upper_ring(i, &inst.bounds));
        reverse.push(ReverseQuadRow {
            squares: vec![(dx_index(i), 1.0), (dy_index(i), 1.0)],
            rhs: inst.bounds.q_lo * inst.bounds.q_lo,
        });
    }
    for (pair, &order) in pairs.iter().zip(orders) {
        let idx = [dx_index(pair.i), dy_index(pair.i), dx_index(pair.j), dy_index(pair.j)];
        for row in pair.branch_rows(order) {
            prob.linear
                .push(LinearRow::new(idx.iter().copied().zip(row.form).collect(), row.rhs));
        }
    }
    Ok(RelaxedModel {
        kind: ModelKind::UbNlp,
        n_aircraft: n,
        bounds: inst.bounds,
        problem: prob,
        reverse,
        pairs,
        binaries: Vec::new(),
        fixed_orders: Some(orders.to_vec()),
    })
}

/// Number of aircraft whose speed rate lies outside `[q̲ - ε, q̄ + ε]`.
pub fn check_bound_violations(controls: &[ControlDecision], bounds: &ControlBounds) -> usize {
    controls
        .iter()
        .filter(|c| !bounds.contains_q(c.q(), BOUND_VIOLATION_EPS))
        .count()
}
