//! The three-step resolution pipeline and an independent feasibility check.
//!
//! 1. Solve LB-MIQP. Infeasible means the instance is infeasible; a solution
//!    whose speed rates all lie in `[q̲, q̄]` is feasible for the original
//!    model and therefore optimal.
//! 2. Otherwise solve LB-MIQCP, seeded with the first bound, with the same checks.
//! 3. Otherwise fix the crossing orders found and solve the nonconvex
//!    fixed-order problem locally. The last incumbent's orders go first,
//!    followed by earlier incumbents of the relaxation steps, and the best
//!    feasible local solution is kept.

use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geom::{count_conflicts, is_pair_conflict_free, separation_margin, CrossingOrder};
use crate::model::{ControlDecision, ProblemInstance};
use crate::relax::{
    build_lb_miqcp, build_lb_miqp, build_ub_nlp, check_bound_violations, ModelKind, RelaxConfig,
    RelaxedModel,
};
use crate::solve::bnb::relative_gap;
use crate::solve::{solve_local_nlp, solve_mip_with_hint, LocalSettings, MipSettings, MipSolution, MipStatus, SubproblemStatus};

/// Most order vectors tried by the fixed-order step.
const MAX_LOCAL_CANDIDATES: usize = 8;
/// Tolerance for the defensive heading check on returned controls.
const HEADING_TOL: f64 = 1e-8;
/// Margin and bound tolerance of [`verify`].
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolutionStatus {
    Global,
    Local,
    Infeas,
    Nosol,
}

impl ResolutionStatus {
    pub fn label(self) -> &'static str {
        match self {
            ResolutionStatus::Global => "global",
            ResolutionStatus::Local => "local",
            ResolutionStatus::Infeas => "infeas",
            ResolutionStatus::Nosol => "nosol",
        }
    }
}

/// Outcome of one pipeline step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Global,
    Local,
    Infeas,
    Nosol,
    /// A relaxed solution exists but some speed rate leaves `[q̲, q̄]`.
    Viol,
}

impl StepStatus {
    pub fn label(self) -> &'static str {
        match self {
            StepStatus::Global => "global",
            StepStatus::Local => "local",
            StepStatus::Infeas => "infeas",
            StepStatus::Nosol => "nosol",
            StepStatus::Viol => "viol",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: ModelKind,
    pub status: StepStatus,
    pub objective: Option<f64>,
    pub lower_bound: Option<f64>,
    /// Relative gap of this step, a fraction.
    pub gap: Option<f64>,
    pub time_s: f64,
    pub n_v: usize,
    /// Branch-and-bound nodes, or order vectors tried by the fixed-order step.
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlRecord {
    pub q: f64,
    pub theta_rad: f64,
    pub dx: f64,
    pub dy: f64,
}

impl From<ControlDecision> for ControlRecord {
    fn from(c: ControlDecision) -> Self {
        Self {
            q: c.q(),
            theta_rad: c.theta(),
            dx: c.dx,
            dy: c.dy,
        }
    }
}

impl ControlRecord {
    pub fn decision(&self) -> ControlDecision {
        ControlDecision::new(self.dx, self.dy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub status: ResolutionStatus,
    pub objective: Option<f64>,
    pub best_lower_bound: Option<f64>,
    pub gap: Option<f64>,
    pub n_aircraft: usize,
    pub n_c: usize,
    pub steps: Vec<StepRecord>,
    /// Empty unless status is global or local.
    pub controls: Vec<ControlRecord>,
    pub orders: Option<Vec<CrossingOrder>>,
    pub total_time_s: f64,
    pub notes: Vec<String>,
}

impl ResolutionReport {
    pub fn decisions(&self) -> Vec<ControlDecision> {
        self.controls.iter().map(ControlRecord::decision).collect()
    }

    pub fn is_feasible_status(&self) -> bool {
        matches!(self.status, ResolutionStatus::Global | ResolutionStatus::Local)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ResolveConfig {
    /// Applied to each MIP step separately.
    pub time_limit_s: f64,
    pub relax: RelaxConfig,
    pub local: LocalSettings,
    /// When false every time field is zero, so reports are reproducible byte for byte.
    pub record_timing: bool,
}

impl Default for ResolveConfig {
    fn default() -> Self {
        Self {
            time_limit_s: 300.0,
            relax: RelaxConfig::default(),
            local: LocalSettings::default(),
            record_timing: true,
        }
    }
}

struct MipStep {
    model: RelaxedModel,
    solution: MipSolution,
    record: StepRecord,
    controls: Option<Vec<ControlDecision>>,
}

fn run_mip_step(
    inst: &ProblemInstance,
    cfg: &ResolveConfig,
    kind: ModelKind,
    floor: f64,
    hint: Option<&[CrossingOrder]>,
) -> Result<MipStep> {
    let model = match kind {
        ModelKind::LbMiqp => build_lb_miqp(inst, &cfg.relax)?,
        _ => build_lb_miqcp(inst, &cfg.relax)?,
    };
    let settings = MipSettings {
        time_limit_s: cfg.time_limit_s,
        initial_lower_bound: floor,
        ..MipSettings::default()
    };
    let solution = solve_mip_with_hint(&model, &settings, hint)?;
    let controls = solution.point.as_ref().map(|x| model.controls(x));
    let n_v = controls
        .as_ref()
        .map_or(0, |c| check_bound_violations(c, &inst.bounds));
    let status = match solution.status {
        MipStatus::Infeasible => StepStatus::Infeas,
        MipStatus::NoSolution => StepStatus::Nosol,
        _ if n_v > 0 => StepStatus::Viol,
        MipStatus::Optimal => StepStatus::Global,
        MipStatus::FeasibleTimeLimit => StepStatus::Local,
    };
    let finite = |v: f64| v.is_finite().then_some(v);
    let record = StepRecord {
        step: kind,
        status,
        objective: finite(solution.objective),
        lower_bound: finite(solution.best_bound),
        gap: finite(solution.gap),
        time_s: if cfg.record_timing { solution.wall_time_s } else { 0.0 },
        n_v,
        nodes: solution.nodes,
    };
    info!(
        "{}: {} obj {:?} bound {:?} n_v {} ({} nodes)",
        kind.label(),
        status.label(),
        record.objective,
        record.lower_bound,
        n_v,
        solution.nodes
    );
    Ok(MipStep {
        model,
        solution,
        record,
        controls,
    })
}

/// Runs the three-step pipeline on `inst`.
pub fn resolve(inst: &ProblemInstance, cfg: &ResolveConfig) -> Result<ResolutionReport> {
    let start = Instant::now();
    let n_c = count_conflicts(&inst.states, inst.d)?;
    let mut report = ResolutionReport {
        status: ResolutionStatus::Nosol,
        objective: None,
        best_lower_bound: None,
        gap: None,
        n_aircraft: inst.n_aircraft(),
        n_c,
        steps: Vec::new(),
        controls: Vec::new(),
        orders: None,
        total_time_s: 0.0,
        notes: Vec::new(),
    };

    let mut floor = f64::NEG_INFINITY;
    let mut last_orders: Option<Vec<CrossingOrder>> = None;
    // order vectors with their relaxed controls, latest step first
    let mut candidates: Vec<(Vec<CrossingOrder>, Vec<ControlDecision>)> = Vec::new();
    let mut finished = false;
    for kind in [ModelKind::LbMiqp, ModelKind::LbMiqcp] {
        let step = run_mip_step(inst, cfg, kind, floor, last_orders.as_deref())?;
        let status = step.record.status;
        if step.solution.best_bound.is_finite() {
            floor = floor.max(step.solution.best_bound);
        }
        report.steps.push(step.record.clone());
        match status {
            StepStatus::Infeas => {
                report.status = ResolutionStatus::Infeas;
                finished = true;
            }
            StepStatus::Global | StepStatus::Local => {
                report.status = if status == StepStatus::Global {
                    ResolutionStatus::Global
                } else {
                    ResolutionStatus::Local
                };
                report.objective = step.record.objective;
                report.gap = step.record.gap;
                report.controls = step
                    .controls
                    .iter()
                    .flatten()
                    .map(|&c| ControlRecord::from(c))
                    .collect();
                report.orders = step.solution.orders.clone();
                finished = true;
            }
            StepStatus::Viol => {
                last_orders = step.solution.orders.clone();
                let mut found = Vec::new();
                if let (Some(o), Some(x)) = (&step.solution.orders, &step.solution.point) {
                    found.push((o.clone(), step.model.controls(x)));
                }
                for e in &step.solution.pool {
                    found.push((e.orders.clone(), step.model.controls(&e.point)));
                }
                candidates.splice(0..0, found);
            }
            StepStatus::Nosol => {}
        }
        if finished {
            break;
        }
    }

    if !finished {
        let mut seen: Vec<&[CrossingOrder]> = Vec::new();
        let mut unique = Vec::new();
        for (orders, controls) in &candidates {
            if !seen.contains(&orders.as_slice()) {
                seen.push(orders);
                unique.push((orders, controls));
            }
        }
        unique.truncate(MAX_LOCAL_CANDIDATES);
        if unique.is_empty() {
            report.status = ResolutionStatus::Nosol;
        } else {
            let t = Instant::now();
            let mut best: Option<(f64, Vec<ControlDecision>, Vec<CrossingOrder>, usize)> = None;
            for (k, (orders, controls)) in unique.iter().enumerate() {
                let model = build_ub_nlp(inst, &cfg.relax, orders)?;
                let start_point: Vec<f64> = controls.iter().flat_map(|c| [c.dx, c.dy]).collect();
                let sol = solve_local_nlp(&model, &start_point, &cfg.local)?;
                if sol.status != SubproblemStatus::Optimal {
                    info!("UB-NLP candidate {k}: no feasible point");
                    continue;
                }
                info!("UB-NLP candidate {k}: objective {:.9}", sol.objective);
                if best.as_ref().is_none_or(|b| sol.objective < b.0) {
                    best = Some((sol.objective, model.controls(&sol.point), orders.to_vec(), k));
                }
            }
            let elapsed = if cfg.record_timing { t.elapsed().as_secs_f64() } else { 0.0 };
            let lb = floor.is_finite().then_some(floor);
            if let Some((objective, controls, orders, k)) = best {
                let gap = lb.map(|b| relative_gap(objective, b));
                report.steps.push(StepRecord {
                    step: ModelKind::UbNlp,
                    status: StepStatus::Local,
                    objective: Some(objective),
                    lower_bound: lb,
                    gap,
                    time_s: elapsed,
                    n_v: check_bound_violations(&controls, &inst.bounds),
                    nodes: unique.len(),
                });
                if Some(orders.as_slice()) != last_orders.as_deref() {
                    report.notes.push(format!(
                        "fixed-order step kept candidate {k} of {}, not the final relaxation incumbent",
                        unique.len()
                    ));
                }
                report.status = ResolutionStatus::Local;
                report.objective = Some(objective);
                report.gap = gap;
                report.controls = controls.into_iter().map(ControlRecord::from).collect();
                report.orders = Some(orders);
            } else {
                report.steps.push(StepRecord {
                    step: ModelKind::UbNlp,
                    status: StepStatus::Nosol,
                    objective: None,
                    lower_bound: lb,
                    gap: None,
                    time_s: elapsed,
                    n_v: 0,
                    nodes: unique.len(),
                });
                report.status = ResolutionStatus::Nosol;
            }
        }
    }
    report.best_lower_bound = floor.is_finite().then_some(floor);
    if report.steps.iter().any(|s| s.status == StepStatus::Viol) {
        report.notes.push(
            "a relaxation step returned speed rates outside the bounds; it is listed as 'viol' \
             where published tables print 'infeas.' with an objective"
                .to_string(),
        );
    }

    if report.is_feasible_status() {
        let controls = report.decisions();
        let check = verify(inst, &controls);
        let heading_ok = controls
            .iter()
            .all(|c| inst.bounds.contains_theta(c.theta(), HEADING_TOL));
        if !check.feasible || !heading_ok {
            warn!(
                "returned controls fail verification (min margin {:.3e}); downgrading to nosol",
                check.min_margin
            );
            report
                .notes
                .push(format!("controls failed verification, min margin {:.3e} NM", check.min_margin));
            report.status = ResolutionStatus::Nosol;
        }
    }
    report.total_time_s = if cfg.record_timing { start.elapsed().as_secs_f64() } else { 0.0 };
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMargin {
    pub i: usize,
    pub j: usize,
    /// Closest approach over `t >= 0` minus `d`, in NM.
    pub margin_nm: f64,
    pub conflict_free: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub feasible: bool,
    pub min_margin: f64,
    /// Aircraft whose speed rate or heading deviation leaves its bounds.
    pub bound_violations: usize,
    pub margins: Vec<PairMargin>,
}

impl VerifyReport {
    pub fn violated_pairs(&self) -> usize {
        self.margins.iter().filter(|m| m.margin_nm < -VERIFY_TOL).count()
    }
}

/// Recomputes every pair's closest approach and every control's bounds.
pub fn verify(inst: &ProblemInstance, controls: &[ControlDecision]) -> VerifyReport {
    let n = inst.n_aircraft();
    if controls.len() != n {
        return VerifyReport {
            feasible: false,
            min_margin: f64::NEG_INFINITY,
            bound_violations: n,
            margins: Vec::new(),
        };
    }
    let mut margins = Vec::with_capacity(inst.pairs.len());
    for &(i, j) in &inst.pairs {
        let p_hat = inst.states[i].position - inst.states[j].position;
        let v = inst.relative_velocity(i, j, controls);
        margins.push(PairMargin {
            i,
            j,
            margin_nm: separation_margin(p_hat, inst.d, v),
            conflict_free: is_pair_conflict_free(p_hat, inst.d, v),
        });
    }
    let bound_violations = controls
        .iter()
        .filter(|c| {
            !(inst.bounds.contains_q(c.q(), VERIFY_TOL) && inst.bounds.contains_theta(c.theta(), VERIFY_TOL))
        })
        .count();
    let min_margin = margins.iter().map(|m| m.margin_nm).fold(f64::INFINITY, f64::min);
    VerifyReport {
        feasible: bound_violations == 0 && margins.iter().all(|m| m.margin_nm >= -VERIFY_TOL),
        min_margin,
        bound_violations,
        margins,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{AircraftState, Vec2};
    use crate::model::ControlBounds;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn single_aircraft_is_global_at_zero() {
        let a = AircraftState::new(Vec2::new(0.0, 0.0), 500.0, 0.3).unwrap();
        let inst = ProblemInstance::new(vec![a], 5.0, ControlBounds::default()).unwrap();
        let r = resolve(&inst, &ResolveConfig::default()).unwrap();
        assert_eq!(r.status, ResolutionStatus::Global);
        assert!(r.objective.unwrap().abs() < 1e-9);
        assert_eq!(r.steps.len(), 1);
        assert_eq!(r.n_c, 0);
    }

    #[test]
    fn head_on_pair_resolves_globally() {
        let a = AircraftState::new(Vec2::new(-30.0, 0.0), 500.0, 0.0).unwrap();
        let b = AircraftState::new(Vec2::new(30.0, 0.0), 500.0, PI).unwrap();
        let inst = ProblemInstance::new(vec![a, b], 5.0, ControlBounds::default()).unwrap();
        let r = resolve(&inst, &ResolveConfig::default()).unwrap();
        assert!(r.is_feasible_status());
        assert!(r.objective.unwrap() > 0.0);
        assert!(verify(&inst, &r.decisions()).feasible);
    }

    #[test]
    fn verify_flags_bad_controls() {
        let a = AircraftState::new(Vec2::new(-30.0, 0.0), 500.0, 0.0).unwrap();
        let b = AircraftState::new(Vec2::new(30.0, 0.0), 500.0, PI).unwrap();
        let inst = ProblemInstance::new(vec![a, b], 5.0, ControlBounds::default()).unwrap();
        let r = verify(&inst, &[ControlDecision::IDENTITY; 2]);
        assert!(!r.feasible);
        assert_eq!(r.violated_pairs(), 1);
        assert!((r.min_margin + 5.0).abs() < 1e-9);
        let r = verify(&inst, &[ControlDecision::from_polar(1.2, 0.0), ControlDecision::IDENTITY]);
        assert_eq!(r.bound_violations, 1);
        assert!(!verify(&inst, &[ControlDecision::IDENTITY]).feasible);
    }

    #[test]
    fn margins_match_time_stepping() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let a = AircraftState::new(
                Vec2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)),
                rng.random_range(400.0..600.0),
                rng.random_range(-PI..PI),
            )
            .unwrap();
            let b = AircraftState::new(
                Vec2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)),
                rng.random_range(400.0..600.0),
                rng.random_range(-PI..PI),
            )
            .unwrap();
            let Ok(inst) = ProblemInstance::new(vec![a, b], 5.0, ControlBounds::default()) else {
                continue;
            };
            let cs = [
                ControlDecision::from_polar(rng.random_range(0.94..1.03), rng.random_range(-0.5..0.5)),
                ControlDecision::from_polar(rng.random_range(0.94..1.03), rng.random_range(-0.5..0.5)),
            ];
            let margin = verify(&inst, &cs).margins[0].margin_nm;
            let p = a.position - b.position;
            let v = inst.relative_velocity(0, 1, &cs);
            // closest approach happens before |p|/|v|; step past it, then refine
            let horizon = 2.0 * p.norm() / v.norm().max(1e-9);
            let steps = 200_000;
            let mut best = (f64::INFINITY, 0.0);
            for k in 0..=steps {
                let t = horizon * k as f64 / steps as f64;
                let dist = (p + v * t).norm();
                if dist < best.0 {
                    best = (dist, t);
                }
            }
            let h = horizon / steps as f64;
            let (mut lo, mut hi) = ((best.1 - h).max(0.0), best.1 + h);
            for _ in 0..100 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if (p + v * m1).norm() < (p + v * m2).norm() {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let stepped = (p + v * lo).norm().min(best.0) - inst.d;
            assert!((margin - stepped).abs() < 1e-6, "{margin} vs {stepped}");
        }
    }
}
