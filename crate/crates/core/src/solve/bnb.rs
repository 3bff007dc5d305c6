//! Best-first branch-and-bound over the crossing-order binaries.
//!
//! Each node fixes some `z` and relaxes the rest to `[0, 1]`. The objective
//! does not involve `z`, so whenever the node's controls already put every
//! free pair inside one of its two wedges, choosing `z` accordingly yields an
//! integer-feasible point with the node's own objective and the node is
//! solved. Otherwise the node branches on a free pair whose controls sit in
//! the collision cone.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::ipm::{solve_qcqp, IpmSettings};
use super::problem::SubproblemStatus;
use crate::error::{Error, Result};
use crate::geom::CrossingOrder;
use crate::relax::{ModelKind, RelaxedModel};

/// Unit-scaled tolerance when matching node controls to a wedge.
const WEDGE_TOL: f64 = 1e-9;
/// Row tolerance an incumbent must meet.
const INCUMBENT_TOL: f64 = 1e-8;
/// Normalized `N` values within this band count as zero when rounding.
const TIE_TOL: f64 = 1e-9;
/// The rounding heuristic runs at the root and then every this many nodes.
const HEURISTIC_PERIOD: usize = 10;
/// Superseded incumbents kept in [`MipSolution::pool`].
const POOL_SIZE: usize = 8;

#[derive(Debug, Clone, Copy)]
pub struct MipSettings {
    pub time_limit_s: f64,
    pub gap_tol: f64,
    /// A bound known to be valid for the model, e.g. from a weaker relaxation.
    pub initial_lower_bound: f64,
    pub node_limit: Option<usize>,
    pub record_trace: bool,
    /// Run the rounding heuristic (root and periodic).
    pub heuristic: bool,
}

impl Default for MipSettings {
    fn default() -> Self {
        Self {
            time_limit_s: 300.0,
            gap_tol: 1e-6,
            initial_lower_bound: f64::NEG_INFINITY,
            node_limit: None,
            record_trace: false,
            heuristic: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MipStatus {
    Optimal,
    FeasibleTimeLimit,
    Infeasible,
    /// Time or node limit reached before any incumbent.
    NoSolution,
}

#[derive(Debug, Clone)]
pub struct MipSolution {
    pub point: Option<Vec<f64>>,
    pub orders: Option<Vec<CrossingOrder>>,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub wall_time_s: f64,
    pub status: MipStatus,
    /// `(parent bound, node bound)` for every evaluated node when tracing.
    pub bound_trace: Vec<(f64, f64)>,
    /// Superseded incumbents, best first.
    pub pool: Vec<PoolEntry>,
}

#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub objective: f64,
    pub point: Vec<f64>,
    pub orders: Vec<CrossingOrder>,
}

/// `(UB - LB) / max(|UB|, 1e-10)`.
pub fn relative_gap(ub: f64, lb: f64) -> f64 {
    if !ub.is_finite() {
        return f64::INFINITY;
    }
    (ub - lb) / ub.abs().max(1e-10)
}

#[derive(Debug, Clone)]
pub struct BnBNode {
    pub fixed: Vec<Option<CrossingOrder>>,
    pub lower_bound: f64,
    pub depth: usize,
    warm: Option<Rc<Vec<f64>>>,
    id: u64,
}

struct Queued(BnBNode);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // BinaryHeap is a max-heap: the best node compares greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .lower_bound
            .total_cmp(&self.0.lower_bound)
            .then(self.0.depth.cmp(&other.0.depth))
            .then(other.0.id.cmp(&self.0.id))
    }
}

type Incumbent = PoolEntry;

fn replace_incumbent(incumbent: &mut Option<Incumbent>, pool: &mut Vec<PoolEntry>, new: Incumbent) {
    if let Some(old) = incumbent.replace(new) {
        pool.insert(0, old);
        pool.truncate(POOL_SIZE);
    }
}

/// Order a pair's controls lean towards: the side of `N` they sit on, ties to `Lower`.
fn leaning_order(pair: &crate::model::DisjunctiveConstraintPair, controls: &[crate::model::ControlDecision]) -> CrossingOrder {
    if pair.n_value(controls[pair.i], controls[pair.j]) <= TIE_TOL {
        CrossingOrder::Lower
    } else {
        CrossingOrder::Upper
    }
}

/// Solves the model with every binary fixed; returns the point when feasible.
fn solve_fixed(
    model: &RelaxedModel,
    orders: &[CrossingOrder],
    warm: Option<&[f64]>,
    ipm: &IpmSettings,
) -> Option<(f64, Vec<f64>)> {
    let mut prob = model.problem.clone();
    for (k, &z) in model.binaries.iter().enumerate() {
        let v = orders[k].z() as f64;
        prob.lo[z] = v;
        prob.hi[z] = v;
    }
    let sol = solve_qcqp(&prob, warm, ipm);
    if sol.status != SubproblemStatus::Optimal {
        return None;
    }
    let mut point = sol.point;
    for (k, &z) in model.binaries.iter().enumerate() {
        point[z] = orders[k].z() as f64;
    }
    (model.max_violation(&point) <= INCUMBENT_TOL).then(|| (model.problem.objective(&point), point))
}

/// Branch-and-bound on an LB model's binaries.
pub fn solve_mip(model: &RelaxedModel, settings: &MipSettings) -> Result<MipSolution> {
    solve_mip_with_hint(model, settings, None)
}

/// [`solve_mip`] seeded with a candidate order vector, e.g. from a weaker relaxation.
pub fn solve_mip_with_hint(
    model: &RelaxedModel,
    settings: &MipSettings,
    hint: Option<&[CrossingOrder]>,
) -> Result<MipSolution> {
    if !matches!(model.kind, ModelKind::LbMiqp | ModelKind::LbMiqcp) {
        return Err(Error::InvalidInstance(format!(
            "branch-and-bound expects a mixed-integer relaxation, got {}",
            model.kind.label()
        )));
    }
    let start = Instant::now();
    let ipm = IpmSettings::default();
    let n_pairs = model.pairs.len();
    let mut work = model.problem.clone();
    let mut next_id = 0u64;
    let mut heap: BinaryHeap<Queued> = BinaryHeap::new();
    let mut dive: Vec<BnBNode> = vec![BnBNode {
        fixed: vec![None; n_pairs],
        lower_bound: settings.initial_lower_bound,
        depth: 0,
        warm: None,
        id: next_id,
    }];
    next_id += 1;
    let mut incumbent: Option<Incumbent> = None;
    let mut pool: Vec<PoolEntry> = Vec::new();
    let mut nodes = 0usize;
    let mut trace = Vec::new();
    let mut timed_out = false;

    let mut seeds: Vec<Vec<CrossingOrder>> = Vec::new();
    if let Some(orders) = hint.filter(|h| h.len() == n_pairs) {
        seeds.push(orders.to_vec());
    }
    if settings.heuristic {
        let identity = vec![crate::model::ControlDecision::IDENTITY; model.n_aircraft];
        seeds.push(model.pairs.iter().map(|p| leaning_order(p, &identity)).collect());
    }
    for orders in seeds {
        if let Some((objective, point)) = solve_fixed(model, &orders, None, &ipm) {
            if incumbent.as_ref().is_none_or(|i| objective < i.objective) {
                debug!("seed order vector gives incumbent {objective:.9}");
                replace_incumbent(&mut incumbent, &mut pool, Incumbent { objective, point, orders });
            }
        }
    }

    let cutoff = |inc: &Option<Incumbent>| match inc {
        Some(i) => i.objective - settings.gap_tol * i.objective.abs().max(1e-10),
        None => f64::INFINITY,
    };

    loop {
        if incumbent.is_some() && !dive.is_empty() {
            heap.extend(dive.drain(..).map(Queued));
        }
        let node = if incumbent.is_none() {
            dive.pop().or_else(|| heap.pop().map(|q| q.0))
        } else {
            heap.pop().map(|q| q.0)
        };
        let Some(node) = node else { break };
        let over_time = start.elapsed().as_secs_f64() > settings.time_limit_s;
        let over_nodes = settings.node_limit.is_some_and(|l| nodes >= l);
        if over_time || over_nodes {
            timed_out = true;
            heap.push(Queued(node));
            break;
        }
        if node.lower_bound >= cutoff(&incumbent) {
            continue;
        }

        for (k, &z) in model.binaries.iter().enumerate() {
            match node.fixed[k] {
                Some(order) => {
                    let v = order.z() as f64;
                    work.lo[z] = v;
                    work.hi[z] = v;
                }
                None => {
                    work.lo[z] = 0.0;
                    work.hi[z] = 1.0;
                }
            }
        }
        let sol = solve_qcqp(&work, node.warm.as_deref().map(|w| w.as_slice()), &ipm);
        nodes += 1;
        match sol.status {
            SubproblemStatus::Infeasible => continue,
            SubproblemStatus::IterationLimit => {
                warn!("node {} relaxation hit the iteration limit (kkt {:.2e})", node.id, sol.kkt_residual);
            }
            SubproblemStatus::Optimal => {}
        }
        let bound = node.lower_bound.max(sol.objective);
        if settings.record_trace {
            trace.push((node.lower_bound, bound));
        }
        if bound >= cutoff(&incumbent) {
            continue;
        }

        let x = sol.point;
        let controls = model.controls(&x);
        if settings.heuristic && (nodes - 1) % HEURISTIC_PERIOD == 0 {
            let rounded: Vec<CrossingOrder> = model
                .pairs
                .iter()
                .zip(&node.fixed)
                .map(|(pair, fixed)| {
                    fixed
                        .or_else(|| pair.feasible_order(controls[pair.i], controls[pair.j], WEDGE_TOL))
                        .unwrap_or_else(|| leaning_order(pair, &controls))
                })
                .collect();
            if let Some((objective, point)) = solve_fixed(model, &rounded, Some(&x), &ipm) {
                if incumbent.as_ref().is_none_or(|i| objective < i.objective) {
                    debug!("rounding incumbent {objective:.9} at node {}", node.id);
                    replace_incumbent(&mut incumbent, &mut pool, Incumbent { objective, point, orders: rounded });
                }
            }
        }
        let orders: Vec<Option<CrossingOrder>> = model
            .pairs
            .iter()
            .zip(&node.fixed)
            .map(|(pair, fixed)| {
                fixed.or_else(|| pair.feasible_order(controls[pair.i], controls[pair.j], WEDGE_TOL))
            })
            .collect();

        if orders.iter().all(Option::is_some) {
            let orders: Vec<CrossingOrder> = orders.iter().flatten().copied().collect();
            let mut point = x.clone();
            for (k, &z) in model.binaries.iter().enumerate() {
                point[z] = orders[k].z() as f64;
            }
            let violation = model.max_violation(&point);
            if violation <= INCUMBENT_TOL {
                let objective = model.problem.objective(&point);
                if incumbent.as_ref().is_none_or(|i| objective < i.objective) {
                    debug!("incumbent {objective:.9} at node {} depth {}", node.id, node.depth);
                    replace_incumbent(&mut incumbent, &mut pool, Incumbent { objective, point, orders });
                }
                continue;
            }
            warn!("repaired point violates rows by {violation:.2e}; branching");
        }

        let free: Vec<usize> = (0..n_pairs).filter(|&k| node.fixed[k].is_none()).collect();
        let candidates: Vec<usize> = {
            let violated: Vec<usize> = free.iter().copied().filter(|&k| orders[k].is_none()).collect();
            if violated.is_empty() {
                free
            } else {
                violated
            }
        };
        let Some(&branch) = candidates.iter().min_by(|&&a, &&b| {
            let fa = (x[model.binaries[a]] - 0.5).abs();
            let fb = (x[model.binaries[b]] - 0.5).abs();
            fa.total_cmp(&fb)
                .then(model.pairs[a].severity.total_cmp(&model.pairs[b].severity))
                .then(a.cmp(&b))
        }) else {
            warn!("node {} has no free pair left but is not integer feasible", node.id);
            continue;
        };

        let pair = &model.pairs[branch];
        let preferred = leaning_order(pair, &controls);
        let other = match preferred {
            CrossingOrder::Lower => CrossingOrder::Upper,
            CrossingOrder::Upper => CrossingOrder::Lower,
        };
        let warm = Rc::new(x);
        let mut child = |order: CrossingOrder| {
            let mut fixed = node.fixed.clone();
            fixed[branch] = Some(order);
            let c = BnBNode {
                fixed,
                lower_bound: bound,
                depth: node.depth + 1,
                warm: Some(Rc::clone(&warm)),
                id: next_id,
            };
            next_id += 1;
            c
        };
        let first = child(preferred);
        let second = child(other);
        if incumbent.is_none() {
            heap.push(Queued(second));
            dive.push(first);
        } else {
            heap.push(Queued(first));
            heap.push(Queued(second));
        }
    }

    let wall_time_s = start.elapsed().as_secs_f64();
    let open_bound = heap
        .iter()
        .map(|q| q.0.lower_bound)
        .chain(dive.iter().map(|n| n.lower_bound))
        .fold(f64::INFINITY, f64::min);
    let solution = match incumbent {
        Some(inc) => {
            let best_bound = if timed_out {
                open_bound.min(inc.objective)
            } else {
                inc.objective
            };
            let gap = relative_gap(inc.objective, best_bound).max(0.0);
            let status = if !timed_out || gap <= settings.gap_tol {
                MipStatus::Optimal
            } else {
                MipStatus::FeasibleTimeLimit
            };
            MipSolution {
                point: Some(inc.point),
                orders: Some(inc.orders),
                objective: inc.objective,
                best_bound,
                gap,
                nodes,
                wall_time_s,
                status,
                bound_trace: trace,
                pool,
            }
        }
        None => MipSolution {
            point: None,
            orders: None,
            objective: f64::INFINITY,
            best_bound: if timed_out { open_bound } else { f64::INFINITY },
            gap: f64::INFINITY,
            nodes,
            wall_time_s,
            status: if timed_out {
                MipStatus::NoSolution
            } else {
                MipStatus::Infeasible
            },
            bound_trace: trace,
            pool,
        },
    };
    debug!(
        "{}: {:?} obj {:.9} bound {:.9} nodes {} in {:.3}s",
        model.kind.label(),
        solution.status,
        solution.objective,
        solution.best_bound,
        solution.nodes,
        solution.wall_time_s
    );
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{AircraftState, Vec2};
    use crate::model::{ControlBounds, ProblemInstance};
    use crate::relax::{build_lb_miqcp, build_lb_miqp, RelaxConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Aircraft on a 40 NM disc, roughly heading for its centre.
    fn cluster(n: usize, seed: u64) -> ProblemInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let states: Vec<AircraftState> = (0..n)
                .map(|_| {
                    let r = rng.random_range(15.0..40.0);
                    let a = rng.random_range(0.0..2.0 * PI);
                    let pos = Vec2::new(r * a.cos(), r * a.sin());
                    let heading = a + PI + rng.random_range(-0.4..0.4);
                    AircraftState::new(pos, rng.random_range(400.0..600.0), heading).unwrap()
                })
                .collect();
            if let Ok(inst) = ProblemInstance::new(states, 5.0, ControlBounds::default()) {
                return inst;
            }
        }
    }

    /// Minimum over every `z` vector of the model with all binaries fixed.
    fn enumerate(model: &RelaxedModel) -> Option<f64> {
        let k = model.binaries.len();
        let mut best: Option<f64> = None;
        for mask in 0u32..(1 << k) {
            let mut prob = model.problem.clone();
            for (b, &z) in model.binaries.iter().enumerate() {
                let v = ((mask >> b) & 1) as f64;
                prob.lo[z] = v;
                prob.hi[z] = v;
            }
            let sol = solve_qcqp(&prob, None, &IpmSettings::default());
            if sol.status == SubproblemStatus::Optimal {
                best = Some(best.map_or(sol.objective, |b: f64| b.min(sol.objective)));
            }
        }
        best
    }

    #[test]
    fn single_aircraft_is_free() {
        let a = AircraftState::new(Vec2::new(0.0, 0.0), 500.0, 0.3).unwrap();
        let inst = ProblemInstance::new(vec![a], 5.0, ControlBounds::default()).unwrap();
        let model = build_lb_miqp(&inst, &RelaxConfig::default()).unwrap();
        let sol = solve_mip(&model, &MipSettings::default()).unwrap();
        assert_eq!(sol.status, MipStatus::Optimal);
        assert!(sol.objective.abs() < 1e-9);
        let x = sol.point.unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6 && x[1].abs() < 1e-6, "{x:?}");
    }

    #[test]
    fn matches_complete_enumeration() {
        for seed in 0..12 {
            let inst = cluster(3, seed);
            for model in [
                build_lb_miqp(&inst, &RelaxConfig::default()).unwrap(),
                build_lb_miqcp(&inst, &RelaxConfig::default()).unwrap(),
            ] {
                let oracle = enumerate(&model);
                let sol = solve_mip(&model, &MipSettings::default()).unwrap();
                match oracle {
                    Some(best) => {
                        assert_eq!(sol.status, MipStatus::Optimal, "seed {seed}");
                        assert!(
                            (sol.objective - best).abs() <= 1e-6 * best.abs().max(1.0),
                            "seed {seed} {}: {} vs {best}",
                            model.kind.label(),
                            sol.objective
                        );
                    }
                    None => assert_eq!(sol.status, MipStatus::Infeasible, "seed {seed}"),
                }
            }
        }
    }

    #[test]
    fn four_aircraft_enumeration() {
        for seed in 100..104 {
            let inst = cluster(4, seed);
            let model = build_lb_miqp(&inst, &RelaxConfig::default()).unwrap();
            let best = enumerate(&model).unwrap();
            let sol = solve_mip(&model, &MipSettings::default()).unwrap();
            assert!((sol.objective - best).abs() <= 1e-6, "seed {seed}: {} vs {best}", sol.objective);
        }
    }

    #[test]
    fn bounds_never_drop_below_parent() {
        let inst = cluster(5, 7);
        let model = build_lb_miqp(&inst, &RelaxConfig::default()).unwrap();
        let settings = MipSettings {
            record_trace: true,
            ..MipSettings::default()
        };
        let sol = solve_mip(&model, &settings).unwrap();
        assert!(!sol.bound_trace.is_empty());
        for &(parent, node) in &sol.bound_trace {
            assert!(node >= parent - 1e-9, "{node} < {parent}");
        }
    }

    #[test]
    fn incumbent_is_integral_and_feasible() {
        let inst = cluster(5, 3);
        let model = build_lb_miqcp(&inst, &RelaxConfig::default()).unwrap();
        let sol = solve_mip(&model, &MipSettings::default()).unwrap();
        let x = sol.point.unwrap();
        assert!(model.max_violation(&x) <= 1e-8);
        let orders = sol.orders.unwrap();
        for (k, &z) in model.binaries.iter().enumerate() {
            assert_eq!(x[z], orders[k].z() as f64);
        }
        assert!(sol.gap >= -1e-9 && sol.gap <= 1e-6);
        assert!(sol.best_bound <= sol.objective + 1e-9);
    }

    #[test]
    fn locked_controls_are_infeasible() {
        let a = AircraftState::new(Vec2::new(-30.0, 0.0), 500.0, 0.0).unwrap();
        let b = AircraftState::new(Vec2::new(30.0, 0.0), 500.0, PI).unwrap();
        let bounds = ControlBounds::new(0.99, 1.0, -0.01, 0.01).unwrap();
        let inst = ProblemInstance::new(vec![a, b], 5.0, bounds).unwrap();
        let model = build_lb_miqp(&inst, &RelaxConfig::default()).unwrap();
        let sol = solve_mip(&model, &MipSettings::default()).unwrap();
        assert_eq!(sol.status, MipStatus::Infeasible);
        assert!(sol.point.is_none());
    }

    #[test]
    fn node_limit_truncates_without_losing_incumbent() {
        let inst = cluster(6, 11);
        let model = build_lb_miqp(&inst, &RelaxConfig::default()).unwrap();
        let full = solve_mip(&model, &MipSettings::default()).unwrap();
        let cut = solve_mip(
            &model,
            &MipSettings {
                node_limit: Some(1),
                ..MipSettings::default()
            },
        )
        .unwrap();
        assert!(cut.nodes <= 1);
        assert!(cut.best_bound <= full.objective + 1e-9);
        if cut.point.is_some() {
            assert!(cut.objective >= full.objective - 1e-9);
        }
    }

    #[test]
    fn rejects_local_model() {
        let inst = cluster(2, 1);
        let orders = vec![CrossingOrder::Lower; inst.pairs.len()];
        let model = crate::relax::build_ub_nlp(&inst, &RelaxConfig::default(), &orders).unwrap();
        assert!(solve_mip(&model, &MipSettings::default()).is_err());
    }

    #[test]
    fn gap_definition() {
        assert_eq!(relative_gap(2.0, 1.0), 0.5);
        assert_eq!(relative_gap(0.0, 0.0), 0.0);
        assert!((relative_gap(1e-12, 0.0) - 1e-2).abs() < 1e-12);
    }
}
