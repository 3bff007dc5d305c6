//! Local solver for the fixed-order problem, whose only nonconvex rows are
//! the reverse rings `dx² + dy² >= q̲²`.
//!
//! An augmented-Lagrangian outer loop prices the reverse rings. Each inner
//! solve replaces every ring by its tangent plane at the current point (the
//! plane overestimates the concave violation, so a nonpositive plane value
//! certifies the ring) and solves the resulting convex QP with the interior
//! point method. Once the point is close to feasible, a convex-concave pass
//! with hard tangent rows walks downhill while staying feasible.

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ipm::{solve_qcqp, IpmSettings};
use super::problem::{ConvexProblem, LinearRow, SubproblemSolution, SubproblemStatus};
use crate::error::{Error, Result};
use crate::relax::{dx_index, dy_index, ModelKind, RelaxedModel};

#[derive(Debug, Clone, Copy)]
pub struct LocalSettings {
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub outer_rounds: usize,
    pub inner_linearizations: usize,
    pub polish_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Accepted constraint violation of the returned point.
    pub feasibility_tol: f64,
}

impl Default for LocalSettings {
    fn default() -> Self {
        Self {
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            outer_rounds: 6,
            inner_linearizations: 5,
            polish_iterations: 50,
            restarts: 3,
            seed: 0x5eed,
            feasibility_tol: 1e-9,
        }
    }
}

/// Violation below which the hard-row pass is attempted.
const POLISH_ENTRY: f64 = 1e-4;

/// Local solve of a UB model from `start` (controls first, as in the model layout).
pub fn solve_local_nlp(
    model: &RelaxedModel,
    start: &[f64],
    settings: &LocalSettings,
) -> Result<SubproblemSolution> {
    if model.kind != ModelKind::UbNlp {
        return Err(Error::InvalidInstance(format!(
            "local solver expects UB-NLP, got {}",
            model.kind.label()
        )));
    }
    let n = model.n_vars();
    if start.len() < n {
        return Err(Error::InvalidState(format!(
            "start point has {} entries, model needs {n}",
            start.len()
        )));
    }
    let start = &start[..n];
    let ipm = IpmSettings::default();
    let tol = settings.feasibility_tol;

    if start.iter().all(|v| v.is_finite()) && model.max_violation(start) <= tol {
        let (x, kkt, its) = polish(model, start.to_vec(), settings, &ipm);
        let x = if model.problem.objective(&x) <= model.problem.objective(start) {
            x
        } else {
            start.to_vec()
        };
        return Ok(feasible_solution(model, x, kkt, its));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for attempt in 0..=settings.restarts {
        let x0 = if attempt == 0 && start.iter().all(|v| v.is_finite()) {
            start.to_vec()
        } else {
            random_start(model, &mut rng)
        };
        let Some(x) = augmented_lagrangian(model, x0, settings, &ipm) else {
            debug!("local attempt {attempt}: convex part infeasible");
            continue;
        };
        if reverse_violation(model, &x) > POLISH_ENTRY {
            debug!("local attempt {attempt}: stuck at ring violation {:.2e}", reverse_violation(model, &x));
            continue;
        }
        let (x, kkt, its) = polish(model, x, settings, &ipm);
        if model.max_violation(&x) <= tol {
            debug!("local attempt {attempt}: objective {:.9}", model.problem.objective(&x));
            return Ok(feasible_solution(model, x, kkt, its));
        }
        debug!("local attempt {attempt}: polish ended at violation {:.2e}", model.max_violation(&x));
    }
    Ok(SubproblemSolution {
        point: vec![f64::NAN; n],
        objective: f64::INFINITY,
        status: SubproblemStatus::Infeasible,
        kkt_residual: f64::INFINITY,
        iterations: 0,
    })
}

fn feasible_solution(model: &RelaxedModel, x: Vec<f64>, kkt: f64, iterations: usize) -> SubproblemSolution {
    SubproblemSolution {
        objective: model.problem.objective(&x),
        point: x,
        status: SubproblemStatus::Optimal,
        kkt_residual: kkt,
        iterations,
    }
}

fn reverse_violation(model: &RelaxedModel, x: &[f64]) -> f64 {
    model.reverse.iter().map(|r| r.violation(x)).fold(0.0, f64::max)
}

fn random_start(model: &RelaxedModel, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let b = model.bounds;
    let mut x = vec![0.0; model.n_vars()];
    for i in 0..model.n_aircraft {
        let q = rng.random_range(b.q_lo..=b.q_hi);
        let th = if b.th_lo < b.th_hi {
            rng.random_range(b.th_lo..=b.th_hi)
        } else {
            b.th_lo
        };
        x[dx_index(i)] = q * th.cos();
        x[dy_index(i)] = q * th.sin();
    }
    x
}

/// Tangent row of reverse ring `r` at `x0`: `rhs + |x0|² - 2 x0·x <= shift`,
/// with the listed extra terms appended.
fn tangent_row(model: &RelaxedModel, r: usize, x0: &[f64], shift: f64, extra: Vec<(usize, f64)>) -> LinearRow {
    let ring = &model.reverse[r];
    let mut terms: Vec<(usize, f64)> = ring.squares.iter().map(|&(k, h)| (k, -2.0 * h * x0[k])).collect();
    let sq: f64 = ring.squares.iter().map(|&(k, h)| h * x0[k] * x0[k]).sum();
    terms.extend(extra);
    LinearRow::new(terms, shift - ring.rhs - sq)
}

/// Returns `None` when an inner solve proves the convex rows infeasible.
fn augmented_lagrangian(
    model: &RelaxedModel,
    mut x: Vec<f64>,
    settings: &LocalSettings,
    ipm: &IpmSettings,
) -> Option<Vec<f64>> {
    let n = model.n_vars();
    let m = model.reverse.len();
    let mut lambda = vec![0.0; m];
    let mut rho = settings.initial_penalty;
    for round in 0..settings.outer_rounds {
        for _ in 0..settings.inner_linearizations {
            // variables: controls then one slack per ring
            let mut qp = extend(&model.problem, m);
            for r in 0..m {
                let t = n + r;
                qp.p[(t, t)] = rho;
                qp.lo[t] = 0.0;
                qp.linear
                    .push(tangent_row(model, r, &x, -lambda[r] / rho, vec![(t, -1.0)]));
            }
            let mut warm = x.clone();
            warm.extend((0..m).map(|r| (model.reverse[r].violation(&x) + lambda[r] / rho).max(0.0) + 1e-3));
            let sol = solve_qcqp(&qp, Some(&warm), ipm);
            if sol.status == SubproblemStatus::Infeasible {
                return None;
            }
            let next = sol.point[..n].to_vec();
            let step = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            x = next;
            if step < 1e-10 {
                break;
            }
        }
        let viol = reverse_violation(model, &x);
        debug!("AL round {round}: rho {rho:.0e} ring violation {viol:.2e}");
        if viol <= settings.feasibility_tol {
            break;
        }
        for (r, l) in lambda.iter_mut().enumerate() {
            *l = (*l + rho * model.reverse[r].violation(&x)).max(0.0);
        }
        rho *= settings.penalty_growth;
    }
    Some(x)
}

/// Convex-concave pass with hard tangent rows. Starting from a feasible
/// point every iterate stays feasible and the objective never increases.
fn polish(model: &RelaxedModel, mut x: Vec<f64>, settings: &LocalSettings, ipm: &IpmSettings) -> (Vec<f64>, f64, usize) {
    let m = model.reverse.len();
    let mut kkt = 0.0;
    let mut iterations = 0;
    let mut f = model.problem.objective(&x);
    for _ in 0..settings.polish_iterations {
        let mut qp = model.problem.clone();
        for r in 0..m {
            qp.linear.push(tangent_row(model, r, &x, 0.0, Vec::new()));
        }
        let sol = solve_qcqp(&qp, Some(&x), ipm);
        if sol.status == SubproblemStatus::Infeasible {
            break;
        }
        let candidate = sol.point;
        let fc = model.problem.objective(&candidate);
        let was_feasible = model.max_violation(&x) <= settings.feasibility_tol;
        let ok = model.max_violation(&candidate) <= settings.feasibility_tol;
        if was_feasible && (!ok || fc > f) {
            break;
        }
        let step = candidate.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        kkt = sol.kkt_residual;
        iterations += sol.iterations;
        x = candidate;
        let done = (f - fc).abs() <= 1e-13 * f.abs().max(1.0) && step < 1e-9;
        f = fc;
        if done && ok {
            break;
        }
    }
    (x, kkt, iterations)
}

/// Copy of `prob` with `extra` unbounded variables appended.
fn extend(prob: &ConvexProblem, extra: usize) -> ConvexProblem {
    let n = prob.n();
    let mut out = ConvexProblem::new(n + extra);
    out.p.view_mut((0, 0), (n, n)).copy_from(&prob.p);
    out.q[..n].copy_from_slice(&prob.q);
    out.c = prob.c;
    out.lo[..n].copy_from_slice(&prob.lo);
    out.hi[..n].copy_from_slice(&prob.hi);
    out.linear = prob.linear.clone();
    out.quad = prob.quad.clone();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{AircraftState, CrossingOrder, Vec2};
    use crate::model::{ControlBounds, ControlDecision, ProblemInstance};
    use crate::relax::{build_ub_nlp, RelaxConfig};
    use std::f64::consts::PI;

    fn head_on() -> ProblemInstance {
        let a = AircraftState::new(Vec2::new(-30.0, 0.0), 500.0, 0.0).unwrap();
        let b = AircraftState::new(Vec2::new(30.0, 0.0), 500.0, PI).unwrap();
        ProblemInstance::new(vec![a, b], 5.0, ControlBounds::default()).unwrap()
    }

    #[test]
    fn rejects_lower_bound_models() {
        let inst = head_on();
        let m = crate::relax::build_lb_miqp(&inst, &RelaxConfig::default()).unwrap();
        assert!(solve_local_nlp(&m, &[1.0, 0.0, 1.0, 0.0], &LocalSettings::default()).is_err());
    }

    #[test]
    fn feasible_start_never_gets_worse() {
        let inst = head_on();
        let m = build_ub_nlp(&inst, &RelaxConfig::default(), &[CrossingOrder::Lower]).unwrap();
        // a feasible but wasteful start: both aircraft turn hard
        let mut start = Vec::new();
        for c in [ControlDecision::from_polar(1.0, 0.5), ControlDecision::from_polar(1.0, 0.5)] {
            start.extend([c.dx, c.dy]);
        }
        assert!(m.max_violation(&start) <= 1e-9);
        let sol = solve_local_nlp(&m, &start, &LocalSettings::default()).unwrap();
        assert_eq!(sol.status, SubproblemStatus::Optimal);
        assert!(sol.objective <= m.problem.objective(&start) + 1e-12);
        assert!(m.max_violation(&sol.point) <= 1e-9);
    }

    #[test]
    fn infeasible_start_reaches_ring() {
        let inst = head_on();
        let m = build_ub_nlp(&inst, &RelaxConfig::default(), &[CrossingOrder::Upper]).unwrap();
        // inside the ring, violating the reverse rows
        let start = [0.5, 0.0, 0.5, 0.0];
        let sol = solve_local_nlp(&m, &start, &LocalSettings::default()).unwrap();
        assert_eq!(sol.status, SubproblemStatus::Optimal);
        assert!(m.max_violation(&sol.point) <= 1e-9);
    }

    /// Closest approach minus `d` for headings `h` turned by `th` and speeds scaled by `q`.
    fn margin(inst: &ProblemInstance, q: [f64; 2], th: [f64; 2]) -> f64 {
        let (a, b) = (&inst.states[0], &inst.states[1]);
        let va = (a.speed * q[0] * (a.heading + th[0]).cos(), a.speed * q[0] * (a.heading + th[0]).sin());
        let vb = (b.speed * q[1] * (b.heading + th[1]).cos(), b.speed * q[1] * (b.heading + th[1]).sin());
        let p = (a.position.x - b.position.x, a.position.y - b.position.y);
        let v = (va.0 - vb.0, va.1 - vb.1);
        let t = (-(p.0 * v.0 + p.1 * v.1) / (v.0 * v.0 + v.1 * v.1)).max(0.0);
        ((p.0 + t * v.0).hypot(p.1 + t * v.1)) - inst.d
    }

    /// Refining polar grid over `(q1, θ1, q2, θ2)`; returns the best cost and point.
    fn grid_search(inst: &ProblemInstance) -> (f64, [f64; 4]) {
        let b = inst.bounds;
        let lo = [b.q_lo, b.th_lo, b.q_lo, b.th_lo];
        let hi = [b.q_hi, b.th_hi, b.q_hi, b.th_hi];
        let mut center = [0.5 * (b.q_lo + b.q_hi), 0.0, 0.5 * (b.q_lo + b.q_hi), 0.0];
        let mut half = [0.5 * (b.q_hi - b.q_lo), b.th_hi, 0.5 * (b.q_hi - b.q_lo), b.th_hi];
        let steps = 16;
        let mut best = (f64::INFINITY, center);
        for _ in 0..12 {
            let axis = |k: usize, i: usize| {
                (center[k] - half[k] + 2.0 * half[k] * i as f64 / steps as f64).clamp(lo[k], hi[k])
            };
            for i0 in 0..=steps {
                for i1 in 0..=steps {
                    for i2 in 0..=steps {
                        for i3 in 0..=steps {
                            let x = [axis(0, i0), axis(1, i1), axis(2, i2), axis(3, i3)];
                            let cost = (x[0] * x[0] - 2.0 * x[0] * x[1].cos() + 1.0)
                                + (x[2] * x[2] - 2.0 * x[2] * x[3].cos() + 1.0);
                            if cost < best.0 && margin(inst, [x[0], x[2]], [x[1], x[3]]) >= 0.0 {
                                best = (cost, x);
                            }
                        }
                    }
                }
            }
            center = best.1;
            for h in half.iter_mut() {
                *h *= 0.4;
            }
        }
        best
    }

    #[test]
    fn head_on_matches_grid_oracle() {
        let inst = head_on();
        let (grid, _) = grid_search(&inst);
        assert!(grid.is_finite());
        // the pair is mirror symmetric, so both orders share the optimum
        for order in [CrossingOrder::Lower, CrossingOrder::Upper] {
            let m = build_ub_nlp(&inst, &RelaxConfig::default(), &[order]).unwrap();
            let sol = solve_local_nlp(&m, &[1.0, 0.0, 1.0, 0.0], &LocalSettings::default()).unwrap();
            assert_eq!(sol.status, SubproblemStatus::Optimal);
            let rel = (sol.objective - grid).abs() / grid;
            assert!(rel <= 1e-3, "{order:?}: local {} grid {grid}", sol.objective);
            let c = m.controls(&sol.point);
            assert!(margin(&inst, [c[0].q(), c[1].q()], [c[0].theta(), c[1].theta()]) >= -1e-6);
        }
    }
}
