//! Primal-dual interior point method for convex QCQPs.
//!
//! Every inequality `c_i(x) <= 0` gets a slack `s_i >= 0` and a multiplier
//! `λ_i >= 0`. Each iteration takes a Mehrotra predictor-corrector step on
//!
//! ```text
//! Px + q + Σ λ_i ∇c_i(x) = 0,   c(x) + s = 0,   s ∘ λ = σμ
//! ```
//!
//! after eliminating `s` and `λ`, which leaves the dense normal system
//! `(P + Σ λ_i ∇²c_i + Jᵀ diag(λ/s) J) Δx = r`. Fixed variables are
//! substituted out before the solve. Infeasibility is decided by a phase-1
//! problem `min t s.t. c_i(x) <= t` whenever the main iteration stalls.

use nalgebra::{DMatrix, DVector};

use super::problem::{ConvexProblem, SubproblemSolution, SubproblemStatus};

#[derive(Debug, Clone, Copy)]
pub struct IpmSettings {
    pub max_iter: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub tol_gap: f64,
    /// Phase-1 optimum above this certifies infeasibility.
    pub infeasibility_threshold: f64,
    /// An unconverged run still counts as optimal if its best iterate got this close.
    pub accept_kkt: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol_primal: 1e-10,
            tol_dual: 1e-9,
            tol_gap: 1e-12,
            infeasibility_threshold: 1e-7,
            accept_kkt: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
struct Row {
    terms: Vec<(usize, f64)>,
    squares: Vec<(usize, f64)>,
    rhs: f64,
    is_bound: bool,
}

impl Row {
    fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(k, a)| a * x[k]).sum::<f64>()
            + self.squares.iter().map(|&(k, h)| h * x[k] * x[k]).sum::<f64>()
            - self.rhs
    }

    fn gradient(&self, x: &[f64], out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.extend_from_slice(&self.terms);
        for &(k, h) in &self.squares {
            match out.iter_mut().find(|(i, _)| *i == k) {
                Some(entry) => entry.1 += 2.0 * h * x[k],
                None => out.push((k, 2.0 * h * x[k])),
            }
        }
    }
}

/// The problem restricted to its free variables.
struct Reduced {
    free: Vec<usize>,
    full_x: Vec<f64>,
    p: DMatrix<f64>,
    q: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    rows: Vec<Row>,
}

enum Reduction {
    Ok(Reduced),
    Infeasible,
}

fn reduce(prob: &ConvexProblem) -> Reduction {
    let n = prob.n();
    let mut full_x = vec![0.0; n];
    let mut is_fixed = vec![false; n];
    for k in 0..n {
        let (l, h) = (prob.lo[k], prob.hi[k]);
        if l > h + 1e-12 * (1.0 + l.abs()) {
            return Reduction::Infeasible;
        }
        if l.is_finite() && h - l <= 1e-13 * (1.0 + l.abs()) {
            is_fixed[k] = true;
            full_x[k] = 0.5 * (l + h);
        }
    }
    let free: Vec<usize> = (0..n).filter(|&k| !is_fixed[k]).collect();
    let mut index = vec![usize::MAX; n];
    for (r, &k) in free.iter().enumerate() {
        index[k] = r;
    }
    let nf = free.len();

    let mut p = DMatrix::zeros(nf, nf);
    let mut q = vec![0.0; nf];
    for (r, &k) in free.iter().enumerate() {
        q[r] = prob.q[k];
        for (c, &kk) in free.iter().enumerate() {
            p[(r, c)] = prob.p[(k, kk)];
        }
        for kk in 0..n {
            if is_fixed[kk] {
                q[r] += prob.p[(k, kk)] * full_x[kk];
            }
        }
    }

    let mut rows = Vec::with_capacity(prob.linear.len() + prob.quad.len() + 2 * nf);
    let mut push_row = |terms_in: &[(usize, f64)], squares_in: &[(usize, f64)], rhs_in: f64| -> bool {
        let mut rhs = rhs_in;
        let mut terms = Vec::with_capacity(terms_in.len());
        let mut squares = Vec::new();
        for &(k, a) in terms_in {
            if is_fixed[k] {
                rhs -= a * full_x[k];
            } else if a != 0.0 {
                terms.push((index[k], a));
            }
        }
        for &(k, h) in squares_in {
            if is_fixed[k] {
                rhs -= h * full_x[k] * full_x[k];
            } else if h != 0.0 {
                squares.push((index[k], h));
            }
        }
        let scale = terms
            .iter()
            .chain(&squares)
            .map(|&(_, a)| a.abs())
            .fold(0.0, f64::max);
        if scale == 0.0 {
            return rhs >= -1e-9;
        }
        for t in terms.iter_mut().chain(squares.iter_mut()) {
            t.1 /= scale;
        }
        rows.push(Row {
            terms,
            squares,
            rhs: rhs / scale,
            is_bound: false,
        });
        true
    };
    for r in &prob.linear {
        if !push_row(&r.terms, &[], r.rhs) {
            return Reduction::Infeasible;
        }
    }
    for r in &prob.quad {
        if !push_row(&r.terms, &r.squares, r.rhs) {
            return Reduction::Infeasible;
        }
    }
    let mut lo = vec![f64::NEG_INFINITY; nf];
    let mut hi = vec![f64::INFINITY; nf];
    for (r, &k) in free.iter().enumerate() {
        lo[r] = prob.lo[k];
        hi[r] = prob.hi[k];
        if prob.hi[k].is_finite() {
            rows.push(Row {
                terms: vec![(r, 1.0)],
                squares: Vec::new(),
                rhs: prob.hi[k],
                is_bound: true,
            });
        }
        if prob.lo[k].is_finite() {
            rows.push(Row {
                terms: vec![(r, -1.0)],
                squares: Vec::new(),
                rhs: -prob.lo[k],
                is_bound: true,
            });
        }
    }
    Reduction::Ok(Reduced {
        free,
        full_x,
        p,
        q,
        lo,
        hi,
        rows,
    })
}

fn default_start(lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(&l, &h)| match (l.is_finite(), h.is_finite()) {
            (true, true) => 0.5 * (l + h),
            (true, false) => l + 1.0,
            (false, true) => h - 1.0,
            (false, false) => 0.0,
        })
        .collect()
}

enum CoreOutcome {
    Converged,
    Stalled,
    IterationLimit,
}

struct CoreResult {
    x: Vec<f64>,
    outcome: CoreOutcome,
    iterations: usize,
    kkt: f64,
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, &d)| d < 0.0)
        .map(|(&a, &d)| -a / d)
        .fold(f64::INFINITY, f64::min)
}

/// Split of the variables into a dense block and a separable block.
///
/// A variable is separable when `P` does not couple it to any other
/// variable and no row mentions it together with another separable one, so
/// the separable block of the normal matrix is diagonal and can be
/// eliminated by a Schur complement.
struct Layout {
    /// `(true, j)` for the `j`-th separable variable, `(false, j)` for the `j`-th dense one.
    slot: Vec<(bool, usize)>,
    n_dense: usize,
    n_sep: usize,
}

impl Layout {
    fn new(p: &DMatrix<f64>, rows: &[Row]) -> Self {
        let n = p.nrows();
        let mut var_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, r) in rows.iter().enumerate() {
            for &(k, _) in r.terms.iter().chain(&r.squares) {
                var_rows[k].push(i);
            }
        }
        let mut row_has_sep = vec![false; rows.len()];
        let mut sep = vec![false; n];
        for k in (0..n).rev() {
            let decoupled = (0..n).all(|j| j == k || (p[(k, j)] == 0.0 && p[(j, k)] == 0.0));
            if decoupled && var_rows[k].iter().all(|&i| !row_has_sep[i]) {
                sep[k] = true;
                for &i in &var_rows[k] {
                    row_has_sep[i] = true;
                }
            }
        }
        let (mut nd, mut ns) = (0, 0);
        let slot = sep
            .iter()
            .map(|&is_sep| {
                if is_sep {
                    ns += 1;
                    (true, ns - 1)
                } else {
                    nd += 1;
                    (false, nd - 1)
                }
            })
            .collect();
        Self {
            slot,
            n_dense: nd,
            n_sep: ns,
        }
    }
}

/// Factored normal matrix `[[A, B], [Bᵀ, D]]` with `D` diagonal.
struct NormalSystem<'a> {
    layout: &'a Layout,
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    d: Vec<f64>,
    /// Column `j` of `B` as `(dense index, value)`.
    b: Vec<Vec<(usize, f64)>>,
}

impl<'a> NormalSystem<'a> {
    fn factor(
        p: &DMatrix<f64>,
        rows: &[Row],
        grads: &[Vec<(usize, f64)>],
        lam: &[f64],
        s: &[f64],
        layout: &'a Layout,
    ) -> Option<Self> {
        let n = p.nrows();
        let nd = layout.n_dense;
        let mut a = DMatrix::<f64>::zeros(nd, nd);
        let mut d = vec![0.0; layout.n_sep];
        let mut b: Vec<Vec<(usize, f64)>> = vec![Vec::new(); layout.n_sep];
        for i in 0..n {
            match layout.slot[i] {
                (true, si) => d[si] += p[(i, i)],
                (false, di) => {
                    for j in 0..n {
                        if let (false, dj) = layout.slot[j] {
                            a[(di, dj)] += p[(i, j)];
                        }
                    }
                }
            }
        }
        let mut dense_part: Vec<(usize, f64)> = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for &(k, h) in &row.squares {
                match layout.slot[k] {
                    (true, si) => d[si] += 2.0 * h * lam[i],
                    (false, di) => a[(di, di)] += 2.0 * h * lam[i],
                }
            }
            let w = lam[i] / s[i];
            dense_part.clear();
            let mut sep_part = None;
            for &(k, g) in &grads[i] {
                match layout.slot[k] {
                    (true, si) => sep_part = Some((si, g)),
                    (false, di) => dense_part.push((di, g)),
                }
            }
            for &(da, ga) in &dense_part {
                for &(db, gb) in &dense_part {
                    a[(da, db)] += w * ga * gb;
                }
            }
            if let Some((si, gs)) = sep_part {
                d[si] += w * gs * gs;
                let col = &mut b[si];
                for &(da, ga) in &dense_part {
                    match col.iter_mut().find(|(r, _)| *r == da) {
                        Some(e) => e.1 += w * ga * gs,
                        None => col.push((da, w * ga * gs)),
                    }
                }
            }
        }
        let scale = (0..nd)
            .map(|k| a[(k, k)].abs())
            .chain(d.iter().map(|v| v.abs()))
            .fold(1.0, f64::max);
        for v in d.iter_mut() {
            *v = v.max(1e-14 * scale);
        }
        // Schur complement A - B D⁻¹ Bᵀ
        for (si, col) in b.iter().enumerate() {
            let inv = 1.0 / d[si];
            for &(ra, va) in col {
                for &(rb, vb) in col {
                    a[(ra, rb)] -= va * vb * inv;
                }
            }
        }
        if nd == 0 {
            return Some(Self {
                layout,
                chol: None,
                d,
                b,
            });
        }
        let mut reg = 1e-14 * scale;
        loop {
            let mut trial = a.clone();
            for k in 0..nd {
                trial[(k, k)] += reg;
            }
            if let Some(c) = trial.cholesky() {
                return Some(Self {
                    layout,
                    chol: Some(c),
                    d,
                    b,
                });
            }
            reg *= 100.0;
            if reg > 1e-4 * scale {
                return None;
            }
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = rhs.len();
        let mut r1 = DVector::zeros(self.layout.n_dense);
        let mut r2 = vec![0.0; self.layout.n_sep];
        for k in 0..n {
            match self.layout.slot[k] {
                (true, si) => r2[si] = rhs[k],
                (false, di) => r1[di] = rhs[k],
            }
        }
        for (si, col) in self.b.iter().enumerate() {
            let f = r2[si] / self.d[si];
            for &(ra, va) in col {
                r1[ra] -= va * f;
            }
        }
        let x1 = match &self.chol {
            Some(c) => c.solve(&r1),
            None => r1,
        };
        let mut out = DVector::zeros(n);
        for k in 0..n {
            out[k] = match self.layout.slot[k] {
                (false, di) => x1[di],
                (true, si) => {
                    let bx: f64 = self.b[si].iter().map(|&(ra, va)| va * x1[ra]).sum();
                    (r2[si] - bx) / self.d[si]
                }
            };
        }
        out
    }
}

fn run_core(
    p: &DMatrix<f64>,
    q: &[f64],
    rows: &[Row],
    x0: Vec<f64>,
    settings: &IpmSettings,
) -> CoreResult {
    let n = q.len();
    let m = rows.len();
    let mut x = x0;
    let q_scale = 1.0 + q.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));

    if m == 0 {
        // unconstrained: one Newton step on a convex quadratic
        let mut mat = p.clone();
        for k in 0..n {
            mat[(k, k)] += 1e-12;
        }
        let rhs = DVector::from_iterator(n, q.iter().map(|v| -v));
        let sol = mat.cholesky().map(|c| c.solve(&rhs));
        return match sol {
            Some(s) => CoreResult {
                x: s.iter().copied().collect(),
                outcome: CoreOutcome::Converged,
                iterations: 1,
                kkt: 0.0,
            },
            None => CoreResult {
                x,
                outcome: CoreOutcome::Stalled,
                iterations: 1,
                kkt: f64::INFINITY,
            },
        };
    }

    let layout = Layout::new(p, rows);
    let mut s: Vec<f64> = rows.iter().map(|r| (-r.value(&x)).max(1.0)).collect();
    let mut lam = vec![1.0; m];
    let mut grads: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let mut cval = vec![0.0; m];
    let mut rp = vec![0.0; m];
    let mut rd = vec![0.0; n];
    let mut history: Vec<f64> = Vec::new();
    let mut kkt = f64::INFINITY;
    let mut small_steps = 0;
    let mut best: (f64, Vec<f64>) = (f64::INFINITY, x.clone());

    for it in 0..settings.max_iter {
        for (i, row) in rows.iter().enumerate() {
            cval[i] = row.value(&x);
            row.gradient(&x, &mut grads[i]);
            rp[i] = cval[i] + s[i];
        }
        for k in 0..n {
            rd[k] = q[k] + (0..n).map(|j| p[(k, j)] * x[j]).sum::<f64>();
        }
        for (i, g) in grads.iter().enumerate() {
            for &(k, a) in g {
                rd[k] += lam[i] * a;
            }
        }
        let mu = s.iter().zip(&lam).map(|(a, b)| a * b).sum::<f64>() / m as f64;
        let res_p = rp.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        let res_d = rd.iter().fold(0.0_f64, |a, &b| a.max(b.abs())) / q_scale;
        kkt = res_p.max(res_d).max(mu);
        if res_p <= settings.tol_primal && res_d <= settings.tol_dual && mu <= settings.tol_gap {
            return CoreResult {
                x,
                outcome: CoreOutcome::Converged,
                iterations: it,
                kkt,
            };
        }
        log::trace!("it {it:3} res_p {res_p:.2e} res_d {res_d:.2e} mu {mu:.2e}");
        if kkt < best.0 {
            best = (kkt, x.clone());
        }
        history.push(res_p);
        let lam_max = lam.iter().fold(0.0_f64, |a, &b| a.max(b));
        if it >= 25 && res_p > 1e-6 {
            let earlier = history[history.len() - 10];
            if res_p > 0.5 * earlier || lam_max > 1e10 {
                return settle(x, CoreOutcome::Stalled, it, kkt, best, settings);
            }
        }

        // normal matrix, with the separable variables eliminated
        let Some(normal) = NormalSystem::factor(p, rows, &grads, &lam, &s, &layout) else {
            return settle(x, CoreOutcome::Stalled, it, kkt, best, settings);
        };

        let solve_dir = |rc: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            let mut rhs = DVector::from_iterator(n, rd.iter().map(|v| -v));
            for (i, g) in grads.iter().enumerate() {
                let coef = lam[i] / s[i] * rp[i] - rc[i] / s[i];
                for &(k, a) in g {
                    rhs[k] -= a * coef;
                }
            }
            let dx = normal.solve(&rhs);
            let mut dlam = vec![0.0; m];
            let mut ds = vec![0.0; m];
            for (i, g) in grads.iter().enumerate() {
                let gdx: f64 = g.iter().map(|&(k, a)| a * dx[k]).sum();
                dlam[i] = lam[i] / s[i] * (gdx + rp[i]) - rc[i] / s[i];
                ds[i] = -(rc[i] + s[i] * dlam[i]) / lam[i];
            }
            (dx.iter().copied().collect(), ds, dlam)
        };

        // predictor
        let rc_aff: Vec<f64> = s.iter().zip(&lam).map(|(a, b)| a * b).collect();
        let (_, ds_a, dl_a) = solve_dir(&rc_aff);
        let a_aff = max_step(&s, &ds_a).min(max_step(&lam, &dl_a)).min(1.0);
        let mu_aff = s
            .iter()
            .zip(&ds_a)
            .zip(lam.iter().zip(&dl_a))
            .map(|((si, dsi), (li, dli))| (si + a_aff * dsi) * (li + a_aff * dli))
            .sum::<f64>()
            / m as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let rc: Vec<f64> = (0..m)
            .map(|i| s[i] * lam[i] + ds_a[i] * dl_a[i] - (sigma * mu).max(0.1 * settings.tol_gap))
            .collect();
        let (dx, ds, dl) = solve_dir(&rc);
        let tau = (1.0 - mu).clamp(0.99, 0.9999);
        let alpha = (tau * max_step(&s, &ds).min(max_step(&lam, &dl))).min(1.0);
        for k in 0..n {
            x[k] += alpha * dx[k];
        }
        for i in 0..m {
            s[i] = (s[i] + alpha * ds[i]).max(1e-300);
            lam[i] = (lam[i] + alpha * dl[i]).max(1e-300);
        }
        if alpha < 1e-8 {
            small_steps += 1;
            if small_steps >= 5 {
                return settle(x, CoreOutcome::Stalled, it, kkt, best, settings);
            }
        } else {
            small_steps = 0;
        }
    }
    settle(x, CoreOutcome::IterationLimit, settings.max_iter, kkt, best, settings)
}

/// Falls back to the best iterate seen when the run did not converge.
fn settle(
    x: Vec<f64>,
    outcome: CoreOutcome,
    iterations: usize,
    kkt: f64,
    best: (f64, Vec<f64>),
    settings: &IpmSettings,
) -> CoreResult {
    if best.0 <= settings.accept_kkt {
        return CoreResult {
            x: best.1,
            outcome: CoreOutcome::Converged,
            iterations,
            kkt: best.0,
        };
    }
    CoreResult {
        x,
        outcome,
        iterations,
        kkt,
    }
}

/// Smallest achievable uniform violation of the general rows, with bounds kept hard.
fn phase_one(red: &Reduced, settings: &IpmSettings) -> f64 {
    let n = red.free.len();
    let t = n;
    let mut rows = Vec::with_capacity(red.rows.len() + 1);
    for r in &red.rows {
        let mut r2 = r.clone();
        if !r.is_bound {
            r2.terms.push((t, -1.0));
        }
        rows.push(r2);
    }
    rows.push(Row {
        terms: vec![(t, -1.0)],
        squares: Vec::new(),
        rhs: 1.0,
        is_bound: true,
    });
    let mut x0 = default_start(&red.lo, &red.hi);
    let worst = red
        .rows
        .iter()
        .filter(|r| !r.is_bound)
        .map(|r| r.value(&x0))
        .fold(-1.0_f64, f64::max);
    x0.push(worst + 1.0);
    let mut q = vec![0.0; n + 1];
    q[t] = 1.0;
    let mut p = DMatrix::zeros(n + 1, n + 1);
    for k in 0..=n {
        p[(k, k)] = 1e-10;
    }
    let res = run_core(&p, &q, &rows, x0, settings);
    red.rows
        .iter()
        .filter(|r| !r.is_bound)
        .map(|r| r.value(&res.x[..n]))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solves a convex QCQP, optionally warm-started from a full-length point.
pub fn solve_qcqp(
    prob: &ConvexProblem,
    warm_start: Option<&[f64]>,
    settings: &IpmSettings,
) -> SubproblemSolution {
    let red = match reduce(prob) {
        Reduction::Ok(r) => r,
        Reduction::Infeasible => return infeasible(prob),
    };
    let x0 = match warm_start {
        Some(w) => {
            let mid = default_start(&red.lo, &red.hi);
            red.free
                .iter()
                .enumerate()
                .map(|(r, &k)| {
                    let v = w[k];
                    let (l, h) = (red.lo[r], red.hi[r]);
                    if l.is_finite() && h.is_finite() {
                        let pad = 1e-3 * (h - l);
                        v.clamp(l + pad, h - pad)
                    } else if v.is_finite() {
                        v
                    } else {
                        mid[r]
                    }
                })
                .collect()
        }
        None => default_start(&red.lo, &red.hi),
    };
    let res = run_core(&red.p, &red.q, &red.rows, x0, settings);
    let mut full = red.full_x.clone();
    for (r, &k) in red.free.iter().enumerate() {
        full[k] = res.x[r];
    }
    match res.outcome {
        CoreOutcome::Converged => SubproblemSolution {
            objective: prob.objective(&full),
            point: full,
            status: SubproblemStatus::Optimal,
            kkt_residual: res.kkt,
            iterations: res.iterations,
        },
        CoreOutcome::Stalled | CoreOutcome::IterationLimit => {
            let violation = phase_one(&red, settings);
            if violation > settings.infeasibility_threshold {
                infeasible(prob)
            } else {
                SubproblemSolution {
                    objective: prob.objective(&full),
                    point: full,
                    status: SubproblemStatus::IterationLimit,
                    kkt_residual: res.kkt,
                    iterations: res.iterations,
                }
            }
        }
    }
}

fn infeasible(prob: &ConvexProblem) -> SubproblemSolution {
    SubproblemSolution {
        point: vec![f64::NAN; prob.n()],
        objective: f64::INFINITY,
        status: SubproblemStatus::Infeasible,
        kkt_residual: f64::INFINITY,
        iterations: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solve::problem::{LinearRow, QuadRow};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn settings() -> IpmSettings {
        IpmSettings::default()
    }

    #[test]
    fn clipped_parabola() {
        // (x - 1)² with x <= 0.5
        let mut prob = ConvexProblem::new(1);
        prob.p[(0, 0)] = 2.0;
        prob.q[0] = -2.0;
        prob.c = 1.0;
        prob.linear.push(LinearRow::new(vec![(0, 1.0)], 0.5));
        let sol = solve_qcqp(&prob, None, &settings());
        assert_eq!(sol.status, SubproblemStatus::Optimal);
        assert!((sol.point[0] - 0.5).abs() < 1e-8, "{:?}", sol.point);
        assert!((sol.objective - 0.25).abs() < 1e-8);
        assert!(sol.kkt_residual <= 1e-8);
    }

    #[test]
    fn disc_projection() {
        // nearest point of the unit disc to (2, 2)
        let mut prob = ConvexProblem::new(2);
        prob.p[(0, 0)] = 2.0;
        prob.p[(1, 1)] = 2.0;
        prob.q = vec![-4.0, -4.0];
        prob.c = 8.0;
        prob.quad.push(QuadRow {
            squares: vec![(0, 1.0), (1, 1.0)],
            terms: Vec::new(),
            rhs: 1.0,
        });
        let sol = solve_qcqp(&prob, None, &settings());
        assert_eq!(sol.status, SubproblemStatus::Optimal);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((sol.point[0] - r).abs() < 1e-7 && (sol.point[1] - r).abs() < 1e-7);
    }

    #[test]
    fn fixed_variables_are_kept() {
        let mut prob = ConvexProblem::new(2);
        prob.p[(0, 0)] = 2.0;
        prob.p[(1, 1)] = 2.0;
        prob.lo[1] = 3.0;
        prob.hi[1] = 3.0;
        prob.linear.push(LinearRow::new(vec![(0, -1.0), (1, -1.0)], -4.0));
        let sol = solve_qcqp(&prob, None, &settings());
        assert_eq!(sol.status, SubproblemStatus::Optimal);
        assert_eq!(sol.point[1], 3.0);
        assert!((sol.point[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut prob = ConvexProblem::new(2);
        prob.p[(0, 0)] = 1.0;
        prob.p[(1, 1)] = 1.0;
        prob.linear.push(LinearRow::new(vec![(0, 1.0), (1, 1.0)], 0.0));
        prob.linear.push(LinearRow::new(vec![(0, -1.0), (1, -1.0)], -1.0));
        let sol = solve_qcqp(&prob, None, &settings());
        assert_eq!(sol.status, SubproblemStatus::Infeasible);
    }

    #[test]
    fn ring_outside_box_is_infeasible() {
        let mut prob = ConvexProblem::new(2);
        prob.p[(0, 0)] = 1.0;
        prob.p[(1, 1)] = 1.0;
        prob.lo = vec![2.0, 2.0];
        prob.hi = vec![3.0, 3.0];
        prob.quad.push(QuadRow {
            squares: vec![(0, 1.0), (1, 1.0)],
            terms: Vec::new(),
            rhs: 1.0,
        });
        let sol = solve_qcqp(&prob, None, &settings());
        assert_eq!(sol.status, SubproblemStatus::Infeasible);
    }

    /// Minimizes `½xᵀPx + qᵀx` s.t. `Ax <= b` by trying every active set.
    fn active_set_oracle(p: &DMatrix<f64>, q: &[f64], a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = q.len();
        let m = b.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0u32..(1 << m) {
            let active: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
            let k = active.len();
            if k > n {
                continue;
            }
            let mut kkt = DMatrix::<f64>::zeros(n + k, n + k);
            let mut rhs = DVector::<f64>::zeros(n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(p);
            for j in 0..n {
                rhs[j] = -q[j];
            }
            for (r, &i) in active.iter().enumerate() {
                for j in 0..n {
                    kkt[(n + r, j)] = a[i][j];
                    kkt[(j, n + r)] = a[i][j];
                }
                rhs[n + r] = b[i];
            }
            let Some(sol) = kkt.lu().solve(&rhs) else { continue };
            let x: Vec<f64> = (0..n).map(|j| sol[j]).collect();
            let primal_ok = (0..m).all(|i| a[i].iter().zip(&x).map(|(u, v)| u * v).sum::<f64>() <= b[i] + 1e-9);
            let dual_ok = (0..k).all(|r| sol[n + r] >= -1e-9);
            if primal_ok && dual_ok {
                let mut f = 0.0;
                for i in 0..n {
                    f += q[i] * x[i];
                    for j in 0..n {
                        f += 0.5 * x[i] * p[(i, j)] * x[j];
                    }
                }
                if best.as_ref().is_none_or(|(g, _)| f < *g) {
                    best = Some((f, x));
                }
            }
        }
        best.expect("oracle found no KKT point").1
    }

    #[test]
    fn random_qps_match_active_set_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..40 {
            let n = rng.random_range(1..=10);
            let m = rng.random_range(1..=8);
            let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let p = g.transpose() * &g + DMatrix::<f64>::identity(n, n) * 0.1;
            let q: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            // feasible by construction at x0
            let b: Vec<f64> = a
                .iter()
                .map(|row| row.iter().zip(&x0).map(|(u, v)| u * v).sum::<f64>() + rng.random_range(0.0..0.5))
                .collect();
            let mut prob = ConvexProblem::new(n);
            prob.p = p.clone();
            prob.q = q.clone();
            for (row, &rhs) in a.iter().zip(&b) {
                prob.linear.push(LinearRow::new(row.iter().copied().enumerate().collect(), rhs));
            }
            let sol = solve_qcqp(&prob, None, &settings());
            assert_eq!(sol.status, SubproblemStatus::Optimal, "trial {trial}");
            let oracle = active_set_oracle(&p, &q, &a, &b);
            for (u, v) in sol.point.iter().zip(&oracle) {
                assert!((u - v).abs() < 1e-7, "trial {trial}: {:?} vs {:?}", sol.point, oracle);
            }
        }
    }

    #[test]
    fn warm_start_reaches_same_point() {
        let mut prob = ConvexProblem::new(2);
        prob.p[(0, 0)] = 2.0;
        prob.p[(1, 1)] = 4.0;
        prob.q = vec![-2.0, 1.0];
        prob.lo = vec![-1.0, -1.0];
        prob.hi = vec![0.25, 1.0];
        let cold = solve_qcqp(&prob, None, &settings());
        let warm = solve_qcqp(&prob, Some(&[5.0, -7.0]), &settings());
        assert_eq!(cold.status, SubproblemStatus::Optimal);
        assert_eq!(warm.status, SubproblemStatus::Optimal);
        for (u, v) in cold.point.iter().zip(&warm.point) {
            assert!((u - v).abs() < 1e-8);
        }
        assert!((cold.point[0] - 0.25).abs() < 1e-8 && (cold.point[1] + 0.25).abs() < 1e-8);
    }
}
