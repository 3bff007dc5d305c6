//! Complex-number control model.
//!
//! Each aircraft's control is `V = q e^{iθ} = dx + i dy`. The controlled
//! velocity is the complex product `V · V̂` with the initial velocity `V̂`, so
//! every relative velocity, and therefore every separation half-plane, is
//! linear in the controls.

use std::f64::consts::FRAC_PI_2;
use std::f64::consts::FRAC_PI_6;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{AircraftState, CrossingOrder, PairGeometry, Vec2};

/// Safety factor applied to every interval-arithmetic big-M.
pub const BIG_M_SAFETY: f64 = 1.01;

/// Real and imaginary parts of an aircraft's complex control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlDecision {
    pub dx: f64,
    pub dy: f64,
}

impl ControlDecision {
    pub const IDENTITY: ControlDecision = ControlDecision { dx: 1.0, dy: 0.0 };

    pub fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    pub fn from_polar(q: f64, theta: f64) -> Self {
        Self {
            dx: q * theta.cos(),
            dy: q * theta.sin(),
        }
    }

    /// Speed variation rate `|V|`.
    pub fn q(&self) -> f64 {
        self.dx.hypot(self.dy)
    }

    /// Heading deviation `arg V`.
    pub fn theta(&self) -> f64 {
        self.dy.atan2(self.dx)
    }

    pub fn deviation(&self) -> f64 {
        self.dy * self.dy + (1.0 - self.dx) * (1.0 - self.dx)
    }
}

/// Bounds on speed variation rate and heading deviation shared by all aircraft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub q_lo: f64,
    pub q_hi: f64,
    pub th_lo: f64,
    pub th_hi: f64,
}

impl Default for ControlBounds {
    fn default() -> Self {
        Self {
            q_lo: 0.94,
            q_hi: 1.03,
            th_lo: -FRAC_PI_6,
            th_hi: FRAC_PI_6,
        }
    }
}

impl ControlBounds {
    pub fn new(q_lo: f64, q_hi: f64, th_lo: f64, th_hi: f64) -> Result<Self> {
        if !(q_lo > 0.0 && q_lo < q_hi && q_hi.is_finite()) {
            return Err(Error::InvalidBounds(format!(
                "need 0 < q_lo < q_hi, got [{q_lo}, {q_hi}]"
            )));
        }
        if !(th_lo > -FRAC_PI_2 && th_lo < th_hi && th_hi < FRAC_PI_2) {
            return Err(Error::InvalidBounds(format!(
                "need -π/2 < th_lo < th_hi < π/2, got [{th_lo}, {th_hi}]"
            )));
        }
        Ok(Self {
            q_lo,
            q_hi,
            th_lo,
            th_hi,
        })
    }

    /// `cos(max{|θ̲|, |θ̄|})`.
    pub fn cos_max_heading(&self) -> f64 {
        self.th_lo.abs().max(self.th_hi.abs()).cos()
    }

    pub fn contains_q(&self, q: f64, eps: f64) -> bool {
        q >= self.q_lo - eps && q <= self.q_hi + eps
    }

    pub fn contains_theta(&self, theta: f64, eps: f64) -> bool {
        theta >= self.th_lo - eps && theta <= self.th_hi + eps
    }
}

/// Box on `(dx, dy)` implied by the polar bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBox {
    pub dx_lo: f64,
    pub dx_hi: f64,
    pub dy_lo: f64,
    pub dy_hi: f64,
}

pub fn box_bounds(bounds: &ControlBounds) -> ControlBox {
    ControlBox {
        dx_lo: bounds.q_lo * bounds.cos_max_heading(),
        dx_hi: bounds.q_hi,
        dy_lo: bounds.q_hi * bounds.th_lo.sin(),
        dy_hi: bounds.q_hi * bounds.th_hi.sin(),
    }
}

/// `Σ dy² + (1 - dx)²`.
pub fn deviation_cost(controls: &[ControlDecision]) -> f64 {
    controls.iter().map(ControlDecision::deviation).sum()
}

/// Linear inequality `a_dx·dx + a_dy·dy <= rhs` on one aircraft's control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlHalfPlane {
    pub a_dx: f64,
    pub a_dy: f64,
    pub rhs: f64,
}

impl ControlHalfPlane {
    pub fn value(&self, c: ControlDecision) -> f64 {
        self.a_dx * c.dx + self.a_dy * c.dy - self.rhs
    }

    pub fn contains(&self, c: ControlDecision, tol: f64) -> bool {
        self.value(c) <= tol
    }
}

/// `dx tan θ̲ <= dy <= dx tan θ̄` as two half-planes.
pub fn heading_cone_constraints(bounds: &ControlBounds) -> [ControlHalfPlane; 2] {
    [
        ControlHalfPlane {
            a_dx: bounds.th_lo.tan(),
            a_dy: -1.0,
            rhs: 0.0,
        },
        ControlHalfPlane {
            a_dx: -bounds.th_hi.tan(),
            a_dy: 1.0,
            rhs: 0.0,
        },
    ]
}

/// `q̲² <= dx² + dy² <= q̄²`; the lower side is nonconvex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedRing {
    pub lo_sq: f64,
    pub hi_sq: f64,
}

impl SpeedRing {
    /// Positive when the lower side is violated.
    pub fn lower_violation(&self, c: ControlDecision) -> f64 {
        self.lo_sq - (c.dx * c.dx + c.dy * c.dy)
    }

    /// Positive when the upper side is violated.
    pub fn upper_violation(&self, c: ControlDecision) -> f64 {
        c.dx * c.dx + c.dy * c.dy - self.hi_sq
    }

    pub fn contains(&self, c: ControlDecision, tol: f64) -> bool {
        self.lower_violation(c) <= tol && self.upper_violation(c) <= tol
    }
}

pub fn speed_ring_constraints(bounds: &ControlBounds) -> SpeedRing {
    SpeedRing {
        lo_sq: bounds.q_lo * bounds.q_lo,
        hi_sq: bounds.q_hi * bounds.q_hi,
    }
}

/// A conflict resolution problem: aircraft, separation norm and control bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub states: Vec<AircraftState>,
    pub d: f64,
    pub bounds: ControlBounds,
    pub pairs: Vec<(usize, usize)>,
}

impl ProblemInstance {
    pub fn new(states: Vec<AircraftState>, d: f64, bounds: ControlBounds) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidInstance(format!("separation norm must be positive, got {d}")));
        }
        let n = states.len();
        let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let dist = (states[i].position - states[j].position).norm();
                if dist < d {
                    return Err(Error::InitialLoss { i, j, distance: dist, d });
                }
                pairs.push((i, j));
            }
        }
        Ok(Self {
            states,
            d,
            bounds,
            pairs,
        })
    }

    pub fn n_aircraft(&self) -> usize {
        self.states.len()
    }

    /// Reference speed used to put relative velocities on a unit scale.
    pub fn speed_scale(&self) -> f64 {
        self.states.iter().map(|s| s.speed).fold(1e-12, f64::max)
    }

    pub fn relative_velocity(&self, i: usize, j: usize, controls: &[ControlDecision]) -> Vec2 {
        crate::geom::relative_velocity(&self.states[i], &self.states[j], controls[i], controls[j])
    }
}

/// Coefficients of a linear form in `(dx_i, dy_i, dx_j, dy_j)`.
pub type PairForm = [f64; 4];

fn form_value(form: &PairForm, ci: ControlDecision, cj: ControlDecision) -> f64 {
    form[0] * ci.dx + form[1] * ci.dy + form[2] * cj.dx + form[3] * cj.dy
}

/// Linear form of `w × v` where `v` is the unit-scaled relative velocity.
fn cross_form(w: Vec2, vi_hat: Vec2, vj_hat: Vec2) -> PairForm {
    // v = (a_i dx_i - b_i dy_i - a_j dx_j + b_j dy_j,
    //      b_i dx_i + a_i dy_i - b_j dx_j - a_j dy_j)
    let (ai, bi) = (vi_hat.x, vi_hat.y);
    let (aj, bj) = (vj_hat.x, vj_hat.y);
    [
        w.x * bi - w.y * ai,
        w.x * ai + w.y * bi,
        -(w.x * bj - w.y * aj),
        -(w.x * aj + w.y * bj),
    ]
}

/// Linear form of `w · v` where `v` is the unit-scaled relative velocity.
fn dot_form(w: Vec2, vi_hat: Vec2, vj_hat: Vec2) -> PairForm {
    let (ai, bi) = (vi_hat.x, vi_hat.y);
    let (aj, bj) = (vj_hat.x, vj_hat.y);
    [
        w.x * ai + w.y * bi,
        -w.x * bi + w.y * ai,
        -(w.x * aj + w.y * bj),
        w.x * bj - w.y * aj,
    ]
}

/// Exact range of a linear form over the product of two control boxes.
fn form_range(form: &PairForm, cb: &ControlBox) -> (f64, f64) {
    let ranges = [
        (cb.dx_lo, cb.dx_hi),
        (cb.dy_lo, cb.dy_hi),
        (cb.dx_lo, cb.dx_hi),
        (cb.dy_lo, cb.dy_hi),
    ];
    form.iter().zip(ranges).fold((0.0, 0.0), |(lo, hi), (&c, (a, b))| {
        let (u, w) = (c * a, c * b);
        (lo + u.min(w), hi + u.max(w))
    })
}

/// The four indicator constraints of one pair in big-M form.
///
/// Forms are unit-scaled: `N` by `|p̂| v_ref`, the edges by `|p̂|² v_ref`.
/// With `z ∈ {0, 1}` the rows read
///
/// ```text
///  N(x) + M_N z <= M_N        -N(x) - M_N z <= 0
///  L(x) + M_L z <= M_L        -U(x) - M_U z <= 0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisjunctiveConstraintPair {
    pub i: usize,
    pub j: usize,
    pub geometry: PairGeometry,
    pub n_form: PairForm,
    pub l_form: PairForm,
    pub u_form: PairForm,
    pub big_m_n: f64,
    pub big_m_l: f64,
    pub big_m_u: f64,
    /// Unit-scaled `g` under identity controls; negative for initial conflicts.
    pub severity: f64,
}

/// One row `form·x + z_coeff·z <= rhs` of a disjunctive pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRow {
    pub form: PairForm,
    pub z_coeff: f64,
    pub rhs: f64,
}

impl DisjunctiveConstraintPair {
    pub fn big_m_rows(&self) -> [PairRow; 4] {
        let neg = |f: &PairForm| [-f[0], -f[1], -f[2], -f[3]];
        [
            PairRow {
                form: self.n_form,
                z_coeff: self.big_m_n,
                rhs: self.big_m_n,
            },
            PairRow {
                form: neg(&self.n_form),
                z_coeff: -self.big_m_n,
                rhs: 0.0,
            },
            PairRow {
                form: self.l_form,
                z_coeff: self.big_m_l,
                rhs: self.big_m_l,
            },
            PairRow {
                form: neg(&self.u_form),
                z_coeff: -self.big_m_u,
                rhs: 0.0,
            },
        ]
    }

    /// The two rows enforced by a fixed crossing order, without `z`.
    pub fn branch_rows(&self, order: CrossingOrder) -> [PairRow; 2] {
        let neg = |f: &PairForm| [-f[0], -f[1], -f[2], -f[3]];
        match order {
            CrossingOrder::Lower => [
                PairRow {
                    form: self.n_form,
                    z_coeff: 0.0,
                    rhs: 0.0,
                },
                PairRow {
                    form: self.l_form,
                    z_coeff: 0.0,
                    rhs: 0.0,
                },
            ],
            CrossingOrder::Upper => [
                PairRow {
                    form: neg(&self.n_form),
                    z_coeff: 0.0,
                    rhs: 0.0,
                },
                PairRow {
                    form: neg(&self.u_form),
                    z_coeff: 0.0,
                    rhs: 0.0,
                },
            ],
        }
    }

    /// Largest violation of the big-M rows at `(ci, cj, z)`.
    pub fn max_violation(&self, ci: ControlDecision, cj: ControlDecision, z: f64) -> f64 {
        self.big_m_rows()
            .iter()
            .map(|r| form_value(&r.form, ci, cj) + r.z_coeff * z - r.rhs)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn n_value(&self, ci: ControlDecision, cj: ControlDecision) -> f64 {
        form_value(&self.n_form, ci, cj)
    }

    pub fn l_value(&self, ci: ControlDecision, cj: ControlDecision) -> f64 {
        form_value(&self.l_form, ci, cj)
    }

    pub fn u_value(&self, ci: ControlDecision, cj: ControlDecision) -> f64 {
        form_value(&self.u_form, ci, cj)
    }

    /// Crossing order whose wedge holds the controlled pair, within `tol`.
    pub fn feasible_order(&self, ci: ControlDecision, cj: ControlDecision, tol: f64) -> Option<CrossingOrder> {
        let n = self.n_value(ci, cj);
        let lower_ok = n <= tol && self.l_value(ci, cj) <= tol;
        let upper_ok = n >= -tol && self.u_value(ci, cj) >= -tol;
        match (lower_ok, upper_ok) {
            (true, true) if n > 0.0 => Some(CrossingOrder::Upper),
            (true, _) => Some(CrossingOrder::Lower),
            (false, true) => Some(CrossingOrder::Upper),
            (false, false) => None,
        }
    }
}

/// Whether the pair diverges (`p̂·v >= 0`) under every control in the box.
pub fn always_diverging(inst: &ProblemInstance, i: usize, j: usize) -> bool {
    let v_ref = inst.speed_scale();
    let p_hat = inst.states[i].position - inst.states[j].position;
    let form = dot_form(
        p_hat * (1.0 / p_hat.norm()),
        inst.states[i].velocity() * (1.0 / v_ref),
        inst.states[j].velocity() * (1.0 / v_ref),
    );
    form_range(&form, &box_bounds(&inst.bounds)).0 >= 0.0
}

/// Emits the big-M disjunction of every pair in the instance.
pub fn build_disjunctions(inst: &ProblemInstance) -> Result<Vec<DisjunctiveConstraintPair>> {
    let cb = box_bounds(&inst.bounds);
    let v_ref = inst.speed_scale();
    inst.pairs
        .iter()
        .map(|&(i, j)| {
            let geometry = PairGeometry::new(i, j, &inst.states, inst.d)?;
            let cone = geometry.cone;
            let rho = cone.p_hat.norm();
            let vi_hat = inst.states[i].velocity() * (1.0 / v_ref);
            let vj_hat = inst.states[j].velocity() * (1.0 / v_ref);
            let n_form = cross_form(cone.p_hat * (1.0 / rho), vi_hat, vj_hat);
            let l_form = cross_form(cone.lower() * (1.0 / (rho * rho)), vi_hat, vj_hat);
            let u_form = cross_form(cone.upper() * (1.0 / (rho * rho)), vi_hat, vj_hat);
            let m = |x: f64| BIG_M_SAFETY * x.max(1e-9);
            let (n_lo, n_hi) = form_range(&n_form, &cb);
            let (_, l_hi) = form_range(&l_form, &cb);
            let (u_lo, _) = form_range(&u_form, &cb);
            let v0 = (vi_hat - vj_hat) * (1.0 / (vi_hat - vj_hat).norm().max(1e-12));
            let p_unit = cone.p_hat * (1.0 / rho);
            let severity = if p_unit.dot(v0) >= 0.0 {
                0.0
            } else {
                crate::geom::g_value(p_unit, inst.d / rho, v0)
            };
            Ok(DisjunctiveConstraintPair {
                i,
                j,
                geometry,
                n_form,
                l_form,
                u_form,
                big_m_n: m(n_hi.max(-n_lo)),
                big_m_l: m(l_hi),
                big_m_u: m(-u_lo),
                severity,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::is_pair_conflict_free;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn head_on(sep: f64) -> ProblemInstance {
        let a = AircraftState::new(Vec2::new(-sep / 2.0, 0.0), 500.0, 0.0).unwrap();
        let b = AircraftState::new(Vec2::new(sep / 2.0, 0.0), 500.0, PI).unwrap();
        ProblemInstance::new(vec![a, b], 5.0, ControlBounds::default()).unwrap()
    }

    #[test]
    fn box_bounds_examples() {
        let b = box_bounds(&ControlBounds::default());
        assert!((b.dx_lo - 0.94 * (PI / 6.0).cos()).abs() < 1e-15);
        assert!((b.dx_lo - 0.814_063_879_557_372).abs() < 1e-12);
        assert_eq!(b.dx_hi, 1.03);
        assert!((b.dy_lo + 0.515).abs() < 1e-12 && (b.dy_hi - 0.515).abs() < 1e-12);

        let frozen = ControlBounds {
            q_lo: 1.0,
            q_hi: 1.0,
            th_lo: 0.0,
            th_hi: 0.0,
        };
        let f = box_bounds(&frozen);
        assert_eq!((f.dx_lo, f.dx_hi, f.dy_lo, f.dy_hi), (1.0, 1.0, 0.0, 0.0));

        let wide = box_bounds(&ControlBounds::new(0.5, 2.0, -FRAC_PI_4, FRAC_PI_4).unwrap());
        assert!((wide.dx_lo - 0.353_553_390_593_273_8).abs() < 1e-12);
        assert_eq!(wide.dx_hi, 2.0);
        assert!((wide.dy_hi - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((wide.dy_lo + std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn bounds_validation() {
        assert!(ControlBounds::new(1.0, 0.9, -0.1, 0.1).is_err());
        assert!(ControlBounds::new(0.9, 1.1, -1.6, 0.1).is_err());
        assert!(ControlBounds::new(0.0, 1.1, -0.1, 0.1).is_err());
    }

    #[test]
    fn deviation_cost_examples() {
        assert_eq!(deviation_cost(&[ControlDecision::IDENTITY; 3]), 0.0);
        let c = deviation_cost(&[ControlDecision::new(0.98, 0.05)]);
        assert!((c - 0.0029).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let (q, th) = (rng.random_range(0.5..1.5), rng.random_range(-1.5..1.5));
            let c = ControlDecision::from_polar(q, th);
            assert!((c.deviation() - (q * q - 2.0 * q * th.cos() + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn polar_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let (q, th) = (rng.random_range(0.01..3.0), rng.random_range(-1.57..1.57));
            let c = ControlDecision::from_polar(q, th);
            assert!((c.q() - q).abs() < 1e-12 && (c.theta() - th).abs() < 1e-12);
        }
    }

    #[test]
    fn heading_cone_examples() {
        let bounds = ControlBounds::default();
        let [lo, hi] = heading_cone_constraints(&bounds);
        assert!(lo.contains(ControlDecision::new(1.0, 0.5), 0.0) && hi.contains(ControlDecision::new(1.0, 0.5), 0.0));
        let edge = ControlDecision::new(1.0, (PI / 6.0).tan());
        assert!(hi.value(edge).abs() < 1e-15);
        assert!(lo.contains(ControlDecision::new(0.7, 0.0), 0.0) && hi.contains(ControlDecision::new(0.7, 0.0), 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let c = ControlDecision::from_polar(rng.random_range(0.94..1.03), rng.random_range(-PI / 6.0..PI / 6.0));
            assert!(lo.contains(c, 1e-15) && hi.contains(c, 1e-15));
        }
    }

    #[test]
    fn speed_ring_examples() {
        let ring = speed_ring_constraints(&ControlBounds::default());
        assert!(ring.contains(ControlDecision::IDENTITY, 0.0));
        assert!(ring.lower_violation(ControlDecision::new(0.9, 0.0)) > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let c = ControlDecision::from_polar(1.03, rng.random_range(-0.5..0.5));
            assert!(ring.upper_violation(c).abs() < 1e-12);
        }
    }

    #[test]
    fn big_m_dominates_sampled_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let q_lo = rng.random_range(0.5..0.99);
            let q_hi = rng.random_range(1.01..1.5);
            let th = rng.random_range(0.05..1.2);
            let bounds = ControlBounds::new(q_lo, q_hi, -th, th * rng.random_range(0.3..1.0)).unwrap();
            let a = AircraftState::new(
                Vec2::new(rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0)),
                rng.random_range(400.0..600.0),
                rng.random_range(-PI..PI),
            )
            .unwrap();
            let b = AircraftState::new(Vec2::new(0.0, 0.0), rng.random_range(400.0..600.0), rng.random_range(-PI..PI)).unwrap();
            let Ok(inst) = ProblemInstance::new(vec![a, b], 5.0, bounds) else {
                continue;
            };
            let pair = &build_disjunctions(&inst).unwrap()[0];
            let cb = box_bounds(&bounds);
            for _ in 0..10 {
                let mut s = || ControlDecision::new(rng.random_range(cb.dx_lo..=cb.dx_hi), rng.random_range(cb.dy_lo..=cb.dy_hi));
                let (ci, cj) = (s(), s());
                assert!(pair.n_value(ci, cj).abs() <= pair.big_m_n);
                assert!(pair.l_value(ci, cj) <= pair.big_m_l);
                assert!(-pair.u_value(ci, cj) <= pair.big_m_u);
                // the inactive branch is slack at every box point
                let slack_z1 = [-pair.n_value(ci, cj) - pair.big_m_n, -pair.u_value(ci, cj) - pair.big_m_u];
                let slack_z0 = [pair.n_value(ci, cj) - pair.big_m_n, pair.l_value(ci, cj) - pair.big_m_l];
                assert!(slack_z1.iter().chain(&slack_z0).all(|&r| r < 0.0));
            }
        }
    }

    #[test]
    fn diverging_pair_satisfies_its_side() {
        let a = AircraftState::new(Vec2::new(-10.0, 0.0), 500.0, PI).unwrap();
        let b = AircraftState::new(Vec2::new(10.0, 1.0), 500.0, 0.0).unwrap();
        let inst = ProblemInstance::new(vec![a, b], 5.0, ControlBounds::default()).unwrap();
        let pair = &build_disjunctions(&inst).unwrap()[0];
        let id = ControlDecision::IDENTITY;
        let order = pair.feasible_order(id, id, 0.0).expect("diverging pair is feasible");
        let expected = if pair.n_value(id, id) <= 0.0 { CrossingOrder::Lower } else { CrossingOrder::Upper };
        assert_eq!(order, expected);
        assert!(pair.max_violation(id, id, order.z() as f64) <= 0.0);
    }

    #[test]
    fn head_on_both_orders_admit_controls() {
        let inst = head_on(60.0);
        let pair = &build_disjunctions(&inst).unwrap()[0];
        let cb = box_bounds(&inst.bounds);
        let mut found = [false, false];
        let k = 21;
        for a in 0..k {
            for b in 0..k {
                let th1 = inst.bounds.th_lo + (inst.bounds.th_hi - inst.bounds.th_lo) * a as f64 / (k - 1) as f64;
                let th2 = inst.bounds.th_lo + (inst.bounds.th_hi - inst.bounds.th_lo) * b as f64 / (k - 1) as f64;
                let (ci, cj) = (ControlDecision::from_polar(1.0, th1), ControlDecision::from_polar(1.0, th2));
                assert!(ci.dx >= cb.dx_lo);
                for (slot, z) in [(0usize, 0.0), (1, 1.0)] {
                    if pair.max_violation(ci, cj, z) <= 0.0 {
                        found[slot] = true;
                    }
                }
            }
        }
        assert_eq!(found, [true, true]);
    }

    #[test]
    fn model_feasible_points_are_conflict_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cb = box_bounds(&ControlBounds::default());
        let mut hits = 0;
        for _ in 0..200 {
            let a = AircraftState::new(Vec2::from_polar(50.0, rng.random_range(-PI..PI)), rng.random_range(400.0..600.0), rng.random_range(-PI..PI)).unwrap();
            let b = AircraftState::new(Vec2::from_polar(50.0, rng.random_range(-PI..PI)), rng.random_range(400.0..600.0), rng.random_range(-PI..PI)).unwrap();
            let Ok(inst) = ProblemInstance::new(vec![a, b], 5.0, ControlBounds::default()) else {
                continue;
            };
            let pair = &build_disjunctions(&inst).unwrap()[0];
            for _ in 0..200 {
                let mut s = || ControlDecision::new(rng.random_range(cb.dx_lo..=cb.dx_hi), rng.random_range(cb.dy_lo..=cb.dy_hi));
                let controls = [s(), s()];
                for z in [0.0, 1.0] {
                    if pair.max_violation(controls[0], controls[1], z) <= 0.0 {
                        hits += 1;
                        let v = inst.relative_velocity(0, 1, &controls);
                        assert!(is_pair_conflict_free(pair.geometry.p_hat(), 5.0, v));
                    }
                }
            }
        }
        assert!(hits > 1000);
    }

    #[test]
    fn initial_loss_propagates() {
        let a = AircraftState::new(Vec2::new(0.0, 0.0), 500.0, 0.0).unwrap();
        let b = AircraftState::new(Vec2::new(3.0, 0.0), 500.0, 0.0).unwrap();
        assert!(matches!(
            ProblemInstance::new(vec![a, b], 5.0, ControlBounds::default()),
            Err(Error::InitialLoss { i: 0, j: 1, .. })
        ));
    }
}
